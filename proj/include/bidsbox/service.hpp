#pragma once

#include "bidsbox/classifier.hpp"
#include "bidsbox/converter.hpp"
#include "bidsbox/error.hpp"

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>

namespace bidsbox {

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    ConverterHandle converter;
    std::size_t parallelism = 1;
    double request_timeout_s = 3600.0;
    std::string ui_origin;                  // CORS origin; disabled when empty
    std::size_t max_body_bytes = 1 << 20;
    const DecisionTable *table = nullptr;
};

struct ApiResponse {
    int status = 500;
    std::string body;
};

int http_status_for(ErrorCode code) noexcept;

/// CLI exit code: 2 validation, 3 classification, 4 conversion/IO, 5 conflict/busy.
int exit_code_for(ErrorCode code) noexcept;

/// {"error_code", "message"[, "failed_series"]}
std::string error_body(const Error &error);

// Transport-independent handlers shared by the HTTP server and the CLI.
ApiResponse handle_create(std::string_view body, const ServiceConfig &config);
ApiResponse handle_update(std::string_view body, const ServiceConfig &config);
ApiResponse handle_health();

/// HTTP front for the handlers: POST /createBids, POST /updateBids, GET /health.
class Server {
public:
    explicit Server(ServiceConfig config);
    ~Server();
    Server(const Server &) = delete;
    Server &operator=(const Server &) = delete;

    /// Binds config.host:config.port (port 0 picks a free port); returns the
    /// bound port or -1.
    int bind();
    /// Blocks until stop().
    bool listen_after_bind();
    void stop();
    void wait_until_ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace bidsbox
