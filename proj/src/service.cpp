#include "bidsbox/service.hpp"

#include "bidsbox/layout.hpp"
#include "bidsbox/request.hpp"
#include "bidsbox/version.hpp"

#include <httplib.h>
#include <json.hpp>

#include <chrono>

namespace bidsbox {

using ojson = nlohmann::ordered_json;

int http_status_for(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::EmptyLabel:
    case ErrorCode::IllegalCharacter:
    case ErrorCode::MalformedJson:
    case ErrorCode::MissingKey:
    case ErrorCode::UnknownKey:
    case ErrorCode::TypeMismatch:
    case ErrorCode::EmptyScans:
    case ErrorCode::BadLabel:
    case ErrorCode::IllegalOverride: return 400;
    case ErrorCode::StateFileMissing: return 404;
    case ErrorCode::OutputNotEmpty:
    case ErrorCode::SessionConflict:
    case ErrorCode::Busy: return 409;
    case ErrorCode::ClassificationFailed: return 422;
    default: return 500;
    }
}

int exit_code_for(ErrorCode code) noexcept
{
    switch (http_status_for(code)) {
    case 400: return 2;
    case 422: return 3;
    case 409: return 5;
    default: return 4;
    }
}

std::string error_body(const Error &error)
{
    ojson doc = {{"error_code", to_string(error.code())}, {"message", error.what()}};
    if (error.code() == ErrorCode::ClassificationFailed) {
        ojson failed = ojson::array();
        for (const auto &f : error.failed_series())
            failed.push_back({{"series_name", f.series_name}, {"reason", f.reason}});
        doc["failed_series"] = std::move(failed);
    }
    return doc.dump(2);
}

namespace {

template <class Op>
ApiResponse run_operation(std::string_view body, RequestKind kind, int ok_status,
                          const ServiceConfig &config, Op op)
{
    try {
        auto req = parse_request(body, kind);
        BuildOptions options;
        options.parallelism = config.parallelism;
        options.table = config.table;
        options.deadline = std::chrono::steady_clock::now() +
                           std::chrono::milliseconds(
                               static_cast<long long>(config.request_timeout_s * 1000.0));
        auto report = op(req, config.converter, options);
        return {ok_status, report_to_json(report)};
    } catch (const Error &e) {
        return {http_status_for(e.code()), error_body(e)};
    } catch (const std::exception &e) {
        return {500, error_body(Error(ErrorCode::IoError, e.what()))};
    }
}

} // namespace

ApiResponse handle_create(std::string_view body, const ServiceConfig &config)
{
    return run_operation(body, RequestKind::create, 201, config,
                         [](auto &&...args) { return create_dataset(args...); });
}

ApiResponse handle_update(std::string_view body, const ServiceConfig &config)
{
    return run_operation(body, RequestKind::update, 200, config,
                         [](auto &&...args) { return update_dataset(args...); });
}

ApiResponse handle_health()
{
    ojson doc = {{"status", "ok"}, {"version", kVersion}};
    return {200, doc.dump()};
}

struct Server::Impl {
    ServiceConfig config;
    httplib::Server http;
};

Server::Server(ServiceConfig config) : impl_(std::make_unique<Impl>())
{
    impl_->config = std::move(config);
    auto &http = impl_->http;
    const auto &cfg = impl_->config;

    http.set_payload_max_length(cfg.max_body_bytes);
    auto read_timeout = static_cast<time_t>(cfg.request_timeout_s);
    http.set_read_timeout(read_timeout, 0);
    http.set_write_timeout(read_timeout, 0);

    if (!cfg.ui_origin.empty()) {
        http.set_default_headers({{"Access-Control-Allow-Origin", cfg.ui_origin},
                                  {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                  {"Access-Control-Allow-Headers", "Content-Type"}});
        http.Options(R"(/.*)", [](const httplib::Request &, httplib::Response &res) {
            res.status = 204;
        });
    }

    auto reply = [](httplib::Response &res, const ApiResponse &api) {
        res.status = api.status;
        res.set_content(api.body, "application/json");
    };
    http.Post("/createBids", [this, reply](const httplib::Request &req, httplib::Response &res) {
        reply(res, handle_create(req.body, impl_->config));
    });
    http.Post("/updateBids", [this, reply](const httplib::Request &req, httplib::Response &res) {
        reply(res, handle_update(req.body, impl_->config));
    });
    http.Get("/health", [reply](const httplib::Request &, httplib::Response &res) {
        reply(res, handle_health());
    });
}

Server::~Server() { stop(); }

int Server::bind()
{
    auto &cfg = impl_->config;
    if (cfg.port == 0) {
        int port = impl_->http.bind_to_any_port(cfg.host);
        if (port > 0)
            cfg.port = port;
        return port > 0 ? port : -1;
    }
    return impl_->http.bind_to_port(cfg.host, cfg.port) ? cfg.port : -1;
}

bool Server::listen_after_bind() { return impl_->http.listen_after_bind(); }

void Server::stop()
{
    if (impl_)
        impl_->http.stop();
}

void Server::wait_until_ready() const { impl_->http.wait_until_ready(); }

} // namespace bidsbox
