// bidsbox: create, update and validate BIDS datasets from DICOM sessions.

#include "bidsbox/classifier.hpp"
#include "bidsbox/converter.hpp"
#include "bidsbox/error.hpp"
#include "bidsbox/fsutil.hpp"
#include "bidsbox/service.hpp"
#include "bidsbox/validator.hpp"
#include "bidsbox/version.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <iostream>
#include <optional>

namespace {

using namespace bidsbox;

struct ConverterOptions {
    std::string converter = "dcm2niix";
    std::string mock_fixtures;
    std::vector<std::string> converter_args;
    double converter_timeout_s = 3600.0;
    std::size_t parallelism = 1;
    double request_timeout_s = 3600.0;
    std::string rules;
};

void add_converter_options(CLI::App *cmd, ConverterOptions &opts)
{
    cmd->add_option("--converter", opts.converter, "DICOM-to-NIfTI converter executable")
        ->envname("BIDSBOX_CONVERTER");
    cmd->add_option("--mock-fixtures", opts.mock_fixtures,
                    "use the fixture-driven mock converter rooted at this directory")
        ->envname("BIDSBOX_MOCK_FIXTURES");
    cmd->add_option("--converter-arg", opts.converter_args, "extra argument for the converter")
        ->allow_extra_args(false);
    cmd->add_option("--converter-timeout", opts.converter_timeout_s,
                    "seconds allowed per converter invocation")
        ->envname("BIDSBOX_CONVERTER_TIMEOUT");
    cmd->add_option("--parallelism", opts.parallelism, "sessions converted concurrently")
        ->envname("BIDSBOX_PARALLELISM")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--request-timeout", opts.request_timeout_s, "seconds allowed per request")
        ->envname("BIDSBOX_REQUEST_TIMEOUT");
    cmd->add_option("--rules", opts.rules, "JSON decision table replacing the built-in one")
        ->check(CLI::ExistingFile);
}

ConverterHandle make_converter(const ConverterOptions &opts)
{
    if (!opts.mock_fixtures.empty())
        return ConverterHandle::mock(opts.mock_fixtures);
    return ConverterHandle::external_tool(opts.converter, opts.converter_args,
                                          opts.converter_timeout_s);
}

int fail(const Error &e)
{
    std::cerr << error_body(e) << "\n";
    return exit_code_for(e.code());
}

int run_dataset_op(bool create, const std::string &request_file, const ConverterOptions &opts)
{
    std::string body;
    try {
        body = fsutil::read_file(request_file);
    } catch (const Error &e) {
        std::cerr << error_body(e) << "\n";
        return 2;
    }

    std::optional<DecisionTable> table;
    ServiceConfig config;
    try {
        if (!opts.rules.empty())
            table.emplace(DecisionTable::from_json(fsutil::read_file(opts.rules)));
        config.converter = make_converter(opts);
    } catch (const Error &e) {
        return fail(e);
    }
    config.parallelism = opts.parallelism;
    config.request_timeout_s = opts.request_timeout_s;
    config.table = table ? &*table : nullptr;

    auto response = create ? handle_create(body, config) : handle_update(body, config);
    if (response.status < 300) {
        std::cout << response.body << "\n";
        return 0;
    }
    std::cerr << response.body << "\n";
    switch (response.status) {
    case 400: return 2;
    case 422: return 3;
    case 409: return 5;
    default: return 4;
    }
}

int run_classify(const std::string &sidecar, bool has_gradients, const std::string &series_name,
                 const std::string &rules, bool text)
{
    try {
        std::optional<DecisionTable> custom;
        if (!rules.empty())
            custom.emplace(DecisionTable::from_json(fsutil::read_file(rules)));
        auto params = parse_sidecar(fsutil::read_file(sidecar));
        auto name = series_name.empty() ? std::filesystem::path(sidecar).stem().string() : series_name;
        auto outcome = classify(name, params, has_gradients, {}, custom ? *custom : decision_table());

        nlohmann::ordered_json doc;
        if (auto *c = std::get_if<Classification>(&outcome)) {
            if (text) {
                std::cout << to_string(c->modality()) << " " << to_string(c->suffix()) << " "
                          << c->rule_id() << "\n";
                return 0;
            }
            doc = {{"series_name", name},
                   {"modality", to_string(c->modality())},
                   {"suffix", to_string(c->suffix())},
                   {"rule_id", c->rule_id()}};
            std::cout << doc.dump(2) << "\n";
            return 0;
        }
        const auto &u = std::get<UnclassifiableSeries>(outcome);
        if (text) {
            std::cout << "unclassifiable " << u.rule_id << " " << u.reason << "\n";
        } else {
            doc = {{"series_name", u.series_name},
                   {"unclassifiable", true},
                   {"reason", u.reason},
                   {"rule_id", u.rule_id}};
            std::cout << doc.dump(2) << "\n";
        }
        std::cerr << "unable to classify series '" << u.series_name << "': " << u.reason << "\n";
        return 3;
    } catch (const Error &e) {
        return fail(e);
    }
}

int run_validate(const std::string &dir)
{
    try {
        auto violations = validate_layout(dir);
        std::cout << violations_to_json(violations) << "\n";
        if (!violations.empty())
            std::cerr << violations.size() << " violation(s) in " << dir << "\n";
        return violations.empty() ? 0 : 1;
    } catch (const Error &e) {
        return fail(e);
    }
}

Server *g_server = nullptr;

extern "C" void on_signal(int)
{
    if (g_server)
        g_server->stop();
}

int run_serve(const std::string &bind, const ConverterOptions &opts, const std::string &ui_origin)
{
    ServiceConfig config;
    std::optional<DecisionTable> table;
    try {
        if (!opts.rules.empty())
            table.emplace(DecisionTable::from_json(fsutil::read_file(opts.rules)));
        config.converter = make_converter(opts);
    } catch (const Error &e) {
        return fail(e);
    }
    auto colon = bind.rfind(':');
    if (colon == std::string::npos) {
        std::cerr << "--bind expects host:port\n";
        return 2;
    }
    config.host = bind.substr(0, colon);
    try {
        config.port = std::stoi(bind.substr(colon + 1));
    } catch (const std::exception &) {
        std::cerr << "bad port in --bind " << bind << "\n";
        return 2;
    }
    config.parallelism = opts.parallelism;
    config.request_timeout_s = opts.request_timeout_s;
    config.ui_origin = ui_origin;
    config.table = table ? &*table : nullptr;

    Server server(config);
    int port = server.bind();
    if (port < 0) {
        std::cerr << "cannot bind " << bind << "\n";
        return 4;
    }
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cerr << "bidsbox " << kVersion << " listening on " << config.host << ":" << port << "\n";
    server.listen_after_bind();
    g_server = nullptr;
    return 0;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Build and update BIDS datasets from DICOM sessions"};
    app.set_version_flag("--version", std::string("bidsbox ") + kVersion);
    app.require_subcommand(1);

    ConverterOptions create_opts, update_opts, serve_opts;
    std::string create_request, update_request;

    auto *create = app.add_subcommand("create", "create a dataset (createBids)");
    create->add_option("--request", create_request, "request JSON file")->required();
    add_converter_options(create, create_opts);

    auto *update = app.add_subcommand("update", "update a managed dataset (updateBids)");
    update->add_option("--request", update_request, "request JSON file")->required();
    add_converter_options(update, update_opts);

    std::string sidecar, series_name, classify_rules;
    bool has_gradients = false, text = false;
    auto *classify_cmd = app.add_subcommand("classify", "classify one converted series");
    classify_cmd->add_option("--sidecar", sidecar, "converter JSON sidecar")->required();
    classify_cmd->add_flag("--has-gradients", has_gradients, ".bval/.bvec files exist");
    classify_cmd->add_option("--series-name", series_name, "series name for messages");
    classify_cmd->add_option("--rules", classify_rules, "JSON decision table")
        ->check(CLI::ExistingFile);
    classify_cmd->add_flag("--text", text, "print 'modality suffix rule_id' instead of JSON");

    std::string validate_dir;
    auto *validate = app.add_subcommand("validate", "check a dataset's layout");
    validate->add_option("dir", validate_dir, "dataset root")->required();

    auto *rules_cmd = app.add_subcommand("rules", "print the built-in decision table");

    std::string bind = "127.0.0.1:8080", ui_origin;
    auto *serve = app.add_subcommand("serve", "run the HTTP service");
    serve->add_option("--bind", bind, "host:port")->envname("BIDSBOX_BIND");
    serve->add_option("--ui-origin", ui_origin, "origin allowed by CORS")->envname("BIDSBOX_UI_ORIGIN");
    add_converter_options(serve, serve_opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    if (*create)
        return run_dataset_op(true, create_request, create_opts);
    if (*update)
        return run_dataset_op(false, update_request, update_opts);
    if (*classify_cmd)
        return run_classify(sidecar, has_gradients, series_name, classify_rules, text);
    if (*validate)
        return run_validate(validate_dir);
    if (*rules_cmd) {
        std::cout << decision_table().to_json() << "\n";
        return 0;
    }
    if (*serve)
        return run_serve(bind, serve_opts, ui_origin);
    return 2;
}
