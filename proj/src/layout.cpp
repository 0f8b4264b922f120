#include "bidsbox/layout.hpp"

#include "bidsbox/fsutil.hpp"
#include "bidsbox/validator.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <exception>
#include <set>
#include <thread>

namespace bidsbox {

using ojson = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

std::string bids_path(const SubjectLabel &sub, const SessionLabel &ses, const Classification &cls,
                      std::optional<int> run, std::string_view extension)
{
    std::string s = "sub-" + sub.str();
    std::string t = "ses-" + ses.str();
    std::string out = s + "/" + t + "/" + std::string(to_string(cls.modality())) + "/" + s + "_" + t;
    if (run)
        out += "_run-" + std::to_string(*run);
    out += "_";
    out += to_string(cls.suffix());
    out += extension;
    return out;
}

std::string_view to_string(ReportStatus status) noexcept
{
    switch (status) {
    case ReportStatus::created: return "created";
    case ReportStatus::updated: return "updated";
    case ReportStatus::failed: return "failed";
    }
    return "failed";
}

// ---------------------------------------------------------------------------
// State file

std::string state_to_json(const ToolboxState &state)
{
    ojson entries = ojson::object();
    for (const auto &[key, session] : state.entries) {
        ojson series = ojson::array();
        for (const auto &s : session.series)
            series.push_back({{"series_name", s.series_name},
                              {"modality", to_string(s.classification.modality())},
                              {"suffix", to_string(s.classification.suffix())},
                              {"rule_id", s.classification.rule_id()},
                              {"files", s.files}});
        entries[key.first.str()][key.second.str()] = {{"source_hash", session.source_hash},
                                                      {"series", std::move(series)}};
    }
    ojson doc = {{"format_version", state.format_version},
                 {"created_at", state.created_at},
                 {"updated_at", state.updated_at},
                 {"converter", state.converter},
                 {"entries", std::move(entries)}};
    return doc.dump(2) + "\n";
}

ToolboxState state_from_json(std::string_view text)
{
    ojson doc;
    try {
        doc = ojson::parse(text);
    } catch (const ojson::parse_error &e) {
        throw Error(ErrorCode::MalformedState, e.what());
    }
    ToolboxState state;
    try {
        state.format_version = doc.at("format_version").get<int>();
        if (state.format_version != ToolboxState::kFormatVersion)
            throw Error(ErrorCode::StateVersionUnsupported,
                        "state format_version " + std::to_string(state.format_version) +
                            " is not supported");
        state.created_at = doc.at("created_at").get<std::string>();
        state.updated_at = doc.at("updated_at").get<std::string>();
        state.converter = doc.at("converter").get<std::string>();
        for (const auto &[sub, sessions] : doc.at("entries").items()) {
            for (const auto &[ses, session] : sessions.items()) {
                StateSession out;
                out.source_hash = session.at("source_hash").get<std::string>();
                for (const auto &s : session.at("series")) {
                    auto m = parse_modality(s.at("modality").get<std::string>());
                    auto x = parse_suffix(s.at("suffix").get<std::string>());
                    if (!m || !x || !pair_is_legal(*m, *x))
                        throw Error(ErrorCode::MalformedState, "bad classification in state");
                    out.series.push_back({s.at("series_name").get<std::string>(),
                                          Classification(*m, *x, s.at("rule_id").get<std::string>()),
                                          s.at("files").get<std::vector<std::string>>()});
                }
                state.entries.emplace(SessionKey{SubjectLabel(sub), SessionLabel(ses)},
                                      std::move(out));
            }
        }
    } catch (const ojson::exception &e) {
        throw Error(ErrorCode::MalformedState, e.what());
    } catch (const Error &e) {
        if (e.code() == ErrorCode::StateVersionUnsupported || e.code() == ErrorCode::MalformedState)
            throw;
        throw Error(ErrorCode::MalformedState, e.what());
    }
    return state;
}

ToolboxState read_state(const fs::path &dataset_root)
{
    auto path = dataset_root / kStateFileName;
    if (!fs::is_regular_file(path))
        throw Error(ErrorCode::StateFileMissing,
                    dataset_root.string() + " is not a managed dataset (no " +
                        std::string(kStateFileName) + ")");
    return state_from_json(fsutil::read_file(path));
}

void write_state(const fs::path &dataset_root, const ToolboxState &state)
{
    fsutil::write_file_atomic(dataset_root / kStateFileName, state_to_json(state));
}

// ---------------------------------------------------------------------------
// Report

std::string report_to_json(const DatasetReport &report)
{
    ojson classifications = ojson::array();
    for (const auto &c : report.classifications)
        classifications.push_back({{"subject", c.subject},
                                   {"session", c.session},
                                   {"series_name", c.series_name},
                                   {"modality", to_string(c.modality)},
                                   {"suffix", to_string(c.suffix)},
                                   {"rule_id", c.rule_id},
                                   {"destination", c.destination}});
    ojson failures = ojson::array();
    for (const auto &f : report.failures)
        failures.push_back({{"series_name", f.series_name}, {"reason", f.reason}});
    ojson doc = {{"status", to_string(report.status)},
                 {"dataset_path", report.dataset_path},
                 {"counts",
                  {{"subjects", report.subjects},
                   {"sessions", report.sessions},
                   {"series", report.series}}},
                 {"classifications", std::move(classifications)},
                 {"timing", {{"total_s", report.total_s}, {"converter_s", report.converter_s}}},
                 {"failures", std::move(failures)}};
    return doc.dump(2);
}

// ---------------------------------------------------------------------------
// Orchestration

namespace {

struct SessionJob {
    SessionKey key;
    fs::path source;
};

struct ConversionBatch {
    std::vector<SessionConversion> sessions; // parallel to jobs
    double wall_s = 0.0;
};

ConverterHandle bounded(const ConverterHandle &converter, const BuildOptions &options)
{
    ConverterHandle h = converter;
    if (options.deadline) {
        double remaining = std::chrono::duration<double>(*options.deadline - Clock::now()).count();
        if (remaining <= 0.0)
            throw Error(ErrorCode::Timeout, "request deadline exceeded before conversion");
        h.timeout_s = std::min(h.timeout_s, remaining);
    }
    return h;
}

fs::path work_dir_for(const fs::path &work_root, const SessionKey &key)
{
    return work_root / ("sub-" + key.first.str() + "_ses-" + key.second.str());
}

ConversionBatch convert_all(const std::vector<SessionJob> &jobs, const fs::path &work_root,
                            const ConverterHandle &converter, const BuildOptions &options)
{
    ConversionBatch batch;
    batch.sessions.resize(jobs.size());
    std::vector<std::exception_ptr> errors(jobs.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            try {
                batch.sessions[i] = convert_session(jobs[i].source, work_dir_for(work_root, jobs[i].key),
                                                    bounded(converter, options));
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };

    auto started = Clock::now();
    std::size_t threads = std::clamp<std::size_t>(options.parallelism, 1, std::max<std::size_t>(jobs.size(), 1));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t)
            pool.emplace_back(worker);
    }
    batch.wall_s = std::chrono::duration<double>(Clock::now() - started).count();

    for (auto &e : errors)
        if (e)
            std::rethrow_exception(e);
    return batch;
}

struct FileMove {
    fs::path from;
    std::string to; // dataset-relative
};

struct SessionPlan {
    StateSession state;
    std::vector<FileMove> moves;
    std::vector<SeriesReport> reports;
};

// Classifies every series of every session; throws ClassificationFailed with
// all unclassifiable series when any fails.
std::vector<SessionPlan> plan_sessions(const std::vector<SessionJob> &jobs,
                                       const ConversionBatch &batch,
                                       const ConversionRequest &req, const DecisionTable &table)
{
    std::vector<std::vector<Classification>> classified(jobs.size());
    std::vector<FailedSeries> failures;
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        for (const auto &series : batch.sessions[i].series) {
            auto outcome = classify_series(series, req.overrides, table);
            if (auto *u = std::get_if<UnclassifiableSeries>(&outcome)) {
                failures.push_back({u->series_name, u->reason});
                classified[i].push_back(Classification(Modality::anat, Suffix::T1w, "unused"));
            } else {
                classified[i].push_back(std::get<Classification>(outcome));
            }
        }
    }
    if (!failures.empty()) {
        std::string names;
        for (const auto &f : failures)
            names += (names.empty() ? "" : ", ") + f.series_name + " (" + f.reason + ")";
        throw Error(ErrorCode::ClassificationFailed, "unable to classify series: " + names,
                    std::move(failures));
    }

    std::vector<SessionPlan> plans(jobs.size());
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const auto &[sub, ses] = jobs[i].key;
        const auto &series = batch.sessions[i].series; // sorted by series_name
        auto &plan = plans[i];
        plan.state.source_hash = batch.sessions[i].source_hash;

        std::map<std::pair<Modality, Suffix>, int> group_size;
        for (const auto &c : classified[i])
            ++group_size[{c.modality(), c.suffix()}];
        std::map<std::pair<Modality, Suffix>, int> next_run;

        for (std::size_t k = 0; k < series.size(); ++k) {
            const auto &cls = classified[i][k];
            std::pair group{cls.modality(), cls.suffix()};
            std::optional<int> run;
            if (group_size[group] > 1)
                run = ++next_run[group];

            StateSeries entry{series[k].series_name(), cls, {}};
            auto add = [&](const fs::path &from, std::string_view ext) {
                auto to = bids_path(sub, ses, cls, run, ext);
                plan.moves.push_back({from, to});
                entry.files.push_back(to);
            };
            add(series[k].image_path(), series[k].image_extension());
            add(series[k].sidecar_path(), ".json");
            if (detect_diffusion(series[k])) {
                add(*series[k].bval_path(), ".bval");
                add(*series[k].bvec_path(), ".bvec");
            }
            plan.reports.push_back({sub.str(), ses.str(), series[k].series_name(), cls.modality(),
                                    cls.suffix(), cls.rule_id(), entry.files.front()});
            plan.state.series.push_back(std::move(entry));
        }
    }
    return plans;
}

ojson description_for_create(const ConversionRequest &req, const fs::path &output)
{
    auto has = [&](std::string_view key) {
        return std::any_of(req.dataset_description.begin(), req.dataset_description.end(),
                           [&](const auto &kv) { return kv.first == key; });
    };
    ojson desc = ojson::object();
    if (!has("Name")) {
        auto name = output.filename().empty() ? output.parent_path().filename() : output.filename();
        desc["Name"] = name.string();
    }
    if (!has("BIDSVersion"))
        desc["BIDSVersion"] = kDefaultBidsVersion;
    for (const auto &[k, v] : req.dataset_description)
        desc[k] = v;
    return desc;
}

std::string dump_description(const ojson &desc)
{
    return desc.dump(2) + "\n";
}

fs::path sibling(const fs::path &output, std::string_view tag)
{
    auto base = output.filename().empty() ? output.parent_path() : output;
    auto name = base.filename().string();
    return base.parent_path() / (name + "." + std::string(tag) + "-" + fsutil::random_suffix());
}

fs::path normalized_output(const std::string &output)
{
    fs::path p(output);
    if (p.filename().empty())
        p = p.parent_path();
    return fs::absolute(p).lexically_normal();
}

void fill_report(DatasetReport &report, const std::vector<SessionJob> &jobs,
                 const std::vector<SessionPlan> &plans)
{
    std::set<std::string> subjects;
    for (const auto &job : jobs)
        subjects.insert(job.key.first.str());
    report.subjects = subjects.size();
    report.sessions = jobs.size();
    for (const auto &plan : plans) {
        report.series += plan.reports.size();
        report.classifications.insert(report.classifications.end(), plan.reports.begin(),
                                      plan.reports.end());
    }
}

void check_post_commit(const fs::path &root)
{
    auto violations = validate_layout(root);
    if (!violations.empty())
        throw Error(ErrorCode::IoError, "dataset failed post-commit validation: " +
                                            violations.front().path + ": " +
                                            violations.front().message);
}

std::vector<SessionJob> jobs_from(const ConversionRequest &req)
{
    std::vector<SessionJob> jobs;
    for (const auto &[sub, sessions] : req.scans)
        for (const auto &[ses, dir] : sessions)
            jobs.push_back({{sub, ses}, fs::path(dir)});
    return jobs;
}

const DecisionTable &table_of(const BuildOptions &options)
{
    return options.table ? *options.table : decision_table();
}

} // namespace

DatasetReport create_dataset(const ConversionRequest &req, const ConverterHandle &converter,
                             const BuildOptions &options)
{
    auto started = Clock::now();
    auto output = normalized_output(req.output);

    auto require_empty = [&] {
        std::error_code ec;
        if (fs::exists(output, ec) && (!fs::is_directory(output, ec) || !fs::is_empty(output, ec)))
            throw Error(ErrorCode::OutputNotEmpty, output.string() + " exists and is not empty");
    };
    require_empty();
    if (!fs::is_directory(output.parent_path()))
        throw Error(ErrorCode::IoError, "parent directory " + output.parent_path().string() +
                                            " does not exist");

    fsutil::LockFile lock(output.parent_path() /
                          ("." + output.filename().string() + std::string(kLockFileName)));
    require_empty();

    fsutil::TempTree work(sibling(output, "work"));
    fsutil::TempTree staging(sibling(output, "staging"));
    fs::create_directories(work.path());
    fs::create_directories(staging.path());

    auto jobs = jobs_from(req);
    auto batch = convert_all(jobs, work.path(), converter, options);
    auto plans = plan_sessions(jobs, batch, req, table_of(options));

    ToolboxState state;
    state.created_at = state.updated_at = fsutil::utc_now_iso8601();
    state.converter = converter.identity();
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        for (const auto &move : plans[i].moves)
            fsutil::move_file(move.from, staging.path() / move.to);
        state.entries.emplace(jobs[i].key, plans[i].state);
    }
    fsutil::write_file(staging.path() / kDescriptionFileName,
                       dump_description(description_for_create(req, output)));
    write_state(staging.path(), state);

    auto violations = validate_layout(staging.path());
    if (!violations.empty())
        throw Error(ErrorCode::IoError, "staged dataset failed validation: " +
                                            violations.front().path + ": " +
                                            violations.front().message);

    std::error_code ec;
    fs::rename(staging.path(), output, ec);
    if (ec) {
        if (ec == std::errc::directory_not_empty || ec == std::errc::file_exists)
            throw Error(ErrorCode::OutputNotEmpty, output.string() + " is not empty");
        throw Error(ErrorCode::IoError, "cannot commit dataset to " + output.string() + ": " +
                                            ec.message());
    }
    staging.release();

    DatasetReport report;
    report.status = ReportStatus::created;
    report.dataset_path = req.output;
    fill_report(report, jobs, plans);
    report.converter_s = batch.wall_s;
    report.total_s = std::chrono::duration<double>(Clock::now() - started).count();
    return report;
}

DatasetReport update_dataset(const ConversionRequest &req, const ConverterHandle &converter,
                             const BuildOptions &options)
{
    auto started = Clock::now();
    auto output = normalized_output(req.output);
    if (!fs::is_directory(output) || !fs::is_regular_file(output / kStateFileName))
        throw Error(ErrorCode::StateFileMissing,
                    output.string() + " is not a managed dataset (no " +
                        std::string(kStateFileName) + ")");

    fsutil::LockFile lock(output / kLockFileName);
    auto state = read_state(output);

    auto jobs = jobs_from(req);
    if (!req.overwrite) {
        std::string conflicts;
        for (const auto &job : jobs)
            if (state.entries.contains(job.key))
                conflicts += (conflicts.empty() ? "" : ", ") + std::string("sub-") +
                             job.key.first.str() + "/ses-" + job.key.second.str();
        if (!conflicts.empty())
            throw Error(ErrorCode::SessionConflict,
                        "sessions already in dataset (set \"overwrite\": true to replace): " +
                            conflicts);
    }

    fsutil::TempTree work(sibling(output, "work"));
    fsutil::TempTree staging(sibling(output, "staging"));
    fs::create_directories(work.path());
    fs::create_directories(staging.path());

    auto batch = convert_all(jobs, work.path(), converter, options);
    auto plans = plan_sessions(jobs, batch, req, table_of(options));

    for (const auto &plan : plans)
        for (const auto &move : plan.moves)
            fsutil::move_file(move.from, staging.path() / move.to);

    // Description merge: existing order kept, request wins on collisions.
    auto desc_path = output / kDescriptionFileName;
    ojson desc = ojson::object();
    if (fs::exists(desc_path)) {
        try {
            desc = ojson::parse(fsutil::read_file(desc_path));
        } catch (const ojson::parse_error &e) {
            throw Error(ErrorCode::IoError, "cannot parse " + desc_path.string() + ": " + e.what());
        }
    }
    for (const auto &[k, v] : req.dataset_description)
        desc[k] = v;

    // Commit. Replaced sessions are moved aside first so they can be restored.
    auto backup = staging.path() / ".replaced";
    std::vector<std::pair<fs::path, fs::path>> backed_up; // (original, backup)
    std::vector<fs::path> placed;
    try {
        for (const auto &job : jobs) {
            auto it = state.entries.find(job.key);
            if (it == state.entries.end())
                continue;
            for (const auto &s : it->second.series)
                for (const auto &f : s.files) {
                    if (!fs::exists(output / f))
                        continue;
                    fsutil::move_file(output / f, backup / f);
                    backed_up.emplace_back(output / f, backup / f);
                }
        }
        for (const auto &plan : plans)
            for (const auto &move : plan.moves) {
                fsutil::move_file(staging.path() / move.to, output / move.to);
                placed.push_back(output / move.to);
            }
    } catch (...) {
        std::error_code ec;
        for (const auto &p : placed) {
            fs::remove(p, ec);
            fsutil::prune_empty_dirs(p.parent_path(), output);
        }
        for (const auto &[orig, saved] : backed_up)
            fsutil::move_file(saved, orig);
        throw;
    }
    for (const auto &[orig, saved] : backed_up)
        fsutil::prune_empty_dirs(orig.parent_path(), output);

    fsutil::write_file_atomic(desc_path, dump_description(desc));
    for (std::size_t i = 0; i < jobs.size(); ++i)
        state.entries.insert_or_assign(jobs[i].key, plans[i].state);
    state.updated_at = fsutil::utc_now_iso8601();
    write_state(output, state);

    check_post_commit(output);

    DatasetReport report;
    report.status = ReportStatus::updated;
    report.dataset_path = req.output;
    fill_report(report, jobs, plans);
    report.converter_s = batch.wall_s;
    report.total_s = std::chrono::duration<double>(Clock::now() - started).count();
    return report;
}

} // namespace bidsbox
