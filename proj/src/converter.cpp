#include "bidsbox/converter.hpp"

#include "bidsbox/error.hpp"
#include "bidsbox/fsutil.hpp"
#include "bidsbox/process.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

namespace bidsbox {

using json = nlohmann::json;

namespace {

using fsutil::read_file;
using fsutil::write_file;

std::optional<double> read_time_ms(const json &doc, const char *key)
{
    if (!doc.contains(key) || doc[key].is_null())
        return std::nullopt;
    if (!doc[key].is_number())
        throw Error(ErrorCode::MalformedJson, std::string(key) + " is not a number");
    double seconds = doc[key].get<double>();
    if (!std::isfinite(seconds) || seconds <= 0.0)
        throw Error(ErrorCode::NegativeTime,
                    std::string(key) + " must be positive, got " + std::to_string(seconds));
    return seconds * 1000.0;
}

} // namespace

std::vector<std::string> split_scanning_sequence(std::string_view value)
{
    std::vector<std::string> codes;
    std::string current;
    for (char c : value) {
        if (c == '\\' || c == '_') {
            if (!current.empty())
                codes.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    if (!current.empty())
        codes.push_back(std::move(current));
    return codes;
}

SequenceParams parse_sidecar(std::string_view text)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error &e) {
        throw Error(ErrorCode::MalformedJson, e.what());
    }
    if (!doc.is_object())
        throw Error(ErrorCode::MalformedJson, "sidecar is not a JSON object");

    SequenceParams p;
    if (doc.contains("FlipAngle") && !doc["FlipAngle"].is_null()) {
        if (!doc["FlipAngle"].is_number())
            throw Error(ErrorCode::MalformedJson, "FlipAngle is not a number");
        double fa = doc["FlipAngle"].get<double>();
        if (!std::isfinite(fa) || fa <= 0.0 || fa > 180.0)
            throw Error(ErrorCode::BadFlipAngle,
                        "FlipAngle outside (0, 180]: " + std::to_string(fa));
        p.fa_deg = fa;
    }
    p.te_ms = read_time_ms(doc, "EchoTime");
    p.ti_ms = read_time_ms(doc, "InversionTime");
    p.tr_ms = read_time_ms(doc, "RepetitionTime");

    if (doc.contains("ScanningSequence")) {
        const auto &ss = doc["ScanningSequence"];
        if (ss.is_string()) {
            p.ss = split_scanning_sequence(ss.get<std::string>());
        } else if (ss.is_array()) {
            for (const auto &item : ss) {
                if (!item.is_string())
                    throw Error(ErrorCode::MalformedJson, "ScanningSequence entry is not a string");
                for (auto &code : split_scanning_sequence(item.get<std::string>()))
                    p.ss.push_back(std::move(code));
            }
        } else if (!ss.is_null()) {
            throw Error(ErrorCode::MalformedJson, "ScanningSequence must be a string or list");
        }
    }
    p.ir = p.has_ss("IR") || p.ti_ms.has_value();
    return p;
}

ConvertedSeries::ConvertedSeries(std::string series_name, fs::path image, fs::path sidecar,
                                 std::optional<fs::path> bval, std::optional<fs::path> bvec,
                                 SequenceParams params, double duration_s)
    : series_name_(std::move(series_name)), image_(std::move(image)),
      sidecar_(std::move(sidecar)), bval_(std::move(bval)), bvec_(std::move(bvec)),
      params_(std::move(params)), duration_s_(duration_s)
{
    if (bval_.has_value() != bvec_.has_value())
        throw Error(ErrorCode::ConverterFailed,
                    "series '" + series_name_ + "' has only one of .bval/.bvec");
}

std::string ConvertedSeries::image_extension() const
{
    auto name = image_.filename().string();
    return name.ends_with(".nii.gz") ? ".nii.gz" : ".nii";
}

bool detect_diffusion(const ConvertedSeries &series) noexcept
{
    return series.bval_path().has_value() && series.bvec_path().has_value();
}

ConverterHandle ConverterHandle::external_tool(fs::path executable,
                                               std::vector<std::string> extra_args,
                                               double timeout_s)
{
    if (executable.empty())
        throw Error(ErrorCode::ConverterNotFound, "converter executable path is empty");
    ConverterHandle h;
    h.kind = Kind::external;
    h.executable = std::move(executable);
    h.extra_args = std::move(extra_args);
    h.timeout_s = timeout_s;
    return h;
}

ConverterHandle ConverterHandle::mock(fs::path fixtures_root)
{
    ConverterHandle h;
    h.kind = Kind::mock;
    h.fixtures = std::move(fixtures_root);
    return h;
}

std::string ConverterHandle::identity() const
{
    if (kind == Kind::mock)
        return "mock";
    return executable.filename().string();
}

std::string directory_fingerprint(const fs::path &dir)
{
    std::vector<std::string> entries;
    std::error_code ec;
    if (fs::is_directory(dir, ec)) {
        for (auto it = fs::recursive_directory_iterator(dir, ec);
             !ec && it != fs::recursive_directory_iterator(); it.increment(ec)) {
            if (!it->is_regular_file(ec))
                continue;
            auto rel = fs::relative(it->path(), dir, ec).generic_string();
            entries.push_back(rel + '\0' + std::to_string(it->file_size(ec)));
        }
    }
    std::sort(entries.begin(), entries.end());
    std::uint64_t h = 14695981039346656037ull; // FNV-1a
    for (const auto &e : entries) {
        for (unsigned char c : e) {
            h ^= c;
            h *= 1099511628211ull;
        }
        h ^= '\n';
        h *= 1099511628211ull;
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    return std::string("fnv1a64:") + hex;
}

fs::path resolve_mock_fixture(const fs::path &fixtures_root, const fs::path &dicom_dir)
{
    auto index = fixtures_root / "index.json";
    if (fs::exists(index)) {
        json doc;
        try {
            doc = json::parse(read_file(index));
        } catch (const json::parse_error &e) {
            throw Error(ErrorCode::ConverterFailed, "bad mock index: " + std::string(e.what()));
        }
        auto key = dicom_dir.string();
        if (doc.is_object() && doc.contains(key) && doc[key].is_string())
            return fixtures_root / doc[key].get<std::string>();
    }
    auto name = dicom_dir.filename();
    if (name.empty())
        name = dicom_dir.parent_path().filename();
    return fixtures_root / name;
}

namespace {

// Groups converter artifacts in work_dir by basename. A series is any
// basename with both a sidecar and an image.
std::vector<ConvertedSeries> collect_series(const fs::path &work_dir,
                                            const std::map<std::string, double> &durations,
                                            double default_duration)
{
    struct Parts {
        std::optional<fs::path> image, sidecar, bval, bvec;
    };
    std::map<std::string, Parts> by_base;
    for (const auto &entry : fs::directory_iterator(work_dir)) {
        if (!entry.is_regular_file())
            continue;
        auto name = entry.path().filename().string();
        auto take = [&](std::string_view ext, std::optional<fs::path> Parts::*slot) {
            if (name.size() > ext.size() && name.ends_with(ext)) {
                by_base[name.substr(0, name.size() - ext.size())].*slot = entry.path();
                return true;
            }
            return false;
        };
        take(".nii.gz", &Parts::image) || take(".nii", &Parts::image) ||
            take(".json", &Parts::sidecar) || take(".bval", &Parts::bval) ||
            take(".bvec", &Parts::bvec);
    }

    std::vector<ConvertedSeries> out;
    for (auto &[base, parts] : by_base) {
        if (!parts.image || !parts.sidecar)
            continue;
        SequenceParams params;
        try {
            params = parse_sidecar(read_file(*parts.sidecar));
        } catch (const Error &e) {
            throw Error(e.code(), "series '" + base + "': " + e.what());
        }
        auto d = durations.find(base);
        out.emplace_back(base, *parts.image, *parts.sidecar, parts.bval, parts.bvec,
                         std::move(params), d != durations.end() ? d->second : default_duration);
    }
    return out;
}

SessionConversion run_mock(const fs::path &dicom_dir, const fs::path &work_dir,
                           const ConverterHandle &converter)
{
    auto fixture = resolve_mock_fixture(converter.fixtures, dicom_dir);
    if (!fs::is_directory(fixture))
        throw Error(ErrorCode::ConverterFailed,
                    "no mock fixture for '" + dicom_dir.string() + "' (looked for " +
                        fixture.string() + ")");

    std::vector<fs::path> manifests;
    for (const auto &entry : fs::directory_iterator(fixture))
        if (entry.is_regular_file() && entry.path().extension() == ".json")
            manifests.push_back(entry.path());
    std::sort(manifests.begin(), manifests.end());

    std::map<std::string, double> durations;
    for (const auto &path : manifests) {
        json m;
        try {
            m = json::parse(read_file(path));
        } catch (const json::parse_error &e) {
            throw Error(ErrorCode::ConverterFailed,
                        "bad mock manifest " + path.string() + ": " + e.what());
        }
        auto started = std::chrono::steady_clock::now();
        if (m.value("fail", false))
            throw Error(ErrorCode::ConverterFailed,
                        "converter exited with code 1: mock failure injected by " +
                            path.filename().string());
        auto name = m.value("series_name", path.stem().string());
        if (auto ms = m.value("sleep_ms", 0); ms > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(ms));

        write_file(work_dir / (name + ".nii.gz"), m.value("image", "NIFTI:" + name));
        write_file(work_dir / (name + ".json"), m.value("sidecar", json::object()).dump(2) + "\n");
        if (m.value("gradients", false)) {
            write_file(work_dir / (name + ".bval"), m.value("bval", std::string("0 1000 1000\n")));
            write_file(work_dir / (name + ".bvec"),
                       m.value("bvec", std::string("0 1 0\n0 0 1\n0 0 0\n")));
        }
        durations[name] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    }

    SessionConversion result;
    result.series = collect_series(work_dir, durations, 0.0);
    result.source_hash = directory_fingerprint(fixture);
    return result;
}

SessionConversion run_external(const fs::path &dicom_dir, const fs::path &work_dir,
                               const ConverterHandle &converter)
{
    const auto &exe = converter.executable;
    if (exe.empty() || (exe.has_parent_path() && !fs::exists(exe)))
        throw Error(ErrorCode::ConverterNotFound, "converter not found: " + exe.string());

    std::vector<std::string> argv{exe.string(), "-b", "y", "-z", "y", "-f", "%d_%s", "-o",
                                  work_dir.string()};
    argv.insert(argv.end(), converter.extra_args.begin(), converter.extra_args.end());
    argv.push_back(dicom_dir.string());

    auto timeout = std::chrono::milliseconds(static_cast<long long>(converter.timeout_s * 1000.0));
    auto run = run_process(argv, timeout);
    if (run.launch_failed)
        throw Error(ErrorCode::ConverterNotFound, "cannot execute converter: " + exe.string());
    if (run.timed_out)
        throw Error(ErrorCode::Timeout, "converter exceeded " + std::to_string(converter.timeout_s) +
                                            " s on " + dicom_dir.string());
    if (run.exit_code != 0)
        throw Error(ErrorCode::ConverterFailed,
                    "converter exited with code " + std::to_string(run.exit_code) + ": " +
                        run.output + (run.truncated ? "\n[output truncated]" : ""));

    SessionConversion result;
    result.series = collect_series(work_dir, {}, 0.0);
    if (!result.series.empty()) {
        double share = run.wall_s / static_cast<double>(result.series.size());
        std::vector<ConvertedSeries> timed;
        for (auto &s : result.series)
            timed.emplace_back(s.series_name(), s.image_path(), s.sidecar_path(), s.bval_path(),
                               s.bvec_path(), s.params(), share);
        result.series = std::move(timed);
    }
    result.source_hash = directory_fingerprint(dicom_dir);
    return result;
}

} // namespace

SessionConversion convert_session(const fs::path &dicom_dir, const fs::path &work_dir,
                                  const ConverterHandle &converter)
{
    auto started = std::chrono::steady_clock::now();
    std::error_code ec;
    fs::create_directories(work_dir, ec);
    if (ec)
        throw Error(ErrorCode::IoError, "cannot create work dir " + work_dir.string());

    auto result = converter.kind == ConverterHandle::Kind::mock
                      ? run_mock(dicom_dir, work_dir, converter)
                      : run_external(dicom_dir, work_dir, converter);
    if (result.series.empty())
        throw Error(ErrorCode::NoSeriesProduced,
                    "converter produced no series for " + dicom_dir.string());
    result.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return result;
}

} // namespace bidsbox
