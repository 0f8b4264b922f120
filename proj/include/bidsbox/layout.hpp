#pragma once

#include "bidsbox/classifier.hpp"
#include "bidsbox/converter.hpp"
#include "bidsbox/error.hpp"
#include "bidsbox/model.hpp"
#include "bidsbox/request.hpp"

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace bidsbox {

/// `sub-<s>/ses-<t>/<modality>/sub-<s>_ses-<t>[_run-<n>]_<suffix><ext>`
std::string bids_path(const SubjectLabel &sub, const SessionLabel &ses, const Classification &cls,
                      std::optional<int> run, std::string_view extension);

inline constexpr std::string_view kStateFileName = ".bidstoolbox";
inline constexpr std::string_view kLockFileName = ".bidstoolbox.lock";
inline constexpr std::string_view kDescriptionFileName = "dataset_description.json";
inline constexpr std::string_view kDefaultBidsVersion = "1.2.0";

struct StateSeries {
    std::string series_name;
    Classification classification;
    std::vector<std::string> files; // image first, then sidecar, then gradients

    bool operator==(const StateSeries &) const = default;
};

struct StateSession {
    std::string source_hash;
    std::vector<StateSeries> series;

    bool operator==(const StateSession &) const = default;
};

using SessionKey = std::pair<SubjectLabel, SessionLabel>;

struct ToolboxState {
    static constexpr int kFormatVersion = 1;

    int format_version = kFormatVersion;
    std::string created_at;
    std::string updated_at;
    std::string converter;
    std::map<SessionKey, StateSession> entries;

    bool operator==(const ToolboxState &) const = default;
};

std::string state_to_json(const ToolboxState &state);
/// Throws Error{MalformedState|StateVersionUnsupported}.
ToolboxState state_from_json(std::string_view text);

/// Throws Error{StateFileMissing|MalformedState|StateVersionUnsupported}.
ToolboxState read_state(const std::filesystem::path &dataset_root);
/// Atomic: temp file + rename.
void write_state(const std::filesystem::path &dataset_root, const ToolboxState &state);

enum class ReportStatus { created, updated, failed };

std::string_view to_string(ReportStatus status) noexcept;

struct SeriesReport {
    std::string subject;
    std::string session;
    std::string series_name;
    Modality modality;
    Suffix suffix;
    std::string rule_id;
    std::string destination;

    bool operator==(const SeriesReport &) const = default;
};

struct DatasetReport {
    ReportStatus status = ReportStatus::failed;
    std::string dataset_path;
    std::size_t subjects = 0;
    std::size_t sessions = 0;
    std::size_t series = 0;
    std::vector<SeriesReport> classifications;
    double total_s = 0.0;
    double converter_s = 0.0;
    std::vector<FailedSeries> failures;
};

std::string report_to_json(const DatasetReport &report);

struct BuildOptions {
    /// Sessions converted concurrently.
    std::size_t parallelism = 1;
    /// Whole-operation deadline; caps every converter invocation.
    std::optional<std::chrono::steady_clock::time_point> deadline;
    const DecisionTable *table = nullptr; // built-in when null
};

/// createBids. Stages everything in a sibling directory and commits with a
/// single rename; on any error the output path is left as it was.
DatasetReport create_dataset(const ConversionRequest &req, const ConverterHandle &converter,
                             const BuildOptions &options = {});

/// updateBids. Adds new sessions and merges description entries into a
/// dataset created by create_dataset. The state file is rewritten last.
DatasetReport update_dataset(const ConversionRequest &req, const ConverterHandle &converter,
                             const BuildOptions &options = {});

} // namespace bidsbox
