#pragma once

// Test helpers: scratch directories, mock-converter fixtures, tree snapshots.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace bidsbox::testing {

namespace fs = std::filesystem;

class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir &) = delete;
    TempDir &operator=(const TempDir &) = delete;

    const fs::path &path() const noexcept { return path_; }
    operator const fs::path &() const noexcept { return path_; }
    fs::path operator/(const std::string &rel) const { return path_ / rel; }

private:
    fs::path path_;
};

struct SeriesFixture {
    std::string series_name;
    nlohmann::json sidecar = nlohmann::json::object();
    bool gradients = false;
    int sleep_ms = 0;
    bool fail = false;
};

/// Writes `<fixtures>/<fixture>/<series_name>.json` manifests.
void write_fixture(const fs::path &fixtures, const std::string &fixture,
                   const std::vector<SeriesFixture> &series);

// Sidecars as a converter writes them (times in seconds).
nlohmann::json t1_mprage_sidecar();  // IR, TI 0.9 s -> R3b
nlohmann::json t1_spgr_sidecar();    // short TE/TR, FA 70 -> R6
nlohmann::json t2_sidecar();         // TE 0.1, TR 5.0, SE -> R5
nlohmann::json flair_sidecar();      // TI 2.5 s, TE 0.09 -> R3a
nlohmann::json bold_sidecar();       // EP, TR 2.0, TE 0.03 -> R4
nlohmann::json dwi_sidecar();        // used with gradients -> diffusion-files
nlohmann::json research_sidecar();   // SS RM -> R2

/// Fixture pair that makes the reference request convert: "ses01" holds a
/// T1 series named scan01_t1, "ses02" a diffusion series.
void write_reference_fixtures(const fs::path &fixtures);

std::string read_text(const fs::path &path);
void write_text(const fs::path &path, const std::string &text);

std::string reference_request_text();

/// Reference request with "output" replaced.
std::string reference_request_with_output(const fs::path &output);

/// Every entry below root (hidden included): relative path -> bytes, with
/// directories mapped to "<dir>".
std::map<std::string, std::string> snapshot(const fs::path &root);

/// Dataset files -> contents, with the state file's timestamps removed.
std::map<std::string, std::string> dataset_contents(const fs::path &root);

std::vector<std::string> sorted_files(const fs::path &root);

/// Whitespace outside JSON strings removed.
std::string strip_json_whitespace(const std::string &text);

} // namespace bidsbox::testing
