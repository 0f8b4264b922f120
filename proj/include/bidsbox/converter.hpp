#pragma once

#include "bidsbox/model.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bidsbox {

namespace fs = std::filesystem;

/// Extracts SequenceParams from a converter sidecar. Sidecar times are in
/// seconds and come out in milliseconds.
/// Throws Error{MalformedJson|NegativeTime|BadFlipAngle}.
SequenceParams parse_sidecar(std::string_view text);

/// Splits a ScanningSequence value ("GR\\IR", "SE_IR") into its codes.
std::vector<std::string> split_scanning_sequence(std::string_view value);

class ConvertedSeries {
public:
    /// Throws Error{ConverterFailed} when only one of bval/bvec is given.
    ConvertedSeries(std::string series_name, fs::path image, fs::path sidecar,
                    std::optional<fs::path> bval, std::optional<fs::path> bvec,
                    SequenceParams params, double duration_s);

    const std::string &series_name() const noexcept { return series_name_; }
    const fs::path &image_path() const noexcept { return image_; }
    const fs::path &sidecar_path() const noexcept { return sidecar_; }
    const std::optional<fs::path> &bval_path() const noexcept { return bval_; }
    const std::optional<fs::path> &bvec_path() const noexcept { return bvec_; }
    const SequenceParams &params() const noexcept { return params_; }
    double duration_s() const noexcept { return duration_s_; }

    /// Image extension as written by the converter (".nii.gz" or ".nii").
    std::string image_extension() const;

private:
    std::string series_name_;
    fs::path image_;
    fs::path sidecar_;
    std::optional<fs::path> bval_;
    std::optional<fs::path> bvec_;
    SequenceParams params_;
    double duration_s_;
};

bool detect_diffusion(const ConvertedSeries &series) noexcept;

struct ConverterHandle {
    enum class Kind { external, mock };

    Kind kind = Kind::external;
    fs::path executable;             // external
    std::vector<std::string> extra_args;
    double timeout_s = 3600.0;       // per invocation
    fs::path fixtures;               // mock

    static ConverterHandle external_tool(fs::path executable,
                                         std::vector<std::string> extra_args = {},
                                         double timeout_s = 3600.0);
    static ConverterHandle mock(fs::path fixtures_root);

    /// Identity string recorded in the dataset state file.
    std::string identity() const;
};

struct SessionConversion {
    std::vector<ConvertedSeries> series; // ordered by series_name
    std::string source_hash;
    double wall_s = 0.0;
};

/// Converts one session directory into work_dir. The external converter runs
/// once per call; the mock materializes fixture manifests instead.
/// Throws Error{ConverterNotFound|ConverterFailed|Timeout|NoSeriesProduced|IoError}.
SessionConversion convert_session(const fs::path &dicom_dir, const fs::path &work_dir,
                                  const ConverterHandle &converter);

/// Order-independent hash of relative file names and sizes under `dir`.
/// A missing directory hashes like an empty one.
std::string directory_fingerprint(const fs::path &dir);

/// Resolves which mock fixture directory stands in for `dicom_dir`.
fs::path resolve_mock_fixture(const fs::path &fixtures_root, const fs::path &dicom_dir);

} // namespace bidsbox
