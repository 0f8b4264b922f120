#include <doctest.h>

#include "bidsbox/error.hpp"
#include "bidsbox/fsutil.hpp"
#include "bidsbox/layout.hpp"
#include "bidsbox/validator.hpp"
#include "support/fixtures.hpp"

using namespace bidsbox;
using namespace bidsbox::testing;

namespace {

ErrorCode code_of(auto &&fn)
{
    try {
        fn();
    } catch (const Error &e) {
        return e.code();
    }
    FAIL("expected bidsbox::Error");
    return ErrorCode::IoError;
}

ConversionRequest request(const fs::path &output,
                          std::vector<std::tuple<std::string, std::string, std::string>> scans)
{
    ConversionRequest req;
    req.output = output.string();
    for (auto &[sub, ses, dir] : scans)
        req.scans[SubjectLabel(sub)][SessionLabel(ses)] = dir;
    return req;
}

Classification cls(Modality m, Suffix s) { return Classification(m, s, "x"); }

} // namespace

TEST_CASE("bids_path grammar")
{
    SubjectLabel s01("01");
    CHECK(bids_path(s01, SessionLabel("01"), cls(Modality::anat, Suffix::T1w), std::nullopt, ".nii.gz") ==
          "sub-01/ses-01/anat/sub-01_ses-01_T1w.nii.gz");
    CHECK(bids_path(s01, SessionLabel("02"), cls(Modality::dwi, Suffix::dwi), std::nullopt, ".bvec") ==
          "sub-01/ses-02/dwi/sub-01_ses-02_dwi.bvec");
    CHECK(bids_path(s01, SessionLabel("01"), cls(Modality::anat, Suffix::T1w), 2, ".json") ==
          "sub-01/ses-01/anat/sub-01_ses-01_run-2_T1w.json");
}

TEST_CASE("create from Reference request with mock fixtures")
{
    TempDir tmp;
    write_reference_fixtures(tmp / "fx");
    auto req = parse_request(reference_request_with_output(tmp / "dataset"));
    auto report = create_dataset(req, ConverterHandle::mock(tmp / "fx"));

    CHECK(report.status == ReportStatus::created);
    CHECK(report.subjects == 1);
    CHECK(report.sessions == 2);
    CHECK(report.series == 2);
    CHECK(report.converter_s <= report.total_s);
    REQUIRE(report.classifications.size() == 2);
    CHECK(report.classifications[0].rule_id == "override");
    CHECK(report.classifications[1].rule_id == "diffusion-files");

    CHECK(sorted_files(tmp / "dataset") ==
          std::vector<std::string>{".bidstoolbox",
                                   "dataset_description.json",
                                   "sub-01/ses-01/anat/sub-01_ses-01_T1w.json",
                                   "sub-01/ses-01/anat/sub-01_ses-01_T1w.nii.gz",
                                   "sub-01/ses-02/dwi/sub-01_ses-02_dwi.bval",
                                   "sub-01/ses-02/dwi/sub-01_ses-02_dwi.bvec",
                                   "sub-01/ses-02/dwi/sub-01_ses-02_dwi.json",
                                   "sub-01/ses-02/dwi/sub-01_ses-02_dwi.nii.gz"});
    CHECK(read_text(tmp / "dataset" / "dataset_description.json") ==
          "{\n  \"Name\": \"dataset\",\n  \"BIDSVersion\": \"1.2.0\",\n  \"key01\": \"value01\",\n"
          "  \"key02\": \"value02\"\n}\n");

    auto state = read_state(tmp / "dataset");
    CHECK(state.format_version == 1);
    CHECK(state.converter == "mock");
    REQUIRE(state.entries.size() == 2);
    CHECK(state.entries.contains({SubjectLabel("01"), SessionLabel("01")}));
    CHECK(state.entries.contains({SubjectLabel("01"), SessionLabel("02")}));
    CHECK(validate_layout(tmp / "dataset").empty());

    // no staging or lock leftovers next to the dataset
    std::vector<std::string> siblings;
    for (const auto &e : fs::directory_iterator(tmp.path()))
        siblings.push_back(e.path().filename().string());
    std::sort(siblings.begin(), siblings.end());
    CHECK(siblings == std::vector<std::string>{"dataset", "fx"});
}

TEST_CASE("unclassifiable series stop creation without touching the output")
{
    TempDir tmp;
    write_fixture(tmp / "fx", "rm", {{"research_seq_9", research_sidecar()}, {"t2_ok", t2_sidecar()}});
    write_fixture(tmp / "fx", "amb", {{"ir_noti", {{"ScanningSequence", "IR"}, {"EchoTime", 0.01}}}});
    auto req = request(tmp / "out", {{"01", "01", "rm"}, {"02", "01", "amb"}});

    SUBCASE("absent output stays absent")
    {
        try {
            create_dataset(req, ConverterHandle::mock(tmp / "fx"));
            FAIL("expected ClassificationFailed");
        } catch (const Error &e) {
            CHECK(e.code() == ErrorCode::ClassificationFailed);
            REQUIRE(e.failed_series().size() == 2);
            CHECK(e.failed_series()[0] == FailedSeries{"research_seq_9", "research mode"});
            CHECK(e.failed_series()[1] == FailedSeries{"ir_noti", "ambiguous inversion recovery"});
            CHECK(std::string(e.what()).find("research_seq_9") != std::string::npos);
        }
        CHECK_FALSE(fs::exists(tmp / "out"));
    }

    SUBCASE("empty output directory stays empty")
    {
        fs::create_directories(tmp / "out");
        CHECK(code_of([&] { create_dataset(req, ConverterHandle::mock(tmp / "fx")); }) ==
              ErrorCode::ClassificationFailed);
        CHECK(fs::is_directory(tmp / "out"));
        CHECK(fs::is_empty(tmp / "out"));
    }

    std::vector<std::string> siblings;
    for (const auto &e : fs::directory_iterator(tmp.path()))
        siblings.push_back(e.path().filename().string());
    CHECK(std::find_if(siblings.begin(), siblings.end(), [](const auto &n) {
              return n.find("staging") != std::string::npos || n.find("work") != std::string::npos ||
                     n.find("lock") != std::string::npos;
          }) == siblings.end());
}

TEST_CASE("same-type series in one session get run entities by series name")
{
    TempDir tmp;
    write_fixture(tmp / "fx", "s", {{"t1_b", t1_spgr_sidecar()}, {"t1_a", t1_mprage_sidecar()}, {"t2", t2_sidecar()}});
    auto report = create_dataset(request(tmp / "ds", {{"01", "01", "s"}}), ConverterHandle::mock(tmp / "fx"));
    REQUIRE(report.classifications.size() == 3);
    CHECK(report.classifications[0].series_name == "t1_a");
    CHECK(report.classifications[0].destination == "sub-01/ses-01/anat/sub-01_ses-01_run-1_T1w.nii.gz");
    CHECK(report.classifications[1].series_name == "t1_b");
    CHECK(report.classifications[1].destination == "sub-01/ses-01/anat/sub-01_ses-01_run-2_T1w.nii.gz");
    CHECK(report.classifications[2].destination == "sub-01/ses-01/anat/sub-01_ses-01_T2w.nii.gz");
    CHECK(read_text(tmp / "ds/sub-01/ses-01/anat/sub-01_ses-01_run-1_T1w.nii.gz") == "NIFTI-MOCK:s/t1_a");
    CHECK(validate_layout(tmp / "ds").empty());
}

TEST_CASE("create refuses a non-empty output")
{
    TempDir tmp;
    write_reference_fixtures(tmp / "fx");
    write_text(tmp / "ds" / "keep.txt", "precious");
    auto req = parse_request(reference_request_with_output(tmp / "ds"));
    CHECK(code_of([&] { create_dataset(req, ConverterHandle::mock(tmp / "fx")); }) ==
          ErrorCode::OutputNotEmpty);
    CHECK(read_text(tmp / "ds" / "keep.txt") == "precious");
}

TEST_CASE("create into an existing empty directory")
{
    TempDir tmp;
    write_reference_fixtures(tmp / "fx");
    fs::create_directories(tmp / "ds");
    auto req = parse_request(reference_request_with_output(tmp / "ds"));
    create_dataset(req, ConverterHandle::mock(tmp / "fx"));
    CHECK(fs::exists(tmp / "ds" / ".bidstoolbox"));
}

TEST_CASE("create then update equals a single create")
{
    TempDir tmp;
    write_fixture(tmp / "fx", "a1", {{"t1", t1_mprage_sidecar()}, {"bold", bold_sidecar()}});
    write_fixture(tmp / "fx", "b1", {{"t2", t2_sidecar()}, {"dwi", dwi_sidecar(), true}});

    auto both = request(tmp / "one" / "ds", {{"01", "01", "a1"}, {"02", "01", "b1"}});
    both.dataset_description = {{"Authors", "x"}};
    fs::create_directories(tmp / "one");
    create_dataset(both, ConverterHandle::mock(tmp / "fx"));

    fs::create_directories(tmp / "two");
    auto first = request(tmp / "two" / "ds", {{"01", "01", "a1"}});
    first.dataset_description = {{"Authors", "x"}};
    create_dataset(first, ConverterHandle::mock(tmp / "fx"));
    auto second = request(tmp / "two" / "ds", {{"02", "01", "b1"}});
    auto report = update_dataset(second, ConverterHandle::mock(tmp / "fx"));
    CHECK(report.status == ReportStatus::updated);
    CHECK(report.subjects == 1);

    CHECK(dataset_contents(tmp / "one" / "ds") == dataset_contents(tmp / "two" / "ds"));
    CHECK(validate_layout(tmp / "two" / "ds").empty());
}

TEST_CASE("update conflicts, overwrite and metadata-only updates")
{
    TempDir tmp;
    write_reference_fixtures(tmp / "fx");
    write_fixture(tmp / "fx", "t2only", {{"t2_new", t2_sidecar()}});
    auto ds = tmp / "ds";
    create_dataset(parse_request(reference_request_with_output(ds)), ConverterHandle::mock(tmp / "fx"));
    auto before = snapshot(ds);

    SUBCASE("re-sending a session conflicts")
    {
        auto req = request(ds, {{"01", "01", "/path/to/DICOMs/for/sub01/ses01"}});
        CHECK(code_of([&] { update_dataset(req, ConverterHandle::mock(tmp / "fx")); }) ==
              ErrorCode::SessionConflict);
        CHECK(snapshot(ds) == before);
    }

    SUBCASE("metadata-only update touches description and state only")
    {
        auto req = parse_request(
            R"({"output":")" + ds.string() + R"(","metadata":{"datasetDescription":{"key03":"v","key01":"new"}}})",
            RequestKind::update);
        auto report = update_dataset(req, ConverterHandle::mock(tmp / "fx"));
        CHECK(report.series == 0);
        auto after = snapshot(ds);
        for (const auto &[path, bytes] : before) {
            if (path == "dataset_description.json" || path == ".bidstoolbox")
                continue;
            CHECK(after.at(path) == bytes);
        }
        CHECK(after.size() == before.size());
        CHECK(read_text(ds / "dataset_description.json") ==
              "{\n  \"Name\": \"ds\",\n  \"BIDSVersion\": \"1.2.0\",\n  \"key01\": \"new\",\n"
              "  \"key02\": \"value02\",\n  \"key03\": \"v\"\n}\n");
        auto state = read_state(ds);
        CHECK(state.entries.size() == 2);
    }

    SUBCASE("overwrite replaces the session's files")
    {
        auto req = request(ds, {{"01", "01", "t2only"}});
        req.overwrite = true;
        update_dataset(req, ConverterHandle::mock(tmp / "fx"));
        CHECK_FALSE(fs::exists(ds / "sub-01/ses-01/anat/sub-01_ses-01_T1w.nii.gz"));
        CHECK(fs::exists(ds / "sub-01/ses-01/anat/sub-01_ses-01_T2w.nii.gz"));
        CHECK(fs::exists(ds / "sub-01/ses-02/dwi/sub-01_ses-02_dwi.nii.gz"));
        auto state = read_state(ds);
        auto &series = state.entries.at({SubjectLabel("01"), SessionLabel("01")}).series;
        REQUIRE(series.size() == 1);
        CHECK(series[0].series_name == "t2_new");
        CHECK(validate_layout(ds).empty());
    }

    SUBCASE("failed update leaves the dataset bit-identical")
    {
        write_fixture(tmp / "fx", "bad", {{"rm", research_sidecar()}});
        write_fixture(tmp / "fx", "boom", {{"x", t2_sidecar(), false, 0, true}});
        CHECK(code_of([&] { update_dataset(request(ds, {{"02", "01", "bad"}}), ConverterHandle::mock(tmp / "fx")); }) ==
              ErrorCode::ClassificationFailed);
        CHECK(snapshot(ds) == before);
        auto req = request(ds, {{"01", "01", "boom"}});
        req.overwrite = true;
        CHECK(code_of([&] { update_dataset(req, ConverterHandle::mock(tmp / "fx")); }) ==
              ErrorCode::ConverterFailed);
        CHECK(snapshot(ds) == before);
    }

    SUBCASE("concurrent mutation is refused while the lock is held")
    {
        fsutil::LockFile held(ds / ".bidstoolbox.lock");
        auto req = request(ds, {{"09", "01", "t2only"}});
        CHECK(code_of([&] { update_dataset(req, ConverterHandle::mock(tmp / "fx")); }) == ErrorCode::Busy);
    }
}

TEST_CASE("update requires a managed dataset")
{
    TempDir tmp;
    fs::create_directories(tmp / "plain");
    auto req = request(tmp / "plain", {{"01", "01", "x"}});
    CHECK(code_of([&] { update_dataset(req, ConverterHandle::mock(tmp / "fx")); }) ==
          ErrorCode::StateFileMissing);
    CHECK(code_of([&] { update_dataset(request(tmp / "missing", {{"01", "01", "x"}}), ConverterHandle::mock(tmp)); }) ==
          ErrorCode::StateFileMissing);
}

TEST_CASE("state file round trip and version gate")
{
    TempDir tmp;
    ToolboxState state;
    state.created_at = "2026-01-01T00:00:00Z";
    state.updated_at = "2026-01-02T00:00:00Z";
    state.converter = "dcm2niix";
    state.entries[{SubjectLabel("01"), SessionLabel("a")}] = {
        "fnv1a64:0000000000000001",
        {{"t1", Classification(Modality::anat, Suffix::T1w, "R6"),
          {"sub-01/ses-a/anat/sub-01_ses-a_T1w.nii.gz", "sub-01/ses-a/anat/sub-01_ses-a_T1w.json"}}}};
    write_state(tmp.path(), state);
    CHECK(read_state(tmp.path()) == state);

    auto doc = nlohmann::json::parse(read_text(tmp / ".bidstoolbox"));
    for (const char *key : {"format_version", "created_at", "updated_at", "converter", "entries"})
        CHECK(doc.contains(key));
    doc["format_version"] = 99;
    write_text(tmp / ".bidstoolbox", doc.dump());
    CHECK(code_of([&] { read_state(tmp.path()); }) == ErrorCode::StateVersionUnsupported);
    write_text(tmp / ".bidstoolbox", "{\"format_version\":1}");
    CHECK(code_of([&] { read_state(tmp.path()); }) == ErrorCode::MalformedState);
    fs::remove(tmp / ".bidstoolbox");
    CHECK(code_of([&] { read_state(tmp.path()); }) == ErrorCode::StateFileMissing);
}

TEST_CASE("parallel conversion gives the same dataset")
{
    TempDir tmp;
    std::vector<std::tuple<std::string, std::string, std::string>> scans;
    for (int i = 0; i < 6; ++i) {
        auto name = "f" + std::to_string(i);
        write_fixture(tmp / "fx", name, {{"t1_" + name, t1_mprage_sidecar(), false, 20}, {"t2_" + name, t2_sidecar()}});
        scans.emplace_back("s" + std::to_string(i), "01", name);
    }
    fs::create_directories(tmp / "serial");
    fs::create_directories(tmp / "parallel");
    create_dataset(request(tmp / "serial" / "ds", scans), ConverterHandle::mock(tmp / "fx"));
    BuildOptions opts;
    opts.parallelism = 4;
    auto report = create_dataset(request(tmp / "parallel" / "ds", scans), ConverterHandle::mock(tmp / "fx"), opts);
    CHECK(report.converter_s <= report.total_s);
    CHECK(dataset_contents(tmp / "serial" / "ds") == dataset_contents(tmp / "parallel" / "ds"));
}

TEST_CASE("request deadline bounds the operation")
{
    TempDir tmp;
    write_fixture(tmp / "fx", "s", {{"t1", t1_mprage_sidecar()}});
    BuildOptions opts;
    opts.deadline = std::chrono::steady_clock::now() - std::chrono::seconds(1);
    CHECK(code_of([&] { create_dataset(request(tmp / "ds", {{"01", "01", "s"}}), ConverterHandle::mock(tmp / "fx"), opts); }) ==
          ErrorCode::Timeout);
    CHECK_FALSE(fs::exists(tmp / "ds"));
}

TEST_CASE("report JSON shape")
{
    DatasetReport r;
    r.status = ReportStatus::created;
    r.dataset_path = "/d";
    r.total_s = 2.0;
    r.converter_s = 1.5;
    auto doc = nlohmann::json::parse(report_to_json(r));
    CHECK(doc["status"] == "created");
    CHECK(doc["timing"]["total_s"] == 2.0);
    CHECK(doc["timing"]["converter_s"] == 1.5);
    CHECK(doc["counts"]["series"] == 0);
    CHECK(doc["failures"].empty());
}
