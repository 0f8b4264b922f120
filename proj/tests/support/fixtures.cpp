#include "support/fixtures.hpp"

#include "bidsbox/fsutil.hpp"
#include "bidsbox/layout.hpp"

#include <cstdlib>
#include <stdexcept>

#ifndef BIDSBOX_TEST_DATA
#error "BIDSBOX_TEST_DATA must point at tests/data"
#endif

namespace bidsbox::testing {

TempDir::TempDir()
{
    auto tmpl = (fs::temp_directory_path() / "bidsbox-test-XXXXXX").string();
    if (!::mkdtemp(tmpl.data()))
        throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
}

TempDir::~TempDir()
{
    std::error_code ec;
    fs::remove_all(path_, ec);
}

void write_fixture(const fs::path &fixtures, const std::string &fixture,
                   const std::vector<SeriesFixture> &series)
{
    auto dir = fixtures / fixture;
    fs::create_directories(dir);
    for (const auto &s : series) {
        nlohmann::json m = {{"series_name", s.series_name},
                            {"sidecar", s.sidecar},
                            {"gradients", s.gradients},
                            {"image", "NIFTI-MOCK:" + fixture + "/" + s.series_name}};
        if (s.sleep_ms > 0)
            m["sleep_ms"] = s.sleep_ms;
        if (s.fail)
            m["fail"] = true;
        write_text(dir / (s.series_name + ".json"), m.dump(2));
    }
}

nlohmann::json t1_mprage_sidecar()
{
    return {{"ScanningSequence", "GR_IR"}, {"FlipAngle", 8},     {"EchoTime", 0.003},
            {"InversionTime", 0.9},       {"RepetitionTime", 2.2}, {"SeriesDescription", "t1_mprage"}};
}

nlohmann::json t1_spgr_sidecar()
{
    return {{"ScanningSequence", "GR"}, {"FlipAngle", 70}, {"EchoTime", 0.01}, {"RepetitionTime", 0.5}};
}

nlohmann::json t2_sidecar()
{
    return {{"ScanningSequence", "SE"}, {"FlipAngle", 90}, {"EchoTime", 0.1}, {"RepetitionTime", 5.0}};
}

nlohmann::json flair_sidecar()
{
    return {{"ScanningSequence", nlohmann::json::array({"SE", "IR"})},
            {"FlipAngle", 150},
            {"EchoTime", 0.09},
            {"InversionTime", 2.5},
            {"RepetitionTime", 9.0}};
}

nlohmann::json bold_sidecar()
{
    return {{"ScanningSequence", "EP"}, {"FlipAngle", 80}, {"EchoTime", 0.03}, {"RepetitionTime", 2.0}};
}

nlohmann::json dwi_sidecar()
{
    return {{"ScanningSequence", "EP"}, {"FlipAngle", 90}, {"EchoTime", 0.08}, {"RepetitionTime", 8.0}};
}

nlohmann::json research_sidecar()
{
    return {{"ScanningSequence", "RM"}, {"FlipAngle", 20}, {"EchoTime", 0.005}, {"RepetitionTime", 0.02}};
}

void write_reference_fixtures(const fs::path &fixtures)
{
    write_fixture(fixtures, "ses01", {{"scan01_t1", t1_mprage_sidecar()}});
    write_fixture(fixtures, "ses02", {{"dwi_64dir", dwi_sidecar(), true}});
}

std::string read_text(const fs::path &path) { return fsutil::read_file(path); }

void write_text(const fs::path &path, const std::string &text)
{
    fs::create_directories(path.parent_path());
    fsutil::write_file(path, text);
}

std::string reference_request_text() { return read_text(fs::path(BIDSBOX_TEST_DATA) / "reference_request.json"); }

std::string reference_request_with_output(const fs::path &output)
{
    auto doc = nlohmann::ordered_json::parse(reference_request_text());
    doc["output"] = output.string();
    return doc.dump(1);
}

std::map<std::string, std::string> snapshot(const fs::path &root)
{
    std::map<std::string, std::string> out;
    if (!fs::exists(root))
        return out;
    for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator();
         ++it) {
        auto rel = fs::relative(it->path(), root).generic_string();
        out[rel] = it->is_directory() ? "<dir>" : read_text(it->path());
    }
    return out;
}

std::map<std::string, std::string> dataset_contents(const fs::path &root)
{
    std::map<std::string, std::string> out;
    for (const auto &rel : fsutil::list_files(root)) {
        auto text = read_text(root / rel);
        if (rel == kStateFileName) {
            auto doc = nlohmann::ordered_json::parse(text);
            doc.erase("created_at");
            doc.erase("updated_at");
            text = doc.dump(2);
        }
        out[rel] = std::move(text);
    }
    return out;
}

std::vector<std::string> sorted_files(const fs::path &root) { return fsutil::list_files(root); }

std::string strip_json_whitespace(const std::string &text)
{
    std::string out;
    bool in_string = false, escaped = false;
    for (char c : text) {
        if (in_string) {
            out.push_back(c);
            if (escaped)
                escaped = false;
            else if (c == '\\')
                escaped = true;
            else if (c == '"')
                in_string = false;
        } else if (c == '"') {
            in_string = true;
            out.push_back(c);
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            out.push_back(c);
        }
    }
    return out;
}

} // namespace bidsbox::testing
