#include "bidsbox/validator.hpp"

#include "bidsbox/error.hpp"
#include "bidsbox/fsutil.hpp"
#include "bidsbox/layout.hpp"
#include "bidsbox/model.hpp"

#include <json.hpp>

#include <map>
#include <regex>
#include <set>

namespace bidsbox {

namespace fs = std::filesystem;

std::string_view to_string(ViolationCode code) noexcept
{
    switch (code) {
    case ViolationCode::BadName: return "BadName";
    case ViolationCode::OrphanSidecar: return "OrphanSidecar";
    case ViolationCode::MissingSidecar: return "MissingSidecar";
    case ViolationCode::MissingDescription: return "MissingDescription";
    case ViolationCode::UnpairedGradient: return "UnpairedGradient";
    case ViolationCode::StateMismatch: return "StateMismatch";
    }
    return "Unknown";
}

namespace {

// Root-level files BIDS allows besides the description.
const std::set<std::string> kRootFiles{"README", "README.md", "README.txt", "CHANGES", "LICENSE",
                                       "participants.tsv", "participants.json"};

const std::regex kFileGrammar{
    R"(sub-([A-Za-z0-9]+)(?:_ses-([A-Za-z0-9]+))?(?:_run-([1-9][0-9]*))?_([A-Za-z0-9]+)\.(nii\.gz|nii|json|bval|bvec))"};

struct Stem {
    std::string dir;
    std::string base; // file name without extension
    bool operator<(const Stem &o) const { return std::tie(dir, base) < std::tie(o.dir, o.base); }
};

struct StemFiles {
    bool image = false, sidecar = false, bval = false, bvec = false;
    std::string modality;
};

class Checker {
public:
    explicit Checker(fs::path root) : root_(std::move(root)) {}

    std::vector<Violation> run()
    {
        check_description();
        for (const auto &entry : fs::directory_iterator(root_)) {
            auto name = entry.path().filename().string();
            if (name.starts_with("."))
                continue;
            if (entry.is_directory()) {
                if (!std::regex_match(name, std::regex("sub-[A-Za-z0-9]+")))
                    add(name + "/", ViolationCode::BadName, "top-level directory is not sub-<label>");
                else
                    walk_subject(entry.path(), name.substr(4));
            } else if (name != kDescriptionFileName && !kRootFiles.contains(name)) {
                add(name, ViolationCode::BadName, "unexpected top-level file");
            }
        }
        check_pairs();
        check_state();
        return std::move(violations_);
    }

private:
    void add(std::string path, ViolationCode code, std::string message)
    {
        violations_.push_back({std::move(path), code, std::move(message)});
    }

    std::string rel(const fs::path &p) const { return fs::relative(p, root_).generic_string(); }

    void check_description()
    {
        auto path = root_ / kDescriptionFileName;
        if (!fs::is_regular_file(path)) {
            add("<root>", ViolationCode::MissingDescription, "dataset_description.json is missing");
            return;
        }
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(fsutil::read_file(path));
        } catch (const nlohmann::json::parse_error &) {
            add(std::string(kDescriptionFileName), ViolationCode::MissingDescription,
                "dataset_description.json is not valid JSON");
            return;
        }
        for (const char *key : {"Name", "BIDSVersion"})
            if (!doc.is_object() || !doc.contains(key))
                add(std::string(kDescriptionFileName), ViolationCode::MissingDescription,
                    std::string("dataset_description.json lacks \"") + key + "\"");
    }

    void walk_subject(const fs::path &dir, const std::string &sub)
    {
        for (const auto &entry : fs::directory_iterator(dir)) {
            auto name = entry.path().filename().string();
            if (name.starts_with("."))
                continue;
            if (!entry.is_directory()) {
                add(rel(entry.path()), ViolationCode::BadName, "file directly under subject directory");
            } else if (name.starts_with("ses-")) {
                if (!std::regex_match(name, std::regex("ses-[A-Za-z0-9]+")))
                    add(rel(entry.path()) + "/", ViolationCode::BadName, "bad session directory name");
                else
                    walk_session(entry.path(), sub, name.substr(4));
            } else if (parse_modality(name)) {
                walk_modality(entry.path(), sub, std::nullopt, name);
            } else {
                add(rel(entry.path()) + "/", ViolationCode::BadName,
                    "expected ses-<label> or a modality directory");
            }
        }
    }

    void walk_session(const fs::path &dir, const std::string &sub, const std::string &ses)
    {
        for (const auto &entry : fs::directory_iterator(dir)) {
            auto name = entry.path().filename().string();
            if (name.starts_with("."))
                continue;
            if (entry.is_directory() && parse_modality(name))
                walk_modality(entry.path(), sub, ses, name);
            else
                add(rel(entry.path()), ViolationCode::BadName, "expected a modality directory");
        }
    }

    void walk_modality(const fs::path &dir, const std::string &sub,
                       const std::optional<std::string> &ses, const std::string &modality)
    {
        auto mod = *parse_modality(modality);
        for (const auto &entry : fs::directory_iterator(dir)) {
            auto name = entry.path().filename().string();
            if (name.starts_with("."))
                continue;
            auto path = rel(entry.path());
            std::smatch m;
            if (!entry.is_regular_file() || !std::regex_match(name, m, kFileGrammar)) {
                add(path, ViolationCode::BadName, "name does not match the entity grammar");
                continue;
            }
            if (m[1].str() != sub || (m[2].matched != ses.has_value()) ||
                (ses && m[2].str() != *ses)) {
                add(path, ViolationCode::BadName, "entities do not match enclosing directories");
                continue;
            }
            auto suffix = parse_suffix(m[4].str());
            if (!suffix || !pair_is_legal(mod, *suffix)) {
                add(path, ViolationCode::BadName,
                    "suffix '" + m[4].str() + "' is not valid under " + modality + "/");
                continue;
            }
            auto ext = m[5].str();
            auto base = name.substr(0, name.size() - ext.size() - 1);
            auto &files = stems_[Stem{rel(dir), base}];
            files.modality = modality;
            if (ext == "nii.gz" || ext == "nii")
                files.image = true;
            else if (ext == "json")
                files.sidecar = true;
            else if (ext == "bval")
                files.bval = true;
            else
                files.bvec = true;
        }
    }

    void check_pairs()
    {
        for (const auto &[stem, f] : stems_) {
            auto path = stem.dir + "/" + stem.base;
            if (f.image && !f.sidecar)
                add(path + ".nii.gz", ViolationCode::MissingSidecar, "image has no JSON sidecar");
            if (f.sidecar && !f.image)
                add(path + ".json", ViolationCode::OrphanSidecar, "sidecar has no image");
            if (f.bval || f.bvec) {
                if (f.modality != "dwi")
                    add(path + (f.bval ? ".bval" : ".bvec"), ViolationCode::UnpairedGradient,
                        "gradient files are only allowed under dwi/");
                else if (f.bval != f.bvec)
                    add(path + (f.bval ? ".bval" : ".bvec"), ViolationCode::UnpairedGradient,
                        "bval/bvec must come in pairs");
            }
        }
    }

    void check_state()
    {
        if (!fs::exists(root_ / kStateFileName))
            return;
        ToolboxState state;
        try {
            state = read_state(root_);
        } catch (const Error &e) {
            add(std::string(kStateFileName), ViolationCode::StateMismatch, e.what());
            return;
        }
        std::set<std::string> recorded;
        for (const auto &[key, session] : state.entries)
            for (const auto &series : session.series)
                for (const auto &f : series.files) {
                    recorded.insert(f);
                    if (!fs::is_regular_file(root_ / f))
                        add(f, ViolationCode::StateMismatch, "recorded in state but missing");
                }
        for (const auto &[stem, files] : stems_) {
            if (!files.image)
                continue;
            auto base = stem.dir + "/" + stem.base;
            if (!recorded.contains(base + ".nii.gz") && !recorded.contains(base + ".nii"))
                add(base, ViolationCode::StateMismatch, "image not recorded in state");
        }
    }

    fs::path root_;
    std::map<Stem, StemFiles> stems_;
    std::vector<Violation> violations_;
};

} // namespace

std::vector<Violation> validate_layout(const fs::path &dataset_root)
{
    if (!fs::is_directory(dataset_root))
        throw Error(ErrorCode::NotADirectory, dataset_root.string() + " is not a directory");
    return Checker(dataset_root).run();
}

std::string violations_to_json(const std::vector<Violation> &violations)
{
    auto doc = nlohmann::ordered_json::array();
    for (const auto &v : violations)
        doc.push_back({{"path", v.path}, {"code", to_string(v.code)}, {"message", v.message}});
    return doc.dump(2);
}

} // namespace bidsbox
