#include "bidsbox/request.hpp"

#include "bidsbox/error.hpp"

#include <json.hpp>

#include <set>

namespace bidsbox {

using ojson = nlohmann::ordered_json;

namespace {

void reject_unknown_keys(const ojson &obj, std::initializer_list<std::string_view> allowed,
                         std::string_view where)
{
    for (const auto &[key, value] : obj.items()) {
        bool known = false;
        for (auto a : allowed)
            known = known || key == a;
        if (!known)
            throw Error(ErrorCode::UnknownKey,
                        "unknown key '" + key + "' in " + std::string(where));
    }
}

const ojson &require_object(const ojson &value, const std::string &what)
{
    if (!value.is_object())
        throw Error(ErrorCode::TypeMismatch, what + " must be a JSON object");
    return value;
}

template <class L>
L make_label(const std::string &raw, std::string_view what)
{
    try {
        return L(raw);
    } catch (const Error &e) {
        throw Error(ErrorCode::BadLabel,
                    "bad " + std::string(what) + " label '" + raw + "': " + e.what());
    }
}

ScanMap parse_scans(const ojson &scans)
{
    require_object(scans, "\"scans\"");
    ScanMap out;
    for (const auto &[sub_raw, sessions] : scans.items()) {
        auto sub = make_label<SubjectLabel>(sub_raw, "subject");
        require_object(sessions, "\"scans\"[\"" + sub_raw + "\"]");
        if (sessions.empty())
            throw Error(ErrorCode::EmptyScans, "subject '" + sub_raw + "' has no sessions");
        SessionMap ses_map;
        for (const auto &[ses_raw, path] : sessions.items()) {
            auto ses = make_label<SessionLabel>(ses_raw, "session");
            if (!path.is_string())
                throw Error(ErrorCode::TypeMismatch, "scans[\"" + sub_raw + "\"][\"" + ses_raw +
                                                         "\"] must be a path string");
            auto dir = path.get<std::string>();
            if (dir.empty())
                throw Error(ErrorCode::TypeMismatch, "scans[\"" + sub_raw + "\"][\"" + ses_raw +
                                                         "\"] is an empty path");
            if (!ses_map.emplace(std::move(ses), std::move(dir)).second)
                throw Error(ErrorCode::BadLabel, "duplicate session '" + ses_raw +
                                                     "' for subject '" + sub_raw + "'");
        }
        if (!out.emplace(std::move(sub), std::move(ses_map)).second)
            throw Error(ErrorCode::BadLabel, "duplicate subject '" + sub_raw + "'");
    }
    return out;
}

std::vector<ModalityOverride> parse_overrides(const ojson &list)
{
    if (!list.is_array())
        throw Error(ErrorCode::TypeMismatch, "\"modalities\" must be an array");
    std::vector<ModalityOverride> out;
    for (const auto &item : list) {
        require_object(item, "\"modalities\" entry");
        reject_unknown_keys(item, {"tag", "modality", "type"}, "\"modalities\" entry");
        for (const char *key : {"tag", "modality", "type"}) {
            if (!item.contains(key))
                throw Error(ErrorCode::MissingKey, key);
            if (!item[key].is_string())
                throw Error(ErrorCode::TypeMismatch,
                            "\"modalities\" field \"" + std::string(key) + "\" must be a string");
        }
        auto tag = item["tag"].get<std::string>();
        auto modality_text = item["modality"].get<std::string>();
        auto type_text = item["type"].get<std::string>();
        if (tag.empty())
            throw Error(ErrorCode::IllegalOverride, "override tag is empty");
        auto modality = parse_modality(modality_text);
        auto suffix = parse_suffix(type_text);
        if (!modality)
            throw Error(ErrorCode::IllegalOverride, "unknown modality '" + modality_text + "'");
        if (!suffix)
            throw Error(ErrorCode::IllegalOverride, "unknown type '" + type_text + "'");
        if (!pair_is_legal(*modality, *suffix))
            throw Error(ErrorCode::IllegalOverride,
                        "type '" + type_text + "' is not valid for modality '" + modality_text + "'");
        out.push_back({std::move(tag), *modality, *suffix});
    }
    return out;
}

OrderedPairs parse_description(const ojson &desc)
{
    require_object(desc, "\"datasetDescription\"");
    OrderedPairs out;
    for (const auto &[key, value] : desc.items()) {
        if (!value.is_string())
            throw Error(ErrorCode::TypeMismatch,
                        "\"datasetDescription\" value for '" + key + "' must be a string");
        out.emplace_back(key, value.get<std::string>());
    }
    return out;
}

} // namespace

ConversionRequest parse_request(std::string_view text, RequestKind kind)
{
    ojson doc;
    try {
        doc = ojson::parse(text);
    } catch (const ojson::parse_error &e) {
        throw Error(ErrorCode::MalformedJson, e.what());
    }
    require_object(doc, "request");
    reject_unknown_keys(doc, {"scans", "output", "metadata", "overwrite"}, "request");

    ConversionRequest req;
    bool has_scans = doc.contains("scans");
    if (!has_scans && kind == RequestKind::create)
        throw Error(ErrorCode::MissingKey, "scans");
    if (!doc.contains("output"))
        throw Error(ErrorCode::MissingKey, "output");

    if (has_scans)
        req.scans = parse_scans(doc["scans"]);

    const auto &output = doc["output"];
    if (!output.is_string())
        throw Error(ErrorCode::TypeMismatch, "\"output\" must be a string");
    req.output = output.get<std::string>();
    if (req.output.empty())
        throw Error(ErrorCode::TypeMismatch, "\"output\" is empty");

    if (doc.contains("overwrite")) {
        if (!doc["overwrite"].is_boolean())
            throw Error(ErrorCode::TypeMismatch, "\"overwrite\" must be a boolean");
        req.overwrite = doc["overwrite"].get<bool>();
    }

    if (doc.contains("metadata")) {
        const auto &meta = require_object(doc["metadata"], "\"metadata\"");
        reject_unknown_keys(meta, {"modalities", "datasetDescription"}, "\"metadata\"");
        if (meta.contains("modalities"))
            req.overrides = parse_overrides(meta["modalities"]);
        if (meta.contains("datasetDescription"))
            req.dataset_description = parse_description(meta["datasetDescription"]);
    }

    if (req.scans.empty()) {
        if (kind == RequestKind::create)
            throw Error(ErrorCode::EmptyScans, "\"scans\" has no subjects");
        if (req.dataset_description.empty())
            throw Error(ErrorCode::EmptyScans,
                        "update without scans must carry a datasetDescription");
    }
    return req;
}

std::string serialize_request(const ConversionRequest &req)
{
    ojson doc = ojson::object();
    ojson scans = ojson::object();
    for (const auto &[sub, sessions] : req.scans) {
        ojson ses = ojson::object();
        for (const auto &[label, path] : sessions)
            ses[label.str()] = path;
        scans[sub.str()] = std::move(ses);
    }
    doc["scans"] = std::move(scans);
    doc["output"] = req.output;
    if (req.overwrite)
        doc["overwrite"] = true;

    ojson meta = ojson::object();
    if (!req.overrides.empty()) {
        ojson list = ojson::array();
        for (const auto &o : req.overrides)
            list.push_back({{"tag", o.tag},
                            {"modality", to_string(o.modality)},
                            {"type", to_string(o.suffix)}});
        meta["modalities"] = std::move(list);
    }
    if (!req.dataset_description.empty()) {
        ojson desc = ojson::object();
        for (const auto &[k, v] : req.dataset_description)
            desc[k] = v;
        meta["datasetDescription"] = std::move(desc);
    }
    if (!meta.empty())
        doc["metadata"] = std::move(meta);
    return doc.dump();
}

} // namespace bidsbox
