#pragma once

#include "bidsbox/model.hpp"

#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace bidsbox {

struct ModalityOverride {
    std::string tag;
    Modality modality;
    Suffix suffix;

    bool operator==(const ModalityOverride &) const = default;
};

/// Ordered string map; insertion order is preserved for byte-stable output.
using OrderedPairs = std::vector<std::pair<std::string, std::string>>;

using SessionMap = std::map<SessionLabel, std::string>;
using ScanMap = std::map<SubjectLabel, SessionMap>;

struct ConversionRequest {
    ScanMap scans;
    std::string output;
    std::vector<ModalityOverride> overrides;
    OrderedPairs dataset_description;
    bool overwrite = false;

    bool operator==(const ConversionRequest &) const = default;
};

enum class RequestKind { create, update };

/// Parses the JSON wire message shared by createBids, updateBids and the CLI.
/// Throws Error with MalformedJson, MissingKey, UnknownKey, TypeMismatch,
/// EmptyScans, BadLabel or IllegalOverride.
ConversionRequest parse_request(std::string_view text, RequestKind kind = RequestKind::create);

/// Compact JSON. Keys appear in wire order: scans, output, overwrite (only
/// when true), metadata (only when it has content).
std::string serialize_request(const ConversionRequest &req);

} // namespace bidsbox
