#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace bidsbox {

enum class ViolationCode {
    BadName,
    OrphanSidecar,
    MissingSidecar,
    MissingDescription,
    UnpairedGradient,
    StateMismatch,
};

std::string_view to_string(ViolationCode code) noexcept;

struct Violation {
    std::string path; // relative, or "<root>"
    ViolationCode code;
    std::string message;

    bool operator==(const Violation &) const = default;
};

/// Read-only structural check of a dataset tree: description keys, entity
/// grammar and directory placement, image/sidecar pairing, gradient pairing,
/// and (when a state file is present) a bidirectional state audit.
/// Throws Error{NotADirectory}.
std::vector<Violation> validate_layout(const std::filesystem::path &dataset_root);

std::string violations_to_json(const std::vector<Violation> &violations);

} // namespace bidsbox
