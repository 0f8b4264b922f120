#pragma once

// Shared vocabulary: entity labels, modalities, classification outcomes and
// the MR sequence parameters the classifier consumes.

#include <compare>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace bidsbox {

/// Strips a leading `sub-` or `ses-` prefix and checks the remainder is a
/// non-empty alphanumeric BIDS label. Throws Error{EmptyLabel|IllegalCharacter}.
std::string normalize_label(std::string_view raw);

/// Alphanumeric entity label. Construction always goes through
/// normalize_label, so a Label in hand is already legal.
template <class Tag>
class Label {
public:
    explicit Label(std::string_view raw) : value_(normalize_label(raw)) {}

    const std::string &str() const noexcept { return value_; }

    auto operator<=>(const Label &) const = default;

private:
    std::string value_;
};

using SubjectLabel = Label<struct SubjectTag>;
using SessionLabel = Label<struct SessionTag>;

enum class Modality { anat, func, dwi, fmap };
enum class Suffix { T1w, T2w, FLAIR, bold, dwi };

std::string_view to_string(Modality m) noexcept;
std::string_view to_string(Suffix s) noexcept;
std::optional<Modality> parse_modality(std::string_view text) noexcept;
std::optional<Suffix> parse_suffix(std::string_view text) noexcept;

/// True iff the suffix belongs to the modality's directory class.
bool pair_is_legal(Modality modality, Suffix suffix) noexcept;

class Classification {
public:
    /// Throws Error{IllegalOverride} when the pair is not legal.
    Classification(Modality modality, Suffix suffix, std::string rule_id);

    Modality modality() const noexcept { return modality_; }
    Suffix suffix() const noexcept { return suffix_; }
    const std::string &rule_id() const noexcept { return rule_id_; }

    bool operator==(const Classification &) const = default;

private:
    Modality modality_;
    Suffix suffix_;
    std::string rule_id_;
};

struct UnclassifiableSeries {
    std::string series_name;
    std::string reason;
    std::string rule_id;

    bool operator==(const UnclassifiableSeries &) const = default;
};

using ClassifyOutcome = std::variant<Classification, UnclassifiableSeries>;

/// Sequence parameters of one converted series. Times are milliseconds,
/// flip angle in degrees.
struct SequenceParams {
    std::optional<double> fa_deg;
    bool ir = false;
    std::vector<std::string> ss;
    std::optional<double> te_ms;
    std::optional<double> ti_ms;
    std::optional<double> tr_ms;

    bool has_ss(std::string_view code) const noexcept;

    bool operator==(const SequenceParams &) const = default;
};

} // namespace bidsbox
