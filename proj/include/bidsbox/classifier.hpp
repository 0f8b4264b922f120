#pragma once

#include "bidsbox/converter.hpp"
#include "bidsbox/model.hpp"
#include "bidsbox/request.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace bidsbox {

enum class SequenceParam { flip_angle, echo_time, inversion_time, repetition_time };

std::string_view to_string(SequenceParam p) noexcept;

/// Inclusive range test on one parameter. A rule carrying a range on an
/// absent parameter never matches.
struct RangeCondition {
    SequenceParam param;
    std::optional<double> min;
    std::optional<double> max;

    bool operator==(const RangeCondition &) const = default;
};

struct ModalityResult {
    Modality modality;
    Suffix suffix;

    bool operator==(const ModalityResult &) const = default;
};

struct RejectResult {
    std::string reason;

    bool operator==(const RejectResult &) const = default;
};

/// One row of the first-match table. All present conditions must hold.
struct DecisionRule {
    std::string rule_id;
    bool requires_gradients = false;
    bool requires_inversion = false; // IR flag set or TI present
    std::vector<std::string> ss_contains;
    std::vector<RangeCondition> ranges;
    std::variant<ModalityResult, RejectResult> result;

    bool matches(const SequenceParams &params, bool has_gradients) const noexcept;
    bool is_catch_all() const noexcept;

    /// Human-readable predicate, e.g. "IR AND TI in [400, 1400] ms".
    std::string predicate_text() const;

    bool operator==(const DecisionRule &) const = default;
};

/// Validated, ordered rule list: unique ids, legal pairs, terminal catch-all.
class DecisionTable {
public:
    /// Throws Error{BadRuleTable}.
    explicit DecisionTable(std::vector<DecisionRule> rules);

    std::span<const DecisionRule> rules() const noexcept { return rules_; }

    /// First matching rule; always exists because the table is total.
    const DecisionRule &first_match(const SequenceParams &params, bool has_gradients) const noexcept;

    /// Parses the JSON rule-file format. Throws Error{BadRuleTable}.
    static DecisionTable from_json(std::string_view text);
    std::string to_json() const;

private:
    std::vector<DecisionRule> rules_;
};

/// The built-in table, in evaluation order.
const DecisionTable &decision_table();

/// Applies overrides (case-insensitive substring of series_name, first in
/// request order wins), then the decision table.
ClassifyOutcome classify(std::string_view series_name, const SequenceParams &params,
                         bool has_gradients, std::span<const ModalityOverride> overrides,
                         const DecisionTable &table = decision_table());

ClassifyOutcome classify_series(const ConvertedSeries &series,
                                std::span<const ModalityOverride> overrides,
                                const DecisionTable &table = decision_table());

} // namespace bidsbox
