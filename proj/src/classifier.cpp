#include "bidsbox/classifier.hpp"

#include "bidsbox/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

namespace bidsbox {

using ojson = nlohmann::ordered_json;

namespace {

constexpr std::string_view kDiffusionRule = "diffusion-files";

std::optional<double> value_of(const SequenceParams &p, SequenceParam which) noexcept
{
    switch (which) {
    case SequenceParam::flip_angle: return p.fa_deg;
    case SequenceParam::echo_time: return p.te_ms;
    case SequenceParam::inversion_time: return p.ti_ms;
    case SequenceParam::repetition_time: return p.tr_ms;
    }
    return std::nullopt;
}

std::optional<SequenceParam> parse_param(std::string_view name) noexcept
{
    for (auto p : {SequenceParam::flip_angle, SequenceParam::echo_time,
                   SequenceParam::inversion_time, SequenceParam::repetition_time})
        if (to_string(p) == name)
            return p;
    return std::nullopt;
}

std::string format_number(double v)
{
    std::ostringstream os;
    os << v;
    return os.str();
}

std::string lower(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

DecisionRule accept(std::string id, Modality m, Suffix s)
{
    DecisionRule r;
    r.rule_id = std::move(id);
    r.result = ModalityResult{m, s};
    return r;
}

DecisionRule reject(std::string id, std::string reason)
{
    DecisionRule r;
    r.rule_id = std::move(id);
    r.result = RejectResult{std::move(reason)};
    return r;
}

DecisionTable make_builtin()
{
    using P = SequenceParam;
    std::vector<DecisionRule> rules;

    auto r1 = accept(std::string(kDiffusionRule), Modality::dwi, Suffix::dwi);
    r1.requires_gradients = true;
    rules.push_back(r1);

    auto r2 = reject("R2", "research mode");
    r2.ss_contains = {"RM"};
    rules.push_back(r2);

    auto r3a = accept("R3a", Modality::anat, Suffix::FLAIR);
    r3a.requires_inversion = true;
    r3a.ranges = {{P::inversion_time, 1800.0, 3200.0}, {P::echo_time, 80.0, std::nullopt}};
    rules.push_back(r3a);

    auto r3b = accept("R3b", Modality::anat, Suffix::T1w);
    r3b.requires_inversion = true;
    r3b.ranges = {{P::inversion_time, 400.0, 1400.0}};
    rules.push_back(r3b);

    auto r3c = reject("R3c", "ambiguous inversion recovery");
    r3c.requires_inversion = true;
    rules.push_back(r3c);

    auto r4 = accept("R4", Modality::func, Suffix::bold);
    r4.ss_contains = {"EP"};
    r4.ranges = {{P::repetition_time, 300.0, 5000.0}, {P::echo_time, 20.0, 60.0}};
    rules.push_back(r4);

    auto r5 = accept("R5", Modality::anat, Suffix::T2w);
    r5.ranges = {{P::echo_time, 80.0, std::nullopt}, {P::repetition_time, 2000.0, std::nullopt}};
    rules.push_back(r5);

    auto r6 = accept("R6", Modality::anat, Suffix::T1w);
    r6.ranges = {{P::echo_time, std::nullopt, 30.0},
                 {P::repetition_time, std::nullopt, 800.0},
                 {P::flip_angle, 50.0, std::nullopt}};
    rules.push_back(r6);

    rules.push_back(reject("R7", "no rule matched"));
    return DecisionTable(std::move(rules));
}

} // namespace

std::string_view to_string(SequenceParam p) noexcept
{
    switch (p) {
    case SequenceParam::flip_angle: return "FA";
    case SequenceParam::echo_time: return "TE";
    case SequenceParam::inversion_time: return "TI";
    case SequenceParam::repetition_time: return "TR";
    }
    return "?";
}

bool DecisionRule::matches(const SequenceParams &params, bool has_gradients) const noexcept
{
    if (requires_gradients && !has_gradients)
        return false;
    if (requires_inversion && !(params.ir || params.ti_ms.has_value()))
        return false;
    for (const auto &code : ss_contains)
        if (!params.has_ss(code))
            return false;
    for (const auto &range : ranges) {
        auto v = value_of(params, range.param);
        if (!v)
            return false;
        if (range.min && *v < *range.min)
            return false;
        if (range.max && *v > *range.max)
            return false;
    }
    return true;
}

bool DecisionRule::is_catch_all() const noexcept
{
    return !requires_gradients && !requires_inversion && ss_contains.empty() && ranges.empty();
}

std::string DecisionRule::predicate_text() const
{
    std::vector<std::string> parts;
    if (requires_gradients)
        parts.emplace_back("gradient files (.bval/.bvec) present");
    if (requires_inversion)
        parts.emplace_back("IR (inversion recovery flag or TI present)");
    for (const auto &code : ss_contains)
        parts.push_back("SS contains " + code);
    for (const auto &r : ranges) {
        std::string unit = r.param == SequenceParam::flip_angle ? " deg" : " ms";
        std::string name(to_string(r.param));
        if (r.min && r.max)
            parts.push_back(name + " in [" + format_number(*r.min) + ", " +
                            format_number(*r.max) + "]" + unit);
        else if (r.min)
            parts.push_back(name + " >= " + format_number(*r.min) + unit);
        else if (r.max)
            parts.push_back(name + " <= " + format_number(*r.max) + unit);
    }
    if (parts.empty())
        return "always";
    std::string out = parts.front();
    for (std::size_t i = 1; i < parts.size(); ++i)
        out += " AND " + parts[i];
    return out;
}

DecisionTable::DecisionTable(std::vector<DecisionRule> rules) : rules_(std::move(rules))
{
    if (rules_.empty())
        throw Error(ErrorCode::BadRuleTable, "decision table is empty");
    std::set<std::string> ids;
    for (const auto &r : rules_) {
        if (r.rule_id.empty())
            throw Error(ErrorCode::BadRuleTable, "rule with empty rule_id");
        if (r.rule_id == "override")
            throw Error(ErrorCode::BadRuleTable, "rule_id 'override' is reserved");
        if (!ids.insert(r.rule_id).second)
            throw Error(ErrorCode::BadRuleTable, "duplicate rule_id '" + r.rule_id + "'");
        if (auto *m = std::get_if<ModalityResult>(&r.result); m && !pair_is_legal(m->modality, m->suffix))
            throw Error(ErrorCode::BadRuleTable, "rule '" + r.rule_id + "' yields an illegal pair");
    }
    if (!rules_.back().is_catch_all())
        throw Error(ErrorCode::BadRuleTable, "last rule must be an unconditional catch-all");
}

const DecisionRule &DecisionTable::first_match(const SequenceParams &params,
                                               bool has_gradients) const noexcept
{
    for (const auto &r : rules_)
        if (r.matches(params, has_gradients))
            return r;
    return rules_.back();
}

DecisionTable DecisionTable::from_json(std::string_view text)
{
    ojson doc;
    try {
        doc = ojson::parse(text);
    } catch (const ojson::parse_error &e) {
        throw Error(ErrorCode::BadRuleTable, e.what());
    }
    if (!doc.is_array())
        throw Error(ErrorCode::BadRuleTable, "rule table must be a JSON array");

    std::vector<DecisionRule> rules;
    try {
        for (const auto &item : doc) {
            DecisionRule r;
            r.rule_id = item.at("rule_id").get<std::string>();
            const auto conditions = item.value("conditions", ojson::object());
            for (const auto &[key, value] : conditions.items()) {
                if (key == "gradients")
                    r.requires_gradients = value.get<bool>();
                else if (key == "inversion")
                    r.requires_inversion = value.get<bool>();
                else if (key == "ss_contains")
                    r.ss_contains = value.is_array() ? value.get<std::vector<std::string>>()
                                                     : std::vector{value.get<std::string>()};
                else if (auto p = parse_param(key)) {
                    RangeCondition rc{*p, std::nullopt, std::nullopt};
                    if (value.contains("min"))
                        rc.min = value["min"].get<double>();
                    if (value.contains("max"))
                        rc.max = value["max"].get<double>();
                    r.ranges.push_back(rc);
                } else
                    throw Error(ErrorCode::BadRuleTable,
                                "unknown condition '" + key + "' in rule '" + r.rule_id + "'");
            }
            const auto &result = item.at("result");
            if (result.contains("unclassifiable")) {
                r.result = RejectResult{result["unclassifiable"].get<std::string>()};
            } else {
                auto m = parse_modality(result.at("modality").get<std::string>());
                auto s = parse_suffix(result.at("suffix").get<std::string>());
                if (!m || !s)
                    throw Error(ErrorCode::BadRuleTable,
                                "unknown modality/suffix in rule '" + r.rule_id + "'");
                r.result = ModalityResult{*m, *s};
            }
            rules.push_back(std::move(r));
        }
    } catch (const ojson::exception &e) {
        throw Error(ErrorCode::BadRuleTable, e.what());
    }
    return DecisionTable(std::move(rules));
}

std::string DecisionTable::to_json() const
{
    ojson doc = ojson::array();
    for (const auto &r : rules_) {
        ojson conditions = ojson::object();
        if (r.requires_gradients)
            conditions["gradients"] = true;
        if (r.requires_inversion)
            conditions["inversion"] = true;
        if (!r.ss_contains.empty())
            conditions["ss_contains"] = r.ss_contains;
        for (const auto &rc : r.ranges) {
            ojson range = ojson::object();
            if (rc.min)
                range["min"] = *rc.min;
            if (rc.max)
                range["max"] = *rc.max;
            conditions[std::string(to_string(rc.param))] = range;
        }
        ojson result = ojson::object();
        if (auto *m = std::get_if<ModalityResult>(&r.result)) {
            result["modality"] = to_string(m->modality);
            result["suffix"] = to_string(m->suffix);
        } else {
            result["unclassifiable"] = std::get<RejectResult>(r.result).reason;
        }
        doc.push_back({{"rule_id", r.rule_id},
                       {"predicate", r.predicate_text()},
                       {"conditions", conditions},
                       {"result", result}});
    }
    return doc.dump(2);
}

const DecisionTable &decision_table()
{
    static const DecisionTable table = make_builtin();
    return table;
}

ClassifyOutcome classify(std::string_view series_name, const SequenceParams &params,
                         bool has_gradients, std::span<const ModalityOverride> overrides,
                         const DecisionTable &table)
{
    auto name = lower(series_name);
    for (const auto &o : overrides)
        if (name.find(lower(o.tag)) != std::string::npos)
            return Classification(o.modality, o.suffix, "override");

    const auto &rule = table.first_match(params, has_gradients);
    if (auto *m = std::get_if<ModalityResult>(&rule.result))
        return Classification(m->modality, m->suffix, rule.rule_id);
    return UnclassifiableSeries{std::string(series_name), std::get<RejectResult>(rule.result).reason,
                                rule.rule_id};
}

ClassifyOutcome classify_series(const ConvertedSeries &series,
                                std::span<const ModalityOverride> overrides,
                                const DecisionTable &table)
{
    return classify(series.series_name(), series.params(), detect_diffusion(series), overrides,
                    table);
}

} // namespace bidsbox
