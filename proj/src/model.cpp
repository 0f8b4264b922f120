#include "bidsbox/model.hpp"

#include "bidsbox/error.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace bidsbox {

std::string normalize_label(std::string_view raw)
{
    for (std::string_view prefix : {"sub-", "ses-"}) {
        if (raw.starts_with(prefix)) {
            raw.remove_prefix(prefix.size());
            break;
        }
    }
    if (raw.empty())
        throw Error(ErrorCode::EmptyLabel, "label is empty");
    for (char c : raw) {
        if (!std::isalnum(static_cast<unsigned char>(c)))
            throw Error(ErrorCode::IllegalCharacter,
                        "label '" + std::string(raw) + "' contains illegal character '" +
                            std::string(1, c) + "'");
    }
    return std::string(raw);
}

namespace {

constexpr std::array modality_names{"anat", "func", "dwi", "fmap"};
constexpr std::array suffix_names{"T1w", "T2w", "FLAIR", "bold", "dwi"};

} // namespace

std::string_view to_string(Modality m) noexcept
{
    return modality_names[static_cast<std::size_t>(m)];
}

std::string_view to_string(Suffix s) noexcept
{
    return suffix_names[static_cast<std::size_t>(s)];
}

std::optional<Modality> parse_modality(std::string_view text) noexcept
{
    for (std::size_t i = 0; i < modality_names.size(); ++i)
        if (text == modality_names[i])
            return static_cast<Modality>(i);
    return std::nullopt;
}

std::optional<Suffix> parse_suffix(std::string_view text) noexcept
{
    for (std::size_t i = 0; i < suffix_names.size(); ++i)
        if (text == suffix_names[i])
            return static_cast<Suffix>(i);
    return std::nullopt;
}

bool pair_is_legal(Modality modality, Suffix suffix) noexcept
{
    switch (suffix) {
    case Suffix::T1w:
    case Suffix::T2w:
    case Suffix::FLAIR: return modality == Modality::anat;
    case Suffix::bold: return modality == Modality::func;
    case Suffix::dwi: return modality == Modality::dwi;
    }
    return false;
}

Classification::Classification(Modality modality, Suffix suffix, std::string rule_id)
    : modality_(modality), suffix_(suffix), rule_id_(std::move(rule_id))
{
    if (!pair_is_legal(modality, suffix))
        throw Error(ErrorCode::IllegalOverride, "suffix '" + std::string(to_string(suffix)) +
                                                    "' is not valid for modality '" +
                                                    std::string(to_string(modality)) + "'");
}

bool SequenceParams::has_ss(std::string_view code) const noexcept
{
    return std::find(ss.begin(), ss.end(), code) != ss.end();
}

} // namespace bidsbox
