#pragma once

namespace bidsbox {

inline constexpr const char *kVersion = "0.1.0";

} // namespace bidsbox
