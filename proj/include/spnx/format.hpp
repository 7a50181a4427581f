#pragma once

#include <string>
#include <string_view>

namespace spnx {

/// Shortest-safe text for a double: 17 significant digits, `null` when non-finite
/// (JSON has no infinities).
std::string json_number(double value);

/// 17 significant digits; `inf`/`-inf`/`nan` spelled out.
std::string text_number(double value);

/// JSON string literal with escaping.
std::string json_string(std::string_view text);

} // namespace spnx
