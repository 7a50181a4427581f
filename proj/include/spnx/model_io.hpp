#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "spnx/spn.hpp"

namespace spnx {

inline constexpr int kModelFormatVersion = 1;

/// Versioned JSON document, one node per line, numbers with 17 significant digits.
std::string model_to_json(const SpnModel &model);

/// Parses and validates a model document. Errors carry `source:line:` prefixes.
SpnModel model_from_json(std::string_view text, std::string_view source = "<model>");

void save_model(const SpnModel &model, const std::filesystem::path &path);
SpnModel load_model(const std::filesystem::path &path);

} // namespace spnx
