#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace spnx {

enum class FeatureKind { Real, Categorical };

std::string_view to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(std::string_view text); // throws DataError

struct ColumnSpec {
    std::string name;
    FeatureKind kind = FeatureKind::Real;
    std::vector<std::string> categories; // empty for real columns

    bool operator==(const ColumnSpec &) const = default;
};

/// Per-feature type descriptor, one entry per column.
using Schema = std::vector<ColumnSpec>;

} // namespace spnx
