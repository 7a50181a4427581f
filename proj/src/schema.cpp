#include "spnx/schema.hpp"

#include "spnx/error.hpp"

namespace spnx {

std::string_view to_string(FeatureKind kind)
{
    return kind == FeatureKind::Real ? "real" : "categorical";
}

FeatureKind feature_kind_from_string(std::string_view text)
{
    if (text == "real")
        return FeatureKind::Real;
    if (text == "categorical")
        return FeatureKind::Categorical;
    throw DataError("unknown feature kind '" + std::string(text) + "' (expected real|categorical)");
}

} // namespace spnx
