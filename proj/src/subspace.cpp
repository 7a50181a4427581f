#include "spnx/subspace.hpp"

#include <algorithm>
#include <numeric>

namespace spnx {

Subspace::Subspace(std::vector<std::size_t> features) : features_(std::move(features))
{
    std::sort(features_.begin(), features_.end());
    features_.erase(std::unique(features_.begin(), features_.end()), features_.end());
}

Subspace::Subspace(std::initializer_list<std::size_t> features)
    : Subspace(std::vector<std::size_t>(features))
{
}

Subspace Subspace::all(std::size_t n)
{
    std::vector<std::size_t> f(n);
    std::iota(f.begin(), f.end(), std::size_t{0});
    return Subspace(std::move(f));
}

bool Subspace::contains(std::size_t feature) const
{
    return std::binary_search(features_.begin(), features_.end(), feature);
}

Subspace Subspace::with(std::size_t feature) const
{
    Subspace out;
    out.features_.reserve(features_.size() + 1);
    auto pos = std::lower_bound(features_.begin(), features_.end(), feature);
    out.features_.assign(features_.begin(), pos);
    if (pos == features_.end() || *pos != feature)
        out.features_.push_back(feature);
    out.features_.insert(out.features_.end(), pos, features_.end());
    return out;
}

Subspace Subspace::without(std::size_t feature) const
{
    Subspace out;
    out.features_.reserve(features_.size());
    for (std::size_t f : features_)
        if (f != feature)
            out.features_.push_back(f);
    return out;
}

std::string Subspace::to_string() const
{
    std::string s = "{";
    for (std::size_t i = 0; i < features_.size(); ++i) {
        if (i)
            s += ",";
        s += std::to_string(features_[i]);
    }
    return s + "}";
}

} // namespace spnx
