#pragma once

#include <compare>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace spnx {

/// A set of feature indices kept in canonical (sorted, unique) order.
class Subspace {
  public:
    Subspace() = default;
    explicit Subspace(std::vector<std::size_t> features);
    Subspace(std::initializer_list<std::size_t> features);

    /// {0, ..., n-1}
    static Subspace all(std::size_t n);

    const std::vector<std::size_t> &features() const { return features_; }
    std::size_t size() const { return features_.size(); }
    bool empty() const { return features_.empty(); }
    bool contains(std::size_t feature) const;
    std::size_t max_feature() const { return features_.back(); }

    Subspace with(std::size_t feature) const;
    Subspace without(std::size_t feature) const;

    auto begin() const { return features_.begin(); }
    auto end() const { return features_.end(); }

    std::string to_string() const;

    auto operator<=>(const Subspace &) const = default;
    bool operator==(const Subspace &) const = default;

  private:
    std::vector<std::size_t> features_;
};

} // namespace spnx
