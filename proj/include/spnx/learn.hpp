#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "spnx/dataset.hpp"
#include "spnx/spn.hpp"

namespace spnx {

struct LearnConfig {
    double alpha = 0.6;                ///< RDC threshold for a dependence edge
    std::size_t min_slice_rows = 200;  ///< below this, factorize naively
    std::size_t rdc_features = 20;     ///< random sine features per column
    double rdc_scale = 1.0 / 6.0;      ///< frequency scale s
    std::size_t gmm_components = 2;
    std::size_t gmm_max_iters = 100;
    double gmm_tol = 1e-4;
    std::uint64_t seed = 0;

    /// Throws QueryError if a field is out of range.
    void check() const;
};

/// Row and column indices into a backing Dataset.
struct DataSlice {
    std::vector<std::size_t> rows;
    std::vector<std::size_t> cols;

    static DataSlice whole(const Dataset &data);
};

/// Randomized dependence coefficient in [0,1]. Deterministic given `seed`.
/// Both columns are lifted with the same random features, so the result is
/// symmetric in its arguments.
double rdc(std::span<const double> col_a, std::span<const double> col_b, const LearnConfig &config,
           std::uint64_t seed);

/// Empirical copula transform: average rank / (n + 1).
std::vector<double> copula_transform(std::span<const double> values);

/// Connected components of the graph with an edge wherever rdc >= alpha.
/// Groups hold dataset column indices, each sorted, ordered by smallest member.
std::vector<std::vector<std::size_t>> split_columns(const Dataset &data, const DataSlice &slice,
                                                    const LearnConfig &config);

struct RowPartition {
    std::array<std::vector<std::size_t>, 2> clusters; ///< dataset row indices
    std::array<double, 2> weights{};                 ///< cluster proportions
    bool fallback = false;                           ///< random balanced split was used
};

/// Two-component diagonal GMM-EM on standardized columns, hard assignment.
RowPartition cluster_rows(const Dataset &data, const DataSlice &slice, const LearnConfig &config,
                          std::uint64_t seed);
RowPartition cluster_rows(const Dataset &data, const DataSlice &slice, const LearnConfig &config);

/// 1e-6 times the column standard deviation (1e-6 for a constant column).
double sigma_floor(std::span<const double> column);

/// Maximum-likelihood Gaussian (with sigma floor) or add-one smoothed categorical.
Node fit_leaf(std::span<const double> values, const ColumnSpec &spec, std::size_t feature, double floor);
Node fit_leaf(std::span<const double> values, const ColumnSpec &spec, std::size_t feature = 0);

/// LearnSPN: column splits by RDC, row splits by 2-component GMM, leaves at
/// single columns, naive factorization below `min_slice_rows`.
SpnModel learn_spn(const Dataset &data, const LearnConfig &config);

/// Number of learn_spn calls made by this process.
std::uint64_t learn_spn_call_count();

} // namespace spnx
