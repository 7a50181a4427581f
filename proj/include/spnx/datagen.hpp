#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "spnx/dataset.hpp"
#include "spnx/subspace.hpp"

namespace spnx {

/// Synthetic benchmark in the style of planted-subspace outlier suites: every
/// outlier is unremarkable in each single feature but sits in a low-density
/// region of one small feature subset.
struct GenConfig {
    std::size_t n_features = 20;
    std::size_t n_samples = 1000;
    std::size_t n_outliers = 30;
    std::size_t subspace_min = 2;
    std::size_t subspace_max = 5;
    std::size_t clusters_per_subspace = 2;
    double noise_sigma = 0.05;
    std::uint64_t seed = 0;

    void check() const; // throws QueryError
};

/// Ground truth for one generated dataset.
struct LabeledDataset {
    Dataset dataset;
    std::vector<Subspace> planted;          ///< disjoint truth subspaces
    std::map<std::size_t, Subspace> truth;  ///< outlier row -> its subspace

    std::vector<std::size_t> outlier_rows() const;
};

LabeledDataset generate(const GenConfig &config);

/// Sidecar {"outliers":[{"row":int,"subspace":[int]}]}.
std::string labels_to_json(const std::map<std::size_t, Subspace> &truth);
std::map<std::size_t, Subspace> parse_labels(std::string_view text, std::size_t n_rows, std::size_t n_features,
                                             std::string_view source = "<labels>");

void write_labels(const LabeledDataset &labeled, const std::filesystem::path &path);
/// Throws DataError naming `path` when missing or malformed, or when a row or
/// feature index falls outside the dataset.
std::map<std::size_t, Subspace> read_labels(const std::filesystem::path &path, std::size_t n_rows,
                                            std::size_t n_features);

/// CSV plus sidecar.
void write_labeled(const LabeledDataset &labeled, const std::filesystem::path &csv,
                   const std::filesystem::path &labels);
LabeledDataset read_labeled(const std::filesystem::path &csv, const std::filesystem::path &labels);

} // namespace spnx
