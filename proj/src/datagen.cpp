#include "spnx/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

#include "spnx/error.hpp"
#include "spnx/random.hpp"

namespace spnx {

namespace {

constexpr std::size_t kMaxPlacementAttempts = 200000;

struct PlantedBlock {
    Subspace features;
    // centers[c][j]: coordinate j (position within `features`) of cluster c.
    std::vector<std::vector<double>> centers;
};

double block_log_density(const PlantedBlock &block, std::span<const double> coords, double sigma)
{
    const double log_norm = -std::log(sigma) - 0.5 * std::log(2.0 * std::numbers::pi);
    const double k = static_cast<double>(block.centers.size());
    double hi = -std::numeric_limits<double>::infinity();
    std::vector<double> terms;
    for (const auto &center : block.centers) {
        double lp = -std::log(k);
        for (std::size_t j = 0; j < center.size(); ++j) {
            const double z = (coords[j] - center[j]) / sigma;
            lp += log_norm - 0.5 * z * z;
        }
        terms.push_back(lp);
        hi = std::max(hi, lp);
    }
    double acc = 0.0;
    for (double t : terms)
        acc += std::exp(t - hi);
    return hi + std::log(acc);
}

std::string read_text(const std::filesystem::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("label sidecar not found or unreadable: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace

void GenConfig::check() const
{
    if (n_features < 2)
        throw QueryError("n_features must be >= 2");
    if (n_samples < 2)
        throw QueryError("n_samples must be >= 2");
    if (n_outliers >= n_samples)
        throw QueryError("n_outliers must be smaller than n_samples");
    if (subspace_min < 2 || subspace_min > subspace_max)
        throw QueryError("subspace sizes must satisfy 2 <= min <= max");
    if (subspace_min > n_features)
        throw QueryError("infeasible: smallest subspace (" + std::to_string(subspace_min) + ") exceeds " +
                         std::to_string(n_features) + " features");
    if (clusters_per_subspace < 2)
        throw QueryError("clusters_per_subspace must be >= 2");
    if (!(noise_sigma > 0.0))
        throw QueryError("noise_sigma must be > 0");
}

std::vector<std::size_t> LabeledDataset::outlier_rows() const
{
    std::vector<std::size_t> rows;
    for (const auto &[row, _] : truth)
        rows.push_back(row);
    return rows;
}

LabeledDataset generate(const GenConfig &config)
{
    config.check();
    Rng rng(config.seed);
    const std::size_t n = config.n_features;
    const std::size_t rows = config.n_samples;
    const double sigma = config.noise_sigma;
    const std::size_t c = config.clusters_per_subspace;

    // Disjoint planted subspaces over a shuffled feature order; leftovers are noise.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<PlantedBlock> blocks;
    std::size_t used = 0;
    while (n - used >= config.subspace_min) {
        const std::size_t hi = std::min(config.subspace_max, n - used);
        std::uniform_int_distribution<std::size_t> size_dist(config.subspace_min, hi);
        const std::size_t size = size_dist(rng);
        PlantedBlock block;
        block.features = Subspace(std::vector<std::size_t>(order.begin() + static_cast<std::ptrdiff_t>(used),
                                                           order.begin() + static_cast<std::ptrdiff_t>(used + size)));
        used += size;
        // Evenly spaced levels per coordinate, randomly assigned to clusters.
        block.centers.assign(c, std::vector<double>(size));
        for (std::size_t j = 0; j < size; ++j) {
            std::vector<std::size_t> perm(c);
            std::iota(perm.begin(), perm.end(), std::size_t{0});
            std::shuffle(perm.begin(), perm.end(), rng);
            for (std::size_t k = 0; k < c; ++k)
                block.centers[k][j] = (static_cast<double>(perm[k]) + 0.5) / static_cast<double>(c);
        }
        blocks.push_back(std::move(block));
    }
    std::vector<std::size_t> noise(order.begin() + static_cast<std::ptrdiff_t>(used), order.end());

    // Inliers everywhere first.
    std::vector<double> values(rows * n);
    std::normal_distribution<double> gauss(0.0, sigma);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> cluster_dist(0, c - 1);
    for (std::size_t r = 0; r < rows; ++r) {
        double *x = values.data() + r * n;
        for (const auto &block : blocks) {
            const auto &center = block.centers[cluster_dist(rng)];
            for (std::size_t j = 0; j < block.features.size(); ++j)
                x[block.features.features()[j]] = center[j] + gauss(rng);
        }
        for (std::size_t f : noise)
            x[f] = unit(rng);
    }

    // Outlier rows and their blocks (round-robin from a random offset).
    std::vector<std::size_t> row_order(rows);
    std::iota(row_order.begin(), row_order.end(), std::size_t{0});
    std::shuffle(row_order.begin(), row_order.end(), rng);
    std::vector<std::size_t> outliers(row_order.begin(), row_order.begin() + static_cast<std::ptrdiff_t>(config.n_outliers));
    std::sort(outliers.begin(), outliers.end());
    std::vector<std::size_t> block_order(blocks.size());
    std::iota(block_order.begin(), block_order.end(), std::size_t{0});
    std::shuffle(block_order.begin(), block_order.end(), rng);
    const std::size_t offset = std::uniform_int_distribution<std::size_t>(0, blocks.size() - 1)(rng);
    std::vector<bool> is_outlier(rows, false);
    for (std::size_t r : outliers)
        is_outlier[r] = true;

    // Inlier range of every feature.
    std::vector<double> lo(n, std::numeric_limits<double>::infinity());
    std::vector<double> hi(n, -std::numeric_limits<double>::infinity());
    for (std::size_t r = 0; r < rows; ++r) {
        if (is_outlier[r])
            continue;
        for (std::size_t f = 0; f < n; ++f) {
            lo[f] = std::min(lo[f], values[r * n + f]);
            hi[f] = std::max(hi[f], values[r * n + f]);
        }
    }
    auto in_range = [&](std::size_t f, double v) { return v >= lo[f] && v <= hi[f]; };

    // Outlier coordinates outside their planted subspace are inlier draws, redrawn
    // until they sit inside the inlier range so no single feature gives them away.
    for (std::size_t r : outliers) {
        double *x = values.data() + r * n;
        for (const auto &block : blocks) {
            const auto &feats = block.features.features();
            auto block_ok = [&] {
                return std::all_of(feats.begin(), feats.end(), [&](std::size_t f) { return in_range(f, x[f]); });
            };
            while (!block_ok()) {
                const auto &center = block.centers[cluster_dist(rng)];
                for (std::size_t j = 0; j < feats.size(); ++j)
                    x[feats[j]] = center[j] + gauss(rng);
            }
        }
        for (std::size_t f : noise)
            while (!in_range(f, x[f]))
                x[f] = unit(rng);
    }

    LabeledDataset out;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const auto &block = blocks[b];
        const auto &feats = block.features.features();
        const std::size_t k = block.features.size();
        // 1st percentile of inlier joint density.
        std::vector<double> densities;
        std::vector<double> coords(k);
        for (std::size_t r = 0; r < rows; ++r) {
            if (is_outlier[r])
                continue;
            for (std::size_t j = 0; j < k; ++j)
                coords[j] = values[r * n + feats[j]];
            densities.push_back(block_log_density(block, coords, sigma));
        }
        std::sort(densities.begin(), densities.end());
        const double threshold = densities[static_cast<std::size_t>(0.01 * static_cast<double>(densities.size()))];

        for (std::size_t i = 0; i < outliers.size(); ++i) {
            if (block_order[(offset + i) % blocks.size()] != b)
                continue;
            // Rejection sampling: each coordinate drawn from the inlier marginal,
            // kept inside the inlier range, accepted when jointly improbable.
            bool placed = false;
            for (std::size_t attempt = 0; attempt < kMaxPlacementAttempts && !placed; ++attempt) {
                bool inside = true;
                for (std::size_t j = 0; j < k && inside; ++j) {
                    coords[j] = block.centers[cluster_dist(rng)][j] + gauss(rng);
                    inside = in_range(feats[j], coords[j]);
                }
                if (inside && block_log_density(block, coords, sigma) < threshold)
                    placed = true;
            }
            if (!placed)
                throw QueryError("could not place an outlier in subspace " + block.features.to_string());
            for (std::size_t j = 0; j < k; ++j)
                values[outliers[i] * n + feats[j]] = coords[j];
            out.truth.emplace(outliers[i], block.features);
        }
    }

    Schema schema;
    for (std::size_t f = 0; f < n; ++f)
        schema.push_back({"f" + std::to_string(f), FeatureKind::Real, {}});
    out.dataset = Dataset(std::move(schema), std::move(values));
    for (auto &block : blocks)
        out.planted.push_back(block.features);
    std::sort(out.planted.begin(), out.planted.end());
    return out;
}

std::string labels_to_json(const std::map<std::size_t, Subspace> &truth)
{
    std::string s = "{\"outliers\":[";
    bool first = true;
    for (const auto &[row, sub] : truth) {
        s += first ? "\n  " : ",\n  ";
        first = false;
        s += "{\"row\":" + std::to_string(row) + ",\"subspace\":[";
        for (std::size_t i = 0; i < sub.size(); ++i)
            s += (i ? "," : "") + std::to_string(sub.features()[i]);
        s += "]}";
    }
    return s + "\n]}\n";
}

std::map<std::size_t, Subspace> parse_labels(std::string_view text, std::size_t n_rows, std::size_t n_features,
                                             std::string_view source)
{
    const std::string src(source);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error &e) {
        throw DataError(src + ": " + e.what());
    }
    if (!doc.is_object() || !doc.contains("outliers") || !doc["outliers"].is_array())
        throw DataError(src + ": expected {\"outliers\":[...]}");
    std::map<std::size_t, Subspace> truth;
    for (const auto &entry : doc["outliers"]) {
        if (!entry.is_object() || !entry.contains("row") || !entry["row"].is_number_unsigned() ||
            !entry.contains("subspace") || !entry["subspace"].is_array())
            throw DataError(src + ": each outlier needs an unsigned \"row\" and a \"subspace\" array");
        const auto row = entry["row"].get<std::size_t>();
        if (row >= n_rows)
            throw DataError(src + ": outlier row " + std::to_string(row) + " outside dataset of " +
                            std::to_string(n_rows) + " rows");
        std::vector<std::size_t> feats;
        for (const auto &f : entry["subspace"]) {
            if (!f.is_number_unsigned() || f.get<std::size_t>() >= n_features)
                throw DataError(src + ": row " + std::to_string(row) + ": feature index outside " +
                                std::to_string(n_features) + " features");
            feats.push_back(f.get<std::size_t>());
        }
        if (feats.empty())
            throw DataError(src + ": row " + std::to_string(row) + ": empty subspace");
        if (!truth.emplace(row, Subspace(std::move(feats))).second)
            throw DataError(src + ": duplicate outlier row " + std::to_string(row));
    }
    return truth;
}

void write_labels(const LabeledDataset &labeled, const std::filesystem::path &path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw DataError("cannot write " + path.string());
    out << labels_to_json(labeled.truth);
}

std::map<std::size_t, Subspace> read_labels(const std::filesystem::path &path, std::size_t n_rows,
                                            std::size_t n_features)
{
    return parse_labels(read_text(path), n_rows, n_features, path.string());
}

void write_labeled(const LabeledDataset &labeled, const std::filesystem::path &csv,
                   const std::filesystem::path &labels)
{
    write_csv(labeled.dataset, csv);
    write_labels(labeled, labels);
}

LabeledDataset read_labeled(const std::filesystem::path &csv, const std::filesystem::path &labels)
{
    LabeledDataset out;
    out.dataset = load_csv(csv);
    out.truth = read_labels(labels, out.dataset.rows(), out.dataset.cols());
    std::set<Subspace> planted;
    for (const auto &[_, s] : out.truth)
        planted.insert(s);
    out.planted.assign(planted.begin(), planted.end());
    return out;
}

} // namespace spnx
