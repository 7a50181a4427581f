#include "spnx/learn.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <Eigen/Dense>

#include "spnx/error.hpp"
#include "spnx/random.hpp"

namespace spnx {

namespace {

constexpr double kRdcRidge = 1e-9;
constexpr double kGmmVarianceFloor = 1e-6;
constexpr std::size_t kMaxDepth = 64;

std::atomic<std::uint64_t> g_learn_calls{0};

// Largest canonical correlation between two blocks of the same height, via
// Cholesky whitening and the top singular value of the whitened cross-covariance.
double top_canonical_correlation(const Eigen::MatrixXd &x, const Eigen::MatrixXd &y)
{
    const Eigen::Index n = x.rows();
    const Eigen::Index k = x.cols();
    Eigen::MatrixXd joint(n, x.cols() + y.cols());
    joint << x, y;
    joint.rowwise() -= joint.colwise().mean();
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(joint.cols(), joint.cols());
    cov.selfadjointView<Eigen::Lower>().rankUpdate(joint.transpose(), 1.0 / static_cast<double>(n - 1));
    cov = cov.selfadjointView<Eigen::Lower>();

    double ridge = kRdcRidge;
    for (int attempt = 0; attempt < 4; ++attempt, ridge *= 1000.0) {
        Eigen::MatrixXd cxx = cov.topLeftCorner(k, k);
        Eigen::MatrixXd cyy = cov.bottomRightCorner(y.cols(), y.cols());
        cxx.diagonal().array() += ridge;
        cyy.diagonal().array() += ridge;
        Eigen::LLT<Eigen::MatrixXd> lx(cxx);
        Eigen::LLT<Eigen::MatrixXd> ly(cyy);
        if (lx.info() != Eigen::Success || ly.info() != Eigen::Success)
            continue;
        Eigen::MatrixXd m = lx.matrixL().solve(cov.topRightCorner(k, y.cols()));
        Eigen::MatrixXd mt = ly.matrixL().solve(m.transpose());
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(mt);
        return std::clamp(svd.singularValues()(0), 0.0, 1.0);
    }
    return 0.0;
}

double rdc_on_copula(std::span<const double> ua, std::span<const double> ub, const LearnConfig &config,
                     std::uint64_t seed)
{
    const std::size_t n = ua.size();
    const std::size_t k = config.rdc_features;
    Rng rng(seed);
    std::normal_distribution<double> freq(0.0, config.rdc_scale * static_cast<double>(k));
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    std::vector<double> w(k);
    std::vector<double> b(k);
    for (std::size_t j = 0; j < k; ++j) {
        w[j] = 2.0 * std::numbers::pi * freq(rng);
        b[j] = phase(rng);
    }
    Eigen::MatrixXd fa(n, k);
    Eigen::MatrixXd fb(n, k);
    for (std::size_t j = 0; j < k; ++j)
        for (std::size_t i = 0; i < n; ++i) {
            fa(i, j) = std::sin(w[j] * ua[i] + b[j]);
            fb(i, j) = std::sin(w[j] * ub[i] + b[j]);
        }
    return top_canonical_correlation(fa, fb);
}

std::vector<double> gather(const Dataset &data, std::span<const std::size_t> rows, std::size_t col)
{
    std::vector<double> out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        out[i] = data.at(rows[i], col);
    return out;
}

RowPartition balanced_split(std::span<const std::size_t> rows, std::uint64_t seed)
{
    std::vector<std::size_t> order(rows.begin(), rows.end());
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    RowPartition out;
    const std::size_t half = order.size() / 2;
    out.clusters[0].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(half));
    out.clusters[1].assign(order.begin() + static_cast<std::ptrdiff_t>(half), order.end());
    for (auto &c : out.clusters)
        std::sort(c.begin(), c.end());
    out.fallback = true;
    return out;
}

class Builder {
  public:
    Builder(const Dataset &data, const LearnConfig &config) : data_(data), config_(config)
    {
        graph_.schema = data.schema();
        floors_.resize(data.cols());
        for (std::size_t c = 0; c < data.cols(); ++c)
            floors_[c] = sigma_floor(data.column(c));
    }

    SpnGraph finish(const DataSlice &slice)
    {
        graph_.root = build(slice, 0);
        return std::move(graph_);
    }

  private:
    NodeId add(Node node)
    {
        graph_.nodes.push_back(std::move(node));
        return graph_.nodes.size() - 1;
    }

    NodeId leaf(const std::vector<std::size_t> &rows, std::size_t col)
    {
        return add(fit_leaf(gather(data_, rows, col), data_.schema()[col], col, floors_[col]));
    }

    NodeId naive(const DataSlice &slice)
    {
        if (slice.cols.size() == 1)
            return leaf(slice.rows, slice.cols.front());
        ProductNode prod;
        for (std::size_t c : slice.cols)
            prod.children.push_back(leaf(slice.rows, c));
        return add(std::move(prod));
    }

    NodeId build(const DataSlice &slice, std::size_t depth)
    {
        if (slice.cols.size() == 1)
            return leaf(slice.rows, slice.cols.front());
        if (slice.rows.size() < config_.min_slice_rows || depth >= kMaxDepth)
            return naive(slice);

        auto groups = split_columns(data_, slice, config_);
        if (groups.size() > 1) {
            ProductNode prod;
            for (auto &g : groups)
                prod.children.push_back(build(DataSlice{slice.rows, std::move(g)}, depth + 1));
            return add(std::move(prod));
        }

        const auto part = cluster_rows(data_, slice, config_, derive_seed(config_.seed, {0xc1u, split_counter_++}));
        SumNode sum;
        for (std::size_t j = 0; j < 2; ++j) {
            sum.children.push_back(build(DataSlice{part.clusters[j], slice.cols}, depth + 1));
            sum.weights.push_back(part.weights[j]);
        }
        return add(std::move(sum));
    }

    const Dataset &data_;
    const LearnConfig &config_;
    std::vector<double> floors_;
    SpnGraph graph_;
    std::uint64_t split_counter_ = 0;
};

} // namespace

void LearnConfig::check() const
{
    if (!(alpha > 0.0 && alpha < 1.0))
        throw QueryError("alpha must lie in (0,1)");
    if (min_slice_rows < 2)
        throw QueryError("min_slice_rows must be >= 2");
    if (rdc_features < 2)
        throw QueryError("rdc_features must be >= 2");
    if (!(rdc_scale > 0.0) || !std::isfinite(rdc_scale))
        throw QueryError("rdc_scale must be > 0");
    if (gmm_components != 2)
        throw QueryError("gmm_components is fixed at 2");
    if (gmm_max_iters < 1)
        throw QueryError("gmm_max_iters must be >= 1");
    if (!(gmm_tol > 0.0))
        throw QueryError("gmm_tol must be > 0");
}

DataSlice DataSlice::whole(const Dataset &data)
{
    DataSlice s;
    s.rows.resize(data.rows());
    s.cols.resize(data.cols());
    std::iota(s.rows.begin(), s.rows.end(), std::size_t{0});
    std::iota(s.cols.begin(), s.cols.end(), std::size_t{0});
    return s;
}

std::vector<double> copula_transform(std::span<const double> values)
{
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i + 1;
        while (j < n && values[order[j]] == values[order[i]])
            ++j;
        const double rank = 0.5 * static_cast<double>(i + 1 + j); // mean of ranks i+1..j
        for (std::size_t t = i; t < j; ++t)
            u[order[t]] = rank / static_cast<double>(n + 1);
        i = j;
    }
    return u;
}

double rdc(std::span<const double> col_a, std::span<const double> col_b, const LearnConfig &config,
           std::uint64_t seed)
{
    if (col_a.size() != col_b.size())
        throw QueryError("rdc: column lengths differ (" + std::to_string(col_a.size()) + " vs " +
                         std::to_string(col_b.size()) + ")");
    if (col_a.size() < 3)
        throw QueryError("rdc: need at least 3 samples");
    if (config.rdc_features < 2)
        throw QueryError("rdc: rdc_features must be >= 2");
    const auto ua = copula_transform(col_a);
    const auto ub = copula_transform(col_b);
    return rdc_on_copula(ua, ub, config, seed);
}

std::vector<std::vector<std::size_t>> split_columns(const Dataset &data, const DataSlice &slice,
                                                    const LearnConfig &config)
{
    const std::size_t m = slice.cols.size();
    std::vector<std::size_t> parent(m);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t i) {
        while (parent[i] != i)
            i = parent[i] = parent[parent[i]];
        return i;
    };

    // Too few rows to measure dependence: treat columns as independent.
    if (slice.rows.size() >= 3) {
        std::vector<std::vector<double>> copulas(m);
        for (std::size_t i = 0; i < m; ++i)
            copulas[i] = copula_transform(gather(data, slice.rows, slice.cols[i]));
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = i + 1; j < m; ++j) {
                const std::size_t lo = std::min(slice.cols[i], slice.cols[j]);
                const std::size_t hi = std::max(slice.cols[i], slice.cols[j]);
                if (find(i) == find(j))
                    continue; // already connected; the edge cannot change the components
                const double r = rdc_on_copula(copulas[i], copulas[j], config, derive_seed(config.seed, {lo, hi}));
                if (r >= config.alpha)
                    parent[find(i)] = find(j);
            }
    }

    std::vector<std::vector<std::size_t>> groups;
    std::vector<std::ptrdiff_t> group_of(m, -1);
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return slice.cols[a] < slice.cols[b]; });
    for (std::size_t i : order) {
        const std::size_t root = find(i);
        if (group_of[root] < 0) {
            group_of[root] = static_cast<std::ptrdiff_t>(groups.size());
            groups.emplace_back();
        }
        groups[static_cast<std::size_t>(group_of[root])].push_back(slice.cols[i]);
    }
    return groups;
}

RowPartition cluster_rows(const Dataset &data, const DataSlice &slice, const LearnConfig &config)
{
    return cluster_rows(data, slice, config, config.seed);
}

RowPartition cluster_rows(const Dataset &data, const DataSlice &slice, const LearnConfig &config,
                          std::uint64_t seed)
{
    const std::size_t n = slice.rows.size();
    const std::size_t d = slice.cols.size();
    if (n < 2)
        throw QueryError("cluster_rows: need at least 2 rows");
    if (d == 0)
        throw QueryError("cluster_rows: slice has no columns");

    // Standardized slice, row-major.
    std::vector<double> z(n * d);
    for (std::size_t c = 0; c < d; ++c) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            mean += data.at(slice.rows[i], slice.cols[c]);
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double t = data.at(slice.rows[i], slice.cols[c]) - mean;
            var += t * t;
        }
        const double sd = std::sqrt(var / static_cast<double>(n));
        for (std::size_t i = 0; i < n; ++i)
            z[i * d + c] = sd > 0.0 ? (data.at(slice.rows[i], slice.cols[c]) - mean) / sd : 0.0;
    }
    auto row = [&](std::size_t i) { return z.data() + i * d; };
    auto sqdist = [&](const double *a, const double *b) {
        double s = 0.0;
        for (std::size_t c = 0; c < d; ++c)
            s += (a[c] - b[c]) * (a[c] - b[c]);
        return s;
    };

    // k-means++ seeding for two centers.
    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    const std::size_t first = pick(rng);
    std::vector<double> dist(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        total += dist[i] = sqdist(row(i), row(first));
    std::size_t second = first;
    if (total > 0.0) {
        std::uniform_real_distribution<double> u(0.0, total);
        double target = u(rng);
        for (std::size_t i = 0; i < n; ++i) {
            target -= dist[i];
            if (target <= 0.0 && dist[i] > 0.0) {
                second = i;
                break;
            }
        }
        if (second == first) // rounding at the tail
            for (std::size_t i = n; i-- > 0;)
                if (dist[i] > 0.0) {
                    second = i;
                    break;
                }
    } else {
        second = pick(rng);
    }

    constexpr std::size_t K = 2;
    std::array<std::vector<double>, K> mean{std::vector<double>(row(first), row(first) + d),
                                            std::vector<double>(row(second), row(second) + d)};
    std::array<std::vector<double>, K> var{std::vector<double>(d, 1.0), std::vector<double>(d, 1.0)};
    std::array<double, K> log_pi{std::log(0.5), std::log(0.5)};

    // Initial parameters from the nearest-center assignment.
    {
        std::array<std::vector<double>, K> sum{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
        std::array<std::vector<double>, K> sq{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
        std::array<std::size_t, K> count{0, 0};
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t j = sqdist(row(i), mean[1].data()) < sqdist(row(i), mean[0].data()) ? 1 : 0;
            ++count[j];
            for (std::size_t c = 0; c < d; ++c) {
                sum[j][c] += row(i)[c];
                sq[j][c] += row(i)[c] * row(i)[c];
            }
        }
        if (count[0] > 0 && count[1] > 0) {
            for (std::size_t j = 0; j < K; ++j) {
                const double cnt = static_cast<double>(count[j]);
                for (std::size_t c = 0; c < d; ++c) {
                    mean[j][c] = sum[j][c] / cnt;
                    var[j][c] = std::max(sq[j][c] / cnt - mean[j][c] * mean[j][c], 0.0) + kGmmVarianceFloor;
                }
                log_pi[j] = std::log(cnt / static_cast<double>(n));
            }
        }
    }

    std::vector<double> resp(n * K);
    auto e_step = [&]() {
        double ll = 0.0;
        std::array<double, K> log_norm{};
        for (std::size_t j = 0; j < K; ++j) {
            log_norm[j] = log_pi[j];
            for (std::size_t c = 0; c < d; ++c)
                log_norm[j] -= 0.5 * std::log(2.0 * std::numbers::pi * var[j][c]);
        }
        for (std::size_t i = 0; i < n; ++i) {
            std::array<double, K> lp{};
            for (std::size_t j = 0; j < K; ++j) {
                double q = 0.0;
                for (std::size_t c = 0; c < d; ++c) {
                    const double t = row(i)[c] - mean[j][c];
                    q += t * t / var[j][c];
                }
                lp[j] = log_norm[j] - 0.5 * q;
            }
            const double hi = std::max(lp[0], lp[1]);
            const double lse = hi + std::log(std::exp(lp[0] - hi) + std::exp(lp[1] - hi));
            ll += lse;
            for (std::size_t j = 0; j < K; ++j)
                resp[i * K + j] = std::exp(lp[j] - lse);
        }
        return ll / static_cast<double>(n);
    };

    double prev = -std::numeric_limits<double>::infinity();
    for (std::size_t iter = 0; iter < config.gmm_max_iters; ++iter) {
        const double ll = e_step();
        if (std::abs(ll - prev) < config.gmm_tol)
            break;
        prev = ll;
        bool degenerate = false;
        for (std::size_t j = 0; j < K; ++j) {
            double nj = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                nj += resp[i * K + j];
            if (nj < 1e-10) {
                degenerate = true;
                break;
            }
            for (std::size_t c = 0; c < d; ++c) {
                double s = 0.0;
                for (std::size_t i = 0; i < n; ++i)
                    s += resp[i * K + j] * row(i)[c];
                mean[j][c] = s / nj;
                double v = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double t = row(i)[c] - mean[j][c];
                    v += resp[i * K + j] * t * t;
                }
                var[j][c] = v / nj + kGmmVarianceFloor;
            }
            log_pi[j] = std::log(nj / static_cast<double>(n));
        }
        if (degenerate)
            break;
    }
    e_step();

    RowPartition out;
    for (std::size_t i = 0; i < n; ++i)
        out.clusters[resp[i * K + 1] > resp[i * K] ? 1 : 0].push_back(slice.rows[i]);
    if (out.clusters[0].empty() || out.clusters[1].empty())
        out = balanced_split(slice.rows, derive_seed(seed, {0xba1u}));
    for (std::size_t j = 0; j < K; ++j)
        out.weights[j] = static_cast<double>(out.clusters[j].size()) / static_cast<double>(n);
    return out;
}

double sigma_floor(std::span<const double> column)
{
    if (column.empty())
        return 1e-6;
    double mean = 0.0;
    for (double v : column)
        mean += v;
    mean /= static_cast<double>(column.size());
    double var = 0.0;
    for (double v : column)
        var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(column.size()));
    return 1e-6 * (sd > 0.0 ? sd : 1.0);
}

Node fit_leaf(std::span<const double> values, const ColumnSpec &spec, std::size_t feature, double floor)
{
    if (values.empty())
        throw DataError("fit_leaf: empty column '" + spec.name + "'");
    const double n = static_cast<double>(values.size());
    if (spec.kind == FeatureKind::Categorical) {
        const std::size_t k = spec.categories.size();
        if (k == 0)
            throw DataError("fit_leaf: categorical column '" + spec.name + "' has no categories");
        std::vector<double> counts(k, 1.0);
        for (double v : values) {
            if (v != std::floor(v) || v < 0.0 || v >= static_cast<double>(k))
                throw DataError("fit_leaf: value outside categories of '" + spec.name + "'");
            counts[static_cast<std::size_t>(v)] += 1.0;
        }
        for (double &c : counts)
            c /= n + static_cast<double>(k);
        return CategoricalLeaf{feature, std::move(counts)};
    }
    double mean = 0.0;
    for (double v : values)
        mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : values)
        var += (v - mean) * (v - mean);
    return GaussianLeaf{feature, mean, std::max(std::sqrt(var / n), floor)};
}

Node fit_leaf(std::span<const double> values, const ColumnSpec &spec, std::size_t feature)
{
    return fit_leaf(values, spec, feature, sigma_floor(values));
}

SpnModel learn_spn(const Dataset &data, const LearnConfig &config)
{
    ++g_learn_calls;
    config.check();
    if (data.rows() == 0 || data.cols() == 0)
        throw DataError("learn_spn: empty dataset");
    for (std::size_t c = 0; c < data.cols(); ++c) {
        const auto col = data.column(c);
        if (std::all_of(col.begin(), col.end(), [](double v) { return std::isnan(v); }))
            throw DataError("learn_spn: column '" + data.schema()[c].name + "' is all NaN");
    }
    Builder builder(data, config);
    return SpnModel(builder.finish(DataSlice::whole(data)));
}

std::uint64_t learn_spn_call_count() { return g_learn_calls.load(); }

} // namespace spnx
