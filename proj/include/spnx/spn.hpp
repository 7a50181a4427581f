#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "spnx/schema.hpp"
#include "spnx/subspace.hpp"

namespace spnx {

/// Index of a node inside one model's node arena.
using NodeId = std::size_t;

struct SumNode {
    std::vector<NodeId> children;
    std::vector<double> weights;
};

struct ProductNode {
    std::vector<NodeId> children;
};

struct GaussianLeaf {
    std::size_t feature = 0;
    double mu = 0.0;
    double sigma = 1.0;
};

struct CategoricalLeaf {
    std::size_t feature = 0;
    std::vector<double> probs;
};

using Node = std::variant<SumNode, ProductNode, GaussianLeaf, CategoricalLeaf>;

/// Children (for inner nodes) or an empty list (for leaves).
std::span<const NodeId> children_of(const Node &node);

/// Raw graph description. Nodes are stored children-before-parents; the root is
/// the last node of a well-formed graph.
struct SpnGraph {
    Schema schema;
    std::vector<Node> nodes;
    NodeId root = 0;
};

struct ValidationReport {
    std::vector<std::string> violations;

    bool ok() const { return violations.empty(); }
    std::string summary() const;
};

/// Checks node references, acyclicity and ordering, reachability from the root,
/// scope consistency, completeness, decomposability, weight normalization and
/// leaf parameters. Violations are collected, never thrown.
ValidationReport validate(const SpnGraph &graph);

/// Immutable, validated sum-product network. Safe to share across threads.
class SpnModel {
  public:
    /// Throws ModelError listing every violation if `graph` is not a valid SPN.
    explicit SpnModel(SpnGraph graph);

    const SpnGraph &graph() const { return graph_; }
    const Schema &schema() const { return graph_.schema; }
    const std::vector<Node> &nodes() const { return graph_.nodes; }
    NodeId root() const { return graph_.root; }
    std::size_t num_features() const { return graph_.schema.size(); }
    std::size_t node_count() const { return graph_.nodes.size(); }
    std::size_t leaf_count() const;

  private:
    friend class Evaluator;

    SpnGraph graph_;
    // Per-node offset into log_weights_ (sum nodes) and leaf constants.
    std::vector<std::size_t> weight_offset_;
    std::vector<double> log_weights_;
    std::vector<double> leaf_log_norm_;
};

ValidationReport validate(const SpnModel &model);
std::size_t node_count(const SpnModel &model);

/// Per-feature optional value; an unset feature is marginalized. Categorical
/// values are category indices stored as doubles.
class Query {
  public:
    explicit Query(std::size_t num_features) : values_(num_features) {}

    static Query full(std::span<const double> x);
    static Query on_subspace(std::span<const double> x, const Subspace &subspace);

    void set(std::size_t feature, double value) { values_.at(feature) = value; }
    void marginalize(std::size_t feature) { values_.at(feature).reset(); }

    std::size_t size() const { return values_.size(); }
    const std::optional<double> &operator[](std::size_t feature) const { return values_[feature]; }
    std::size_t observed_count() const;

  private:
    std::vector<std::optional<double>> values_;
};

/// Bottom-up log-domain evaluator with reusable scratch space and
/// instrumentation counters. One evaluator per thread; the model is shared.
class Evaluator {
  public:
    explicit Evaluator(const SpnModel &model);

    double log_density(const Query &query);

    /// log p(x_D) for the features in `subspace`, all others marginalized.
    double log_marginal(std::span<const double> x, const Subspace &subspace);

    const SpnModel &model() const { return *model_; }

    /// Number of circuit evaluations (queries) since construction or reset.
    std::uint64_t evaluations() const { return evaluations_; }
    /// Number of node visits since construction or reset.
    std::uint64_t node_visits() const { return node_visits_; }
    void reset_counters();

  private:
    double run();
    void check_value(std::size_t feature, double value) const;

    const SpnModel *model_;
    std::vector<double> node_values_;
    std::vector<double> input_;
    std::vector<std::uint8_t> observed_;
    std::uint64_t evaluations_ = 0;
    std::uint64_t node_visits_ = 0;
};

/// log p(x_D; theta) where D is the set of instantiated features in `query`.
double log_density(const SpnModel &model, const Query &query);

double log_marginal_subspace(const SpnModel &model, std::span<const double> x,
                             const Subspace &subspace);

} // namespace spnx
