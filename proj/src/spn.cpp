#include "spnx/spn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "spnx/error.hpp"

namespace spnx {

namespace {

constexpr double kNormTolerance = 1e-9;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

using Scope = std::vector<std::size_t>;

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string node_label(NodeId id) { return "node " + std::to_string(id); }

std::string scope_string(const Scope &s) { return Subspace(s).to_string(); }

bool disjoint(const Scope &a, const Scope &b)
{
    auto i = a.begin();
    auto j = b.begin();
    while (i != a.end() && j != b.end()) {
        if (*i == *j)
            return false;
        if (*i < *j)
            ++i;
        else
            ++j;
    }
    return true;
}

Scope merge(const Scope &a, const Scope &b)
{
    Scope out;
    out.reserve(a.size() + b.size());
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

void check_distribution(const std::vector<double> &p, const std::string &what, const std::string &where,
                        std::vector<std::string> &out)
{
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (!std::isfinite(p[i]) || p[i] <= 0.0 || p[i] > 1.0)
            out.push_back(where + ": " + what + "[" + std::to_string(i) + "] = " + std::to_string(p[i]) +
                          " outside (0,1]");
        total += p[i];
    }
    if (!p.empty() && std::abs(total - 1.0) > kNormTolerance) {
        std::ostringstream os;
        os.precision(17);
        os << where << ": " << what << " sum to " << total << ", not 1";
        out.push_back(os.str());
    }
}

void check_leaf_feature(std::size_t feature, FeatureKind expected, const Schema &schema,
                        const std::string &where, std::vector<std::string> &out)
{
    if (feature >= schema.size()) {
        out.push_back(where + ": feature " + std::to_string(feature) + " outside schema of " +
                      std::to_string(schema.size()) + " features");
        return;
    }
    if (schema[feature].kind != expected)
        out.push_back(where + ": leaf type does not match " + std::string(to_string(schema[feature].kind)) +
                      " feature " + std::to_string(feature));
}

} // namespace

std::span<const NodeId> children_of(const Node &node)
{
    if (const auto *s = std::get_if<SumNode>(&node))
        return s->children;
    if (const auto *p = std::get_if<ProductNode>(&node))
        return p->children;
    return {};
}

std::string ValidationReport::summary() const
{
    std::string s;
    for (const auto &v : violations) {
        if (!s.empty())
            s += "; ";
        s += v;
    }
    return s;
}

ValidationReport validate(const SpnGraph &graph)
{
    ValidationReport report;
    auto &out = report.violations;
    const auto &nodes = graph.nodes;
    const std::size_t n_nodes = nodes.size();

    if (graph.schema.empty())
        out.push_back("schema has no features");
    for (std::size_t f = 0; f < graph.schema.size(); ++f)
        if (graph.schema[f].kind == FeatureKind::Categorical && graph.schema[f].categories.empty())
            out.push_back("feature " + std::to_string(f) + ": categorical feature without categories");

    if (n_nodes == 0) {
        out.push_back("model has no nodes");
        return report;
    }
    if (graph.root >= n_nodes) {
        out.push_back("root " + std::to_string(graph.root) + " out of range");
        return report;
    }

    // References and ordering.
    bool references_ok = true;
    for (NodeId id = 0; id < n_nodes; ++id) {
        const auto kids = children_of(nodes[id]);
        const bool inner = std::holds_alternative<SumNode>(nodes[id]) || std::holds_alternative<ProductNode>(nodes[id]);
        if (inner && kids.empty())
            out.push_back(node_label(id) + ": inner node without children");
        for (NodeId c : kids) {
            if (c >= n_nodes) {
                out.push_back(node_label(id) + ": child " + std::to_string(c) + " does not exist");
                references_ok = false;
            } else if (c >= id) {
                out.push_back(node_label(id) + ": child " + std::to_string(c) +
                              " is not stored before its parent");
            }
        }
    }
    if (!references_ok)
        return report;

    // Acyclicity via iterative colored DFS.
    enum : std::uint8_t { White, Grey, Black };
    std::vector<std::uint8_t> color(n_nodes, White);
    bool cyclic = false;
    for (NodeId start = 0; start < n_nodes && !cyclic; ++start) {
        if (color[start] != White)
            continue;
        std::vector<std::pair<NodeId, std::size_t>> stack{{start, 0}};
        color[start] = Grey;
        while (!stack.empty() && !cyclic) {
            auto &[id, next] = stack.back();
            const auto kids = children_of(nodes[id]);
            if (next == kids.size()) {
                color[id] = Black;
                stack.pop_back();
                continue;
            }
            NodeId c = kids[next++];
            if (color[c] == Grey) {
                out.push_back("cycle through " + node_label(c));
                cyclic = true;
            } else if (color[c] == White) {
                color[c] = Grey;
                stack.emplace_back(c, 0);
            }
        }
    }
    if (cyclic)
        return report;

    // Reachability from the root.
    std::vector<bool> reached(n_nodes, false);
    std::vector<NodeId> frontier{graph.root};
    reached[graph.root] = true;
    while (!frontier.empty()) {
        NodeId id = frontier.back();
        frontier.pop_back();
        for (NodeId c : children_of(nodes[id]))
            if (!reached[c]) {
                reached[c] = true;
                frontier.push_back(c);
            }
    }
    for (NodeId id = 0; id < n_nodes; ++id)
        if (!reached[id])
            out.push_back(node_label(id) + ": not reachable from root");

    // Scopes in post-order (memoized DFS so that mis-ordered graphs are still checked).
    std::vector<Scope> scope(n_nodes);
    std::vector<bool> done(n_nodes, false);
    auto visit = [&](NodeId start) {
        std::vector<std::pair<NodeId, bool>> stack{{start, false}};
        while (!stack.empty()) {
            auto [id, expanded] = stack.back();
            stack.pop_back();
            if (done[id])
                continue;
            if (!expanded) {
                stack.emplace_back(id, true);
                for (NodeId c : children_of(nodes[id]))
                    if (!done[c])
                        stack.emplace_back(c, false);
                continue;
            }
            const std::string where = node_label(id);
            std::visit(Overloaded{
                           [&](const SumNode &s) {
                               if (s.weights.size() != s.children.size())
                                   out.push_back(where + ": " + std::to_string(s.weights.size()) + " weights for " +
                                                 std::to_string(s.children.size()) + " children");
                               else
                                   check_distribution(s.weights, "weights", where, out);
                               if (s.children.empty())
                                   return;
                               scope[id] = scope[s.children.front()];
                               for (NodeId c : s.children) {
                                   if (scope[c] != scope[id]) {
                                       out.push_back(where + ": completeness violated, child scopes " +
                                                     scope_string(scope[s.children.front()]) + " and " +
                                                     scope_string(scope[c]) + " differ");
                                       scope[id] = merge(scope[id], scope[c]);
                                   }
                               }
                           },
                           [&](const ProductNode &p) {
                               for (std::size_t i = 0; i < p.children.size(); ++i) {
                                   for (std::size_t j = 0; j < i; ++j) {
                                       if (!disjoint(scope[p.children[i]], scope[p.children[j]]))
                                           out.push_back(where + ": decomposability violated, child scopes " +
                                                         scope_string(scope[p.children[j]]) + " and " +
                                                         scope_string(scope[p.children[i]]) + " overlap");
                                   }
                                   scope[id] = merge(scope[id], scope[p.children[i]]);
                               }
                           },
                           [&](const GaussianLeaf &g) {
                               check_leaf_feature(g.feature, FeatureKind::Real, graph.schema, where, out);
                               if (!std::isfinite(g.mu))
                                   out.push_back(where + ": non-finite mu");
                               if (!std::isfinite(g.sigma) || g.sigma <= 0.0)
                                   out.push_back(where + ": sigma must be finite and > 0");
                               scope[id] = {g.feature};
                           },
                           [&](const CategoricalLeaf &c) {
                               check_leaf_feature(c.feature, FeatureKind::Categorical, graph.schema, where, out);
                               if (c.feature < graph.schema.size() &&
                                   c.probs.size() != graph.schema[c.feature].categories.size())
                                   out.push_back(where + ": " + std::to_string(c.probs.size()) + " probabilities for " +
                                                 std::to_string(graph.schema[c.feature].categories.size()) +
                                                 " categories");
                               check_distribution(c.probs, "probs", where, out);
                               scope[id] = {c.feature};
                           },
                       },
                       nodes[id]);
            done[id] = true;
        }
    };
    visit(graph.root);
    for (NodeId id = 0; id < n_nodes; ++id)
        if (!done[id])
            visit(id);

    const Scope all = Subspace::all(graph.schema.size()).features();
    if (scope[graph.root] != all)
        out.push_back("root scope " + scope_string(scope[graph.root]) + " does not cover all " +
                      std::to_string(graph.schema.size()) + " features");
    return report;
}

SpnModel::SpnModel(SpnGraph graph) : graph_(std::move(graph))
{
    auto report = validate(graph_);
    if (!report.ok())
        throw ModelError("invalid SPN: " + report.summary());

    const std::size_t n = graph_.nodes.size();
    weight_offset_.assign(n, 0);
    leaf_log_norm_.assign(n, 0.0);
    for (NodeId id = 0; id < n; ++id) {
        const Node &node = graph_.nodes[id];
        if (const auto *s = std::get_if<SumNode>(&node)) {
            weight_offset_[id] = log_weights_.size();
            for (double w : s->weights)
                log_weights_.push_back(std::log(w));
        } else if (const auto *c = std::get_if<CategoricalLeaf>(&node)) {
            weight_offset_[id] = log_weights_.size();
            for (double p : c->probs)
                log_weights_.push_back(std::log(p));
        } else if (const auto *g = std::get_if<GaussianLeaf>(&node)) {
            leaf_log_norm_[id] = -std::log(g->sigma) - 0.5 * std::log(2.0 * std::numbers::pi);
        }
    }
}

std::size_t SpnModel::leaf_count() const
{
    return static_cast<std::size_t>(std::count_if(graph_.nodes.begin(), graph_.nodes.end(), [](const Node &n) {
        return std::holds_alternative<GaussianLeaf>(n) || std::holds_alternative<CategoricalLeaf>(n);
    }));
}

ValidationReport validate(const SpnModel &model) { return validate(model.graph()); }

std::size_t node_count(const SpnModel &model) { return model.node_count(); }

Query Query::full(std::span<const double> x)
{
    Query q(x.size());
    for (std::size_t f = 0; f < x.size(); ++f)
        q.values_[f] = x[f];
    return q;
}

Query Query::on_subspace(std::span<const double> x, const Subspace &subspace)
{
    Query q(x.size());
    for (std::size_t f : subspace) {
        if (f >= x.size())
            throw QueryError("subspace feature " + std::to_string(f) + " outside sample of " +
                             std::to_string(x.size()) + " features");
        q.values_[f] = x[f];
    }
    return q;
}

std::size_t Query::observed_count() const
{
    return static_cast<std::size_t>(
        std::count_if(values_.begin(), values_.end(), [](const auto &v) { return v.has_value(); }));
}

Evaluator::Evaluator(const SpnModel &model)
    : model_(&model), node_values_(model.node_count()), input_(model.num_features()),
      observed_(model.num_features())
{
}

void Evaluator::reset_counters()
{
    evaluations_ = 0;
    node_visits_ = 0;
}

void Evaluator::check_value(std::size_t feature, double value) const
{
    const ColumnSpec &spec = model_->schema()[feature];
    if (!std::isfinite(value))
        throw QueryError("feature " + std::to_string(feature) + ": non-finite value");
    if (spec.kind == FeatureKind::Categorical) {
        if (value != std::floor(value) || value < 0.0 || value >= static_cast<double>(spec.categories.size()))
            throw QueryError("feature " + std::to_string(feature) + ": category index " + std::to_string(value) +
                             " outside [0," + std::to_string(spec.categories.size()) + ")");
    }
}

double Evaluator::log_density(const Query &query)
{
    const std::size_t n = model_->num_features();
    if (query.size() != n)
        throw QueryError("query has " + std::to_string(query.size()) + " features, model expects " +
                         std::to_string(n));
    bool any = false;
    for (std::size_t f = 0; f < n; ++f) {
        observed_[f] = query[f].has_value();
        if (observed_[f]) {
            check_value(f, *query[f]);
            input_[f] = *query[f];
            any = true;
        }
    }
    if (!any)
        throw QueryError("query marginalizes every feature");
    return run();
}

double Evaluator::log_marginal(std::span<const double> x, const Subspace &subspace)
{
    const std::size_t n = model_->num_features();
    if (x.size() != n)
        throw QueryError("sample has " + std::to_string(x.size()) + " features, model expects " +
                         std::to_string(n));
    if (subspace.empty())
        throw QueryError("empty subspace");
    if (subspace.max_feature() >= n)
        throw QueryError("subspace " + subspace.to_string() + " outside " + std::to_string(n) + " features");
    std::fill(observed_.begin(), observed_.end(), 0);
    for (std::size_t f : subspace) {
        check_value(f, x[f]);
        observed_[f] = 1;
        input_[f] = x[f];
    }
    return run();
}

double Evaluator::run()
{
    const auto &nodes = model_->nodes();
    const auto &log_w = model_->log_weights_;
    const std::size_t n_nodes = nodes.size();
    for (NodeId id = 0; id < n_nodes; ++id) {
        const Node &node = nodes[id];
        double value = 0.0;
        switch (node.index()) {
        case 0: { // sum: log-sum-exp of log w_c + child
            const auto &s = std::get<SumNode>(node);
            const double *lw = log_w.data() + model_->weight_offset_[id];
            double hi = kNegInf;
            for (std::size_t i = 0; i < s.children.size(); ++i)
                hi = std::max(hi, lw[i] + node_values_[s.children[i]]);
            if (hi == kNegInf) {
                value = kNegInf;
                break;
            }
            double acc = 0.0;
            for (std::size_t i = 0; i < s.children.size(); ++i)
                acc += std::exp(lw[i] + node_values_[s.children[i]] - hi);
            value = hi + std::log(acc);
            break;
        }
        case 1: {
            const auto &p = std::get<ProductNode>(node);
            for (NodeId c : p.children)
                value += node_values_[c];
            break;
        }
        case 2: {
            const auto &g = std::get<GaussianLeaf>(node);
            if (observed_[g.feature]) {
                const double z = (input_[g.feature] - g.mu) / g.sigma;
                value = model_->leaf_log_norm_[id] - 0.5 * z * z;
            }
            break;
        }
        default: {
            const auto &c = std::get<CategoricalLeaf>(node);
            if (observed_[c.feature])
                value = log_w[model_->weight_offset_[id] + static_cast<std::size_t>(input_[c.feature])];
            break;
        }
        }
        node_values_[id] = value;
    }
    node_visits_ += n_nodes;
    ++evaluations_;
    return node_values_[model_->root()];
}

double log_density(const SpnModel &model, const Query &query)
{
    Evaluator eval(model);
    return eval.log_density(query);
}

double log_marginal_subspace(const SpnModel &model, std::span<const double> x, const Subspace &subspace)
{
    Evaluator eval(model);
    return eval.log_marginal(x, subspace);
}

} // namespace spnx
