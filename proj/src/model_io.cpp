#include "spnx/model_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "json.hpp"

#include "spnx/error.hpp"
#include "spnx/format.hpp"

namespace spnx {

using nlohmann::json;

namespace {

std::string number_list(const std::vector<double> &values)
{
    std::string s = "[";
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i)
            s += ",";
        s += json_number(values[i]);
    }
    return s + "]";
}

std::string id_list(const std::vector<NodeId> &ids)
{
    std::string s = "[";
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i)
            s += ",";
        s += std::to_string(ids[i]);
    }
    return s + "]";
}

std::string node_line(NodeId id, const Node &node)
{
    std::string s = "{\"id\":" + std::to_string(id) + ",";
    if (const auto *sum = std::get_if<SumNode>(&node)) {
        s += "\"type\":\"sum\",\"children\":" + id_list(sum->children) + ",\"weights\":" + number_list(sum->weights);
    } else if (const auto *prod = std::get_if<ProductNode>(&node)) {
        s += "\"type\":\"product\",\"children\":" + id_list(prod->children);
    } else if (const auto *g = std::get_if<GaussianLeaf>(&node)) {
        s += "\"type\":\"gaussian\",\"feature\":" + std::to_string(g->feature) + ",\"mu\":" + json_number(g->mu) +
             ",\"sigma\":" + json_number(g->sigma);
    } else {
        const auto &c = std::get<CategoricalLeaf>(node);
        s += "\"type\":\"categorical\",\"feature\":" + std::to_string(c.feature) + ",\"probs\":" + number_list(c.probs);
    }
    return s + "}";
}

// Input iterator that counts newlines as the parser consumes characters.
class LineCountingIterator {
  public:
    using iterator_category = std::input_iterator_tag;
    using value_type = char;
    using difference_type = std::ptrdiff_t;
    using pointer = const char *;
    using reference = const char &;

    LineCountingIterator() = default;
    LineCountingIterator(const char *p, std::size_t *line) : p_(p), line_(line) {}

    reference operator*() const { return *p_; }
    LineCountingIterator &operator++()
    {
        if (line_ && *p_ == '\n')
            ++*line_;
        ++p_;
        return *this;
    }
    LineCountingIterator operator++(int)
    {
        auto old = *this;
        ++*this;
        return old;
    }
    bool operator==(const LineCountingIterator &o) const { return p_ == o.p_; }
    bool operator!=(const LineCountingIterator &o) const { return p_ != o.p_; }

  private:
    const char *p_ = nullptr;
    std::size_t *line_ = nullptr;
};

// DOM builder that records the source line of each element of the top-level
// "nodes" and "schema" arrays.
class LocatingBuilder : public nlohmann::json_sax<json> {
  public:
    LocatingBuilder(json &root, const std::size_t &line, std::string source)
        : root_(root), line_(line), source_(std::move(source))
    {
    }

    std::vector<std::size_t> node_lines;
    std::vector<std::size_t> schema_lines;

    bool null() override { return put(json(nullptr)); }
    bool boolean(bool v) override { return put(json(v)); }
    bool number_integer(number_integer_t v) override { return put(json(v)); }
    bool number_unsigned(number_unsigned_t v) override { return put(json(v)); }
    bool number_float(number_float_t v, const string_t &) override { return put(json(v)); }
    bool string(string_t &v) override { return put(json(v)); }
    bool binary(binary_t &v) override { return put(json(v)); }

    bool start_object(std::size_t) override
    {
        if (frames_.size() == 2 && frames_[1].value->is_array()) {
            if (frames_[1].name == "nodes")
                node_lines.push_back(line_);
            else if (frames_[1].name == "schema")
                schema_lines.push_back(line_);
        }
        open(json::object());
        return true;
    }
    bool end_object() override
    {
        frames_.pop_back();
        return true;
    }
    bool start_array(std::size_t) override
    {
        open(json::array());
        return true;
    }
    bool end_array() override
    {
        frames_.pop_back();
        return true;
    }
    bool key(string_t &k) override
    {
        key_ = k;
        return true;
    }
    bool parse_error(std::size_t, const std::string &, const nlohmann::detail::exception &ex) override
    {
        throw ModelError(source_ + ": " + ex.what());
    }

  private:
    struct Frame {
        json *value;
        std::string name;
    };

    json *insert(json &&v)
    {
        if (frames_.empty()) {
            root_ = std::move(v);
            return &root_;
        }
        json &top = *frames_.back().value;
        if (top.is_array()) {
            top.push_back(std::move(v));
            return &top.back();
        }
        top[key_] = std::move(v);
        return &top[key_];
    }
    bool put(json &&v)
    {
        insert(std::move(v));
        return true;
    }
    void open(json &&container)
    {
        std::string name = (!frames_.empty() && frames_.back().value->is_object()) ? key_ : std::string();
        json *slot = insert(std::move(container));
        frames_.push_back({slot, std::move(name)});
    }

    json &root_;
    const std::size_t &line_;
    std::string source_;
    std::vector<Frame> frames_;
    std::string key_;
};

class Located {
  public:
    Located(std::string source) : source_(std::move(source)) {}

    [[noreturn]] void fail(std::size_t line, const std::string &message) const
    {
        throw ModelError(source_ + ":" + std::to_string(line) + ": " + message);
    }

  private:
    std::string source_;
};

const json &field(const json &obj, const char *name, std::size_t line, const Located &loc)
{
    auto it = obj.find(name);
    if (it == obj.end())
        loc.fail(line, std::string("missing field \"") + name + "\"");
    return *it;
}

std::size_t as_index(const json &v, const char *what, std::size_t line, const Located &loc)
{
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
        loc.fail(line, std::string(what) + " must be a non-negative integer");
    return v.get<std::size_t>();
}

double as_real(const json &v, const char *what, std::size_t line, const Located &loc)
{
    if (!v.is_number())
        loc.fail(line, std::string(what) + " must be a number");
    return v.get<double>();
}

std::vector<double> as_reals(const json &v, const char *what, std::size_t line, const Located &loc)
{
    if (!v.is_array())
        loc.fail(line, std::string(what) + " must be an array");
    std::vector<double> out;
    for (const auto &e : v)
        out.push_back(as_real(e, what, line, loc));
    return out;
}

std::vector<NodeId> as_ids(const json &v, std::size_t line, const Located &loc)
{
    if (!v.is_array())
        loc.fail(line, "children must be an array");
    std::vector<NodeId> out;
    for (const auto &e : v)
        out.push_back(as_index(e, "child id", line, loc));
    return out;
}

// Weights that are off by at most 1e-6 are renormalized; anything within 1e-9
// is kept verbatim so saved models reload bit-identically.
void renormalize(std::vector<double> &p)
{
    double total = 0.0;
    for (double v : p)
        total += v;
    const double off = std::abs(total - 1.0);
    if (off > 1e-9 && off <= 1e-6)
        for (double &v : p)
            v /= total;
}

} // namespace

std::string model_to_json(const SpnModel &model)
{
    std::string out = "{\n  \"version\": " + std::to_string(kModelFormatVersion) + ",\n  \"schema\": [\n";
    const auto &schema = model.schema();
    for (std::size_t f = 0; f < schema.size(); ++f) {
        json col = {{"name", schema[f].name}, {"kind", std::string(to_string(schema[f].kind))}};
        if (schema[f].kind == FeatureKind::Categorical)
            col["categories"] = schema[f].categories;
        out += "    " + col.dump() + (f + 1 < schema.size() ? ",\n" : "\n");
    }
    out += "  ],\n  \"root\": " + std::to_string(model.root()) + ",\n  \"nodes\": [\n";
    const auto &nodes = model.nodes();
    for (NodeId id = 0; id < nodes.size(); ++id)
        out += "    " + node_line(id, nodes[id]) + (id + 1 < nodes.size() ? ",\n" : "\n");
    out += "  ]\n}\n";
    return out;
}

SpnModel model_from_json(std::string_view text, std::string_view source)
{
    const Located loc{std::string(source)};
    std::size_t line = 1;
    json doc;
    LocatingBuilder builder(doc, line, std::string(source));
    LineCountingIterator first(text.data(), &line);
    LineCountingIterator last(text.data() + text.size(), nullptr);
    json::sax_parse(first, last, &builder);

    if (!doc.is_object())
        loc.fail(1, "model document must be a JSON object");
    const json &version = field(doc, "version", 1, loc);
    if (!version.is_number_integer() || version.get<long long>() != kModelFormatVersion)
        loc.fail(1, "unsupported model version " + version.dump() + " (expected " +
                        std::to_string(kModelFormatVersion) + ")");

    SpnGraph graph;
    const json &schema = field(doc, "schema", 1, loc);
    if (!schema.is_array())
        loc.fail(1, "\"schema\" must be an array");
    for (std::size_t f = 0; f < schema.size(); ++f) {
        const std::size_t l = f < builder.schema_lines.size() ? builder.schema_lines[f] : 1;
        const json &col = schema[f];
        if (!col.is_object())
            loc.fail(l, "schema entry " + std::to_string(f) + " must be an object");
        ColumnSpec spec;
        const json &name = field(col, "name", l, loc);
        if (!name.is_string())
            loc.fail(l, "schema name must be a string");
        spec.name = name.get<std::string>();
        const json &kind = field(col, "kind", l, loc);
        if (!kind.is_string() || (kind != "real" && kind != "categorical"))
            loc.fail(l, "schema kind must be \"real\" or \"categorical\"");
        spec.kind = feature_kind_from_string(kind.get<std::string>());
        if (spec.kind == FeatureKind::Categorical) {
            const json &cats = field(col, "categories", l, loc);
            if (!cats.is_array() || cats.empty())
                loc.fail(l, "categories must be a non-empty array");
            for (const auto &c : cats) {
                if (!c.is_string())
                    loc.fail(l, "categories must be strings");
                spec.categories.push_back(c.get<std::string>());
            }
        }
        graph.schema.push_back(std::move(spec));
    }

    graph.root = as_index(field(doc, "root", 1, loc), "root", 1, loc);

    const json &nodes = field(doc, "nodes", 1, loc);
    if (!nodes.is_array())
        loc.fail(1, "\"nodes\" must be an array");
    std::vector<std::optional<Node>> slots(nodes.size());
    std::map<NodeId, std::size_t> line_of;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const std::size_t l = i < builder.node_lines.size() ? builder.node_lines[i] : 1;
        const json &obj = nodes[i];
        if (!obj.is_object())
            loc.fail(l, "node entry must be an object");
        const NodeId id = as_index(field(obj, "id", l, loc), "id", l, loc);
        if (id >= nodes.size())
            loc.fail(l, "node id " + std::to_string(id) + " outside [0," + std::to_string(nodes.size()) + ")");
        if (slots[id])
            loc.fail(l, "duplicate node id " + std::to_string(id));
        line_of[id] = l;
        const json &type = field(obj, "type", l, loc);
        if (!type.is_string())
            loc.fail(l, "node type must be a string");
        const std::string t = type.get<std::string>();
        if (t == "sum") {
            SumNode s{as_ids(field(obj, "children", l, loc), l, loc),
                      as_reals(field(obj, "weights", l, loc), "weights", l, loc)};
            renormalize(s.weights);
            slots[id] = std::move(s);
        } else if (t == "product") {
            slots[id] = ProductNode{as_ids(field(obj, "children", l, loc), l, loc)};
        } else if (t == "gaussian") {
            slots[id] = GaussianLeaf{as_index(field(obj, "feature", l, loc), "feature", l, loc),
                                     as_real(field(obj, "mu", l, loc), "mu", l, loc),
                                     as_real(field(obj, "sigma", l, loc), "sigma", l, loc)};
        } else if (t == "categorical") {
            CategoricalLeaf c{as_index(field(obj, "feature", l, loc), "feature", l, loc),
                              as_reals(field(obj, "probs", l, loc), "probs", l, loc)};
            renormalize(c.probs);
            slots[id] = std::move(c);
        } else {
            loc.fail(l, "unknown node type \"" + t + "\"");
        }
    }
    for (auto &slot : slots)
        graph.nodes.push_back(std::move(*slot)); // ids form a permutation of [0, N)

    const auto report = validate(graph);
    if (!report.ok()) {
        // Report the first violation at the line of the node it names.
        const std::string &first = report.violations.front();
        std::size_t l = 1;
        unsigned long id = 0;
        if (std::sscanf(first.c_str(), "node %lu", &id) == 1 && line_of.count(id))
            l = line_of[id];
        std::string msg = first;
        if (report.violations.size() > 1)
            msg += " (and " + std::to_string(report.violations.size() - 1) + " more)";
        loc.fail(l, msg);
    }
    return SpnModel(std::move(graph));
}

void save_model(const SpnModel &model, const std::filesystem::path &path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw ModelError("cannot write model file " + path.string());
    out << model_to_json(model);
    if (!out)
        throw ModelError("failed writing model file " + path.string());
}

SpnModel load_model(const std::filesystem::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ModelError("cannot read model file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return model_from_json(buf.str(), path.string());
}

} // namespace spnx
