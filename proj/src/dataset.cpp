#include "spnx/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

#include "spnx/error.hpp"
#include "spnx/format.hpp"

namespace spnx {

namespace {

std::string read_file(const std::filesystem::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::filesystem::path &path, const std::string &text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw DataError("cannot write " + path.string());
    out << text;
    if (!out)
        throw DataError("failed writing " + path.string());
}

std::optional<double> parse_decimal(std::string_view cell)
{
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t'))
        cell.remove_prefix(1);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t'))
        cell.remove_suffix(1);
    if (cell.empty())
        return std::nullopt;
    if (cell.front() == '+')
        cell.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v))
        return std::nullopt;
    return v;
}

// RFC 4180 style: fields separated by commas, optional double quotes.
std::vector<std::vector<std::string>> split_records(std::string_view text, std::string_view source)
{
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> fields;
    std::string cell;
    bool quoted = false;
    bool any = false;
    std::size_t line = 1;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char ch = text[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    cell += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                if (ch == '\n')
                    ++line;
                cell += ch;
            }
            continue;
        }
        if (ch == '"') {
            quoted = true;
            any = true;
        } else if (ch == ',') {
            fields.push_back(std::move(cell));
            cell.clear();
            any = true;
        } else if (ch == '\n' || ch == '\r') {
            if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n')
                ++i;
            if (any || !cell.empty()) {
                fields.push_back(std::move(cell));
                records.push_back(std::move(fields));
            }
            fields.clear();
            cell.clear();
            any = false;
            ++line;
        } else {
            cell += ch;
            any = true;
        }
    }
    if (quoted)
        throw DataError(std::string(source) + ": unterminated quoted field at line " + std::to_string(line));
    if (any || !cell.empty()) {
        fields.push_back(std::move(cell));
        records.push_back(std::move(fields));
    }
    return records;
}

std::string csv_field(const std::string &s)
{
    if (s.find_first_of(",\"\n\r") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"')
            out += '"';
        out += c;
    }
    return out + "\"";
}

} // namespace

Dataset::Dataset(Schema schema, std::vector<double> values) : schema_(std::move(schema)), values_(std::move(values))
{
    if (schema_.empty()) {
        if (!values_.empty())
            throw DataError("dataset has values but no columns");
        return;
    }
    if (values_.size() % schema_.size() != 0)
        throw DataError("dataset is not rectangular: " + std::to_string(values_.size()) + " values for " +
                        std::to_string(schema_.size()) + " columns");
    rows_ = values_.size() / schema_.size();
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t c = 0; c < schema_.size(); ++c) {
            const double v = values_[r * schema_.size() + c];
            if (!std::isfinite(v))
                throw DataError("row " + std::to_string(r) + ", column '" + schema_[c].name + "': missing or non-finite value");
            if (schema_[c].kind == FeatureKind::Categorical &&
                (v != std::floor(v) || v < 0 || v >= static_cast<double>(schema_[c].categories.size())))
                throw DataError("row " + std::to_string(r) + ", column '" + schema_[c].name + "': category index " +
                                text_number(v) + " outside declared categories");
        }
    }
}

std::vector<double> Dataset::column(std::size_t c) const
{
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        out[r] = at(r, c);
    return out;
}

Dataset parse_csv(std::string_view text, const std::optional<Schema> &schema, std::string_view source)
{
    const std::string src(source);
    auto records = split_records(text, source);
    if (records.empty())
        throw DataError(src + ": empty file (no header row)");
    const auto &header = records.front();
    const std::size_t n_cols = header.size();
    const std::size_t n_rows = records.size() - 1;

    for (std::size_t r = 1; r < records.size(); ++r) {
        if (records[r].size() != n_cols)
            throw DataError(src + ": row " + std::to_string(r) + " has " + std::to_string(records[r].size()) +
                            " cells, header has " + std::to_string(n_cols));
        for (std::size_t c = 0; c < n_cols; ++c) {
            const auto &cell = records[r][c];
            if (std::all_of(cell.begin(), cell.end(), [](char ch) { return ch == ' ' || ch == '\t'; }))
                throw DataError(src + ": missing value at row " + std::to_string(r) + ", column " +
                                std::to_string(c + 1) + " ('" + header[c] + "')");
        }
    }

    Schema out_schema;
    if (schema) {
        if (schema->size() != n_cols)
            throw DataError(src + ": schema declares " + std::to_string(schema->size()) + " columns, file has " +
                            std::to_string(n_cols));
        for (std::size_t c = 0; c < n_cols; ++c)
            if ((*schema)[c].name != header[c])
                throw DataError(src + ": column " + std::to_string(c + 1) + " is '" + header[c] +
                                "' but schema declares '" + (*schema)[c].name + "'");
        out_schema = *schema;
    } else {
        for (std::size_t c = 0; c < n_cols; ++c) {
            ColumnSpec spec{header[c], FeatureKind::Real, {}};
            for (std::size_t r = 1; r < records.size(); ++r)
                if (!parse_decimal(records[r][c])) {
                    spec.kind = FeatureKind::Categorical;
                    break;
                }
            out_schema.push_back(std::move(spec));
        }
    }

    std::vector<std::unordered_map<std::string, std::size_t>> codes(n_cols);
    std::vector<bool> infer(n_cols, false);
    for (std::size_t c = 0; c < n_cols; ++c) {
        auto &spec = out_schema[c];
        if (spec.kind != FeatureKind::Categorical)
            continue;
        infer[c] = spec.categories.empty();
        for (std::size_t k = 0; k < spec.categories.size(); ++k)
            codes[c].emplace(spec.categories[k], k);
    }

    std::vector<double> values(n_rows * n_cols);
    for (std::size_t r = 0; r < n_rows; ++r) {
        const auto &rec = records[r + 1];
        for (std::size_t c = 0; c < n_cols; ++c) {
            auto &spec = out_schema[c];
            if (spec.kind == FeatureKind::Real) {
                auto v = parse_decimal(rec[c]);
                if (!v)
                    throw DataError(src + ": row " + std::to_string(r + 1) + ", column " + std::to_string(c + 1) +
                                    " ('" + header[c] + "'): '" + rec[c] + "' is not a number");
                values[r * n_cols + c] = *v;
                continue;
            }
            auto it = codes[c].find(rec[c]);
            if (it == codes[c].end()) {
                if (!infer[c])
                    throw DataError(src + ": row " + std::to_string(r + 1) + ", column " + std::to_string(c + 1) +
                                    " ('" + header[c] + "'): category '" + rec[c] + "' not declared in schema");
                it = codes[c].emplace(rec[c], spec.categories.size()).first;
                spec.categories.push_back(rec[c]);
            }
            values[r * n_cols + c] = static_cast<double>(it->second);
        }
    }
    return Dataset(std::move(out_schema), std::move(values));
}

Dataset load_csv(const std::filesystem::path &path, const std::optional<Schema> &schema)
{
    return parse_csv(read_file(path), schema, path.string());
}

std::string to_csv(const Dataset &data)
{
    std::string out;
    const auto &schema = data.schema();
    for (std::size_t c = 0; c < schema.size(); ++c)
        out += (c ? "," : "") + csv_field(schema[c].name);
    out += "\n";
    for (std::size_t r = 0; r < data.rows(); ++r) {
        for (std::size_t c = 0; c < schema.size(); ++c) {
            if (c)
                out += ",";
            const double v = data.at(r, c);
            if (schema[c].kind == FeatureKind::Categorical)
                out += csv_field(schema[c].categories[static_cast<std::size_t>(v)]);
            else
                out += text_number(v);
        }
        out += "\n";
    }
    return out;
}

void write_csv(const Dataset &data, const std::filesystem::path &path) { write_file(path, to_csv(data)); }

Schema parse_schema_json(std::string_view text, std::string_view source)
{
    const std::string src(source);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error &e) {
        throw DataError(src + ": " + e.what());
    }
    if (!doc.is_object() || !doc.contains("columns") || !doc["columns"].is_array())
        throw DataError(src + ": expected {\"columns\":[...]}");
    Schema schema;
    for (const auto &col : doc["columns"]) {
        if (!col.is_object() || !col.contains("name") || !col["name"].is_string() || !col.contains("kind") ||
            !col["kind"].is_string())
            throw DataError(src + ": column entry " + std::to_string(schema.size()) + " needs string name and kind");
        ColumnSpec spec{col["name"].get<std::string>(), feature_kind_from_string(col["kind"].get<std::string>()), {}};
        if (col.contains("categories")) {
            if (spec.kind != FeatureKind::Categorical)
                throw DataError(src + ": real column '" + spec.name + "' declares categories");
            for (const auto &c : col["categories"]) {
                if (!c.is_string())
                    throw DataError(src + ": categories of '" + spec.name + "' must be strings");
                spec.categories.push_back(c.get<std::string>());
            }
        }
        schema.push_back(std::move(spec));
    }
    return schema;
}

Schema read_schema_json(const std::filesystem::path &path) { return parse_schema_json(read_file(path), path.string()); }

std::string schema_to_json(const Schema &schema)
{
    nlohmann::json cols = nlohmann::json::array();
    for (const auto &c : schema) {
        nlohmann::json col = {{"name", c.name}, {"kind", std::string(to_string(c.kind))}};
        if (c.kind == FeatureKind::Categorical)
            col["categories"] = c.categories;
        cols.push_back(std::move(col));
    }
    return nlohmann::json{{"columns", cols}}.dump(2) + "\n";
}

} // namespace spnx
