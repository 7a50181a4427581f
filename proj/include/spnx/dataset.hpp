#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spnx/schema.hpp"

namespace spnx {

/// Rectangular table of finite values. Categorical cells hold category indices.
class Dataset {
  public:
    Dataset() = default;
    /// `values` is row-major with `schema.size()` columns. Throws DataError on
    /// ragged input, non-finite cells or category indices outside the schema.
    Dataset(Schema schema, std::vector<double> values);

    const Schema &schema() const { return schema_; }
    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return schema_.size(); }
    bool empty() const { return rows_ == 0; }

    double at(std::size_t row, std::size_t col) const { return values_[row * cols() + col]; }
    std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols(), cols()}; }
    std::vector<double> column(std::size_t c) const;
    const std::vector<double> &values() const { return values_; }

  private:
    Schema schema_;
    std::size_t rows_ = 0;
    std::vector<double> values_;
};

/// Reads a CSV with a header row. With a schema, kinds and category sets are as
/// declared (a categorical column without categories infers them). Without one,
/// a column is real iff every cell parses as a decimal number; otherwise it is
/// categorical with categories in first-appearance order.
Dataset load_csv(const std::filesystem::path &path, const std::optional<Schema> &schema = std::nullopt);
Dataset parse_csv(std::string_view text, const std::optional<Schema> &schema = std::nullopt,
                  std::string_view source = "<csv>");

std::string to_csv(const Dataset &data);
void write_csv(const Dataset &data, const std::filesystem::path &path);

/// Schema sidecar: {"columns":[{"name","kind","categories"?}]}.
Schema read_schema_json(const std::filesystem::path &path);
Schema parse_schema_json(std::string_view text, std::string_view source = "<schema>");
std::string schema_to_json(const Schema &schema);

} // namespace spnx
