#pragma once

#include "mpnet/variables.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mpnet {

/// One variable. Missing cells hold NaN. Categorical columns whose tokens are
/// not all numeric are stored as indices into `labels` (sorted
/// lexicographically); all other columns hold their numeric values.
struct Column {
  VariableMeta meta;
  std::vector<double> values;
  std::vector<std::string> labels;

  bool is_missing(std::size_t row) const;
  std::size_t missing_count() const;
  double missing_rate() const;
};

/// Rectangular participant-by-variable table. Immutable once built; the
/// constructor enforces equal column lengths and unique ids and names.
class DataTable {
public:
  DataTable() = default;
  DataTable(std::vector<std::string> participant_ids,
            std::vector<Column> columns);

  const std::vector<std::string> &participant_ids() const noexcept {
    return ids_;
  }
  const std::vector<Column> &columns() const noexcept { return columns_; }
  std::size_t n_rows() const noexcept { return ids_.size(); }
  std::size_t n_columns() const noexcept { return columns_.size(); }

  std::optional<std::size_t> find(std::string_view name) const;
  const Column &column(std::string_view name) const;

private:
  std::vector<std::string> ids_;
  std::vector<Column> columns_;
};

/// Sidecar describing one CSV table.
struct Schema {
  std::string id_column;
  std::vector<std::string> missing_tokens{"", "NA", "NaN"};
  std::vector<VariableMeta> columns;
};

Schema load_schema(const std::filesystem::path &path);
void write_schema(const Schema &schema, const std::filesystem::path &path);
Schema schema_of(const DataTable &table, std::string id_column = "id");

/// Loads a CSV whose header matches `schema` exactly (id column plus every
/// declared column, any order). Missing tokens match case-insensitively.
DataTable load_table(const std::filesystem::path &csv_path,
                     const Schema &schema);
DataTable load_table(std::string_view csv_text, const Schema &schema);

/// Writes the table and its sidecar; missing cells are written as "NA".
void write_table(const DataTable &table, const std::filesystem::path &csv_path,
                 const std::filesystem::path &schema_path,
                 std::string id_column = "id");

/// Inner join on participant id. Rows follow the first table's order; columns
/// follow table order, then each table's column order.
DataTable merge_on_participant(std::span<const DataTable> tables);

} // namespace mpnet
