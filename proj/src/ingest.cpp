#include "mpnet/ingest.hpp"

#include "mpnet/csv.hpp"
#include "mpnet/errors.hpp"
#include "mpnet/format.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace mpnet {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string_view::npos)
    return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

std::optional<double> parse_number(std::string_view s) {
  if (!s.empty() && s.front() == '+')
    s.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    return std::nullopt;
  return value;
}

} // namespace

bool Column::is_missing(std::size_t row) const {
  return std::isnan(values[row]);
}

std::size_t Column::missing_count() const {
  return static_cast<std::size_t>(std::count_if(
      values.begin(), values.end(), [](double v) { return std::isnan(v); }));
}

double Column::missing_rate() const {
  return values.empty() ? 0.0
                        : static_cast<double>(missing_count()) / values.size();
}

DataTable::DataTable(std::vector<std::string> participant_ids,
                     std::vector<Column> columns)
    : ids_(std::move(participant_ids)), columns_(std::move(columns)) {
  std::unordered_set<std::string_view> seen_ids;
  for (const auto &id : ids_)
    if (!seen_ids.insert(id).second)
      throw SchemaError("duplicate participant id '" + id + "'");
  std::unordered_set<std::string_view> seen_names;
  for (const auto &c : columns_) {
    if (!seen_names.insert(c.meta.name).second)
      throw SchemaError("duplicate variable name '" + c.meta.name + "'",
                        {c.meta.name});
    if (c.values.size() != ids_.size())
      throw SchemaError("column '" + c.meta.name + "' has " +
                            std::to_string(c.values.size()) +
                            " values, expected " + std::to_string(ids_.size()),
                        {c.meta.name});
  }
}

std::optional<std::size_t> DataTable::find(std::string_view name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i)
    if (columns_[i].meta.name == name)
      return i;
  return std::nullopt;
}

const Column &DataTable::column(std::string_view name) const {
  const auto idx = find(name);
  if (!idx)
    throw SchemaError("no column named '" + std::string(name) + "'",
                      {std::string(name)});
  return columns_[*idx];
}

Schema load_schema(const std::filesystem::path &path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::Exception &e) {
    throw SchemaError("cannot read schema '" + path.string() +
                      "': " + e.what());
  }
  Schema schema;
  if (!root["id_column"])
    throw SchemaError("schema '" + path.string() + "' lacks id_column");
  schema.id_column = root["id_column"].as<std::string>();
  if (const auto tokens = root["missing_tokens"]) {
    schema.missing_tokens.clear();
    for (const auto &t : tokens)
      schema.missing_tokens.push_back(t.as<std::string>());
  }
  const auto cols = root["columns"];
  if (!cols || !cols.IsSequence())
    throw SchemaError("schema '" + path.string() + "' lacks a columns list");
  for (const auto &c : cols) {
    VariableMeta meta;
    if (!c["name"] || !c["group"] || !c["kind"])
      throw SchemaError("schema '" + path.string() +
                        "': every column needs name, group and kind");
    meta.name = c["name"].as<std::string>();
    meta.group = parse_group(c["group"].as<std::string>());
    meta.kind = parse_kind(c["kind"].as<std::string>());
    if (c["units"])
      meta.units = c["units"].as<std::string>();
    schema.columns.push_back(std::move(meta));
  }
  return schema;
}

void write_schema(const Schema &schema, const std::filesystem::path &path) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "id_column" << YAML::Value << schema.id_column;
  out << YAML::Key << "missing_tokens" << YAML::Value << YAML::Flow
      << YAML::BeginSeq;
  for (const auto &t : schema.missing_tokens)
    out << YAML::DoubleQuoted << t;
  out << YAML::EndSeq;
  out << YAML::Key << "columns" << YAML::Value << YAML::BeginSeq;
  for (const auto &c : schema.columns) {
    out << YAML::Flow << YAML::BeginMap;
    out << YAML::Key << "name" << YAML::Value << c.name;
    out << YAML::Key << "group" << YAML::Value << std::string(to_string(c.group));
    out << YAML::Key << "kind" << YAML::Value << std::string(to_string(c.kind));
    out << YAML::Key << "units" << YAML::Value << YAML::DoubleQuoted << c.units;
    out << YAML::EndMap;
  }
  out << YAML::EndSeq << YAML::EndMap;
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw SchemaError("cannot write schema '" + path.string() + "'");
  os << out.c_str() << '\n';
}

Schema schema_of(const DataTable &table, std::string id_column) {
  Schema schema;
  schema.id_column = std::move(id_column);
  schema.missing_tokens = {"", "NA", "NaN"};
  for (const auto &c : table.columns())
    schema.columns.push_back(c.meta);
  return schema;
}

DataTable load_table(const std::filesystem::path &csv_path,
                     const Schema &schema) {
  std::ifstream in(csv_path, std::ios::binary);
  if (!in)
    throw SchemaError("cannot open table '" + csv_path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  return load_table(std::string_view(text), schema);
}

DataTable load_table(std::string_view csv_text, const Schema &schema) {
  if (csv_text.rfind("\xEF\xBB\xBF", 0) == 0)
    csv_text.remove_prefix(3);
  const auto rows = csv::parse(csv_text);
  if (rows.empty())
    throw SchemaError("table has no header row");
  const auto &header = rows.front();

  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < header.size(); ++i)
    if (!position.emplace(std::string(trim(header[i])), i).second)
      throw SchemaError("duplicate header column '" + header[i] + "'",
                        {header[i]});

  std::vector<std::string> absent;
  if (!position.contains(schema.id_column))
    absent.push_back(schema.id_column);
  std::set<std::string> declared{schema.id_column};
  for (const auto &c : schema.columns) {
    declared.insert(c.name);
    if (!position.contains(c.name))
      absent.push_back(c.name);
  }
  std::vector<std::string> undeclared;
  for (const auto &h : header)
    if (!declared.contains(std::string(trim(h))))
      undeclared.push_back(std::string(trim(h)));
  if (!absent.empty() || !undeclared.empty()) {
    std::string msg = "schema/file column mismatch";
    std::vector<std::string> offending;
    if (!absent.empty()) {
      msg += "; missing from file:";
      for (const auto &a : absent)
        msg += " " + a;
    }
    if (!undeclared.empty()) {
      msg += "; not in schema:";
      for (const auto &u : undeclared)
        msg += " " + u;
    }
    offending.insert(offending.end(), absent.begin(), absent.end());
    offending.insert(offending.end(), undeclared.begin(), undeclared.end());
    throw SchemaError(msg, offending);
  }

  auto is_missing_token = [&](std::string_view cell) {
    return std::any_of(
        schema.missing_tokens.begin(), schema.missing_tokens.end(),
        [&](const std::string &tok) { return iequals(cell, trim(tok)); });
  };

  const std::size_t n = rows.size() - 1;
  const std::size_t id_pos = position.at(schema.id_column);
  std::vector<std::string> ids;
  ids.reserve(n);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != header.size())
      throw ParseError("row " + std::to_string(r + 1) + " has " +
                           std::to_string(rows[r].size()) + " fields, expected " +
                           std::to_string(header.size()),
                       r + 1, rows[r].size());
    const auto id = trim(rows[r][id_pos]);
    if (id.empty())
      throw ParseError("empty participant id on row " + std::to_string(r + 1),
                       r + 1, id_pos + 1);
    ids.emplace_back(id);
  }

  std::vector<Column> columns;
  columns.reserve(schema.columns.size());
  for (const auto &meta : schema.columns) {
    const std::size_t pos = position.at(meta.name);
    Column col;
    col.meta = meta;
    col.values.assign(n, kMissing);

    std::vector<std::optional<double>> numeric(n);
    bool all_numeric = true;
    for (std::size_t r = 0; r < n; ++r) {
      const auto cell = trim(rows[r + 1][pos]);
      if (is_missing_token(cell))
        continue;
      numeric[r] = parse_number(cell);
      if (!numeric[r]) {
        if (meta.kind != Kind::categorical)
          throw ParseError("cannot parse '" + std::string(cell) +
                               "' as a number in column '" + meta.name +
                               "' (row " + std::to_string(r + 2) +
                               ", column " + std::to_string(pos + 1) + ")",
                           r + 2, pos + 1);
        all_numeric = false;
      }
    }

    if (all_numeric) {
      for (std::size_t r = 0; r < n; ++r)
        if (numeric[r])
          col.values[r] = *numeric[r];
    } else {
      std::set<std::string> tokens;
      for (std::size_t r = 0; r < n; ++r) {
        const auto cell = trim(rows[r + 1][pos]);
        if (!is_missing_token(cell))
          tokens.emplace(cell);
      }
      col.labels.assign(tokens.begin(), tokens.end());
      for (std::size_t r = 0; r < n; ++r) {
        const auto cell = trim(rows[r + 1][pos]);
        if (is_missing_token(cell))
          continue;
        const auto it = std::lower_bound(col.labels.begin(), col.labels.end(),
                                         std::string(cell));
        col.values[r] = static_cast<double>(it - col.labels.begin());
      }
    }
    columns.push_back(std::move(col));
  }
  return DataTable(std::move(ids), std::move(columns));
}

void write_table(const DataTable &table, const std::filesystem::path &csv_path,
                 const std::filesystem::path &schema_path,
                 std::string id_column) {
  std::ofstream os(csv_path, std::ios::binary);
  if (!os)
    throw SchemaError("cannot write table '" + csv_path.string() + "'");
  csv::Row row{id_column};
  for (const auto &c : table.columns())
    row.push_back(c.meta.name);
  csv::write_row(os, row);
  for (std::size_t r = 0; r < table.n_rows(); ++r) {
    row.clear();
    row.push_back(table.participant_ids()[r]);
    for (const auto &c : table.columns()) {
      if (c.is_missing(r))
        row.emplace_back("NA");
      else if (!c.labels.empty())
        row.push_back(c.labels[static_cast<std::size_t>(c.values[r])]);
      else
        row.push_back(format_double(c.values[r]));
    }
    csv::write_row(os, row);
  }
  write_schema(schema_of(table, std::move(id_column)), schema_path);
}

DataTable merge_on_participant(std::span<const DataTable> tables) {
  if (tables.empty())
    throw ConfigError("merge needs at least one table");

  std::set<std::string> names;
  std::vector<std::string> duplicates;
  for (const auto &t : tables)
    for (const auto &c : t.columns())
      if (!names.insert(c.meta.name).second)
        duplicates.push_back(c.meta.name);
  if (!duplicates.empty()) {
    std::string msg = "duplicate variable names across tables:";
    for (const auto &d : duplicates)
      msg += " " + d;
    throw SchemaError(msg, duplicates);
  }

  std::vector<std::unordered_map<std::string_view, std::size_t>> index(
      tables.size());
  for (std::size_t t = 0; t < tables.size(); ++t) {
    const auto &ids = tables[t].participant_ids();
    for (std::size_t r = 0; r < ids.size(); ++r)
      index[t].emplace(ids[r], r);
  }

  std::vector<std::string> ids;
  std::vector<std::vector<std::size_t>> source_rows(tables.size());
  for (const auto &id : tables.front().participant_ids()) {
    bool everywhere = true;
    for (std::size_t t = 1; t < tables.size() && everywhere; ++t)
      everywhere = index[t].contains(id);
    if (!everywhere)
      continue;
    ids.push_back(id);
    for (std::size_t t = 0; t < tables.size(); ++t)
      source_rows[t].push_back(index[t].at(id));
  }
  if (ids.empty())
    throw EmptyJoinError("no participant id is present in every table");

  std::vector<Column> columns;
  for (std::size_t t = 0; t < tables.size(); ++t) {
    for (const auto &c : tables[t].columns()) {
      Column out;
      out.meta = c.meta;
      out.labels = c.labels;
      out.values.reserve(ids.size());
      for (const auto r : source_rows[t])
        out.values.push_back(c.values[r]);
      columns.push_back(std::move(out));
    }
  }
  return DataTable(std::move(ids), std::move(columns));
}

} // namespace mpnet
