#include "mpnet/preprocess.hpp"

#include "mpnet/csv.hpp"
#include "mpnet/errors.hpp"
#include "mpnet/format.hpp"
#include "mpnet/seeding.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

namespace mpnet {

std::size_t DiscreteMatrix::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < meta.size(); ++i)
    if (meta[i].name == name)
      return i;
  throw DomainError("variable '" + std::string(name) +
                    "' is not in the matrix");
}

void DiscreteMatrix::validate() const {
  if (codes.size() != meta.size() || n_levels.size() != meta.size())
    throw DomainError("discrete matrix: column bookkeeping mismatch");
  const unsigned bound = n_rows() ? sturges_bins(n_rows()) : 1;
  for (std::size_t c = 0; c < meta.size(); ++c) {
    if (codes[c].size() != n_rows())
      throw DomainError("discrete matrix: column '" + meta[c].name +
                        "' has wrong length");
    for (const Code v : codes[c])
      if (v >= n_levels[c])
        throw DomainError("discrete matrix: code out of range in '" +
                          meta[c].name + "'");
    if (meta[c].kind == Kind::continuous && n_levels[c] > bound)
      throw DomainError("discrete matrix: '" + meta[c].name +
                        "' exceeds the Sturges bin bound");
  }
}

std::uint64_t imputation_run_seed(std::uint64_t master_seed,
                                  std::size_t run_index) {
  return derive_seed(master_seed, Stream::imputation, run_index);
}

DataTable impute_random_sample(const DataTable &table, std::uint64_t run_seed) {
  std::vector<Column> columns = table.columns();
  for (std::size_t c = 0; c < columns.size(); ++c) {
    auto &col = columns[c];
    std::vector<double> donors;
    donors.reserve(col.values.size());
    for (const double v : col.values)
      if (!std::isnan(v))
        donors.push_back(v);
    if (donors.size() == col.values.size())
      continue;
    if (donors.empty())
      throw ImputationError(col.meta.name);

    std::mt19937_64 rng(derive_seed(run_seed, c));
    std::uniform_int_distribution<std::size_t> pick(0, donors.size() - 1);
    for (double &v : col.values)
      if (std::isnan(v))
        v = donors[pick(rng)];
  }
  return DataTable(table.participant_ids(), std::move(columns));
}

unsigned sturges_bins(std::size_t n) {
  if (n == 0)
    throw DomainError("sturges_bins: n must be positive");
  // ceil(log2 n) is the bit width of n - 1.
  return static_cast<unsigned>(std::bit_width(n - 1)) + 1;
}

std::vector<Code> discretize_quantile(std::span<const double> column,
                                      unsigned k,
                                      std::string_view column_name) {
  if (k == 0)
    throw DomainError("discretize_quantile: bin count must be positive");
  for (std::size_t r = 0; r < column.size(); ++r)
    if (!std::isfinite(column[r]))
      throw DomainError("non-finite value at row " + std::to_string(r + 1) +
                        (column_name.empty()
                             ? std::string()
                             : " of column '" + std::string(column_name) +
                                   "'"));
  const std::size_t n = column.size();
  if (n == 0)
    return {};

  std::vector<double> sorted(column.begin(), column.end());
  std::sort(sorted.begin(), sorted.end());

  // Edge i is the smallest x with F(x) >= i/k, i.e. sorted[ceil(i n / k) - 1].
  std::vector<double> edges;
  edges.reserve(k - 1);
  for (unsigned i = 1; i < k; ++i) {
    const std::size_t rank = (static_cast<std::size_t>(i) * n + k - 1) / k;
    edges.push_back(sorted[rank == 0 ? 0 : rank - 1]);
  }

  std::vector<unsigned> raw(n);
  std::vector<bool> occupied(k, false);
  for (std::size_t r = 0; r < n; ++r) {
    const auto bin = static_cast<unsigned>(
        std::lower_bound(edges.begin(), edges.end(), column[r]) -
        edges.begin());
    raw[r] = bin;
    occupied[bin] = true;
  }
  std::vector<Code> dense_of(k, 0);
  Code next = 0;
  for (unsigned b = 0; b < k; ++b)
    if (occupied[b])
      dense_of[b] = next++;

  std::vector<Code> codes(n);
  for (std::size_t r = 0; r < n; ++r)
    codes[r] = dense_of[raw[r]];
  return codes;
}

DiscreteMatrix discretize_dataset(const DataTable &table, std::size_t run_id,
                                  SeedTrace trace) {
  DiscreteMatrix m;
  m.participant_ids = table.participant_ids();
  m.run_id = run_id;
  m.seed_trace = trace;
  const std::size_t n = table.n_rows();
  const unsigned k = n ? sturges_bins(n) : 1;

  for (const auto &col : table.columns()) {
    if (col.missing_count() > 0)
      throw DomainError("column '" + col.meta.name +
                        "' still has missing values; impute first");
    m.meta.push_back(col.meta);
    std::vector<std::string> labels;
    std::vector<Code> codes;

    if (col.meta.kind == Kind::continuous) {
      codes = discretize_quantile(col.values, k, col.meta.name);
      const Code levels =
          codes.empty() ? 0 : *std::max_element(codes.begin(), codes.end()) + 1;
      std::vector<double> lo(levels, std::numeric_limits<double>::infinity());
      std::vector<double> hi(levels, -std::numeric_limits<double>::infinity());
      for (std::size_t r = 0; r < n; ++r) {
        lo[codes[r]] = std::min(lo[codes[r]], col.values[r]);
        hi[codes[r]] = std::max(hi[codes[r]], col.values[r]);
      }
      for (Code l = 0; l < levels; ++l)
        labels.push_back("[" + format_double(lo[l]) + "," +
                         format_double(hi[l]) + "]");
    } else {
      std::vector<double> distinct(col.values.begin(), col.values.end());
      std::sort(distinct.begin(), distinct.end());
      distinct.erase(std::unique(distinct.begin(), distinct.end()),
                     distinct.end());
      if (distinct.size() > std::numeric_limits<Code>::max())
        throw DomainError("column '" + col.meta.name + "' has too many levels");
      codes.resize(n);
      for (std::size_t r = 0; r < n; ++r)
        codes[r] = static_cast<Code>(
            std::lower_bound(distinct.begin(), distinct.end(), col.values[r]) -
            distinct.begin());
      for (const double v : distinct)
        labels.push_back(col.labels.empty()
                             ? format_double(v)
                             : col.labels[static_cast<std::size_t>(v)]);
    }
    m.n_levels.push_back(static_cast<std::uint32_t>(labels.size()));
    m.level_labels.push_back(std::move(labels));
    m.codes.push_back(std::move(codes));
  }
  return m;
}

void write_discrete_matrix(const DiscreteMatrix &m,
                           const std::filesystem::path &dir,
                           const std::string &stem) {
  {
    std::ofstream os(dir / (stem + ".csv"), std::ios::binary);
    if (!os)
      throw DomainError("cannot write '" + (dir / (stem + ".csv")).string() +
                        "'");
    csv::Row row{"id"};
    for (const auto &meta : m.meta)
      row.push_back(meta.name);
    csv::write_row(os, row);
    for (std::size_t r = 0; r < m.n_rows(); ++r) {
      row.clear();
      row.push_back(m.participant_ids[r]);
      for (std::size_t c = 0; c < m.n_columns(); ++c)
        row.push_back(std::to_string(m.codes[c][r]));
      csv::write_row(os, row);
    }
  }

  nlohmann::ordered_json levels;
  levels["run_id"] = m.run_id;
  levels["seed_trace"] = {{"master_seed", m.seed_trace.master_seed},
                          {"run_seed", m.seed_trace.run_seed}};
  auto &cols = levels["columns"] = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < m.n_columns(); ++c)
    cols.push_back({{"name", m.meta[c].name},
                    {"group", to_string(m.meta[c].group)},
                    {"kind", to_string(m.meta[c].kind)},
                    {"units", m.meta[c].units},
                    {"n_levels", m.n_levels[c]},
                    {"levels", m.level_labels[c]}});
  std::ofstream os(dir / (stem + ".levels.json"), std::ios::binary);
  os << levels.dump(2) << '\n';
}

DiscreteMatrix read_discrete_matrix(const std::filesystem::path &dir,
                                    const std::string &stem) {
  const auto levels_path = dir / (stem + ".levels.json");
  std::ifstream is(levels_path, std::ios::binary);
  if (!is)
    throw DomainError("cannot open '" + levels_path.string() + "'");
  const auto levels = nlohmann::json::parse(is);

  DiscreteMatrix m;
  m.run_id = levels.at("run_id").get<std::size_t>();
  m.seed_trace.master_seed =
      levels.at("seed_trace").at("master_seed").get<std::uint64_t>();
  m.seed_trace.run_seed =
      levels.at("seed_trace").at("run_seed").get<std::uint64_t>();
  for (const auto &c : levels.at("columns")) {
    VariableMeta meta;
    meta.name = c.at("name").get<std::string>();
    meta.group = parse_group(c.at("group").get<std::string>());
    meta.kind = parse_kind(c.at("kind").get<std::string>());
    meta.units = c.at("units").get<std::string>();
    m.meta.push_back(std::move(meta));
    m.n_levels.push_back(c.at("n_levels").get<std::uint32_t>());
    m.level_labels.push_back(c.at("levels").get<std::vector<std::string>>());
  }

  const auto rows = csv::read_file(dir / (stem + ".csv"));
  if (rows.empty() || rows.front().size() != m.meta.size() + 1)
    throw DomainError("code matrix '" + stem + "' does not match its levels");
  m.codes.assign(m.meta.size(), {});
  for (auto &col : m.codes)
    col.reserve(rows.size() - 1);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != m.meta.size() + 1)
      throw ParseError("ragged code row " + std::to_string(r + 1), r + 1, 0);
    m.participant_ids.push_back(rows[r][0]);
    for (std::size_t c = 0; c < m.meta.size(); ++c) {
      unsigned v = 0;
      const auto &cell = rows[r][c + 1];
      const auto [ptr, ec] =
          std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size())
        throw ParseError("bad code '" + cell + "'", r + 1, c + 2);
      m.codes[c].push_back(static_cast<Code>(v));
    }
  }
  m.validate();
  return m;
}

} // namespace mpnet
