#pragma once

#include "mpnet/ingest.hpp"
#include "mpnet/variables.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace mpnet {

using Code = std::uint16_t;

struct SeedTrace {
  std::uint64_t master_seed = 0;
  std::uint64_t run_seed = 0;
};

/// Complete, discretized observation matrix for one imputation run. Codes
/// are stored column-major; column c takes values in [0, n_levels[c]).
struct DiscreteMatrix {
  std::vector<std::string> participant_ids;
  std::vector<VariableMeta> meta;
  std::vector<std::vector<Code>> codes;
  std::vector<std::uint32_t> n_levels;
  std::vector<std::vector<std::string>> level_labels;
  std::size_t run_id = 0;
  SeedTrace seed_trace;

  std::size_t n_rows() const noexcept { return participant_ids.size(); }
  std::size_t n_columns() const noexcept { return meta.size(); }
  std::size_t index_of(std::string_view name) const;

  /// Throws DomainError if any structural invariant is violated.
  void validate() const;
};

/// Seed of imputation run `run_index` under the master seed.
std::uint64_t imputation_run_seed(std::uint64_t master_seed,
                                  std::size_t run_index);

/// Replaces every missing cell by a uniform draw (with replacement) from the
/// observed values of the same column. Column c draws from its own stream
/// derived from (run_seed, c).
DataTable impute_random_sample(const DataTable &table, std::uint64_t run_seed);

/// ceil(log2 n) + 1.
unsigned sturges_bins(std::size_t n);

/// Equal-frequency binning with edges at the empirical inverse-CDF quantiles
/// i/k. A value goes to the number of edges strictly below it, so ties share
/// a bin. Codes are then compacted to the occupied bins, preserving order.
std::vector<Code> discretize_quantile(std::span<const double> column,
                                      unsigned k,
                                      std::string_view column_name = {});

/// Quantile-bins continuous columns with k = sturges_bins(n_rows) and
/// densely re-codes ordinal and categorical columns in ascending level order.
DiscreteMatrix discretize_dataset(const DataTable &table,
                                  std::size_t run_id = 0,
                                  SeedTrace trace = {});

/// Audit dump: `<stem>.csv` with codes and `<stem>.levels.json` with the
/// per-column level labels and seed trace.
void write_discrete_matrix(const DiscreteMatrix &m,
                           const std::filesystem::path &dir,
                           const std::string &stem);
DiscreteMatrix read_discrete_matrix(const std::filesystem::path &dir,
                                    const std::string &stem);

} // namespace mpnet
