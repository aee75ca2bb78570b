#pragma once

#include "mpnet/executor.hpp"
#include "mpnet/graphml.hpp"
#include "mpnet/preprocess.hpp"
#include "mpnet/variables.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mpnet {

/// Contingency table of two code vectors, row-major over (x, y) levels.
struct JointDistribution {
  std::size_t x_levels = 0;
  std::size_t y_levels = 0;
  std::vector<std::uint64_t> counts;
  std::uint64_t n = 0;

  std::uint64_t at(std::size_t a, std::size_t b) const {
    return counts[a * y_levels + b];
  }
  std::vector<std::uint64_t> x_marginal() const;
  std::vector<std::uint64_t> y_marginal() const;
  JointDistribution transposed() const;

  /// Throws DomainError unless the shape matches and the total is positive.
  static JointDistribution from_counts(std::size_t x_levels,
                                       std::size_t y_levels,
                                       std::vector<std::uint64_t> counts);
};

JointDistribution joint_counts(std::span<const Code> x,
                               std::span<const Code> y);

/// Plug-in mutual information in bits. Cell terms are summed in ascending
/// order, so the result does not depend on the table's orientation.
double mutual_information(const JointDistribution &j);

/// Plug-in Shannon entropy of a code vector, in bits.
double entropy(std::span<const Code> x);

struct PermutationTest {
  double mi = 0.0;
  double p_value = 1.0;
  std::size_t exceedances = 0;
  std::size_t evaluated = 0;
  bool complete = true;
};

/// Permutation null of one margin. Replicate b is a Fisher-Yates shuffle of y
/// driven by its own stream derive_seed(seed, b) and is generated on first
/// use, so a bank can be shared by every partner of y and truncated tests
/// cost only the replicates they touch.
class PermutationNull {
public:
  PermutationNull(std::span<const Code> y, std::size_t replicates,
                  std::uint64_t seed);

  std::size_t replicates() const noexcept { return replicates_; }
  std::span<const Code> replicate(std::size_t b);

  /// p = (1 + #{b : MI(x, y_b) >= MI(x, y)}) / (B + 1). With stop_alpha < 1
  /// the test stops as soon as p >= stop_alpha is certain; such results are
  /// marked incomplete and carry a lower bound on p. A constant margin gives
  /// p = 1 without resampling.
  PermutationTest test(std::span<const Code> x, double stop_alpha = 1.0);

private:
  double joint_statistic(std::span<const std::uint32_t> x_offsets,
                         std::span<const Code> y,
                         std::vector<std::uint32_t> &cells) const;

  std::vector<Code> y_;
  std::uint32_t y_levels_ = 0;
  std::size_t replicates_;
  std::uint64_t seed_;
  std::vector<std::vector<Code>> bank_;
  std::vector<double> count_log_count_;
};

double permutation_pvalue(std::span<const Code> x, std::span<const Code> y,
                          std::size_t replicates, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Redundancy filtering

/// Mean (over imputation runs) pairwise MI and entropies. Pairs outside the
/// requested scope are left at zero and flagged as not evaluated.
struct PairwiseInformation {
  std::vector<VariableMeta> nodes;
  std::vector<double> entropy;
  std::vector<double> mi;
  std::vector<bool> evaluated;

  double at(std::size_t i, std::size_t j) const {
    return mi[i * nodes.size() + j];
  }
  bool was_evaluated(std::size_t i, std::size_t j) const {
    return evaluated[i * nodes.size() + j];
  }
  /// MI / min(H_i, H_j); zero when either variable is constant.
  double normalized(std::size_t i, std::size_t j) const;
};

enum class RedundancyScope { within_group, all_pairs };

PairwiseInformation pairwise_information(std::span<const DiscreteMatrix> runs,
                                         RedundancyScope scope,
                                         const Executor &executor = Executor{});

struct RedundancyConfig {
  double threshold = 0.8;
  std::set<std::string> protected_nodes;
  std::vector<std::string> pre_excluded;
  /// Raw (pre-imputation) missing rate per variable; drives the drop rule.
  std::map<std::string, double> missingness;
};

struct DropRecord {
  std::string dropped;
  std::string partner;
  double normalized_mi = 0.0;
  std::string reason;
};

struct RedundancyResult {
  std::vector<std::string> kept;
  std::vector<DropRecord> drops;
};

/// Walks evaluated pairs in descending normalized MI. For each pair above the
/// threshold whose members are both still kept and not both protected, drops
/// the unprotected member, else the one with higher raw missingness, else the
/// lexicographically larger name.
RedundancyResult redundancy_filter(const PairwiseInformation &info,
                                   const RedundancyConfig &config);

// ---------------------------------------------------------------------------
// Significant network

struct MiEdge {
  std::size_t i = 0;
  std::size_t j = 0;
  double mi = 0.0;
  double p_value = 1.0;

  bool operator==(const MiEdge &) const = default;
};

/// Significant multipartite MI network for one imputation run. Edges are
/// undirected with i < j and sorted by (i, j).
struct MiNetwork {
  std::vector<VariableMeta> nodes;
  std::vector<MiEdge> edges;
  double alpha = 0.01;
  std::size_t run_id = 0;
  bool within_layer_edges = false;

  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;
  Group group(std::size_t i) const { return nodes[i].group; }
  void validate() const;
};

struct NetworkConfig {
  double alpha = 0.01;
  std::size_t permutations = 200;
  /// Test biomarker pairs inside each omics layer (extended projection).
  bool within_layer_edges = false;
};

/// Tests every biomarker x {phenotype, symptom, risk factor} pair among the
/// kept variables (plus same-layer biomarker pairs when requested) and keeps
/// pairs with p < alpha. The null bank of variable c is seeded by
/// derive_seed(seed, permutation, c), c being its matrix column.
MiNetwork build_significant_network(const DiscreteMatrix &m,
                                    std::span<const std::string> kept,
                                    const NetworkConfig &config,
                                    std::uint64_t seed,
                                    const Executor &executor = Executor{});

struct DirectMi {
  std::string a;
  std::string b;
  double mi = 0.0;
  double p_value = 1.0;
};

/// MI with full permutation p-values for the given variable pairs, with no
/// significance filter.
std::vector<DirectMi>
direct_mutual_information(const DiscreteMatrix &m,
                          std::span<const std::pair<std::string, std::string>> pairs,
                          std::size_t permutations, std::uint64_t seed,
                          const Executor &executor = Executor{});

// Exports -------------------------------------------------------------------

void write_nodes_csv(std::ostream &os, const std::vector<VariableMeta> &nodes);
std::vector<VariableMeta> read_nodes_csv(const std::filesystem::path &path);

/// Columns: source, target, mi_bits, p_value, run_id.
void write_edges_csv(std::ostream &os, std::span<const MiNetwork> runs);
std::vector<MiNetwork> read_networks(const std::filesystem::path &nodes_csv,
                                     const std::filesystem::path &edges_csv,
                                     std::size_t n_runs, double alpha,
                                     bool within_layer_edges);

void write_drop_report(std::ostream &os, std::span<const DropRecord> drops);

/// Across-run mean MI per edge (absent runs count as zero) as GraphML.
graphml::Graph mean_network_graph(std::span<const MiNetwork> runs);

} // namespace mpnet
