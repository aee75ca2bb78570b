#pragma once

#include "mpnet/graphml.hpp"
#include "mpnet/infonet.hpp"
#include "mpnet/variables.hpp"

#include <map>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mpnet {

/// Projected-score definitions, from coarse to refined:
///  count     number of shared significant neighbours in the layer
///  average   sum over shared neighbours of the mean of the two MI weights
///  extended  average plus lambda times, for every path X_i-Y_k-Y_l-X_j
///            through an edge between two layer biomarkers, the mean of the
///            three MI weights on the path
enum class Definition { count, average, extended };

std::string_view to_string(Definition d) noexcept;
Definition parse_definition(std::string_view s);

struct ProjectionOptions {
  Definition definition = Definition::average;
  double lambda = 0.5;
};

enum class ScopeKind {
  cvd_x_depression,
  phenotypes,
  risk_x_phenotype,
  full,
  explicit_pairs
};

/// Which pairs of non-biomarker nodes are projected.
struct PairScope {
  ScopeKind kind = ScopeKind::cvd_x_depression;
  /// Only consulted by `full`.
  bool include_risk_risk = false;
  std::vector<std::pair<std::string, std::string>> pairs;
};

/// Accepts cvd-x-depression, phenotypes, risk-x-phenotype, full, or
/// pair:A,B[;C,D...]. Throws ConfigError otherwise.
PairScope parse_pair_scope(std::string_view s);
std::string to_string(const PairScope &scope);

/// Node index pairs selected by a scope, in node order. cvd-x-depression
/// pairs are oriented (CVD, symptom); risk-x-phenotype pairs (risk, phenotype).
std::vector<std::pair<std::size_t, std::size_t>>
scope_pairs(const MiNetwork &net, const PairScope &scope);

/// Significant neighbours of every node inside one omics layer, sorted by
/// node index, plus same-layer biomarker adjacency when the network has it.
class LayerIndex {
public:
  struct Neighbor {
    std::size_t node;
    double weight;
  };

  /// Throws ConfigError if `layer` is not an omics group.
  LayerIndex(const MiNetwork &net, Group layer);

  Group layer() const noexcept { return layer_; }
  std::span<const Neighbor> neighbors(std::size_t node) const {
    return adjacency_[node];
  }
  /// Same-layer biomarker neighbours (empty unless within-layer edges exist).
  std::span<const Neighbor> biomarker_neighbors(std::size_t node) const {
    return layer_adjacency_[node];
  }

private:
  Group layer_;
  std::vector<std::vector<Neighbor>> adjacency_;
  std::vector<std::vector<Neighbor>> layer_adjacency_;
};

/// Projected score of one pair through one layer. Zero without shared
/// structure; DomainError if either node is a biomarker or they coincide.
double project_pair(const LayerIndex &index, const MiNetwork &net,
                    std::size_t xi, std::size_t xj,
                    const ProjectionOptions &options = {});
double project_pair(const MiNetwork &net, std::string_view xi,
                    std::string_view xj, Group layer,
                    const ProjectionOptions &options = {});

struct ProjectedEdge {
  std::string a;
  std::string b;
  double w = 0.0;
};

struct ProjectedLayer {
  Group layer = Group::metabolome;
  Definition definition = Definition::average;
  std::size_t run_id = 0;
  std::vector<ProjectedEdge> edges;
};

/// One edge per scope pair with w > 0, in scope order.
ProjectedLayer project_layer(const MiNetwork &net, const PairScope &scope,
                             Group layer, const ProjectionOptions &options = {});

/// Contribution of one biomarker: over scope pairs where it neighbours both
/// ends, the mean of its two MI weights, summed. DomainError for
/// non-biomarkers.
double contribution(const MiNetwork &net, std::string_view biomarker,
                    const PairScope &scope);

/// Contribution of every biomarker of the layer (zeros included), computed by
/// one pass over the scope pairs.
std::map<std::string, double> layer_contributions(const MiNetwork &net,
                                                  const PairScope &scope,
                                                  Group layer);

struct RankEntry {
  std::string name;
  double mean = 0.0;
  double se = 0.0;
};

struct ContributionRanking {
  Group layer = Group::metabolome;
  std::string scope;
  std::size_t n_runs = 0;
  /// Standard error is undefined for a single run and reported as zero.
  bool degenerate_n = false;
  std::vector<RankEntry> entries;
  std::vector<RankEntry> top;
};

/// Per-biomarker mean and standard error of the mean (sample sd with divisor
/// n - 1, over sqrt n) across runs; biomarkers absent from a run count as 0.
/// Sorted by descending mean, ties by name.
ContributionRanking
rank_contributions(std::span<const std::map<std::string, double>> runs,
                   std::size_t top_k);

struct AggregatedEdge {
  std::string a;
  std::string b;
  double mean_w = 0.0;
  double se_w = 0.0;
  std::size_t present_runs = 0;
};

struct AggregatedLayer {
  Group layer = Group::metabolome;
  Definition definition = Definition::average;
  std::size_t n_runs = 0;
  std::vector<AggregatedEdge> edges;
};

/// Zero-filled mean and standard error per edge across runs. Edges are
/// ordered by first appearance in run order. ConfigError on mixed layers or
/// definitions.
AggregatedLayer aggregate_runs(std::span<const ProjectedLayer> runs);

struct ImportanceShare {
  std::string risk_factor;
  std::string phenotype;
  double r = 0.0;
};

struct RelativeImportance {
  std::vector<std::string> risk_factors;
  std::vector<ImportanceShare> per_phenotype;
  /// Percentages per risk factor, aligned with `risk_factors`.
  std::vector<double> cvd_percent;
  std::vector<double> depression_percent;
  std::size_t cvd_phenotypes_used = 0;
  std::size_t depression_phenotypes_used = 0;
  /// Phenotypes with no risk-factor score; left out of the group means.
  std::vector<std::string> excluded;
};

/// Scores (risk factor, phenotype) pairs by summing w over the given layers,
/// normalizes per phenotype, and averages the shares over CVD phenotypes and
/// over depressive symptoms.
RelativeImportance relative_importance(std::span<const AggregatedLayer> layers,
                                       const std::vector<VariableMeta> &nodes);

struct ComparisonPoint {
  std::string a;
  std::string b;
  double w = 0.0;
  double mi = 0.0;
};

struct FitReport {
  std::size_t n_pairs = 0;
  std::size_t n_used = 0;
  std::size_t n_excluded = 0;
  double pearson_r = 0.0;
  double slope = 0.0;
  double intercept = 0.0;
  double slope_p_value = 1.0;
};

/// Least-squares fit of log10 w on log10 MI over pairs with both positive.
/// InsufficientDataError below three usable pairs or with zero variance.
FitReport compare_projection_to_direct_mi(std::span<const ComparisonPoint> points);

// Exports -------------------------------------------------------------------

/// node_a,node_b,layer,definition,mean_w,se_w,n_runs
void write_aggregated_csv_header(std::ostream &os);
void write_aggregated_csv_rows(std::ostream &os, const AggregatedLayer &layer);

/// run_id,node_a,node_b,layer,definition,w
void write_projected_runs_csv(std::ostream &os,
                              std::span<const ProjectedLayer> runs);
std::vector<ProjectedLayer>
read_projected_runs_csv(const std::filesystem::path &path);

graphml::Graph projected_graph(std::span<const AggregatedLayer> layers,
                               const std::vector<VariableMeta> &nodes);

} // namespace mpnet
