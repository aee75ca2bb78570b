#pragma once

#include "mpnet/errors.hpp"
#include "mpnet/executor.hpp"
#include "mpnet/infonet.hpp"
#include "mpnet/projection.hpp"
#include "mpnet/synth.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mpnet {

struct InputTable {
  /// Path as written in the config (or relative to the output directory for
  /// synthetic inputs); this is what provenance records show.
  std::string display;
  std::filesystem::path table;
  std::filesystem::path schema;
};

struct PipelineConfig {
  std::vector<InputTable> inputs;
  std::uint64_t master_seed = 20240607;
  std::size_t n_imputations = 20;
  double alpha = 0.01;
  std::size_t permutations = 200;
  double redundancy_threshold = 0.8;
  RedundancyScope redundancy_scope = RedundancyScope::within_group;
  std::vector<std::string> protected_nodes;
  std::vector<std::string> exclude;
  Definition projection_definition = Definition::average;
  double extended_lambda = 0.5;
  std::string pair_scope = "cvd-x-depression";
  bool include_risk_risk_pairs = false;
  std::size_t top_k = 10;
  std::filesystem::path output_dir = "out";
  /// Execution only: never part of the resolved config or any artifact.
  unsigned threads = 0;
  std::optional<PlantedConfig> synth;

  /// ConfigError on out-of-range or conflicting values.
  void validate() const;
};

/// YAML config; relative paths resolve against `base_dir`.
PipelineConfig parse_config(std::string_view yaml_text,
                            const std::filesystem::path &base_dir);
PipelineConfig load_config(const std::filesystem::path &path);

/// Every setting with defaults materialized, as YAML. Thread count and output
/// directory are left out so that reruns elsewhere or with other parallelism
/// produce identical artifacts.
std::string resolved_config_text(const PipelineConfig &config);

const std::vector<std::string> &stage_names();

/// Stage runner over an on-disk artifact tree:
///
///   resolved_config.yaml
///   synth/       generated tables, schemas, ground_truth.json
///   validate/    merged table, summary.json, missingness.csv
///   preprocess/  run_NN.csv + run_NN.levels.json per imputation
///   network/     nodes.csv, edges.csv, network.graphml,
///                redundancy_report.csv, direct_mi.csv
///   project/     projected_runs.csv, projected.csv, *.graphml
///   contribute/  <scope>/<layer>_ranking.csv, <layer>_top.csv
///   importance/  table.csv, table_<layer>.csv, shares.csv
///   compare/     fit.json, points.csv
///
/// Each stage directory carries manifest.json (config hash, seeds, input and
/// output hashes). A stage whose prerequisites are missing throws
/// StageOrderError.
class Pipeline {
public:
  explicit Pipeline(PipelineConfig config);

  const PipelineConfig &config() const noexcept { return config_; }

  void run(std::string_view stage);

  void synth();
  void validate();
  void preprocess();
  void network();
  void project();
  void contribute();
  void importance();
  void compare();
  void all();

private:
  std::filesystem::path stage_dir(std::string_view stage) const;
  void require(std::string_view stage, std::string_view needed) const;
  void begin_stage(std::string_view stage) const;
  void write_manifest(std::string_view stage,
                      const std::vector<std::filesystem::path> &inputs,
                      const nlohmann::ordered_json &extra) const;
  std::string run_stem(std::size_t run) const;

  PipelineConfig config_;
  Executor executor_;
  std::string config_text_;
  std::string config_hash_;
};

/// Writes <output_dir>/error.json for a failed command.
void write_error_record(const std::filesystem::path &output_dir,
                        const std::string &kind, const std::string &message,
                        int exit_code);

std::vector<AggregatedLayer>
read_aggregated_csv(const std::filesystem::path &path, std::size_t n_runs);

} // namespace mpnet
