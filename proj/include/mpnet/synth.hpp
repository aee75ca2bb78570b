#pragma once

#include "mpnet/ingest.hpp"
#include "mpnet/projection.hpp"
#include "mpnet/variables.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace mpnet {

struct Mediator {
  std::string biomarker;
  std::vector<std::string> linked;
  double effect = 1.0;
};

/// Shape and ground truth of a synthetic multi-omics dataset. Biomarkers are
/// named met_000.., lip_000..; CVD phenotypes cvd_00..; depressive symptoms
/// b01..; risk factors sex, bmi, age, smoke, ses, exercise, then rf_6...
struct PlantedConfig {
  std::size_t n_rows = 1500;
  std::map<Group, std::size_t> layer_sizes{{Group::metabolome, 200},
                                           {Group::lipidome, 200}};
  std::size_t phenotype_count = 7;
  std::size_t symptom_count = 10;
  std::size_t risk_factor_count = 6;
  std::vector<Mediator> mediators;
  double noise_sd = 1.0;
  double missing_rate = 0.05;
  std::uint64_t seed = 1;

  /// Throws ConfigError on non-positive effects, missing_rate outside [0, 1),
  /// or mediators naming unknown variables.
  void validate() const;
};

std::vector<std::string> biomarker_names(Group layer, std::size_t count);
std::vector<std::string> phenotype_names(std::size_t count);
std::vector<std::string> symptom_names(std::size_t count);
std::vector<std::string> risk_factor_names(std::size_t count);

/// Plants `per_layer` mediators in every layer at seeded random positions.
/// Mediator g links CVD phenotype g mod C, symptom g mod D and risk factor
/// g mod R; effects are spaced evenly over [min_effect, max_effect].
void plant_default_mediators(PlantedConfig &config, std::size_t per_layer,
                             double min_effect = 0.8, double max_effect = 1.6);

struct InducedPair {
  std::string a;
  std::string b;
  std::vector<std::string> mediators;
  /// MI of the two latent Gaussian scores, -0.5 log2(1 - rho^2).
  double latent_mi_bits = 0.0;
};

struct GroundTruth {
  std::vector<Mediator> mediators;
  std::map<std::string, Group> mediator_layer;
  std::vector<InducedPair> comorbid_pairs;
  std::vector<InducedPair> risk_pairs;

  bool is_mediator(const std::string &name) const {
    return mediator_layer.contains(name);
  }
};

struct SyntheticTable {
  std::string stem;
  DataTable table;
};

struct SyntheticDataset {
  std::vector<SyntheticTable> tables;
  GroundTruth truth;
};

/// Latent-factor model: mediator k carries its own factor L_k ~ N(0, 1);
/// the mediator reads effect_k L_k + noise and every variable it links adds
/// effect_k L_k to its own noise. Unplanted biomarkers are pure noise.
/// Symptoms are cut into ordinal scores 0-3, smoke into 0-2, sex into F/M.
/// Cells then go missing completely at random at missing_rate.
SyntheticDataset generate(const PlantedConfig &config);

struct WrittenTable {
  std::filesystem::path table;
  std::filesystem::path schema;
};

std::vector<WrittenTable> write_dataset(const SyntheticDataset &data,
                                        const std::filesystem::path &dir);

nlohmann::ordered_json to_json(const GroundTruth &truth);
GroundTruth ground_truth_from_json(const nlohmann::json &j);

nlohmann::ordered_json to_json(const PlantedConfig &config);
PlantedConfig planted_config_from_json(const nlohmann::json &j);

struct RecoveryMetrics {
  std::size_t k = 0;
  double precision_at_k = 0.0;
  double auc = 0.0;
};

/// Precision@k of the ranking's top entries against the mediators of its
/// layer, and the rank-sum AUC (ties count one half) of the mediator
/// indicator against mean contribution.
RecoveryMetrics recovery_metrics(const ContributionRanking &ranking,
                                 const GroundTruth &truth, std::size_t k);

} // namespace mpnet
