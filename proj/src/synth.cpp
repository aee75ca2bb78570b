#include "mpnet/synth.hpp"

#include "mpnet/errors.hpp"
#include "mpnet/seeding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <set>

namespace mpnet {

namespace {

constexpr std::uint64_t kLatentStream = 0x4c4154;
constexpr std::uint64_t kNoiseStream = 0x4e4f49;
constexpr std::uint64_t kMissingStream = 0x4d4953;
constexpr std::uint64_t kPlantStream = 0x504c41;

std::string numbered(const char *prefix, std::size_t i, int width) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, i);
  return buf;
}

std::vector<double> normal_draws(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> v(n);
  for (auto &x : v)
    x = z(rng);
  return v;
}

std::size_t cut(double z, std::initializer_list<double> cutpoints) {
  std::size_t level = 0;
  for (const double c : cutpoints)
    if (z > c)
      ++level;
  return level;
}

Group group_of_name(const PlantedConfig &config, const std::string &name,
                    bool &found) {
  found = true;
  for (const auto &[layer, count] : config.layer_sizes)
    for (const auto &n : biomarker_names(layer, count))
      if (n == name)
        return layer;
  for (const auto &n : phenotype_names(config.phenotype_count))
    if (n == name)
      return Group::cvd_phenotype;
  for (const auto &n : symptom_names(config.symptom_count))
    if (n == name)
      return Group::depressive_symptom;
  for (const auto &n : risk_factor_names(config.risk_factor_count))
    if (n == name)
      return Group::risk_factor;
  found = false;
  return Group::metabolome;
}

} // namespace

std::vector<std::string> biomarker_names(Group layer, std::size_t count) {
  const char *prefix = layer == Group::metabolome ? "met_" : "lip_";
  std::vector<std::string> names;
  for (std::size_t i = 0; i < count; ++i)
    names.push_back(numbered(prefix, i, 3));
  return names;
}

std::vector<std::string> phenotype_names(std::size_t count) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < count; ++i)
    names.push_back(numbered("cvd_", i, 2));
  return names;
}

std::vector<std::string> symptom_names(std::size_t count) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < count; ++i)
    names.push_back(numbered("b", i + 1, 2));
  return names;
}

std::vector<std::string> risk_factor_names(std::size_t count) {
  static const char *const known[] = {"sex", "bmi", "age",
                                      "smoke", "ses", "exercise"};
  std::vector<std::string> names;
  for (std::size_t i = 0; i < count; ++i)
    names.push_back(i < 6 ? std::string(known[i]) : numbered("rf_", i, 1));
  return names;
}

void PlantedConfig::validate() const {
  if (n_rows == 0)
    throw ConfigError("synthetic n_rows must be positive");
  if (!(missing_rate >= 0.0 && missing_rate < 1.0))
    throw ConfigError("missing_rate must lie in [0, 1)");
  if (!(noise_sd > 0.0))
    throw ConfigError("noise_sd must be positive");
  for (const auto &[layer, count] : layer_sizes)
    if (!is_biomarker(layer))
      throw ConfigError("layer_sizes may only name omics layers");
  std::set<std::string> seen;
  for (const auto &m : mediators) {
    if (!(m.effect > 0.0))
      throw ConfigError("mediator '" + m.biomarker +
                        "' needs a positive effect size");
    bool found = false;
    const Group g = group_of_name(*this, m.biomarker, found);
    if (!found || !is_biomarker(g))
      throw ConfigError("mediator '" + m.biomarker +
                        "' is not an existing biomarker");
    if (!seen.insert(m.biomarker).second)
      throw ConfigError("mediator '" + m.biomarker + "' planted twice");
    for (const auto &l : m.linked) {
      const Group lg = group_of_name(*this, l, found);
      if (!found || is_biomarker(lg))
        throw ConfigError("mediator '" + m.biomarker + "' links unknown or "
                          "biomarker variable '" + l + "'");
    }
  }
}

void plant_default_mediators(PlantedConfig &config, std::size_t per_layer,
                             double min_effect, double max_effect) {
  config.mediators.clear();
  const auto cvd = phenotype_names(config.phenotype_count);
  const auto dep = symptom_names(config.symptom_count);
  const auto risk = risk_factor_names(config.risk_factor_count);
  const std::size_t total = per_layer * config.layer_sizes.size();
  std::size_t g = 0;
  for (const auto &[layer, count] : config.layer_sizes) {
    if (per_layer > count)
      throw ConfigError("more mediators than biomarkers in a layer");
    auto names = biomarker_names(layer, count);
    std::mt19937_64 rng(derive_seed(config.seed, kPlantStream,
                                    static_cast<std::uint64_t>(layer)));
    for (std::size_t i = 0; i < per_layer; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, names.size() - 1);
      std::swap(names[i], names[pick(rng)]);
    }
    for (std::size_t i = 0; i < per_layer; ++i, ++g) {
      Mediator m;
      m.biomarker = names[i];
      if (!cvd.empty())
        m.linked.push_back(cvd[g % cvd.size()]);
      if (!dep.empty())
        m.linked.push_back(dep[g % dep.size()]);
      if (!risk.empty())
        m.linked.push_back(risk[g % risk.size()]);
      m.effect = total > 1 ? min_effect + (max_effect - min_effect) *
                                              static_cast<double>(g) /
                                              static_cast<double>(total - 1)
                           : max_effect;
      config.mediators.push_back(std::move(m));
    }
  }
}

SyntheticDataset generate(const PlantedConfig &config) {
  config.validate();
  const std::size_t n = config.n_rows;
  const double nan = std::numeric_limits<double>::quiet_NaN();

  std::vector<std::vector<double>> latent;
  for (std::size_t k = 0; k < config.mediators.size(); ++k)
    latent.push_back(
        normal_draws(derive_seed(config.seed, kLatentStream, k), n));

  std::map<std::string, std::vector<std::size_t>> loads;
  std::map<std::string, std::size_t> mediator_of;
  for (std::size_t k = 0; k < config.mediators.size(); ++k) {
    mediator_of[config.mediators[k].biomarker] = k;
    for (const auto &l : config.mediators[k].linked)
      loads[l].push_back(k);
  }

  std::uint64_t column_index = 0;
  auto make_column = [&](const std::string &name, Group group, Kind kind,
                         std::string units) {
    Column col;
    col.meta = {name, group, kind, std::move(units)};
    auto noise = normal_draws(
        derive_seed(config.seed, kNoiseStream, column_index), n);
    double variance = config.noise_sd * config.noise_sd;
    std::vector<double> score(n);
    for (std::size_t t = 0; t < n; ++t)
      score[t] = config.noise_sd * noise[t];

    std::vector<std::size_t> factors;
    if (is_biomarker(group)) {
      if (const auto it = mediator_of.find(name); it != mediator_of.end())
        factors.push_back(it->second);
    } else if (const auto it = loads.find(name); it != loads.end()) {
      factors = it->second;
    }
    for (const auto k : factors) {
      const double e = config.mediators[k].effect;
      variance += e * e;
      for (std::size_t t = 0; t < n; ++t)
        score[t] += e * latent[k][t];
    }
    const double sd = std::sqrt(variance);

    col.values.resize(n);
    if (group == Group::depressive_symptom) {
      for (std::size_t t = 0; t < n; ++t)
        col.values[t] =
            static_cast<double>(cut(score[t] / sd, {-0.5, 0.3, 1.0}));
    } else if (kind == Kind::categorical) {
      col.labels = {"F", "M"};
      for (std::size_t t = 0; t < n; ++t)
        col.values[t] = score[t] > 0.0 ? 1.0 : 0.0;
    } else if (kind == Kind::discrete_ordinal) {
      for (std::size_t t = 0; t < n; ++t)
        col.values[t] = static_cast<double>(cut(score[t] / sd, {0.0, 1.0}));
    } else {
      col.values = std::move(score);
    }

    if (config.missing_rate > 0.0) {
      std::mt19937_64 rng(
          derive_seed(config.seed, kMissingStream, column_index));
      std::bernoulli_distribution miss(config.missing_rate);
      for (auto &v : col.values)
        if (miss(rng))
          v = nan;
    }
    ++column_index;
    return col;
  };

  std::vector<std::string> ids;
  for (std::size_t t = 0; t < n; ++t)
    ids.push_back(numbered("P", t + 1, 5));

  SyntheticDataset data;
  for (const auto &[layer, count] : config.layer_sizes) {
    std::vector<Column> cols;
    for (const auto &name : biomarker_names(layer, count))
      cols.push_back(make_column(name, layer, Kind::continuous, "mmol/l"));
    data.tables.push_back({std::string(to_string(layer)),
                           DataTable(ids, std::move(cols))});
  }
  {
    std::vector<Column> cols;
    for (const auto &name : phenotype_names(config.phenotype_count))
      cols.push_back(
          make_column(name, Group::cvd_phenotype, Kind::continuous, ""));
    for (const auto &name : symptom_names(config.symptom_count))
      cols.push_back(make_column(name, Group::depressive_symptom,
                                 Kind::discrete_ordinal, "score 0-3"));
    for (const auto &name : risk_factor_names(config.risk_factor_count)) {
      const Kind kind = name == "sex"     ? Kind::categorical
                        : name == "smoke" ? Kind::discrete_ordinal
                                          : Kind::continuous;
      cols.push_back(make_column(name, Group::risk_factor, kind, ""));
    }
    data.tables.push_back({"phenotypes", DataTable(ids, std::move(cols))});
  }

  // Ground truth.
  auto &truth = data.truth;
  truth.mediators = config.mediators;
  for (const auto &m : config.mediators) {
    bool found = false;
    truth.mediator_layer[m.biomarker] = group_of_name(config, m.biomarker, found);
  }
  auto latent_variance = [&](const std::string &name) {
    double v = config.noise_sd * config.noise_sd;
    if (const auto it = loads.find(name); it != loads.end())
      for (const auto k : it->second)
        v += config.mediators[k].effect * config.mediators[k].effect;
    return v;
  };
  auto induced = [&](const std::string &a, const std::string &b) {
    InducedPair p{a, b, {}, 0.0};
    double cov = 0.0;
    const auto ia = loads.find(a), ib = loads.find(b);
    if (ia == loads.end() || ib == loads.end())
      return p;
    for (const auto k : ia->second)
      if (std::find(ib->second.begin(), ib->second.end(), k) !=
          ib->second.end()) {
        p.mediators.push_back(config.mediators[k].biomarker);
        cov += config.mediators[k].effect * config.mediators[k].effect;
      }
    const double rho = cov / std::sqrt(latent_variance(a) * latent_variance(b));
    p.latent_mi_bits = -0.5 * std::log2(1.0 - rho * rho);
    return p;
  };
  const auto cvd = phenotype_names(config.phenotype_count);
  const auto dep = symptom_names(config.symptom_count);
  for (const auto &a : cvd)
    for (const auto &b : dep)
      if (auto p = induced(a, b); !p.mediators.empty())
        truth.comorbid_pairs.push_back(std::move(p));
  std::vector<std::string> phenos = cvd;
  phenos.insert(phenos.end(), dep.begin(), dep.end());
  for (const auto &z : risk_factor_names(config.risk_factor_count))
    for (const auto &x : phenos)
      if (auto p = induced(z, x); !p.mediators.empty())
        truth.risk_pairs.push_back(std::move(p));
  return data;
}

std::vector<WrittenTable> write_dataset(const SyntheticDataset &data,
                                        const std::filesystem::path &dir) {
  std::filesystem::create_directories(dir);
  std::vector<WrittenTable> written;
  for (const auto &t : data.tables) {
    WrittenTable w{dir / (t.stem + ".csv"), dir / (t.stem + ".schema.yaml")};
    write_table(t.table, w.table, w.schema, "id");
    written.push_back(std::move(w));
  }
  std::ofstream os(dir / "ground_truth.json", std::ios::binary);
  os << to_json(data.truth).dump(2) << '\n';
  return written;
}

namespace {

nlohmann::ordered_json pairs_json(const std::vector<InducedPair> &pairs) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto &p : pairs)
    arr.push_back({{"a", p.a},
                   {"b", p.b},
                   {"mediators", p.mediators},
                   {"latent_mi_bits", p.latent_mi_bits}});
  return arr;
}

std::vector<InducedPair> pairs_from_json(const nlohmann::json &arr) {
  std::vector<InducedPair> out;
  for (const auto &p : arr)
    out.push_back({p.at("a").get<std::string>(), p.at("b").get<std::string>(),
                   p.at("mediators").get<std::vector<std::string>>(),
                   p.at("latent_mi_bits").get<double>()});
  return out;
}

} // namespace

nlohmann::ordered_json to_json(const GroundTruth &truth) {
  nlohmann::ordered_json j;
  auto &meds = j["mediators"] = nlohmann::ordered_json::array();
  for (const auto &m : truth.mediators)
    meds.push_back({{"biomarker", m.biomarker},
                    {"layer", to_string(truth.mediator_layer.at(m.biomarker))},
                    {"linked", m.linked},
                    {"effect", m.effect}});
  j["comorbid_pairs"] = pairs_json(truth.comorbid_pairs);
  j["risk_pairs"] = pairs_json(truth.risk_pairs);
  return j;
}

GroundTruth ground_truth_from_json(const nlohmann::json &j) {
  GroundTruth truth;
  for (const auto &m : j.at("mediators")) {
    Mediator med{m.at("biomarker").get<std::string>(),
                 m.at("linked").get<std::vector<std::string>>(),
                 m.at("effect").get<double>()};
    truth.mediator_layer[med.biomarker] =
        parse_group(m.at("layer").get<std::string>());
    truth.mediators.push_back(std::move(med));
  }
  truth.comorbid_pairs = pairs_from_json(j.at("comorbid_pairs"));
  truth.risk_pairs = pairs_from_json(j.at("risk_pairs"));
  return truth;
}

nlohmann::ordered_json to_json(const PlantedConfig &config) {
  nlohmann::ordered_json j;
  j["n_rows"] = config.n_rows;
  auto &layers = j["layer_sizes"] = nlohmann::ordered_json::object();
  for (const auto &[layer, count] : config.layer_sizes)
    layers[std::string(to_string(layer))] = count;
  j["phenotype_count"] = config.phenotype_count;
  j["symptom_count"] = config.symptom_count;
  j["risk_factor_count"] = config.risk_factor_count;
  auto &meds = j["mediators"] = nlohmann::ordered_json::array();
  for (const auto &m : config.mediators)
    meds.push_back({{"biomarker", m.biomarker},
                    {"linked", m.linked},
                    {"effect", m.effect}});
  j["noise_sd"] = config.noise_sd;
  j["missing_rate"] = config.missing_rate;
  j["seed"] = config.seed;
  return j;
}

PlantedConfig planted_config_from_json(const nlohmann::json &j) {
  PlantedConfig c;
  c.n_rows = j.at("n_rows").get<std::size_t>();
  c.layer_sizes.clear();
  for (const auto &[layer, count] : j.at("layer_sizes").items())
    c.layer_sizes[parse_group(layer)] = count.get<std::size_t>();
  c.phenotype_count = j.at("phenotype_count").get<std::size_t>();
  c.symptom_count = j.at("symptom_count").get<std::size_t>();
  c.risk_factor_count = j.at("risk_factor_count").get<std::size_t>();
  for (const auto &m : j.at("mediators"))
    c.mediators.push_back({m.at("biomarker").get<std::string>(),
                           m.at("linked").get<std::vector<std::string>>(),
                           m.at("effect").get<double>()});
  c.noise_sd = j.at("noise_sd").get<double>();
  c.missing_rate = j.at("missing_rate").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

RecoveryMetrics recovery_metrics(const ContributionRanking &ranking,
                                 const GroundTruth &truth, std::size_t k) {
  if (ranking.entries.empty())
    throw DomainError("recovery_metrics: empty ranking");
  if (k == 0 || k > ranking.entries.size())
    throw DomainError("recovery_metrics: k must lie in [1, ranking length]");

  auto planted = [&](const std::string &name) {
    const auto it = truth.mediator_layer.find(name);
    return it != truth.mediator_layer.end() && it->second == ranking.layer;
  };

  RecoveryMetrics m;
  m.k = k;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < k; ++i)
    hits += planted(ranking.entries[i].name) ? 1 : 0;
  m.precision_at_k = static_cast<double>(hits) / static_cast<double>(k);

  // Mann-Whitney with mid-ranks over ascending mean score.
  std::vector<std::pair<double, bool>> scored;
  for (const auto &e : ranking.entries)
    scored.emplace_back(e.mean, planted(e.name));
  std::sort(scored.begin(), scored.end(),
            [](const auto &a, const auto &b) { return a.first < b.first; });
  double rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < scored.size();) {
    std::size_t j = i;
    while (j < scored.size() && scored[j].first == scored[i].first)
      ++j;
    const double mid = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t)
      if (scored[t].second) {
        rank_sum += mid;
        ++positives;
      }
    i = j;
  }
  const std::size_t negatives = scored.size() - positives;
  if (positives == 0 || negatives == 0)
    throw DomainError("recovery_metrics: AUC needs both mediators and "
                      "non-mediators in the ranking");
  const double pos = static_cast<double>(positives);
  m.auc = (rank_sum - pos * (pos + 1.0) / 2.0) /
          (pos * static_cast<double>(negatives));
  return m;
}

} // namespace mpnet
