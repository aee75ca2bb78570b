#include "mpnet/pipeline.hpp"

#include "mpnet/csv.hpp"
#include "mpnet/digest.hpp"
#include "mpnet/format.hpp"
#include "mpnet/graphml.hpp"
#include "mpnet/ingest.hpp"
#include "mpnet/preprocess.hpp"
#include "mpnet/seeding.hpp"

#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <exception>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace mpnet {

namespace {

constexpr int kFormatVersion = 1;

template <typename T>
T get_or(const YAML::Node &node, const char *key, T fallback) {
  if (const auto v = node[key]) {
    try {
      return v.as<T>();
    } catch (const YAML::Exception &e) {
      throw ConfigError(std::string("config key '") + key +
                        "' has the wrong type: " + e.what());
    }
  }
  return fallback;
}

std::string read_text(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ConfigError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path &path, std::string_view text) {
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw DomainError("cannot write '" + path.string() + "'");
  os << text;
}

ojson read_json(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw StageOrderError("missing artifact '" + path.string() + "'");
  return ojson::parse(in);
}

void write_json(const fs::path &path, const ojson &j) {
  write_text(path, j.dump(2) + "\n");
}

std::string slug(std::string_view s) {
  std::string out;
  for (const char c : s)
    out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' ||
                          c == '_' || c == '.'
                      ? c
                      : '_');
  return out;
}

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

PlantedConfig parse_synth(const YAML::Node &node) {
  PlantedConfig c;
  c.n_rows = get_or<std::size_t>(node, "n_rows", c.n_rows);
  if (const auto layers = node["layer_sizes"]) {
    c.layer_sizes.clear();
    for (const auto &kv : layers)
      c.layer_sizes[parse_group(kv.first.as<std::string>())] =
          kv.second.as<std::size_t>();
  }
  c.phenotype_count = get_or<std::size_t>(node, "phenotype_count", c.phenotype_count);
  c.symptom_count = get_or<std::size_t>(node, "symptom_count", c.symptom_count);
  c.risk_factor_count =
      get_or<std::size_t>(node, "risk_factor_count", c.risk_factor_count);
  c.noise_sd = get_or<double>(node, "noise_sd", c.noise_sd);
  c.missing_rate = get_or<double>(node, "missing_rate", c.missing_rate);
  c.seed = get_or<std::uint64_t>(node, "seed", c.seed);
  if (const auto meds = node["mediators"]) {
    if (node["mediators_per_layer"])
      throw ConfigError("synth: give either mediators or mediators_per_layer");
    for (const auto &m : meds)
      c.mediators.push_back({m["biomarker"].as<std::string>(),
                             m["linked"].as<std::vector<std::string>>(),
                             m["effect"].as<double>()});
  } else {
    const auto per_layer = get_or<std::size_t>(node, "mediators_per_layer", 10);
    double lo = 0.8, hi = 1.6;
    if (const auto range = node["effect_range"]) {
      const auto v = range.as<std::vector<double>>();
      if (v.size() != 2 || !(v[0] > 0.0) || v[1] < v[0])
        throw ConfigError("synth.effect_range must be [min, max] with "
                          "0 < min <= max");
      lo = v[0];
      hi = v[1];
    }
    plant_default_mediators(c, per_layer, lo, hi);
  }
  c.validate();
  return c;
}

void emit_synth(YAML::Emitter &out, const PlantedConfig &c) {
  out << YAML::Key << "synth" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "n_rows" << YAML::Value << c.n_rows;
  out << YAML::Key << "layer_sizes" << YAML::Value << YAML::BeginMap;
  for (const auto &[layer, count] : c.layer_sizes)
    out << YAML::Key << std::string(to_string(layer)) << YAML::Value << count;
  out << YAML::EndMap;
  out << YAML::Key << "phenotype_count" << YAML::Value << c.phenotype_count;
  out << YAML::Key << "symptom_count" << YAML::Value << c.symptom_count;
  out << YAML::Key << "risk_factor_count" << YAML::Value << c.risk_factor_count;
  out << YAML::Key << "noise_sd" << YAML::Value << format_double(c.noise_sd);
  out << YAML::Key << "missing_rate" << YAML::Value
      << format_double(c.missing_rate);
  out << YAML::Key << "seed" << YAML::Value << c.seed;
  out << YAML::Key << "mediators" << YAML::Value << YAML::BeginSeq;
  for (const auto &m : c.mediators) {
    out << YAML::Flow << YAML::BeginMap;
    out << YAML::Key << "biomarker" << YAML::Value << m.biomarker;
    out << YAML::Key << "linked" << YAML::Value << YAML::Flow << m.linked;
    out << YAML::Key << "effect" << YAML::Value << format_double(m.effect);
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::EndMap;
}

std::vector<Group> layers_in(const std::vector<VariableMeta> &nodes) {
  std::vector<Group> layers;
  for (const Group g : {Group::metabolome, Group::lipidome})
    if (std::any_of(nodes.begin(), nodes.end(),
                    [g](const VariableMeta &m) { return m.group == g; }))
      layers.push_back(g);
  return layers;
}

std::map<std::string, double> read_missingness(const fs::path &path) {
  std::map<std::string, double> out;
  const auto rows = csv::read_file(path);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != 2)
      throw ParseError("bad missingness row", r + 1, rows[r].size());
    double v = 0.0;
    const auto &cell = rows[r][1];
    std::from_chars(cell.data(), cell.data() + cell.size(), v);
    out[rows[r][0]] = v;
  }
  return out;
}

using PairKey = std::pair<std::string, std::string>;

PairKey unordered_key(const std::string &a, const std::string &b) {
  return a < b ? PairKey{a, b} : PairKey{b, a};
}

} // namespace

// ---------------------------------------------------------------------------

void PipelineConfig::validate() const {
  if (n_imputations == 0)
    throw ConfigError("n_imputations must be at least 1");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ConfigError("alpha must lie in (0, 1)");
  if (permutations == 0)
    throw ConfigError("permutations must be at least 1");
  if (1.0 / static_cast<double>(permutations + 1) >= alpha)
    throw ConfigError("with " + std::to_string(permutations) +
                      " permutations the smallest p-value, 1/(B+1), is not "
                      "below alpha; no edge could ever be kept");
  if (!(redundancy_threshold > 0.0 && redundancy_threshold <= 1.0))
    throw ConfigError("redundancy_threshold must lie in (0, 1]");
  if (top_k == 0)
    throw ConfigError("top_k must be at least 1");
  if (!(extended_lambda >= 0.0))
    throw ConfigError("extended_lambda must be non-negative");
  parse_pair_scope(pair_scope);
  if (synth && !inputs.empty() &&
      !std::all_of(inputs.begin(), inputs.end(), [](const InputTable &t) {
        return t.display.starts_with("synth/");
      }))
    throw ConfigError("config gives both input tables and a synth section");
  if (!synth && inputs.empty())
    throw ConfigError("config needs input tables or a synth section");
  for (const auto &p : protected_nodes)
    if (std::find(exclude.begin(), exclude.end(), p) != exclude.end())
      throw ConfigError("variable '" + p + "' is both protected and excluded");
}

PipelineConfig parse_config(std::string_view yaml_text,
                            const fs::path &base_dir) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(yaml_text));
  } catch (const YAML::Exception &e) {
    throw ConfigError(std::string("cannot parse config: ") + e.what());
  }
  if (!root.IsMap())
    throw ConfigError("config must be a key-value map");

  static const std::set<std::string> known{
      "inputs",          "master_seed",         "n_imputations",
      "alpha",           "permutations",        "redundancy_threshold",
      "redundancy_scope", "protected",          "exclude",
      "projection_definition", "extended_lambda", "pair_scope",
      "include_risk_risk_pairs", "top_k",        "output_dir",
      "threads",         "synth"};
  for (const auto &kv : root) {
    const auto key = kv.first.as<std::string>();
    if (!known.contains(key))
      throw ConfigError("unknown config key '" + key + "'");
  }

  PipelineConfig c;
  if (const auto inputs = root["inputs"]) {
    for (const auto &in : inputs) {
      if (!in["table"] || !in["schema"])
        throw ConfigError("every input needs table and schema");
      InputTable t;
      t.display = in["table"].as<std::string>();
      t.table = base_dir / t.display;
      t.schema = base_dir / in["schema"].as<std::string>();
      c.inputs.push_back(std::move(t));
    }
  }
  c.master_seed = get_or<std::uint64_t>(root, "master_seed", c.master_seed);
  c.n_imputations = get_or<std::size_t>(root, "n_imputations", c.n_imputations);
  c.alpha = get_or<double>(root, "alpha", c.alpha);
  c.permutations = get_or<std::size_t>(root, "permutations", c.permutations);
  c.redundancy_threshold =
      get_or<double>(root, "redundancy_threshold", c.redundancy_threshold);
  const auto scope = get_or<std::string>(root, "redundancy_scope", "within_group");
  if (scope == "within_group")
    c.redundancy_scope = RedundancyScope::within_group;
  else if (scope == "all_pairs")
    c.redundancy_scope = RedundancyScope::all_pairs;
  else
    throw ConfigError("redundancy_scope must be within_group or all_pairs");
  c.protected_nodes =
      get_or<std::vector<std::string>>(root, "protected", c.protected_nodes);
  c.exclude = get_or<std::vector<std::string>>(root, "exclude", c.exclude);
  c.projection_definition = parse_definition(
      get_or<std::string>(root, "projection_definition", "average"));
  c.extended_lambda = get_or<double>(root, "extended_lambda", c.extended_lambda);
  c.pair_scope = get_or<std::string>(root, "pair_scope", c.pair_scope);
  c.include_risk_risk_pairs =
      get_or<bool>(root, "include_risk_risk_pairs", c.include_risk_risk_pairs);
  c.top_k = get_or<std::size_t>(root, "top_k", c.top_k);
  c.output_dir = base_dir / get_or<std::string>(root, "output_dir", "out");
  c.threads = get_or<unsigned>(root, "threads", c.threads);
  if (const auto s = root["synth"])
    c.synth = parse_synth(s);
  c.validate();
  return c;
}

PipelineConfig load_config(const fs::path &path) {
  return parse_config(read_text(path), path.parent_path());
}

std::string resolved_config_text(const PipelineConfig &c) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "format_version" << YAML::Value << kFormatVersion;
  out << YAML::Key << "inputs" << YAML::Value << YAML::BeginSeq;
  for (const auto &in : c.inputs) {
    out << YAML::BeginMap;
    out << YAML::Key << "table" << YAML::Value << in.display;
    out << YAML::Key << "schema" << YAML::Value
        << (in.display.starts_with("synth/")
                ? "synth/" + in.schema.filename().string()
                : in.schema.filename().string());
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::Key << "master_seed" << YAML::Value << c.master_seed;
  out << YAML::Key << "n_imputations" << YAML::Value << c.n_imputations;
  out << YAML::Key << "alpha" << YAML::Value << format_double(c.alpha);
  out << YAML::Key << "permutations" << YAML::Value << c.permutations;
  out << YAML::Key << "redundancy_threshold" << YAML::Value
      << format_double(c.redundancy_threshold);
  out << YAML::Key << "redundancy_scope" << YAML::Value
      << (c.redundancy_scope == RedundancyScope::within_group ? "within_group"
                                                              : "all_pairs");
  out << YAML::Key << "protected" << YAML::Value << YAML::Flow
      << c.protected_nodes;
  out << YAML::Key << "exclude" << YAML::Value << YAML::Flow << c.exclude;
  out << YAML::Key << "projection_definition" << YAML::Value
      << std::string(to_string(c.projection_definition));
  out << YAML::Key << "extended_lambda" << YAML::Value
      << format_double(c.extended_lambda);
  out << YAML::Key << "pair_scope" << YAML::Value << c.pair_scope;
  out << YAML::Key << "include_risk_risk_pairs" << YAML::Value
      << c.include_risk_risk_pairs;
  out << YAML::Key << "top_k" << YAML::Value << c.top_k;
  if (c.synth)
    emit_synth(out, *c.synth);
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

const std::vector<std::string> &stage_names() {
  static const std::vector<std::string> names{
      "validate", "preprocess", "network", "project", "contribute",
      "importance", "compare", "synth", "all"};
  return names;
}

// ---------------------------------------------------------------------------

Pipeline::Pipeline(PipelineConfig config)
    : config_(std::move(config)), executor_(config_.threads) {
  if (config_.synth && config_.inputs.empty()) {
    const auto dir = config_.output_dir / "synth";
    for (const auto &[layer, count] : config_.synth->layer_sizes) {
      const std::string stem(to_string(layer));
      config_.inputs.push_back({"synth/" + stem + ".csv", dir / (stem + ".csv"),
                                dir / (stem + ".schema.yaml")});
    }
    config_.inputs.push_back({"synth/phenotypes.csv", dir / "phenotypes.csv",
                              dir / "phenotypes.schema.yaml"});
  }
  config_.validate();
  config_text_ = resolved_config_text(config_);
  config_hash_ = sha256_hex(config_text_);
}

fs::path Pipeline::stage_dir(std::string_view stage) const {
  return config_.output_dir / std::string(stage);
}

void Pipeline::require(std::string_view stage, std::string_view needed) const {
  if (!fs::exists(stage_dir(needed) / "manifest.json"))
    throw StageOrderError("stage '" + std::string(stage) + "' needs the '" +
                          std::string(needed) +
                          "' stage artifacts; run it first");
}

void Pipeline::begin_stage(std::string_view stage) const {
  fs::create_directories(config_.output_dir);
  write_text(config_.output_dir / "resolved_config.yaml", config_text_);
  const auto dir = stage_dir(stage);
  fs::remove_all(dir);
  fs::create_directories(dir);
}

std::string Pipeline::run_stem(std::size_t run) const {
  const int width = std::max<int>(
      2, static_cast<int>(std::to_string(config_.n_imputations - 1).size()));
  char buf[32];
  std::snprintf(buf, sizeof buf, "run_%0*zu", width, run);
  return buf;
}

void Pipeline::write_manifest(std::string_view stage,
                              const std::vector<fs::path> &inputs,
                              const ojson &extra) const {
  const auto dir = stage_dir(stage);
  auto rel = [&](const fs::path &p) {
    const auto r = fs::relative(p, config_.output_dir);
    return r.empty() || r.native().starts_with("..") ? p.filename().string()
                                                     : r.generic_string();
  };
  ojson m;
  m["stage"] = std::string(stage);
  m["format_version"] = kFormatVersion;
  m["config_sha256"] = config_hash_;
  m["master_seed"] = config_.master_seed;
  for (const auto &[k, v] : extra.items())
    m[k] = v;
  auto &in = m["inputs"] = ojson::object();
  for (const auto &p : inputs)
    in[rel(p)] = sha256_file(p);

  std::vector<fs::path> outputs;
  for (const auto &e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().filename() != "manifest.json")
      outputs.push_back(e.path());
  std::sort(outputs.begin(), outputs.end());
  auto &out = m["outputs"] = ojson::object();
  for (const auto &p : outputs)
    out[rel(p)] = sha256_file(p);
  write_json(dir / "manifest.json", m);
}

void Pipeline::run(std::string_view stage) {
  if (stage == "synth")
    synth();
  else if (stage == "validate")
    validate();
  else if (stage == "preprocess")
    preprocess();
  else if (stage == "network")
    network();
  else if (stage == "project")
    project();
  else if (stage == "contribute")
    contribute();
  else if (stage == "importance")
    importance();
  else if (stage == "compare")
    compare();
  else if (stage == "all")
    all();
  else
    throw ConfigError("unknown stage '" + std::string(stage) + "'");
}

void Pipeline::all() {
  if (config_.synth)
    synth();
  validate();
  preprocess();
  network();
  project();
  contribute();
  // Both reports are written even if one lacks the data it needs.
  std::exception_ptr deferred;
  try {
    importance();
  } catch (const InsufficientDataError &) {
    deferred = std::current_exception();
  }
  try {
    compare();
  } catch (const InsufficientDataError &) {
    if (!deferred)
      deferred = std::current_exception();
  }
  if (deferred)
    std::rethrow_exception(deferred);
}

void Pipeline::synth() {
  if (!config_.synth)
    throw ConfigError("the config has no synth section");
  begin_stage("synth");
  const auto data = generate(*config_.synth);
  write_dataset(data, stage_dir("synth"));
  write_json(stage_dir("synth") / "planted_config.json", to_json(*config_.synth));
  write_manifest("synth", {}, {{"synth_seed", config_.synth->seed}});
}

void Pipeline::validate() {
  std::vector<DataTable> tables;
  std::vector<fs::path> inputs;
  for (const auto &in : config_.inputs) {
    if (in.display.starts_with("synth/"))
      require("validate", "synth");
    else if (!fs::exists(in.table))
      throw SchemaError("input table '" + in.table.string() + "' not found");
    tables.push_back(load_table(in.table, load_schema(in.schema)));
    inputs.push_back(in.table);
    inputs.push_back(in.schema);
  }
  const auto merged = merge_on_participant(tables);
  begin_stage("validate");
  const auto dir = stage_dir("validate");
  write_table(merged, dir / "merged.csv", dir / "merged.schema.yaml", "id");

  std::ofstream miss(dir / "missingness.csv", std::ios::binary);
  csv::write_row(miss, {"name", "missing_rate"});
  ojson summary;
  summary["n_rows"] = merged.n_rows();
  auto &per_table = summary["tables"] = ojson::array();
  for (std::size_t t = 0; t < tables.size(); ++t)
    per_table.push_back({{"table", config_.inputs[t].display},
                         {"n_rows", tables[t].n_rows()},
                         {"n_columns", tables[t].n_columns()}});
  auto &cols = summary["columns"] = ojson::array();
  for (const auto &c : merged.columns()) {
    csv::write_row(miss, {c.meta.name, format_double(c.missing_rate())});
    cols.push_back({{"name", c.meta.name},
                    {"group", to_string(c.meta.group)},
                    {"kind", to_string(c.meta.kind)},
                    {"units", c.meta.units},
                    {"missing_rate", c.missing_rate()}});
  }
  miss.close();
  write_json(dir / "summary.json", summary);
  write_manifest("validate", inputs, {});
}

void Pipeline::preprocess() {
  require("preprocess", "validate");
  const auto vdir = stage_dir("validate");
  const auto merged =
      load_table(vdir / "merged.csv", load_schema(vdir / "merged.schema.yaml"));
  begin_stage("preprocess");
  const auto dir = stage_dir("preprocess");

  executor_.parallel_for(config_.n_imputations, [&](std::size_t r) {
    const auto seed = imputation_run_seed(config_.master_seed, r);
    const auto complete = impute_random_sample(merged, seed);
    const auto m =
        discretize_dataset(complete, r, {config_.master_seed, seed});
    m.validate();
    write_discrete_matrix(m, dir, run_stem(r));
  });

  ojson trace = ojson::array();
  for (std::size_t r = 0; r < config_.n_imputations; ++r)
    trace.push_back({{"run", r},
                     {"run_seed", imputation_run_seed(config_.master_seed, r)}});
  write_manifest("preprocess",
                 {vdir / "merged.csv", vdir / "merged.schema.yaml"},
                 {{"n_runs", config_.n_imputations},
                  {"sturges_bins", sturges_bins(merged.n_rows())},
                  {"seed_trace", trace}});
}

void Pipeline::network() {
  require("network", "preprocess");
  const auto pdir = stage_dir("preprocess");
  const auto pre_manifest = read_json(pdir / "manifest.json");
  const auto n_runs = pre_manifest.at("n_runs").get<std::size_t>();
  if (n_runs != config_.n_imputations)
    throw ConfigError("preprocess artifacts hold " + std::to_string(n_runs) +
                      " runs but the config asks for " +
                      std::to_string(config_.n_imputations));

  std::vector<DiscreteMatrix> runs(n_runs);
  std::vector<fs::path> inputs;
  executor_.parallel_for(n_runs, [&](std::size_t r) {
    runs[r] = read_discrete_matrix(pdir, run_stem(r));
  });
  for (std::size_t r = 0; r < n_runs; ++r) {
    inputs.push_back(pdir / (run_stem(r) + ".csv"));
    inputs.push_back(pdir / (run_stem(r) + ".levels.json"));
  }
  const auto missing_path = stage_dir("validate") / "missingness.csv";
  inputs.push_back(missing_path);

  RedundancyConfig rc;
  rc.threshold = config_.redundancy_threshold;
  rc.protected_nodes = {config_.protected_nodes.begin(),
                        config_.protected_nodes.end()};
  rc.pre_excluded = config_.exclude;
  rc.missingness = read_missingness(missing_path);
  const auto info =
      pairwise_information(runs, config_.redundancy_scope, executor_);
  const auto filtered = redundancy_filter(info, rc);

  NetworkConfig nc;
  nc.alpha = config_.alpha;
  nc.permutations = config_.permutations;
  nc.within_layer_edges = config_.projection_definition == Definition::extended;

  std::vector<MiNetwork> networks;
  ojson trace = ojson::array();
  for (std::size_t r = 0; r < n_runs; ++r) {
    const auto seed = derive_seed(config_.master_seed, Stream::permutation, r);
    networks.push_back(
        build_significant_network(runs[r], filtered.kept, nc, seed, executor_));
    trace.push_back({{"run", r},
                     {"permutation_seed", seed},
                     {"direct_seed",
                      derive_seed(config_.master_seed, Stream::direct, r)}});
  }

  // Direct MI between every pair of kept non-biomarker variables.
  PairScope full;
  full.kind = ScopeKind::full;
  full.include_risk_risk = config_.include_risk_risk_pairs;
  std::vector<std::pair<std::string, std::string>> direct_pairs;
  for (const auto &[i, j] : scope_pairs(networks.front(), full))
    direct_pairs.emplace_back(networks.front().nodes[i].name,
                              networks.front().nodes[j].name);
  std::vector<double> mi_sum(direct_pairs.size(), 0.0),
      p_sum(direct_pairs.size(), 0.0);
  for (std::size_t r = 0; r < n_runs; ++r) {
    const auto d = direct_mutual_information(
        runs[r], direct_pairs, config_.permutations,
        derive_seed(config_.master_seed, Stream::direct, r), executor_);
    for (std::size_t k = 0; k < d.size(); ++k) {
      mi_sum[k] += d[k].mi;
      p_sum[k] += d[k].p_value;
    }
  }

  begin_stage("network");
  const auto dir = stage_dir("network");
  {
    std::ofstream os(dir / "nodes.csv", std::ios::binary);
    write_nodes_csv(os, networks.front().nodes);
  }
  {
    std::ofstream os(dir / "edges.csv", std::ios::binary);
    write_edges_csv(os, networks);
  }
  {
    std::ofstream os(dir / "network.graphml", std::ios::binary);
    graphml::write(os, mean_network_graph(networks));
  }
  {
    std::ofstream os(dir / "redundancy_report.csv", std::ios::binary);
    write_drop_report(os, filtered.drops);
  }
  {
    std::ofstream os(dir / "direct_mi.csv", std::ios::binary);
    csv::write_row(os, {"node_a", "node_b", "mean_mi_bits", "mean_p_value",
                        "n_runs"});
    const double n = static_cast<double>(n_runs);
    for (std::size_t k = 0; k < direct_pairs.size(); ++k)
      csv::write_row(os, {direct_pairs[k].first, direct_pairs[k].second,
                          format_double(mi_sum[k] / n),
                          format_double(p_sum[k] / n), std::to_string(n_runs)});
  }
  std::size_t edge_total = 0;
  for (const auto &net : networks)
    edge_total += net.edges.size();
  write_manifest("network", inputs,
                 {{"n_runs", n_runs},
                  {"alpha", config_.alpha},
                  {"permutations", config_.permutations},
                  {"within_layer_edges", nc.within_layer_edges},
                  {"n_nodes", networks.front().nodes.size()},
                  {"n_dropped", filtered.drops.size()},
                  {"n_edges_total", edge_total},
                  {"seed_trace", trace}});
}

namespace {

struct NetworkArtifacts {
  std::vector<MiNetwork> runs;
  std::size_t n_runs = 0;
  bool within_layer_edges = false;
  std::vector<fs::path> files;
};

NetworkArtifacts load_networks(const fs::path &dir) {
  NetworkArtifacts a;
  const auto manifest = read_json(dir / "manifest.json");
  a.n_runs = manifest.at("n_runs").get<std::size_t>();
  a.within_layer_edges = manifest.at("within_layer_edges").get<bool>();
  a.files = {dir / "nodes.csv", dir / "edges.csv"};
  a.runs = read_networks(dir / "nodes.csv", dir / "edges.csv", a.n_runs,
                         manifest.at("alpha").get<double>(),
                         a.within_layer_edges);
  return a;
}

} // namespace

void Pipeline::project() {
  require("project", "network");
  const auto net = load_networks(stage_dir("network"));
  if (config_.projection_definition == Definition::extended &&
      !net.within_layer_edges)
    throw ConfigError("the extended definition needs a network built with "
                      "same-layer biomarker edges; rerun the network stage");
  const auto &nodes = net.runs.front().nodes;
  const auto layers = layers_in(nodes);
  const ProjectionOptions options{config_.projection_definition,
                                  config_.extended_lambda};
  PairScope full;
  full.kind = ScopeKind::full;
  full.include_risk_risk = config_.include_risk_risk_pairs;

  std::vector<std::vector<ProjectedLayer>> per_run(net.n_runs);
  executor_.parallel_for(net.n_runs, [&](std::size_t r) {
    for (const Group layer : layers)
      per_run[r].push_back(project_layer(net.runs[r], full, layer, options));
  });

  std::vector<ProjectedLayer> flat;
  for (const auto &r : per_run)
    flat.insert(flat.end(), r.begin(), r.end());
  std::vector<AggregatedLayer> aggregated;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    std::vector<ProjectedLayer> runs;
    for (const auto &r : per_run)
      runs.push_back(r[l]);
    aggregated.push_back(aggregate_runs(runs));
  }

  begin_stage("project");
  const auto dir = stage_dir("project");
  {
    std::ofstream os(dir / "projected_runs.csv", std::ios::binary);
    write_projected_runs_csv(os, flat);
  }
  {
    std::ofstream os(dir / "projected.csv", std::ios::binary);
    write_aggregated_csv_header(os);
    for (const auto &a : aggregated)
      write_aggregated_csv_rows(os, a);
  }

  // GraphML restricted to the configured pair scope.
  const auto scope = parse_pair_scope(config_.pair_scope);
  std::set<PairKey> wanted;
  for (const auto &[i, j] : scope_pairs(net.runs.front(), scope))
    wanted.insert(unordered_key(nodes[i].name, nodes[j].name));
  std::vector<AggregatedLayer> scoped = aggregated;
  for (auto &a : scoped)
    std::erase_if(a.edges, [&](const AggregatedEdge &e) {
      return !wanted.contains(unordered_key(e.a, e.b));
    });
  for (const auto &a : scoped) {
    std::ofstream os(dir / ("projected_" + std::string(to_string(a.layer)) +
                            ".graphml"),
                     std::ios::binary);
    graphml::write(os, projected_graph(std::span(&a, 1), nodes));
  }
  {
    std::ofstream os(dir / "projected_multilayer.graphml", std::ios::binary);
    graphml::write(os, projected_graph(scoped, nodes));
  }
  write_manifest("project", net.files,
                 {{"n_runs", net.n_runs},
                  {"definition", to_string(config_.projection_definition)},
                  {"extended_lambda", config_.extended_lambda},
                  {"graph_scope", config_.pair_scope}});
}

void Pipeline::contribute() {
  require("contribute", "network");
  const auto net = load_networks(stage_dir("network"));
  const auto scope = parse_pair_scope(config_.pair_scope);
  const auto layers = layers_in(net.runs.front().nodes);
  for (const auto &r : net.runs)
    scope_pairs(r, scope); // surfaces unknown pair names before writing

  std::vector<ContributionRanking> rankings;
  for (const Group layer : layers) {
    std::vector<std::map<std::string, double>> runs(net.n_runs);
    executor_.parallel_for(net.n_runs, [&](std::size_t r) {
      runs[r] = layer_contributions(net.runs[r], scope, layer);
    });
    auto ranking = rank_contributions(runs, config_.top_k);
    ranking.layer = layer;
    ranking.scope = to_string(scope);
    rankings.push_back(std::move(ranking));
  }

  fs::create_directories(config_.output_dir);
  write_text(config_.output_dir / "resolved_config.yaml", config_text_);
  const std::string sub = slug(to_string(scope));
  const auto dir = stage_dir("contribute") / sub;
  fs::remove_all(dir);
  fs::create_directories(dir);

  std::optional<GroundTruth> truth;
  const auto truth_path = stage_dir("synth") / "ground_truth.json";
  if (config_.synth && fs::exists(truth_path))
    truth = ground_truth_from_json(read_json(truth_path));

  ojson summary;
  summary["scope"] = to_string(scope);
  summary["top_k"] = config_.top_k;
  summary["n_runs"] = net.n_runs;
  summary["degenerate_n"] = net.n_runs == 1;
  if (net.n_runs == 1)
    summary["warning"] =
        "single imputation run: standard errors are reported as 0";
  auto &layer_json = summary["layers"] = ojson::array();
  for (const auto &ranking : rankings) {
    const std::string layer(to_string(ranking.layer));
    {
      std::ofstream os(dir / (layer + "_ranking.csv"), std::ios::binary);
      csv::write_row(os, {"rank", "name", "mean_con", "se_con", "n_runs"});
      for (std::size_t i = 0; i < ranking.entries.size(); ++i)
        csv::write_row(os, {std::to_string(i + 1), ranking.entries[i].name,
                            format_double(ranking.entries[i].mean),
                            format_double(ranking.entries[i].se),
                            std::to_string(ranking.n_runs)});
    }
    {
      std::ofstream os(dir / (layer + "_top.csv"), std::ios::binary);
      csv::write_row(os, {"name", "mean", "se"});
      for (const auto &e : ranking.top)
        csv::write_row(os, {e.name, format_double(e.mean), format_double(e.se)});
    }
    ojson lj{{"layer", layer}, {"n_biomarkers", ranking.entries.size()}};
    auto &top = lj["top"] = ojson::array();
    for (const auto &e : ranking.top)
      top.push_back(e.name);
    if (truth && !ranking.entries.empty()) {
      try {
        const auto k = std::min(config_.top_k, ranking.entries.size());
        const auto m = recovery_metrics(ranking, *truth, k);
        lj["recovery"] = {{"k", m.k},
                          {"precision_at_k", m.precision_at_k},
                          {"auc", m.auc}};
      } catch (const DomainError &e) {
        lj["recovery"] = {{"error", e.what()}};
      }
    }
    layer_json.push_back(std::move(lj));
  }
  write_json(dir / "summary.json", summary);

  // The manifest sits next to the scope's outputs.
  ojson m;
  m["stage"] = "contribute";
  m["format_version"] = kFormatVersion;
  m["config_sha256"] = config_hash_;
  m["master_seed"] = config_.master_seed;
  m["scope"] = to_string(scope);
  auto &in = m["inputs"] = ojson::object();
  for (const auto &p : net.files)
    in[fs::relative(p, config_.output_dir).generic_string()] = sha256_file(p);
  std::vector<fs::path> outputs;
  for (const auto &e : fs::directory_iterator(dir))
    if (e.is_regular_file())
      outputs.push_back(e.path());
  std::sort(outputs.begin(), outputs.end());
  auto &out = m["outputs"] = ojson::object();
  for (const auto &p : outputs)
    out[fs::relative(p, config_.output_dir).generic_string()] = sha256_file(p);
  write_json(dir / "manifest.json", m);
  write_json(stage_dir("contribute") / "manifest.json",
             {{"stage", "contribute"}, {"latest_scope", sub}});
}

std::vector<AggregatedLayer> read_aggregated_csv(const fs::path &path,
                                                 std::size_t n_runs) {
  const auto rows = csv::read_file(path);
  std::vector<AggregatedLayer> out;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto &row = rows[r];
    if (row.size() != 7)
      throw ParseError("bad projected row", r + 1, row.size());
    const Group layer = parse_group(row[2]);
    const Definition def = parse_definition(row[3]);
    auto it = std::find_if(out.begin(), out.end(), [&](const auto &a) {
      return a.layer == layer && a.definition == def;
    });
    if (it == out.end()) {
      out.push_back({layer, def, n_runs, {}});
      it = std::prev(out.end());
    }
    AggregatedEdge e{row[0], row[1], 0.0, 0.0, 0};
    std::from_chars(row[4].data(), row[4].data() + row[4].size(), e.mean_w);
    std::from_chars(row[5].data(), row[5].data() + row[5].size(), e.se_w);
    std::from_chars(row[6].data(), row[6].data() + row[6].size(),
                    e.present_runs);
    it->edges.push_back(std::move(e));
  }
  return out;
}

void Pipeline::importance() {
  require("importance", "project");
  const auto pdir = stage_dir("project");
  const auto manifest = read_json(pdir / "manifest.json");
  const auto n_runs = manifest.at("n_runs").get<std::size_t>();
  const auto nodes = read_nodes_csv(stage_dir("network") / "nodes.csv");
  const auto layers = read_aggregated_csv(pdir / "projected.csv", n_runs);

  begin_stage("importance");
  const auto dir = stage_dir("importance");
  ojson summary;
  const bool has_risk =
      std::any_of(nodes.begin(), nodes.end(), [](const VariableMeta &m) {
        return m.group == Group::risk_factor;
      });
  if (!has_risk) {
    summary["skipped"] = "no risk factor variables in the network";
    write_json(dir / "summary.json", summary);
    write_manifest("importance", {pdir / "projected.csv"}, {});
    return;
  }

  auto write_table = [&](const RelativeImportance &ri, const fs::path &path) {
    std::ofstream os(path, std::ios::binary);
    csv::write_row(os, {"Risk factors", "CVD(%)", "Depression(%)"});
    for (std::size_t z = 0; z < ri.risk_factors.size(); ++z)
      csv::write_row(os, {ri.risk_factors[z], fixed2(ri.cvd_percent[z]),
                          fixed2(ri.depression_percent[z])});
  };
  auto describe = [](const RelativeImportance &ri) {
    double cvd = 0.0, dep = 0.0, cvd_r = 0.0, dep_r = 0.0;
    for (std::size_t z = 0; z < ri.risk_factors.size(); ++z) {
      cvd += ri.cvd_percent[z];
      dep += ri.depression_percent[z];
      cvd_r += std::stod(fixed2(ri.cvd_percent[z]));
      dep_r += std::stod(fixed2(ri.depression_percent[z]));
    }
    return ojson{{"cvd_phenotypes_used", ri.cvd_phenotypes_used},
                 {"depression_phenotypes_used", ri.depression_phenotypes_used},
                 {"excluded_phenotypes", ri.excluded},
                 {"cvd_column_sum", cvd},
                 {"depression_column_sum", dep},
                 {"cvd_column_sum_rounded", std::stod(fixed2(cvd_r))},
                 {"depression_column_sum_rounded", std::stod(fixed2(dep_r))}};
  };

  std::optional<RelativeImportance> result;
  try {
    result = relative_importance(layers, nodes);
  } catch (const InsufficientDataError &e) {
    summary["error"] = e.what();
    write_json(dir / "summary.json", summary);
    write_manifest("importance", {pdir / "projected.csv"}, {});
    throw;
  }
  const auto &combined = *result;
  write_table(combined, dir / "table.csv");
  {
    std::ofstream os(dir / "shares.csv", std::ios::binary);
    csv::write_row(os, {"risk_factor", "phenotype", "r"});
    for (const auto &s : combined.per_phenotype)
      csv::write_row(os, {s.risk_factor, s.phenotype, format_double(s.r)});
  }
  summary["combined"] = describe(combined);
  for (const auto &layer : layers) {
    const std::string name(to_string(layer.layer));
    try {
      const auto ri = relative_importance(std::span(&layer, 1), nodes);
      write_table(ri, dir / ("table_" + name + ".csv"));
      summary[name] = describe(ri);
    } catch (const InsufficientDataError &e) {
      summary[name] = {{"error", e.what()}};
    }
  }
  if (!combined.excluded.empty())
    std::clog << "importance: " << combined.excluded.size()
              << " phenotype(s) without risk-factor links left out of the "
                 "group means\n";
  write_json(dir / "summary.json", summary);
  write_manifest("importance",
                 {pdir / "projected.csv", stage_dir("network") / "nodes.csv"},
                 {});
}

void Pipeline::compare() {
  require("compare", "project");
  require("compare", "network");
  const auto pdir = stage_dir("project");
  const auto ndir = stage_dir("network");
  const auto n_runs =
      read_json(pdir / "manifest.json").at("n_runs").get<std::size_t>();
  const auto layers = read_aggregated_csv(pdir / "projected.csv", n_runs);

  MiNetwork skeleton;
  skeleton.nodes = read_nodes_csv(ndir / "nodes.csv");
  const auto scope = parse_pair_scope(config_.pair_scope);

  std::map<PairKey, double> direct;
  {
    const auto rows = csv::read_file(ndir / "direct_mi.csv");
    for (std::size_t r = 1; r < rows.size(); ++r) {
      double v = 0.0;
      const auto &cell = rows[r].at(2);
      std::from_chars(cell.data(), cell.data() + cell.size(), v);
      direct[unordered_key(rows[r].at(0), rows[r].at(1))] = v;
    }
  }
  std::vector<std::map<PairKey, double>> layer_w(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l)
    for (const auto &e : layers[l].edges)
      layer_w[l][unordered_key(e.a, e.b)] = e.mean_w;

  std::vector<ComparisonPoint> combined;
  std::vector<std::vector<ComparisonPoint>> per_layer(layers.size());
  for (const auto &[i, j] : scope_pairs(skeleton, scope)) {
    const auto &a = skeleton.nodes[i].name, &b = skeleton.nodes[j].name;
    const auto key = unordered_key(a, b);
    const auto d = direct.find(key);
    if (d == direct.end())
      continue;
    double total = 0.0;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto it = layer_w[l].find(key);
      const double w = it == layer_w[l].end() ? 0.0 : it->second;
      per_layer[l].push_back({a, b, w, d->second});
      total += w;
    }
    combined.push_back({a, b, total, d->second});
  }

  begin_stage("compare");
  const auto dir = stage_dir("compare");
  auto fit_json = [](std::span<const ComparisonPoint> pts) {
    try {
      const auto f = compare_projection_to_direct_mi(pts);
      return ojson{{"n_pairs", f.n_pairs},
                   {"n_used", f.n_used},
                   {"n_excluded_zero", f.n_excluded},
                   {"pearson_r", f.pearson_r},
                   {"slope", f.slope},
                   {"intercept", f.intercept},
                   {"slope_p_value", f.slope_p_value},
                   {"log_base", 10}};
    } catch (const InsufficientDataError &e) {
      return ojson{{"n_pairs", pts.size()},
                   {"error", e.what()},
                   {"zero_variance", e.zero_variance()}};
    }
  };
  ojson report;
  report["scope"] = to_string(scope);
  report["x"] = "direct MI (bits, mean over runs)";
  report["y"] = "projected score (mean over runs)";
  report["combined"] = fit_json(combined);
  for (std::size_t l = 0; l < layers.size(); ++l)
    report[std::string(to_string(layers[l].layer))] = fit_json(per_layer[l]);
  write_json(dir / "fit.json", report);

  {
    std::ofstream os(dir / "points.csv", std::ios::binary);
    csv::write_row(os, {"node_a", "node_b", "layer", "w", "mi_bits"});
    for (const auto &p : combined)
      csv::write_row(os, {p.a, p.b, "combined", format_double(p.w),
                          format_double(p.mi)});
    for (std::size_t l = 0; l < layers.size(); ++l)
      for (const auto &p : per_layer[l])
        csv::write_row(os, {p.a, p.b, std::string(to_string(layers[l].layer)),
                            format_double(p.w), format_double(p.mi)});
  }
  write_manifest("compare",
                 {pdir / "projected.csv", ndir / "direct_mi.csv",
                  ndir / "nodes.csv"},
                 {});
  if (report["combined"].contains("error"))
    throw InsufficientDataError(report["combined"]["error"].get<std::string>(),
                                report["combined"]["zero_variance"].get<bool>());
}

void write_error_record(const fs::path &output_dir, const std::string &kind,
                        const std::string &message, int exit_code) {
  std::error_code ec;
  fs::create_directories(output_dir, ec);
  std::ofstream os(output_dir / "error.json", std::ios::binary);
  if (os)
    os << ojson{{"error", kind}, {"message", message}, {"exit_code", exit_code}}
              .dump(2)
       << '\n';
}

} // namespace mpnet
