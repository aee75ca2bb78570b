#include "mpnet/infonet.hpp"

#include "mpnet/csv.hpp"
#include "mpnet/errors.hpp"
#include "mpnet/format.hpp"
#include "mpnet/seeding.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <random>
#include <tuple>

namespace mpnet {

namespace {

std::uint32_t level_count(std::span<const Code> v) {
  return v.empty() ? 0u
                   : static_cast<std::uint32_t>(
                         *std::max_element(v.begin(), v.end())) +
                         1u;
}

bool is_constant(std::span<const Code> v) {
  return std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) ==
         v.end();
}

double parse_double(const std::string &s, std::size_t row, std::size_t col) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError("cannot parse '" + s + "' as a number", row, col);
  return v;
}

} // namespace

// ---------------------------------------------------------------------------

std::vector<std::uint64_t> JointDistribution::x_marginal() const {
  std::vector<std::uint64_t> m(x_levels, 0);
  for (std::size_t a = 0; a < x_levels; ++a)
    for (std::size_t b = 0; b < y_levels; ++b)
      m[a] += at(a, b);
  return m;
}

std::vector<std::uint64_t> JointDistribution::y_marginal() const {
  std::vector<std::uint64_t> m(y_levels, 0);
  for (std::size_t a = 0; a < x_levels; ++a)
    for (std::size_t b = 0; b < y_levels; ++b)
      m[b] += at(a, b);
  return m;
}

JointDistribution JointDistribution::transposed() const {
  JointDistribution t;
  t.x_levels = y_levels;
  t.y_levels = x_levels;
  t.n = n;
  t.counts.resize(counts.size());
  for (std::size_t a = 0; a < x_levels; ++a)
    for (std::size_t b = 0; b < y_levels; ++b)
      t.counts[b * x_levels + a] = at(a, b);
  return t;
}

JointDistribution JointDistribution::from_counts(
    std::size_t x_levels, std::size_t y_levels,
    std::vector<std::uint64_t> counts) {
  if (counts.size() != x_levels * y_levels)
    throw DomainError("joint table shape does not match its counts");
  JointDistribution j;
  j.x_levels = x_levels;
  j.y_levels = y_levels;
  j.n = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
  if (j.n == 0)
    throw DomainError("joint table is empty");
  j.counts = std::move(counts);
  return j;
}

JointDistribution joint_counts(std::span<const Code> x,
                               std::span<const Code> y) {
  if (x.size() != y.size())
    throw DomainError("joint_counts: length mismatch (" +
                      std::to_string(x.size()) + " vs " +
                      std::to_string(y.size()) + ")");
  if (x.empty())
    throw DomainError("joint_counts: empty input");
  JointDistribution j;
  j.x_levels = level_count(x);
  j.y_levels = level_count(y);
  j.n = x.size();
  j.counts.assign(j.x_levels * j.y_levels, 0);
  for (std::size_t t = 0; t < x.size(); ++t)
    ++j.counts[x[t] * j.y_levels + y[t]];
  return j;
}

double mutual_information(const JointDistribution &j) {
  if (j.n == 0)
    throw DomainError("mutual_information: empty table");
  const auto px = j.x_marginal();
  const auto py = j.y_marginal();
  const double n = static_cast<double>(j.n);

  std::vector<double> terms;
  terms.reserve(j.counts.size());
  for (std::size_t a = 0; a < j.x_levels; ++a) {
    for (std::size_t b = 0; b < j.y_levels; ++b) {
      const std::uint64_t c = j.at(a, b);
      if (c == 0)
        continue;
      const double ratio = (static_cast<double>(c) * n) /
                           (static_cast<double>(px[a]) *
                            static_cast<double>(py[b]));
      terms.push_back(static_cast<double>(c) / n * std::log2(ratio));
    }
  }
  std::sort(terms.begin(), terms.end());
  double mi = 0.0;
  for (const double t : terms)
    mi += t;
  return std::max(mi, 0.0);
}

double entropy(std::span<const Code> x) {
  if (x.empty())
    return 0.0;
  std::vector<std::uint64_t> counts(level_count(x), 0);
  for (const Code v : x)
    ++counts[v];
  const double n = static_cast<double>(x.size());
  std::vector<double> terms;
  for (const auto c : counts)
    if (c > 0) {
      const double p = static_cast<double>(c) / n;
      terms.push_back(-p * std::log2(p));
    }
  std::sort(terms.begin(), terms.end());
  double h = 0.0;
  for (const double t : terms)
    h += t;
  return h;
}

// ---------------------------------------------------------------------------

PermutationNull::PermutationNull(std::span<const Code> y,
                                 std::size_t replicates, std::uint64_t seed)
    : y_(y.begin(), y.end()), y_levels_(level_count(y)),
      replicates_(replicates), seed_(seed), bank_(replicates) {
  if (replicates == 0)
    throw DomainError("permutation test needs at least one replicate");
  count_log_count_.resize(y_.size() + 1, 0.0);
  for (std::size_t c = 2; c <= y_.size(); ++c)
    count_log_count_[c] = static_cast<double>(c) * std::log2(static_cast<double>(c));
}

std::span<const Code> PermutationNull::replicate(std::size_t b) {
  auto &perm = bank_.at(b);
  if (perm.empty() && !y_.empty()) {
    perm = y_;
    std::mt19937_64 rng(derive_seed(seed_, b));
    for (std::size_t i = perm.size() - 1; i > 0; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i);
      std::swap(perm[i], perm[pick(rng)]);
    }
  }
  return perm;
}

double PermutationNull::joint_statistic(
    std::span<const std::uint32_t> x_offsets, std::span<const Code> y,
    std::vector<std::uint32_t> &cells) const {
  std::fill(cells.begin(), cells.end(), 0u);
  for (std::size_t t = 0; t < y.size(); ++t)
    ++cells[x_offsets[t] + y[t]];
  double s = 0.0;
  for (const auto c : cells)
    s += count_log_count_[c];
  return s;
}

PermutationTest PermutationNull::test(std::span<const Code> x,
                                      double stop_alpha) {
  if (x.size() != y_.size())
    throw DomainError("permutation test: length mismatch");
  PermutationTest result;
  if (x.empty())
    throw DomainError("permutation test: empty input");
  result.mi = mutual_information(joint_counts(x, y_));
  if (is_constant(x) || is_constant(y_)) {
    result.exceedances = replicates_;
    result.p_value = 1.0;
    return result;
  }

  // With both margins fixed, MI(x, y_b) >= MI(x, y) iff the joint
  // sum of c log c is at least as large.
  const std::uint32_t x_levels = level_count(x);
  std::vector<std::uint32_t> offsets(x.size());
  for (std::size_t t = 0; t < x.size(); ++t)
    offsets[t] = static_cast<std::uint32_t>(x[t]) * y_levels_;
  std::vector<std::uint32_t> cells(static_cast<std::size_t>(x_levels) *
                                   y_levels_);
  const double observed = joint_statistic(offsets, y_, cells);
  const double tolerance = 1e-10 * (1.0 + std::abs(observed));

  const double denom = static_cast<double>(replicates_ + 1);
  for (std::size_t b = 0; b < replicates_; ++b) {
    const double s = joint_statistic(offsets, replicate(b), cells);
    ++result.evaluated;
    if (s >= observed - tolerance)
      ++result.exceedances;
    if (stop_alpha < 1.0 &&
        static_cast<double>(1 + result.exceedances) / denom >= stop_alpha &&
        b + 1 < replicates_) {
      result.complete = false;
      break;
    }
  }
  result.p_value = static_cast<double>(1 + result.exceedances) / denom;
  return result;
}

double permutation_pvalue(std::span<const Code> x, std::span<const Code> y,
                          std::size_t replicates, std::uint64_t seed) {
  PermutationNull null(y, replicates, seed);
  return null.test(x).p_value;
}

// ---------------------------------------------------------------------------

double PairwiseInformation::normalized(std::size_t i, std::size_t j) const {
  const double h = std::min(entropy[i], entropy[j]);
  if (h <= 0.0)
    return 0.0;
  return at(i, j) / h;
}

PairwiseInformation pairwise_information(std::span<const DiscreteMatrix> runs,
                                         RedundancyScope scope,
                                         const Executor &executor) {
  if (runs.empty())
    throw DomainError("pairwise_information: no runs");
  const auto &first = runs.front();
  const std::size_t p = first.n_columns();
  for (const auto &r : runs)
    if (r.meta != first.meta)
      throw DomainError("pairwise_information: runs disagree on variables");

  PairwiseInformation info;
  info.nodes = first.meta;
  info.entropy.assign(p, 0.0);
  info.mi.assign(p * p, 0.0);
  info.evaluated.assign(p * p, false);

  const double n_runs = static_cast<double>(runs.size());
  for (std::size_t c = 0; c < p; ++c) {
    double h = 0.0;
    for (const auto &r : runs)
      h += entropy(r.codes[c]);
    info.entropy[c] = h / n_runs;
  }

  std::vector<std::vector<std::pair<std::size_t, double>>> rows(p);
  executor.parallel_for(p, [&](std::size_t i) {
    for (std::size_t j = i + 1; j < p; ++j) {
      if (scope == RedundancyScope::within_group &&
          first.meta[i].group != first.meta[j].group)
        continue;
      double total = 0.0;
      for (const auto &r : runs)
        total += mutual_information(joint_counts(r.codes[i], r.codes[j]));
      rows[i].emplace_back(j, total / n_runs);
    }
  });
  for (std::size_t i = 0; i < p; ++i)
    for (const auto &[j, v] : rows[i]) {
      info.mi[i * p + j] = info.mi[j * p + i] = v;
      info.evaluated[i * p + j] = info.evaluated[j * p + i] = true;
    }
  for (std::size_t i = 0; i < p; ++i) {
    info.mi[i * p + i] = info.entropy[i];
  }
  return info;
}

RedundancyResult redundancy_filter(const PairwiseInformation &info,
                                   const RedundancyConfig &config) {
  if (!(config.threshold > 0.0 && config.threshold <= 1.0))
    throw ConfigError("redundancy threshold must lie in (0, 1], got " +
                      format_double(config.threshold));
  const std::size_t p = info.nodes.size();
  std::vector<bool> dropped(p, false);
  RedundancyResult result;

  for (const auto &name : config.pre_excluded) {
    bool found = false;
    for (std::size_t i = 0; i < p; ++i)
      if (info.nodes[i].name == name && !dropped[i]) {
        dropped[i] = true;
        found = true;
        result.drops.push_back({name, "", 0.0, "pre-excluded"});
      }
    if (!found)
      throw ConfigError("pre-excluded variable '" + name + "' is not present");
  }

  struct Candidate {
    double score;
    std::size_t i, j;
  };
  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i + 1; j < p; ++j) {
      if (!info.was_evaluated(i, j))
        continue;
      const double s = info.normalized(i, j);
      if (s > config.threshold)
        candidates.push_back({s, i, j});
    }
  std::sort(candidates.begin(), candidates.end(),
            [&](const Candidate &a, const Candidate &b) {
              if (a.score != b.score)
                return a.score > b.score;
              return std::tie(info.nodes[a.i].name, info.nodes[a.j].name) <
                     std::tie(info.nodes[b.i].name, info.nodes[b.j].name);
            });

  auto missing = [&](std::size_t i) {
    const auto it = config.missingness.find(info.nodes[i].name);
    return it == config.missingness.end() ? 0.0 : it->second;
  };

  for (const auto &c : candidates) {
    if (dropped[c.i] || dropped[c.j])
      continue;
    const bool prot_i = config.protected_nodes.contains(info.nodes[c.i].name);
    const bool prot_j = config.protected_nodes.contains(info.nodes[c.j].name);
    if (prot_i && prot_j)
      continue;
    std::size_t victim;
    std::string reason;
    if (prot_i || prot_j) {
      victim = prot_i ? c.j : c.i;
      reason = "partner protected";
    } else if (missing(c.i) != missing(c.j)) {
      victim = missing(c.i) > missing(c.j) ? c.i : c.j;
      reason = "higher missingness";
    } else {
      victim = info.nodes[c.i].name > info.nodes[c.j].name ? c.i : c.j;
      reason = "name tie-break";
    }
    const std::size_t partner = victim == c.i ? c.j : c.i;
    dropped[victim] = true;
    result.drops.push_back(
        {info.nodes[victim].name, info.nodes[partner].name, c.score, reason});
  }

  for (std::size_t i = 0; i < p; ++i)
    if (!dropped[i])
      result.kept.push_back(info.nodes[i].name);
  return result;
}

// ---------------------------------------------------------------------------

std::optional<std::size_t> MiNetwork::find(std::string_view name) const {
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].name == name)
      return i;
  return std::nullopt;
}

std::size_t MiNetwork::index_of(std::string_view name) const {
  if (const auto i = find(name))
    return *i;
  throw DomainError("node '" + std::string(name) + "' is not in the network");
}

void MiNetwork::validate() const {
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto &edge = edges[e];
    if (edge.i >= edge.j || edge.j >= nodes.size())
      throw DomainError("network edge indices out of order");
    if (!(edge.p_value < alpha))
      throw DomainError("network edge with p >= alpha");
    if (edge.mi < 0.0)
      throw DomainError("negative MI edge weight");
    const Group gi = nodes[edge.i].group, gj = nodes[edge.j].group;
    if (!is_biomarker(gi) && !is_biomarker(gj))
      throw DomainError("network edge between two non-biomarker nodes");
    if (is_biomarker(gi) && is_biomarker(gj) &&
        (gi != gj || !within_layer_edges))
      throw DomainError("biomarker-biomarker edge not admissible");
    if (e > 0 && std::tie(edges[e - 1].i, edges[e - 1].j) >=
                     std::tie(edge.i, edge.j))
      throw DomainError("network edges not sorted or duplicated");
  }
}

MiNetwork build_significant_network(const DiscreteMatrix &m,
                                    std::span<const std::string> kept,
                                    const NetworkConfig &config,
                                    std::uint64_t seed,
                                    const Executor &executor) {
  if (!(config.alpha > 0.0 && config.alpha < 1.0))
    throw ConfigError("alpha must lie in (0, 1)");
  if (config.permutations == 0)
    throw ConfigError("permutation count must be positive");

  // Network nodes: kept variables in matrix order.
  std::vector<std::size_t> columns;
  {
    std::set<std::string_view> wanted(kept.begin(), kept.end());
    for (std::size_t c = 0; c < m.n_columns(); ++c)
      if (wanted.erase(m.meta[c].name))
        columns.push_back(c);
    if (!wanted.empty())
      throw DomainError("kept variable '" + std::string(*wanted.begin()) +
                        "' is not in the matrix");
  }

  MiNetwork net;
  net.alpha = config.alpha;
  net.run_id = m.run_id;
  net.within_layer_edges = config.within_layer_edges;
  for (const auto c : columns)
    net.nodes.push_back(m.meta[c]);

  // One task per permuted margin: every non-biomarker, and every biomarker
  // when same-layer pairs are wanted.
  std::vector<std::size_t> margins;
  for (std::size_t v = 0; v < columns.size(); ++v)
    if (!is_biomarker(net.nodes[v].group) || config.within_layer_edges)
      margins.push_back(v);

  std::vector<std::vector<MiEdge>> found(margins.size());
  executor.parallel_for(margins.size(), [&](std::size_t task) {
    const std::size_t yv = margins[task];
    const Group yg = net.nodes[yv].group;
    PermutationNull null(m.codes[columns[yv]], config.permutations,
                         derive_seed(seed, Stream::permutation, columns[yv]));
    for (std::size_t xv = 0; xv < columns.size(); ++xv) {
      const Group xg = net.nodes[xv].group;
      if (!is_biomarker(xg))
        continue;
      if (is_biomarker(yg) && (xg != yg || xv >= yv))
        continue;
      const auto t = null.test(m.codes[columns[xv]], config.alpha);
      if (t.p_value < config.alpha)
        found[task].push_back(
            {std::min(xv, yv), std::max(xv, yv), t.mi, t.p_value});
    }
  });
  for (auto &f : found)
    net.edges.insert(net.edges.end(), f.begin(), f.end());
  std::sort(net.edges.begin(), net.edges.end(),
            [](const MiEdge &a, const MiEdge &b) {
              return std::tie(a.i, a.j) < std::tie(b.i, b.j);
            });
  return net;
}

std::vector<DirectMi> direct_mutual_information(
    const DiscreteMatrix &m,
    std::span<const std::pair<std::string, std::string>> pairs,
    std::size_t permutations, std::uint64_t seed, const Executor &executor) {
  std::vector<DirectMi> out(pairs.size());
  executor.parallel_for(pairs.size(), [&](std::size_t k) {
    const auto a = m.index_of(pairs[k].first);
    const auto b = m.index_of(pairs[k].second);
    PermutationNull null(m.codes[b], permutations,
                         derive_seed(seed, Stream::direct,
                                     derive_seed(a, b)));
    const auto t = null.test(m.codes[a]);
    out[k] = {pairs[k].first, pairs[k].second, t.mi, t.p_value};
  });
  return out;
}

// ---------------------------------------------------------------------------

void write_nodes_csv(std::ostream &os, const std::vector<VariableMeta> &nodes) {
  csv::write_row(os, {"name", "group", "kind", "units"});
  for (const auto &n : nodes)
    csv::write_row(os, {n.name, std::string(to_string(n.group)),
                        std::string(to_string(n.kind)), n.units});
}

std::vector<VariableMeta> read_nodes_csv(const std::filesystem::path &path) {
  const auto rows = csv::read_file(path);
  std::vector<VariableMeta> nodes;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != 4)
      throw ParseError("bad node row", r + 1, rows[r].size());
    nodes.push_back({rows[r][0], parse_group(rows[r][1]),
                     parse_kind(rows[r][2]), rows[r][3]});
  }
  return nodes;
}

void write_edges_csv(std::ostream &os, std::span<const MiNetwork> runs) {
  csv::write_row(os, {"source", "target", "mi_bits", "p_value", "run_id"});
  for (const auto &net : runs)
    for (const auto &e : net.edges)
      csv::write_row(os, {net.nodes[e.i].name, net.nodes[e.j].name,
                          format_double(e.mi), format_double(e.p_value),
                          std::to_string(net.run_id)});
}

std::vector<MiNetwork> read_networks(const std::filesystem::path &nodes_csv,
                                     const std::filesystem::path &edges_csv,
                                     std::size_t n_runs, double alpha,
                                     bool within_layer_edges) {
  const auto nodes = read_nodes_csv(nodes_csv);
  std::vector<MiNetwork> runs(n_runs);
  for (std::size_t r = 0; r < n_runs; ++r) {
    runs[r].nodes = nodes;
    runs[r].alpha = alpha;
    runs[r].run_id = r;
    runs[r].within_layer_edges = within_layer_edges;
  }
  const auto rows = csv::read_file(edges_csv);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto &row = rows[r];
    if (row.size() != 5)
      throw ParseError("bad edge row", r + 1, row.size());
    const auto run = static_cast<std::size_t>(parse_double(row[4], r + 1, 5));
    if (run >= n_runs)
      throw DomainError("edge refers to run " + row[4] + " beyond n_runs");
    auto &net = runs[run];
    std::size_t i = net.index_of(row[0]), j = net.index_of(row[1]);
    if (i > j)
      std::swap(i, j);
    net.edges.push_back(
        {i, j, parse_double(row[2], r + 1, 3), parse_double(row[3], r + 1, 4)});
  }
  for (auto &net : runs) {
    std::sort(net.edges.begin(), net.edges.end(),
              [](const MiEdge &a, const MiEdge &b) {
                return std::tie(a.i, a.j) < std::tie(b.i, b.j);
              });
    net.validate();
  }
  return runs;
}

void write_drop_report(std::ostream &os, std::span<const DropRecord> drops) {
  csv::write_row(os, {"dropped", "partner", "normalized_mi", "reason"});
  for (const auto &d : drops)
    csv::write_row(os, {d.dropped, d.partner, format_double(d.normalized_mi),
                        d.reason});
}

graphml::Graph mean_network_graph(std::span<const MiNetwork> runs) {
  graphml::Graph g;
  g.id = "mi_network";
  g.node_keys = {{"group", "string"}, {"kind", "string"}};
  g.edge_keys = {{"mean_mi_bits", "double"}, {"n_significant_runs", "int"}};
  if (runs.empty())
    return g;
  const auto &nodes = runs.front().nodes;
  for (const auto &n : nodes)
    g.nodes.push_back({n.name, {std::string(to_string(n.group)),
                                std::string(to_string(n.kind))}});
  std::map<std::pair<std::size_t, std::size_t>, std::pair<double, int>> acc;
  for (const auto &net : runs)
    for (const auto &e : net.edges) {
      auto &slot = acc[{e.i, e.j}];
      slot.first += e.mi;
      ++slot.second;
    }
  for (const auto &[key, value] : acc)
    g.edges.push_back(
        {nodes[key.first].name, nodes[key.second].name,
         {format_double(value.first / static_cast<double>(runs.size())),
          std::to_string(value.second)}});
  return g;
}

} // namespace mpnet
