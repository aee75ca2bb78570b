#include "mpnet/projection.hpp"

#include "mpnet/csv.hpp"
#include "mpnet/errors.hpp"
#include "mpnet/format.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <tuple>
#include <unordered_map>

namespace mpnet {

namespace {

const LayerIndex::Neighbor *
find_neighbor(std::span<const LayerIndex::Neighbor> list, std::size_t node) {
  const auto it = std::lower_bound(
      list.begin(), list.end(), node,
      [](const LayerIndex::Neighbor &n, std::size_t v) { return n.node < v; });
  return it != list.end() && it->node == node ? &*it : nullptr;
}

/// Calls fn(k, f_ik, f_jk) for every shared neighbour k in ascending order.
template <typename Fn>
void for_each_shared(std::span<const LayerIndex::Neighbor> a,
                     std::span<const LayerIndex::Neighbor> b, Fn &&fn) {
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (ia->node < ib->node) {
      ++ia;
    } else if (ib->node < ia->node) {
      ++ib;
    } else {
      fn(ia->node, ia->weight, ib->weight);
      ++ia;
      ++ib;
    }
  }
}

void require_omics(Group layer) {
  if (!is_biomarker(layer))
    throw ConfigError("'" + std::string(to_string(layer)) +
                      "' is not an omics layer");
}

double mean_and_se(std::span<const double> xs, double &se) {
  const double n = static_cast<double>(xs.size());
  double sum = 0.0;
  for (const double x : xs)
    sum += x;
  const double mean = sum / n;
  se = 0.0;
  if (xs.size() > 1) {
    double ss = 0.0;
    for (const double x : xs)
      ss += (x - mean) * (x - mean);
    se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return mean;
}

double parse_double(const std::string &s, std::size_t row, std::size_t col) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ParseError("cannot parse '" + s + "' as a number", row, col);
  return v;
}

} // namespace

std::string_view to_string(Definition d) noexcept {
  switch (d) {
  case Definition::count:
    return "count";
  case Definition::average:
    return "average";
  case Definition::extended:
    return "extended";
  }
  return "unknown";
}

Definition parse_definition(std::string_view s) {
  if (s == "count")
    return Definition::count;
  if (s == "average")
    return Definition::average;
  if (s == "extended")
    return Definition::extended;
  throw ConfigError("unknown projection definition '" + std::string(s) + "'");
}

PairScope parse_pair_scope(std::string_view s) {
  PairScope scope;
  if (s == "cvd-x-depression")
    scope.kind = ScopeKind::cvd_x_depression;
  else if (s == "phenotypes")
    scope.kind = ScopeKind::phenotypes;
  else if (s == "risk-x-phenotype")
    scope.kind = ScopeKind::risk_x_phenotype;
  else if (s == "full")
    scope.kind = ScopeKind::full;
  else if (s.starts_with("pair:")) {
    scope.kind = ScopeKind::explicit_pairs;
    std::string_view rest = s.substr(5);
    while (!rest.empty()) {
      const auto semi = rest.find(';');
      const auto item = rest.substr(0, semi);
      const auto comma = item.find(',');
      if (comma == std::string_view::npos || comma == 0 ||
          comma + 1 == item.size())
        throw ConfigError("malformed pair '" + std::string(item) +
                          "' in pair scope");
      scope.pairs.emplace_back(std::string(item.substr(0, comma)),
                               std::string(item.substr(comma + 1)));
      rest = semi == std::string_view::npos ? std::string_view{}
                                            : rest.substr(semi + 1);
    }
    if (scope.pairs.empty())
      throw ConfigError("pair scope lists no pairs");
  } else {
    throw ConfigError("unknown pair scope '" + std::string(s) + "'");
  }
  return scope;
}

std::string to_string(const PairScope &scope) {
  switch (scope.kind) {
  case ScopeKind::cvd_x_depression:
    return "cvd-x-depression";
  case ScopeKind::phenotypes:
    return "phenotypes";
  case ScopeKind::risk_x_phenotype:
    return "risk-x-phenotype";
  case ScopeKind::full:
    return "full";
  case ScopeKind::explicit_pairs: {
    std::string s = "pair:";
    for (std::size_t k = 0; k < scope.pairs.size(); ++k) {
      if (k)
        s += ';';
      s += scope.pairs[k].first + "," + scope.pairs[k].second;
    }
    return s;
  }
  }
  return "unknown";
}

std::vector<std::pair<std::size_t, std::size_t>>
scope_pairs(const MiNetwork &net, const PairScope &scope) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  const std::size_t n = net.nodes.size();
  auto g = [&](std::size_t i) { return net.nodes[i].group; };

  switch (scope.kind) {
  case ScopeKind::cvd_x_depression:
    for (std::size_t i = 0; i < n; ++i)
      if (g(i) == Group::cvd_phenotype)
        for (std::size_t j = 0; j < n; ++j)
          if (g(j) == Group::depressive_symptom)
            pairs.emplace_back(i, j);
    break;
  case ScopeKind::phenotypes:
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (is_phenotype(g(i)) && is_phenotype(g(j)))
          pairs.emplace_back(i, j);
    break;
  case ScopeKind::risk_x_phenotype:
    for (std::size_t i = 0; i < n; ++i)
      if (g(i) == Group::risk_factor)
        for (std::size_t j = 0; j < n; ++j)
          if (is_phenotype(g(j)))
            pairs.emplace_back(i, j);
    break;
  case ScopeKind::full:
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        if (is_biomarker(g(i)) || is_biomarker(g(j)))
          continue;
        if (!scope.include_risk_risk && g(i) == Group::risk_factor &&
            g(j) == Group::risk_factor)
          continue;
        pairs.emplace_back(i, j);
      }
    break;
  case ScopeKind::explicit_pairs:
    for (const auto &[a, b] : scope.pairs) {
      const auto i = net.index_of(a), j = net.index_of(b);
      if (is_biomarker(g(i)) || is_biomarker(g(j)))
        throw DomainError("pair (" + a + ", " + b +
                          ") includes a biomarker node");
      if (i == j)
        throw DomainError("pair (" + a + ", " + b + ") repeats a node");
      pairs.emplace_back(i, j);
    }
    break;
  }
  return pairs;
}

LayerIndex::LayerIndex(const MiNetwork &net, Group layer)
    : layer_(layer), adjacency_(net.nodes.size()),
      layer_adjacency_(net.nodes.size()) {
  require_omics(layer);
  for (const auto &e : net.edges) {
    const Group gi = net.nodes[e.i].group, gj = net.nodes[e.j].group;
    if (gi == layer && gj == layer) {
      layer_adjacency_[e.i].push_back({e.j, e.mi});
      layer_adjacency_[e.j].push_back({e.i, e.mi});
    } else if (gi == layer && !is_biomarker(gj)) {
      adjacency_[e.j].push_back({e.i, e.mi});
    } else if (gj == layer && !is_biomarker(gi)) {
      adjacency_[e.i].push_back({e.j, e.mi});
    }
  }
  auto by_node = [](const Neighbor &a, const Neighbor &b) {
    return a.node < b.node;
  };
  for (auto &list : adjacency_)
    std::sort(list.begin(), list.end(), by_node);
  for (auto &list : layer_adjacency_)
    std::sort(list.begin(), list.end(), by_node);
}

double project_pair(const LayerIndex &index, const MiNetwork &net,
                    std::size_t xi, std::size_t xj,
                    const ProjectionOptions &options) {
  if (xi == xj)
    throw DomainError("projection needs two distinct nodes");
  if (is_biomarker(net.group(xi)) || is_biomarker(net.group(xj)))
    throw DomainError("cannot project a biomarker node ('" +
                      net.nodes[is_biomarker(net.group(xi)) ? xi : xj].name +
                      "')");
  const auto ni = index.neighbors(xi);
  const auto nj = index.neighbors(xj);

  double w = 0.0;
  if (options.definition == Definition::count) {
    for_each_shared(ni, nj, [&](std::size_t, double, double) { w += 1.0; });
    return w;
  }
  for_each_shared(ni, nj,
                  [&](std::size_t, double fi, double fj) { w += (fi + fj) / 2; });
  if (options.definition == Definition::extended) {
    double paths = 0.0;
    for (const auto &[k, fik] : ni)
      for (const auto &[l, fkl] : index.biomarker_neighbors(k))
        if (const auto *lj = find_neighbor(nj, l))
          paths += (fik + fkl + lj->weight) / 3;
    w += options.lambda * paths;
  }
  return w;
}

double project_pair(const MiNetwork &net, std::string_view xi,
                    std::string_view xj, Group layer,
                    const ProjectionOptions &options) {
  const LayerIndex index(net, layer);
  return project_pair(index, net, net.index_of(xi), net.index_of(xj), options);
}

ProjectedLayer project_layer(const MiNetwork &net, const PairScope &scope,
                             Group layer, const ProjectionOptions &options) {
  const LayerIndex index(net, layer);
  ProjectedLayer out;
  out.layer = layer;
  out.definition = options.definition;
  out.run_id = net.run_id;
  for (const auto &[i, j] : scope_pairs(net, scope)) {
    const double w = project_pair(index, net, i, j, options);
    if (w > 0.0)
      out.edges.push_back({net.nodes[i].name, net.nodes[j].name, w});
  }
  return out;
}

double contribution(const MiNetwork &net, std::string_view biomarker,
                    const PairScope &scope) {
  const std::size_t k = net.index_of(biomarker);
  if (!is_biomarker(net.group(k)))
    throw DomainError("'" + std::string(biomarker) + "' is not a biomarker");
  const LayerIndex index(net, net.group(k));
  double con = 0.0;
  for (const auto &[i, j] : scope_pairs(net, scope)) {
    const auto *fi = find_neighbor(index.neighbors(i), k);
    const auto *fj = find_neighbor(index.neighbors(j), k);
    if (fi && fj)
      con += (fi->weight + fj->weight) / 2;
  }
  return con;
}

std::map<std::string, double> layer_contributions(const MiNetwork &net,
                                                  const PairScope &scope,
                                                  Group layer) {
  const LayerIndex index(net, layer);
  std::vector<double> con(net.nodes.size(), 0.0);
  for (const auto &[i, j] : scope_pairs(net, scope))
    for_each_shared(index.neighbors(i), index.neighbors(j),
                    [&](std::size_t k, double fi, double fj) {
                      con[k] += (fi + fj) / 2;
                    });
  std::map<std::string, double> out;
  for (std::size_t k = 0; k < net.nodes.size(); ++k)
    if (net.group(k) == layer)
      out.emplace(net.nodes[k].name, con[k]);
  return out;
}

ContributionRanking
rank_contributions(std::span<const std::map<std::string, double>> runs,
                   std::size_t top_k) {
  if (top_k < 1)
    throw ConfigError("top_k must be at least 1");
  if (runs.empty())
    throw DomainError("rank_contributions needs at least one run");
  std::set<std::string> names;
  for (const auto &run : runs)
    for (const auto &[name, value] : run)
      names.insert(name);

  ContributionRanking ranking;
  ranking.n_runs = runs.size();
  ranking.degenerate_n = runs.size() == 1;
  std::vector<double> values(runs.size());
  for (const auto &name : names) {
    for (std::size_t r = 0; r < runs.size(); ++r) {
      const auto it = runs[r].find(name);
      values[r] = it == runs[r].end() ? 0.0 : it->second;
    }
    RankEntry e{name, 0.0, 0.0};
    e.mean = mean_and_se(values, e.se);
    ranking.entries.push_back(std::move(e));
  }
  std::stable_sort(ranking.entries.begin(), ranking.entries.end(),
                   [](const RankEntry &a, const RankEntry &b) {
                     if (a.mean != b.mean)
                       return a.mean > b.mean;
                     return a.name < b.name;
                   });
  ranking.top.assign(ranking.entries.begin(),
                     ranking.entries.begin() +
                         static_cast<std::ptrdiff_t>(
                             std::min(top_k, ranking.entries.size())));
  return ranking;
}

AggregatedLayer aggregate_runs(std::span<const ProjectedLayer> runs) {
  AggregatedLayer out;
  if (runs.empty())
    return out;
  out.layer = runs.front().layer;
  out.definition = runs.front().definition;
  out.n_runs = runs.size();
  for (const auto &r : runs) {
    if (r.definition != out.definition)
      throw ConfigError("cannot aggregate runs with different definitions");
    if (r.layer != out.layer)
      throw ConfigError("cannot aggregate runs from different layers");
  }

  std::map<std::pair<std::string, std::string>, std::size_t> slot;
  std::vector<std::vector<double>> values;
  for (std::size_t r = 0; r < runs.size(); ++r)
    for (const auto &e : runs[r].edges) {
      const auto [it, inserted] = slot.try_emplace({e.a, e.b}, values.size());
      if (inserted) {
        values.emplace_back(runs.size(), 0.0);
        out.edges.push_back({e.a, e.b, 0.0, 0.0, 0});
      }
      values[it->second][r] = e.w;
      ++out.edges[it->second].present_runs;
    }
  for (std::size_t k = 0; k < out.edges.size(); ++k)
    out.edges[k].mean_w = mean_and_se(values[k], out.edges[k].se_w);
  return out;
}

RelativeImportance relative_importance(std::span<const AggregatedLayer> layers,
                                       const std::vector<VariableMeta> &nodes) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    index.emplace(nodes[i].name, i);
  const std::size_t n = nodes.size();
  std::vector<double> score(n * n, 0.0);
  bool any_link = false;

  for (const auto &layer : layers)
    for (const auto &e : layer.edges) {
      const auto ia = index.find(e.a), ib = index.find(e.b);
      if (ia == index.end() || ib == index.end())
        throw DomainError("projected edge (" + e.a + ", " + e.b +
                          ") names an unknown node");
      std::size_t risk = ia->second, pheno = ib->second;
      if (nodes[risk].group != Group::risk_factor)
        std::swap(risk, pheno);
      if (nodes[risk].group != Group::risk_factor ||
          !is_phenotype(nodes[pheno].group))
        continue;
      score[risk * n + pheno] += e.mean_w;
      any_link = any_link || e.mean_w > 0.0;
    }
  if (!any_link)
    throw InsufficientDataError(
        "relative importance needs at least one risk factor-phenotype link");

  RelativeImportance out;
  std::vector<std::size_t> risks;
  for (std::size_t i = 0; i < n; ++i)
    if (nodes[i].group == Group::risk_factor) {
      risks.push_back(i);
      out.risk_factors.push_back(nodes[i].name);
    }
  std::vector<double> cvd(risks.size(), 0.0), dep(risks.size(), 0.0);

  for (std::size_t j = 0; j < n; ++j) {
    if (!is_phenotype(nodes[j].group))
      continue;
    double total = 0.0;
    for (const auto z : risks)
      total += score[z * n + j];
    if (total <= 0.0) {
      out.excluded.push_back(nodes[j].name);
      continue;
    }
    const bool is_cvd = nodes[j].group == Group::cvd_phenotype;
    (is_cvd ? out.cvd_phenotypes_used : out.depression_phenotypes_used) += 1;
    for (std::size_t z = 0; z < risks.size(); ++z) {
      const double w = score[risks[z] * n + j];
      if (w <= 0.0)
        continue;
      const double r = w / total;
      out.per_phenotype.push_back({nodes[risks[z]].name, nodes[j].name, r});
      (is_cvd ? cvd : dep)[z] += r;
    }
  }
  for (std::size_t z = 0; z < risks.size(); ++z) {
    out.cvd_percent.push_back(
        out.cvd_phenotypes_used
            ? 100.0 * cvd[z] / static_cast<double>(out.cvd_phenotypes_used)
            : 0.0);
    out.depression_percent.push_back(
        out.depression_phenotypes_used
            ? 100.0 * dep[z] /
                  static_cast<double>(out.depression_phenotypes_used)
            : 0.0);
  }
  return out;
}

FitReport compare_projection_to_direct_mi(std::span<const ComparisonPoint> points) {
  FitReport report;
  report.n_pairs = points.size();
  std::vector<double> xs, ys;
  for (const auto &p : points) {
    if (p.w > 0.0 && p.mi > 0.0 && std::isfinite(p.w) && std::isfinite(p.mi)) {
      xs.push_back(std::log10(p.mi));
      ys.push_back(std::log10(p.w));
    }
  }
  report.n_used = xs.size();
  report.n_excluded = report.n_pairs - report.n_used;
  if (xs.size() < 3)
    throw InsufficientDataError("log-log fit needs at least 3 pairs with "
                                "positive score and MI, got " +
                                std::to_string(xs.size()));

  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    mx += xs[k];
    my += ys[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    syy += (ys[k] - my) * (ys[k] - my);
    sxy += (xs[k] - mx) * (ys[k] - my);
  }
  if (sxx <= 0.0 || syy <= 0.0)
    throw InsufficientDataError(
        "log-log fit undefined: zero variance in " +
            std::string(sxx <= 0.0 ? "MI" : "projected score"),
        true);

  report.pearson_r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  report.slope = sxy / sxx;
  report.intercept = my - report.slope * mx;
  const double df = n - 2.0;
  const double r2 = report.pearson_r * report.pearson_r;
  if (df < 1.0) {
    report.slope_p_value = 1.0;
  } else if (r2 >= 1.0) {
    report.slope_p_value = 0.0;
  } else {
    const double t = std::abs(report.pearson_r) * std::sqrt(df / (1.0 - r2));
    const boost::math::students_t dist(df);
    report.slope_p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, t));
  }
  return report;
}

void write_aggregated_csv_header(std::ostream &os) {
  csv::write_row(os, {"node_a", "node_b", "layer", "definition", "mean_w",
                      "se_w", "n_runs"});
}

void write_aggregated_csv_rows(std::ostream &os, const AggregatedLayer &layer) {
  for (const auto &e : layer.edges)
    csv::write_row(os, {e.a, e.b, std::string(to_string(layer.layer)),
                        std::string(to_string(layer.definition)),
                        format_double(e.mean_w), format_double(e.se_w),
                        std::to_string(e.present_runs)});
}

void write_projected_runs_csv(std::ostream &os,
                              std::span<const ProjectedLayer> runs) {
  csv::write_row(os,
                 {"run_id", "node_a", "node_b", "layer", "definition", "w"});
  for (const auto &r : runs)
    for (const auto &e : r.edges)
      csv::write_row(os, {std::to_string(r.run_id), e.a, e.b,
                          std::string(to_string(r.layer)),
                          std::string(to_string(r.definition)),
                          format_double(e.w)});
}

std::vector<ProjectedLayer>
read_projected_runs_csv(const std::filesystem::path &path) {
  const auto rows = csv::read_file(path);
  std::vector<ProjectedLayer> out;
  std::map<std::tuple<std::size_t, Group, Definition>, std::size_t> slot;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto &row = rows[r];
    if (row.size() != 6)
      throw ParseError("bad projected row", r + 1, row.size());
    const auto run = static_cast<std::size_t>(parse_double(row[0], r + 1, 1));
    const Group layer = parse_group(row[3]);
    const Definition def = parse_definition(row[4]);
    const auto [it, inserted] =
        slot.try_emplace({run, layer, def}, out.size());
    if (inserted)
      out.push_back({layer, def, run, {}});
    out[it->second].edges.push_back(
        {row[1], row[2], parse_double(row[5], r + 1, 6)});
  }
  return out;
}

graphml::Graph projected_graph(std::span<const AggregatedLayer> layers,
                               const std::vector<VariableMeta> &nodes) {
  graphml::Graph g;
  g.id = "projected_multilayer";
  g.node_keys = {{"group", "string"}};
  g.edge_keys = {{"layer", "string"},
                 {"definition", "string"},
                 {"mean_w", "double"},
                 {"se_w", "double"},
                 {"n_runs", "int"}};
  std::set<std::string> used;
  for (const auto &layer : layers)
    for (const auto &e : layer.edges) {
      used.insert(e.a);
      used.insert(e.b);
    }
  for (const auto &n : nodes)
    if (used.contains(n.name))
      g.nodes.push_back({n.name, {std::string(to_string(n.group))}});
  for (const auto &layer : layers)
    for (const auto &e : layer.edges)
      g.edges.push_back({e.a,
                         e.b,
                         {std::string(to_string(layer.layer)),
                          std::string(to_string(layer.definition)),
                          format_double(e.mean_w), format_double(e.se_w),
                          std::to_string(e.present_runs)}});
  return g;
}

} // namespace mpnet
