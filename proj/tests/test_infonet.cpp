#include "mpnet/errors.hpp"
#include "mpnet/infonet.hpp"
#include "mpnet/seeding.hpp"
#include "support/oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <fstream>
#include <sstream>
#include <tuple>

using namespace mpnet;

namespace {

std::vector<Code> random_codes(std::mt19937_64 &rng, std::size_t n,
                               unsigned levels) {
  std::vector<Code> v(n);
  for (auto &c : v)
    c = static_cast<Code>(rng() % levels);
  return v;
}

DiscreteMatrix matrix_of(const std::vector<VariableMeta> &meta,
                         const std::vector<std::vector<Code>> &codes) {
  DiscreteMatrix m;
  for (std::size_t r = 0; r < codes.front().size(); ++r)
    m.participant_ids.push_back("p" + std::to_string(r));
  m.meta = meta;
  m.codes = codes;
  for (const auto &col : codes) {
    const Code top = *std::max_element(col.begin(), col.end());
    m.n_levels.push_back(top + 1u);
    std::vector<std::string> labels;
    for (unsigned l = 0; l <= top; ++l)
      labels.push_back(std::to_string(l));
    m.level_labels.push_back(labels);
  }
  return m;
}

PairwiseInformation info_of(std::vector<std::string> names,
                            std::vector<double> entropy,
                            std::vector<std::tuple<int, int, double>> mi) {
  PairwiseInformation info;
  for (const auto &n : names)
    info.nodes.push_back({n, Group::metabolome, Kind::continuous, ""});
  info.entropy = std::move(entropy);
  const std::size_t p = names.size();
  info.mi.assign(p * p, 0.0);
  info.evaluated.assign(p * p, true);
  for (const auto &[i, j, v] : mi) {
    info.mi[i * p + j] = v;
    info.mi[j * p + i] = v;
  }
  return info;
}

} // namespace

TEST_SUITE("infonet") {

TEST_CASE("mutual information of simple tables") {
  CHECK(mutual_information(JointDistribution::from_counts(2, 2, {1, 0, 0, 1})) ==
        doctest::Approx(1.0).epsilon(1e-15));
  CHECK(mutual_information(JointDistribution::from_counts(2, 2, {3, 3, 3, 3})) ==
        0.0);
  CHECK(mutual_information(JointDistribution::from_counts(2, 3, {2, 4, 6, 1, 2, 3})) ==
        0.0);
  CHECK_THROWS_AS(JointDistribution::from_counts(2, 2, {0, 0, 0, 0}),
                  DomainError);
  CHECK_THROWS_AS(JointDistribution::from_counts(2, 2, {1, 1, 1}), DomainError);
}

TEST_CASE("joint_counts tabulates code pairs") {
  const std::vector<Code> x{0, 1, 1, 2}, y{1, 0, 0, 1};
  const auto j = joint_counts(x, y);
  CHECK(j.x_levels == 3);
  CHECK(j.y_levels == 2);
  CHECK(j.counts == std::vector<std::uint64_t>{0, 1, 2, 0, 0, 1});
  CHECK(j.n == 4);
  CHECK(j.transposed().at(1, 2) == 1);
}

TEST_CASE("entropy matches the oracle and bounds MI") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 200; ++t) {
    const auto x = random_codes(rng, 50, 1 + t % 7);
    const auto y = random_codes(rng, 50, 1 + t % 5);
    std::vector<std::uint64_t> counts(8, 0);
    for (auto c : x)
      ++counts[c];
    CHECK(std::fabs(entropy(x) - static_cast<double>(oracle::entropy(counts))) <
          1e-12);
    const double mi = mutual_information(joint_counts(x, y));
    CHECK(mi <= std::min(entropy(x), entropy(y)) + 1e-12);
    CHECK(std::fabs(mutual_information(joint_counts(x, x)) - entropy(x)) < 1e-12);
  }
}

TEST_CASE("permutation p-value is bounded and add-one corrected") {
  std::mt19937_64 rng(5);
  const auto x = random_codes(rng, 80, 3);
  const auto y = random_codes(rng, 80, 4);
  const double p = permutation_pvalue(x, y, 99, 1);
  CHECK(p >= 1.0 / 100);
  CHECK(p <= 1.0);
  const double k = p * 100;
  CHECK(std::fabs(k - std::round(k)) < 1e-9);

  // A perfectly dependent pair beats every permutation.
  CHECK(permutation_pvalue(x, x, 99, 1) == doctest::Approx(1.0 / 100));
  // Constant margins carry no evidence.
  const std::vector<Code> flat(80, 0);
  CHECK(permutation_pvalue(x, flat, 99, 1) == 1.0);
  CHECK(permutation_pvalue(flat, y, 99, 1) == 1.0);
}

TEST_CASE("permutation replicates keep the margin and are seed-determined") {
  std::mt19937_64 rng(6);
  const auto y = random_codes(rng, 60, 5);
  PermutationNull a(y, 10, 123), b(y, 10, 123), c(y, 10, 124);
  for (std::size_t r = 0; r < 10; ++r) {
    const auto rep = a.replicate(r);
    std::vector<Code> sa(rep.begin(), rep.end());
    b.replicate(9 - r);
    auto sorted = sa;
    auto ys = y;
    std::sort(sorted.begin(), sorted.end());
    std::sort(ys.begin(), ys.end());
    CHECK(sorted == ys);
  }
  // Generation order does not matter; the seed does.
  for (std::size_t r = 0; r < 10; ++r) {
    const auto ra = a.replicate(r), rb = b.replicate(r), rc = c.replicate(r);
    CHECK(std::equal(ra.begin(), ra.end(), rb.begin(), rb.end()));
    CHECK_FALSE(std::equal(ra.begin(), ra.end(), rc.begin(), rc.end()));
  }
}

TEST_CASE("early stopping never changes the edge decision") {
  std::mt19937_64 rng(8);
  const double alpha = 0.05;
  for (int t = 0; t < 100; ++t) {
    const auto y = random_codes(rng, 60, 3);
    auto x = random_codes(rng, 60, 3);
    if (t % 3 == 0)
      for (std::size_t i = 0; i < 30; ++i)
        x[i] = y[i];
    PermutationNull full(y, 199, t), fast(y, 199, t);
    const auto a = full.test(x);
    const auto b = fast.test(x, alpha);
    CHECK((a.p_value < alpha) == (b.p_value < alpha));
    if (b.complete)
      CHECK(a.p_value == b.p_value);
    else
      CHECK(b.p_value <= a.p_value);
    CHECK(a.mi == b.mi);
  }
}

TEST_CASE("redundancy filter drop rules") {
  // a~b redundant, b~c redundant, d independent.
  auto info = info_of({"a", "b", "c", "d"}, {1, 1, 1, 1},
                      {{0, 1, 0.95}, {1, 2, 0.9}, {2, 3, 0.1}});
  RedundancyConfig cfg;

  SUBCASE("name tie-break drops the larger name") {
    const auto r = redundancy_filter(info, cfg);
    REQUIRE(r.drops.size() == 1);
    CHECK(r.drops[0].dropped == "b");
    CHECK(r.drops[0].partner == "a");
    CHECK(r.drops[0].reason == "name tie-break");
    CHECK(r.kept == std::vector<std::string>{"a", "c", "d"});
  }
  SUBCASE("higher missingness goes first") {
    cfg.missingness = {{"a", 0.3}, {"b", 0.1}, {"c", 0.0}};
    const auto r = redundancy_filter(info, cfg);
    REQUIRE(r.drops.size() == 2);
    CHECK(r.drops[0].dropped == "a");
    CHECK(r.drops[1].dropped == "b");
    CHECK(r.drops[1].partner == "c");
  }
  SUBCASE("protected variables survive") {
    cfg.protected_nodes = {"b"};
    const auto r = redundancy_filter(info, cfg);
    REQUIRE(r.drops.size() == 2);
    CHECK(r.drops[0].dropped == "a");
    CHECK(r.drops[1].dropped == "c");
    CHECK(r.drops[0].reason == "partner protected");
  }
  SUBCASE("pre-excluded variables are removed before scoring") {
    cfg.pre_excluded = {"b"};
    const auto r = redundancy_filter(info, cfg);
    CHECK(r.kept == std::vector<std::string>{"a", "c", "d"});
    cfg.pre_excluded = {"zzz"};
    CHECK_THROWS_AS(redundancy_filter(info, cfg), ConfigError);
  }
  SUBCASE("threshold is strict") {
    cfg.threshold = 0.95;
    CHECK(redundancy_filter(info, cfg).kept.size() == 4);
  }
}

TEST_CASE("normalized MI is zero for constant variables") {
  auto info = info_of({"a", "b"}, {0.0, 1.0}, {{0, 1, 0.0}});
  CHECK(info.normalized(0, 1) == 0.0);
}

TEST_CASE("pairwise information averages runs and honours scope") {
  std::mt19937_64 rng(9);
  const std::vector<VariableMeta> meta{
      {"m1", Group::metabolome, Kind::continuous, ""},
      {"m2", Group::metabolome, Kind::continuous, ""},
      {"c1", Group::cvd_phenotype, Kind::continuous, ""}};
  std::vector<DiscreteMatrix> runs;
  for (int r = 0; r < 3; ++r)
    runs.push_back(matrix_of(meta, {random_codes(rng, 40, 3),
                                    random_codes(rng, 40, 3),
                                    random_codes(rng, 40, 2)}));
  const auto within = pairwise_information(runs, RedundancyScope::within_group);
  CHECK(within.was_evaluated(0, 1));
  CHECK_FALSE(within.was_evaluated(0, 2));
  double mean = 0.0;
  for (const auto &m : runs)
    mean += mutual_information(joint_counts(m.codes[0], m.codes[1]));
  CHECK(within.at(0, 1) == doctest::Approx(mean / 3).epsilon(1e-12));
  const auto all = pairwise_information(runs, RedundancyScope::all_pairs);
  CHECK(all.was_evaluated(0, 2));
}

TEST_CASE("significant network keeps planted edges only across groups") {
  std::mt19937_64 rng(10);
  const std::size_t n = 300;
  const auto c1 = random_codes(rng, n, 4);
  auto m1 = c1; // identical to c1
  const auto m2 = random_codes(rng, n, 4);
  const auto d1 = random_codes(rng, n, 3);
  auto m3 = m2; // identical to m2 but same layer
  const std::vector<VariableMeta> meta{
      {"m1", Group::metabolome, Kind::continuous, ""},
      {"m2", Group::metabolome, Kind::continuous, ""},
      {"m3", Group::metabolome, Kind::continuous, ""},
      {"c1", Group::cvd_phenotype, Kind::continuous, ""},
      {"d1", Group::depressive_symptom, Kind::discrete_ordinal, ""}};
  const auto mat = matrix_of(meta, {m1, m2, m3, c1, d1});
  const std::vector<std::string> kept{"m1", "m2", "m3", "c1", "d1"};
  NetworkConfig cfg;
  cfg.permutations = 199;
  const auto net = build_significant_network(mat, kept, cfg, 7);
  net.validate();
  bool planted = false;
  for (const auto &e : net.edges) {
    CHECK(e.i < e.j);
    CHECK(e.p_value < cfg.alpha);
    CHECK(is_biomarker(net.group(e.i)) != is_biomarker(net.group(e.j)));
    if (net.nodes[e.i].name == "m1" && net.nodes[e.j].name == "c1")
      planted = true;
  }
  CHECK(planted);
  CHECK(std::is_sorted(net.edges.begin(), net.edges.end(),
                       [](const MiEdge &a, const MiEdge &b) {
                         return std::tie(a.i, a.j) < std::tie(b.i, b.j);
                       }));

  cfg.within_layer_edges = true;
  const auto ext = build_significant_network(mat, kept, cfg, 7);
  bool layer_edge = false;
  for (const auto &e : ext.edges)
    if (net.nodes[e.i].name == "m2" && net.nodes[e.j].name == "m3")
      layer_edge = true;
  CHECK(layer_edge);

  Executor one(1), four(4);
  const auto a = build_significant_network(mat, kept, cfg, 7, one);
  const auto b = build_significant_network(mat, kept, cfg, 7, four);
  CHECK(a.edges == b.edges);
}

TEST_CASE("network CSV round trip") {
  oracle::TempDir dir("network");
  std::mt19937_64 rng(12);
  oracle::NetworkShape shape{4, 3, 2, 2, 1};
  std::vector<MiNetwork> runs;
  for (std::size_t r = 0; r < 3; ++r) {
    runs.push_back(oracle::random_network(rng, shape, 0.5));
    runs.back().run_id = r;
    for (auto &e : runs.back().edges)
      e.p_value = 0.001 * (r + 1);
  }
  {
    std::ofstream n(dir.path() / "nodes.csv"), e(dir.path() / "edges.csv");
    write_nodes_csv(n, runs[0].nodes);
    write_edges_csv(e, runs);
  }
  const auto back = read_networks(dir.path() / "nodes.csv",
                                  dir.path() / "edges.csv", 3, 0.01, false);
  REQUIRE(back.size() == 3);
  for (std::size_t r = 0; r < 3; ++r) {
    CHECK(back[r].nodes == runs[r].nodes);
    CHECK(back[r].edges == runs[r].edges);
    CHECK(back[r].run_id == r);
  }
}

TEST_CASE("direct MI reports every requested pair") {
  std::mt19937_64 rng(13);
  const std::vector<VariableMeta> meta{
      {"c1", Group::cvd_phenotype, Kind::continuous, ""},
      {"d1", Group::depressive_symptom, Kind::discrete_ordinal, ""}};
  const auto c = random_codes(rng, 100, 3);
  const auto mat = matrix_of(meta, {c, c});
  const std::vector<std::pair<std::string, std::string>> pairs{{"c1", "d1"}};
  const auto d = direct_mutual_information(mat, pairs, 99, 1);
  REQUIRE(d.size() == 1);
  CHECK(d[0].mi == doctest::Approx(entropy(c)));
  CHECK(d[0].p_value == doctest::Approx(0.01));
}

}
