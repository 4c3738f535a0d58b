#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "siggame/analysis.hpp"
#include "test_util.hpp"

using namespace siggame;

namespace {

const PayoffTable& table2() {
  static const PayoffTable t(GameSpec::equiprobable(2));
  return t;
}

std::size_t id(const char* label) { return table2().space().parse_label(label); }

// Agents with the given primaries; link weight 1 toward `partners[i]`, `floor` elsewhere.
PopulationSnapshot build(const std::vector<std::size_t>& strategies,
                         const std::vector<std::vector<std::size_t>>& partners, double floor = 0.001) {
  PopulationSnapshot s;
  const std::size_t n = strategies.size();
  for (std::size_t i = 0; i < n; ++i)
    s.agents.push_back(test::pure_agent(i, n, 16, strategies[i], partners[i], 0.1, floor));
  return s;
}

// Two homogeneous groups of 10 (S1R1, S2R2) and a hybrid group of 5 + 5.
PopulationSnapshot three_groups() {
  std::vector<std::size_t> strategies;
  std::vector<std::vector<std::size_t>> partners;
  for (std::size_t g = 0; g < 2; ++g)
    for (std::size_t i = 0; i < 10; ++i) {
      strategies.push_back(g == 0 ? id("S1R1") : id("S2R2"));
      std::vector<std::size_t> p;
      for (std::size_t j = 0; j < 10; ++j)
        if (j != i) p.push_back(10 * g + j);
      partners.push_back(p);
    }
  for (std::size_t i = 0; i < 10; ++i) {
    strategies.push_back(i < 5 ? id("S1R2") : id("S2R1"));
    std::vector<std::size_t> p;
    for (std::size_t j = 0; j < 5; ++j) p.push_back(20 + (i < 5 ? 5 + j : j));
    partners.push_back(p);
  }
  return build(strategies, partners);
}

// Independent I(signal; action) for a two-state group of pure strategies.
double oracle_mi(const std::vector<std::size_t>& primaries) {
  const auto& space = table2().space();
  double joint[2][2] = {{0, 0}, {0, 0}};
  const double w = 1.0 / static_cast<double>(primaries.size());
  for (auto a : primaries)
    for (auto b : primaries)
      for (int state = 0; state < 2; ++state) {
        const int signal = space.sender_map(a)[static_cast<std::size_t>(state)];
        const int act = space.receiver_map(b)[static_cast<std::size_t>(signal)];
        joint[signal][act] += 0.5 * w * w;
      }
  double mi = 0.0;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) {
      const double px = joint[x][0] + joint[x][1], py = joint[0][y] + joint[1][y];
      if (joint[x][y] > 0) mi += joint[x][y] * std::log2(joint[x][y] / (px * py));
    }
  return mi;
}

bool same_partition(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j)
      if ((a[i] == a[j]) != (b[i] == b[j])) return false;
  return true;
}

}  // namespace

TEST(InteractionGraph, Normalization) {
  PopulationSnapshot u{0, 0, GameSpec{}, init_uniform(12, 16)};
  const auto g = interaction_graph(u);
  for (std::size_t i = 0; i < 12; ++i) {
    EXPECT_EQ(g(i, i), 0.0);
    double total = 0.0;
    for (std::size_t j = 0; j < 12; ++j) {
      total += g(i, j);
      if (j != i) {
        EXPECT_NEAR(g(i, j), 1.0 / 11.0, 1e-15);
      }
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  }

  PopulationSnapshot s{0, 0, GameSpec{}, init_uniform(100, 16)};
  std::fill(s.agents[0].link_weights.begin(), s.agents[0].link_weights.end(), 0.1);
  s.agents[0].link_weights[0] = 0.0;
  s.agents[0].link_weights[1] = 90.0;
  EXPECT_NEAR(interaction_graph(s)(0, 1), 90.0 / 99.8, 1e-12);
  EXPECT_NEAR(interaction_graph(s)(0, 1), 0.9018, 1e-4);

  s.agents[3].link_weights.assign(100, 0.0);
  EXPECT_THROW(interaction_graph(s), DegenerateState);
}

TEST(RecoverGroups, UniformPopulations) {
  PopulationSnapshot small{0, 0, GameSpec{}, init_uniform(11, 16)};
  EXPECT_EQ(recover_groups(interaction_graph(small), small, table2()).groups.size(), 1u);
  for (std::size_t n : {12u, 100u}) {
    PopulationSnapshot big{0, 0, GameSpec{}, init_uniform(n, 16)};
    EXPECT_EQ(recover_groups(interaction_graph(big), big, table2()).groups.size(), n);
  }
}

TEST(RecoverGroups, IdealizedThreeGroups) {
  const auto snap = three_groups();
  const auto graph = interaction_graph(snap);
  const auto part = recover_groups(graph, snap, table2());
  ASSERT_EQ(part.groups.size(), 3u);
  const auto& space = table2().space();
  EXPECT_EQ(label_name(part.labels[0], space), "homogeneous(S1R1)");
  EXPECT_EQ(label_name(part.labels[1], space), "homogeneous(S2R2)");
  EXPECT_EQ(label_name(part.labels[2], space), "hybrid(S1R2/S2R1)");
  EXPECT_EQ(part.groups[2].front(), 20u);

  const auto hybrid = bipartiteness(part, graph, 2);
  EXPECT_TRUE(hybrid.bipartite);
  for (std::size_t m = 0; m < 10; ++m) EXPECT_EQ(hybrid.side[m], hybrid.side[0] ^ (m >= 5 ? 1 : 0));
  const auto homo = bipartiteness(part, graph, 0);
  EXPECT_FALSE(homo.bipartite);
  EXPECT_EQ(homo.odd_cycle.size() % 2, 1u);
}

TEST(RecoverGroups, LabelRules) {
  // 9 of 10 on S1R1 meets the 90% rule; 8 of 10 does not and the mode is not pooling.
  std::vector<std::size_t> primaries(10, id("S1R1")), members(10);
  std::iota(members.begin(), members.end(), 0);
  primaries[9] = id("S2R2");
  EXPECT_EQ(label_group(members, primaries, table2()).type, GroupType::Homogeneous);
  primaries[8] = id("S2R2");
  EXPECT_EQ(label_group(members, primaries, table2()).type, GroupType::Mixed);
  EXPECT_EQ(label_group(members, primaries, table2(), 0.8).type, GroupType::Homogeneous);

  std::vector<std::size_t> hybrid(10, id("S1R2"));
  for (std::size_t i = 5; i < 10; ++i) hybrid[i] = id("S2R1");
  const auto h = label_group(members, hybrid, table2());
  EXPECT_EQ(h.type, GroupType::Hybrid);
  EXPECT_EQ(h.first, id("S1R2"));
  EXPECT_EQ(h.second, id("S2R1"));
  // One hybrid strategy alone cannot sustain a group.
  std::vector<std::size_t> lone(10, id("S1R2"));
  EXPECT_EQ(label_group(members, lone, table2()).type, GroupType::Mixed);
  std::vector<std::size_t> pool(10, id("S3R1"));
  EXPECT_EQ(label_group(members, pool, table2()).type, GroupType::Pooling);
}

TEST(Bipartiteness, SmallCases) {
  // Triangle of S1R1 agents and a separate pair.
  const auto s = id("S1R1");
  const auto snap = build({s, s, s, s, s}, {{1, 2}, {0, 2}, {0, 1}, {4}, {3}});
  const auto graph = interaction_graph(snap);
  const auto part = recover_groups(graph, snap, table2());
  ASSERT_EQ(part.groups.size(), 2u);
  const auto tri = bipartiteness(part, graph, 0);
  EXPECT_FALSE(tri.bipartite);
  EXPECT_EQ(tri.odd_cycle.size(), 3u);
  std::set<std::size_t> cyc(tri.odd_cycle.begin(), tri.odd_cycle.end());
  EXPECT_EQ(cyc, (std::set<std::size_t>{0, 1, 2}));
  EXPECT_TRUE(bipartiteness(part, graph, 1).bipartite);
}

TEST(MutualInformation, IdealCases) {
  const auto hom = build(std::vector<std::size_t>(4, id("S1R1")), {{1}, {0}, {3}, {2}});
  std::vector<std::size_t> all{0, 1, 2, 3};
  const auto mh = mutual_information(all, hom, table2());
  EXPECT_NEAR(mh.signal_action, 1.0, 1e-12);
  EXPECT_NEAR(mh.signal_state, 1.0, 1e-12);

  const auto hyb = build({id("S1R2"), id("S1R2"), id("S2R1"), id("S2R1")}, {{2}, {3}, {0}, {1}});
  EXPECT_NEAR(mutual_information(all, hyb, table2()).signal_action, 0.0, 1e-12);
}

TEST(MutualInformation, UnbalancedHybridMatchesEnumeration) {
  const std::vector<std::size_t> primaries{id("S1R2"), id("S1R2"), id("S1R2"), id("S2R1")};
  const auto snap = build(primaries, {{3}, {3}, {3}, {0}});
  std::vector<std::size_t> all{0, 1, 2, 3};
  const double mi = mutual_information(all, snap, table2()).signal_action;
  EXPECT_NEAR(mi, oracle_mi(primaries), 1e-12);
  const double h = -(0.25 * std::log2(0.25) + 0.75 * std::log2(0.75));
  EXPECT_NEAR(mi, 1.0 - h, 1e-12);
  EXPECT_GT(mi, 0.0);
  EXPECT_LT(mi, 1.0);
}

TEST(MutualInformation, BoundedForRandomGroups) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> pick(0, 15);
  for (int t = 0; t < 200; ++t) {
    std::vector<std::size_t> primaries(6);
    for (auto& p : primaries) p = pick(rng);
    const auto snap = build(primaries, {{1}, {0}, {3}, {2}, {5}, {4}});
    std::vector<std::size_t> all{0, 1, 2, 3, 4, 5};
    const auto mi = mutual_information(all, snap, table2());
    EXPECT_GE(mi.signal_action, -1e-12);
    EXPECT_LE(mi.signal_action, 1.0 + 1e-12);
    EXPECT_GE(mi.signal_action_mixture, -1e-12);
    EXPECT_LE(mi.signal_action_mixture, 1.0 + 1e-12);
    EXPECT_NEAR(mi.signal_action, oracle_mi(primaries), 1e-12);
  }
}

TEST(ConcentrationStats, SimpleCases) {
  PopulationSnapshot u{0, 0, GameSpec{}, init_uniform(20, 16)};
  const auto au = analyze_snapshot(u, table2());
  EXPECT_NEAR(au.stats.mean_preferred_share, 1.0 / 16.0, 1e-12);

  PopulationSnapshot seeded;
  seeded.agents = init_uniform(6, 16);
  std::fill(seeded.agents[0].strategy_weights.begin(), seeded.agents[0].strategy_weights.end(), 0.1);
  seeded.agents[0].strategy_weights[0] = 10.0;
  const auto as = analyze_snapshot(seeded, table2());
  EXPECT_NEAR(as.stats.agents[0].preferred_share, 10.0 / 11.5, 1e-12);

  const auto a3 = analyze_snapshot(three_groups(), table2());
  for (const auto& s : a3.stats.agents) {
    EXPECT_GE(s.preferred_share, 0.0);
    EXPECT_LE(s.preferred_share, 1.0);
    EXPECT_GE(s.complementary_share, 0.0);
    EXPECT_LE(s.complementary_share, 1.0);
  }
  EXPECT_NEAR(a3.stats.agent_shares.hybrid, 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(a3.stats.agent_shares.homogeneous, 2.0 / 3.0, 1e-12);
  EXPECT_EQ(a3.stats.pooling_primary_share, 0.0);
  // Hybrid members link only to complementary agents apart from the floor.
  EXPECT_NEAR(a3.stats.agents[20].complementary_share, 5.0 / (5.0 + 24 * 0.001), 1e-12);
}

TEST(ThresholdProperties, RefinementAndRelabeling) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.02, 0.6);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 25;
    PopulationSnapshot snap;
    snap.agents = init_uniform(n, 16);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) snap.agents[i].link_weights[j] = i == j ? 0.0 : std::exp(3.0 * normal(rng));
    const auto graph = interaction_graph(snap);
    double t1 = unit(rng), t2 = unit(rng);
    if (t1 > t2) std::swap(t1, t2);
    const auto c1 = threshold_components(graph, t1);
    const auto c2 = threshold_components(graph, t2);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (c2[i] == c2[j]) {
          EXPECT_EQ(c1[i], c1[j]);
        }

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    PopulationSnapshot moved = snap;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) moved.agents[perm[i]].link_weights[perm[j]] = snap.agents[i].link_weights[j];
    const auto cm = threshold_components(interaction_graph(moved), t1);
    std::vector<std::size_t> back(n);
    for (std::size_t i = 0; i < n; ++i) back[i] = cm[perm[i]];
    EXPECT_TRUE(same_partition(c1, back));
  }
}

TEST(RecoverGroups, ArgumentChecks) {
  const auto snap = three_groups();
  const auto graph = interaction_graph(snap);
  EXPECT_THROW(recover_groups(graph, snap, table2(), 0.0), InvalidArgument);
  EXPECT_THROW(recover_groups(graph, snap, table2(), 1.0), InvalidArgument);
  EXPECT_THROW(recover_groups(graph, snap, table2(), 0.1, 0.0), InvalidArgument);
}
