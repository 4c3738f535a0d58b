#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <numeric>
#include <random>

#include "siggame/game.hpp"

using namespace siggame;

namespace {

using Map = std::vector<std::uint8_t>;

// All n^n maps in plain radix order, independent of the library's ordering.
std::vector<Map> all_maps(int n) {
  std::size_t count = 1;
  for (int i = 0; i < n; ++i) count *= static_cast<std::size_t>(n);
  std::vector<Map> out;
  for (std::size_t c = 0; c < count; ++c) {
    Map m(static_cast<std::size_t>(n));
    std::size_t x = c;
    for (int i = 0; i < n; ++i) {
      m[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(x % static_cast<std::size_t>(n));
      x /= static_cast<std::size_t>(n);
    }
    out.push_back(m);
  }
  return out;
}

bool is_bijection(const Map& m) {
  Map s = m;
  std::sort(s.begin(), s.end());
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s[i] != i) return false;
  return true;
}

// Expected payoff by direct enumeration of roles and states.
double oracle_payoff(const std::vector<double>& probs, const Map& sa, const Map& ra, const Map& sb, const Map& rb) {
  double total = 0.0;
  for (std::size_t st = 0; st < probs.size(); ++st) {
    if (rb[sa[st]] == st) total += 0.5 * 2.0 * probs[st];  // a sends, b receives
    if (ra[sb[st]] == st) total += 0.5 * 2.0 * probs[st];  // b sends, a receives
  }
  return total;
}

struct OracleCounts {
  std::uint64_t self = 0;
  std::uint64_t pairs = 0;
};

OracleCounts oracle_counts(int n, bool bijective_only) {
  auto maps = all_maps(n);
  if (bijective_only) std::erase_if(maps, [](const Map& m) { return !is_bijection(m); });
  std::vector<std::pair<Map, Map>> strategies;
  for (const auto& s : maps)
    for (const auto& r : maps) strategies.emplace_back(s, r);
  const std::vector<double> probs(static_cast<std::size_t>(n), 1.0 / n);
  OracleCounts c;
  for (std::size_t i = 0; i < strategies.size(); ++i) {
    const auto& [si, ri] = strategies[i];
    if (std::abs(oracle_payoff(probs, si, ri, si, ri) - 2.0) < 1e-12) ++c.self;
    for (std::size_t j = i + 1; j < strategies.size(); ++j) {
      const auto& [sj, rj] = strategies[j];
      if (std::abs(oracle_payoff(probs, si, ri, sj, rj) - 2.0) < 1e-12) ++c.pairs;
    }
  }
  return c;
}

}  // namespace

TEST(StrategySpace, CanonicalOrderForTwoStates) {
  StrategySpace space(2);
  ASSERT_EQ(space.size(), 16u);
  EXPECT_EQ(Map(space.role_map(0).begin(), space.role_map(0).end()), (Map{0, 1}));
  EXPECT_EQ(Map(space.role_map(1).begin(), space.role_map(1).end()), (Map{1, 0}));
  EXPECT_EQ(Map(space.role_map(2).begin(), space.role_map(2).end()), (Map{0, 0}));
  EXPECT_EQ(Map(space.role_map(3).begin(), space.role_map(3).end()), (Map{1, 1}));
  EXPECT_EQ(space.label(0), "S1R1");
  EXPECT_EQ(space.label(1), "S1R2");
  EXPECT_EQ(space.label(4), "S2R1");
  EXPECT_EQ(space.label(15), "S4R4");
  for (std::size_t id = 0; id < space.size(); ++id) EXPECT_EQ(space.parse_label(space.label(id)), id);
  for (const char* bad : {"S1R1 x6", "S1R", "SR1", "S0R1", "S5R1", "S1R1, S2R2", "S+1R1"})
    EXPECT_THROW(space.parse_label(bad), InvalidArgument) << bad;
}

TEST(StrategySpace, LabelsRoundTripForThreeStates) {
  StrategySpace space(3);
  ASSERT_EQ(space.size(), 729u);
  EXPECT_EQ(space.label(0), "s:[0 1 2]|r:[0 1 2]");
  for (std::size_t id = 0; id < space.size(); ++id) {
    EXPECT_EQ(space.parse_label(space.label(id)), id);
    EXPECT_EQ(space.encode(space.decode(id)), id);
  }
  EXPECT_THROW(space.parse_label("S1R1"), InvalidArgument);
  EXPECT_THROW(space.parse_label("s:[0 1]|r:[0 1 2]"), InvalidArgument);
  EXPECT_THROW(space.parse_label("s:[0 1 3]|r:[0 1 2]"), InvalidArgument);
}

TEST(StrategySpace, StateLimits) {
  EXPECT_THROW(StrategySpace(1), InvalidGame);
  EXPECT_THROW(StrategySpace(5), ResourceLimit);
  EXPECT_NO_THROW(StrategySpace(4));
  EXPECT_THROW(PayoffTable(GameSpec::equiprobable(4)), ResourceLimit);
}

TEST(StrategySpace, KindsForTwoStates) {
  StrategySpace space(2);
  EXPECT_EQ(space.kind(space.parse_label("S1R1")), StrategyKind::Homogeneous);
  EXPECT_EQ(space.kind(space.parse_label("S2R2")), StrategyKind::Homogeneous);
  EXPECT_EQ(space.kind(space.parse_label("S1R2")), StrategyKind::Hybrid);
  EXPECT_EQ(space.kind(space.parse_label("S2R1")), StrategyKind::Hybrid);
  EXPECT_EQ(space.kind(space.parse_label("S3R1")), StrategyKind::Pooling);
  EXPECT_EQ(space.kind(space.parse_label("S1R4")), StrategyKind::Pooling);
}

TEST(RoleClass, Classification) {
  EXPECT_EQ(classify_role(Map{0, 1, 2}), RoleClass::Separating);
  EXPECT_EQ(classify_role(Map{2, 2, 2}), RoleClass::Pooling);
  EXPECT_EQ(classify_role(Map{0, 0, 1}), RoleClass::Partial);
}

TEST(GameSpec, Validation) {
  EXPECT_THROW((GameSpec{2, {0.5, 0.6}, 2.0}.validate()), InvalidGame);
  EXPECT_THROW((GameSpec{3, {0.5, 0.5}, 2.0}.validate()), InvalidGame);
  EXPECT_THROW((GameSpec{2, {1.5, -0.5}, 2.0}.validate()), InvalidGame);
  EXPECT_THROW(GameSpec::equiprobable(1), InvalidGame);
  EXPECT_NO_THROW(GameSpec::with_probs({0.9, 0.1}));
}

TEST(Payoff, WorkedPairs) {
  const auto spec = GameSpec::equiprobable(2);
  StrategySpace space(2);
  auto s = [&](const char* l) { return space.decode(space.parse_label(l)); };
  EXPECT_DOUBLE_EQ(expected_payoff(spec, s("S1R1"), s("S1R1")), 2.0);
  EXPECT_DOUBLE_EQ(expected_payoff(spec, s("S1R2"), s("S2R1")), 2.0);
  EXPECT_DOUBLE_EQ(expected_payoff(spec, s("S1R2"), s("S1R1")), 1.0);
  EXPECT_DOUBLE_EQ(expected_payoff(spec, s("S1R2"), s("S1R2")), 0.0);
  EXPECT_EQ(classify_pair(spec, s("S1R1"), s("S1R1")), PairClass::Homogeneous);
  EXPECT_EQ(classify_pair(spec, s("S1R2"), s("S2R1")), PairClass::HybridComplement);
  EXPECT_EQ(classify_pair(spec, s("S1R2"), s("S1R1")), PairClass::Partial);
  EXPECT_EQ(classify_pair(spec, s("S1R2"), s("S1R2")), PairClass::Failing);
  // A pooling receiver against a perfect partner earns half the sender credit plus chance.
  EXPECT_DOUBLE_EQ(expected_payoff(spec, s("S1R3"), s("S1R1")), 1.5);
}

TEST(Payoff, RejectsMismatchedDimensions) {
  const auto spec = GameSpec::equiprobable(2);
  const auto a = StrategySpace(2).decode(0);
  const auto b = StrategySpace(3).decode(0);
  EXPECT_THROW(expected_payoff(spec, a, b), InvalidArgument);
}

TEST(PayoffTable, MatchesExpectedPayoffAndIsSymmetric) {
  for (auto spec : {GameSpec::equiprobable(2), GameSpec::with_probs({0.9, 0.1}), GameSpec::equiprobable(3)}) {
    PayoffTable table(spec);
    const auto& space = table.space();
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<std::size_t> pick(0, table.size() - 1);
    for (int t = 0; t < 2000; ++t) {
      const auto i = pick(rng), j = pick(rng);
      EXPECT_NEAR(table(i, j), expected_payoff(spec, space.decode(i), space.decode(j)), 1e-12);
      EXPECT_EQ(table(i, j), table(j, i));
    }
  }
}

TEST(PayoffTable, DeterministicBuild) {
  PayoffTable a(GameSpec::equiprobable(3)), b(GameSpec::equiprobable(3));
  ASSERT_EQ(a.values().size(), b.values().size());
  EXPECT_EQ(std::memcmp(a.values().data(), b.values().data(), a.values().size() * sizeof(double)), 0);
}

// Oracle: exhaustive enumeration for n = 2 and n = 3.
TEST(SignalingSystems, BruteForceCountsSmallGames) {
  for (int n : {2, 3}) {
    const auto oracle = oracle_counts(n, false);
    const auto formula = count_signaling_systems(n);
    EXPECT_EQ(oracle.self, formula.homogeneous) << "n=" << n;
    EXPECT_EQ(oracle.pairs, formula.hybrid_pairs) << "n=" << n;

    PayoffTable table(GameSpec::equiprobable(n));
    std::uint64_t self = 0, pairs = 0;
    for (std::size_t i = 0; i < table.size(); ++i) {
      if (table.is_success(i, i)) ++self;
      for (std::size_t j = i + 1; j < table.size(); ++j) pairs += table.is_success(i, j);
    }
    EXPECT_EQ(self, formula.homogeneous);
    EXPECT_EQ(pairs, formula.hybrid_pairs);
  }
  EXPECT_EQ(count_signaling_systems(2), (SignalingSystemCount{2, 1}));
  EXPECT_EQ(count_signaling_systems(3), (SignalingSystemCount{6, 15}));
}

// Full success needs both role directions perfect, which forces bijective
// maps, so the n = 4 scan can be restricted to the 24 x 24 bijective strategies.
TEST(SignalingSystems, PrunedScanFourStates) {
  const auto oracle = oracle_counts(4, true);
  EXPECT_EQ(oracle.self, 24u);
  EXPECT_EQ(oracle.pairs, 276u);
  EXPECT_EQ(count_signaling_systems(4), (SignalingSystemCount{24, 276}));
}

TEST(SignalingSystems, OverflowIsReported) {
  EXPECT_NO_THROW(count_signaling_systems(12));
  EXPECT_THROW(count_signaling_systems(21), ResourceLimit);
  EXPECT_THROW(count_signaling_systems(1), InvalidGame);
}

TEST(PayoffProperties, InvariantUnderCommonRelabeling) {
  std::mt19937_64 rng(11);
  for (int n : {2, 3, 4}) {
    StrategySpace space(n);
    std::uniform_int_distribution<std::size_t> pick(0, space.size() - 1);
    for (int t = 0; t < 300; ++t) {
      std::vector<double> probs(static_cast<std::size_t>(n));
      for (auto& p : probs) p = std::uniform_real_distribution<double>(0.05, 1.0)(rng);
      const double sum = std::accumulate(probs.begin(), probs.end(), 0.0);
      for (auto& p : probs) p /= sum;
      probs.back() = 1.0 - std::accumulate(probs.begin(), probs.end() - 1, 0.0);
      GameSpec spec{n, probs, 2.0};

      std::vector<std::uint8_t> perm(static_cast<std::size_t>(n));
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      auto relabel = [&](const PureStrategy& s) {
        PureStrategy out = s;
        for (std::size_t x = 0; x < perm.size(); ++x) {
          out.sender_map[perm[x]] = perm[s.sender_map[x]];
          out.receiver_map[perm[x]] = perm[s.receiver_map[x]];
        }
        return out;
      };
      GameSpec permuted = spec;
      for (std::size_t x = 0; x < perm.size(); ++x) permuted.state_probs[perm[x]] = spec.state_probs[x];

      const auto a = space.decode(pick(rng)), b = space.decode(pick(rng));
      EXPECT_NEAR(expected_payoff(spec, a, b), expected_payoff(permuted, relabel(a), relabel(b)), 1e-12);
    }
  }
}

TEST(PayoffProperties, ConstantReceiverBound) {
  for (int n : {2, 3}) {
    PayoffTable table(GameSpec::equiprobable(n));
    const auto& space = table.space();
    const double bound = 2.0 * (0.5 + 0.5 / n);
    for (std::size_t i = 0; i < table.size(); ++i) {
      if (classify_role(space.receiver_map(i)) != RoleClass::Pooling) continue;
      for (std::size_t j = 0; j < table.size(); ++j) {
        if (space.sender_class(j) != RoleClass::Separating) continue;
        EXPECT_LE(table(i, j), bound + 1e-12);
      }
    }
  }
}

TEST(PayoffProperties, UnequalStatesFavorPooling) {
  // With P(s1) = 0.9 a pooling receiver that always acts a1 earns 0.9 of the receiver credit.
  const auto spec = GameSpec::with_probs({0.9, 0.1});
  StrategySpace space(2);
  auto s = [&](const char* l) { return space.decode(space.parse_label(l)); };
  EXPECT_NEAR(expected_payoff(spec, s("S1R3"), s("S1R1")), 0.5 * 2.0 * 1.0 + 0.5 * 2.0 * 0.9, 1e-12);
}
