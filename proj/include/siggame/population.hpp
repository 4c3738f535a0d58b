#pragma once

// Agent weights, Roth-Erev selection probabilities and reinforcement updates.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "siggame/error.hpp"
#include "siggame/game.hpp"
#include "siggame/rng.hpp"

namespace siggame {

struct LearningParams {
  double delta = 0.01;    // discount factor
  double epsilon = 0.01;  // error (tremble) rate
  double nls = 1.0;       // network learning speed
  double sls = 1.0;       // strategy learning speed
  // Per-channel overrides; unset means "use the shared value".
  std::optional<double> delta_strategy;
  std::optional<double> delta_network;
  std::optional<double> epsilon_strategy;
  std::optional<double> epsilon_network;

  double strategy_discount() const { return delta_strategy.value_or(delta); }
  double network_discount() const { return delta_network.value_or(delta); }
  double strategy_error() const { return epsilon_strategy.value_or(epsilon); }
  double network_error() const { return epsilon_network.value_or(epsilon); }

  void validate() const {
    auto check_delta = [](double d, const char* name) {
      if (!(d >= 0.0 && d < 1.0)) throw InvalidConfig(std::string(name) + " must lie in [0, 1)");
    };
    auto check_eps = [](double e, const char* name) {
      if (!(e >= 0.0 && e <= 1.0)) throw InvalidConfig(std::string(name) + " must lie in [0, 1]");
    };
    check_delta(delta, "delta");
    check_delta(strategy_discount(), "delta_strategy");
    check_delta(network_discount(), "delta_network");
    check_eps(epsilon, "epsilon");
    check_eps(strategy_error(), "epsilon_strategy");
    check_eps(network_error(), "epsilon_network");
    if (!(nls > 0.0) || !std::isfinite(nls)) throw InvalidConfig("NLS must be > 0");
    if (!(sls > 0.0) || !std::isfinite(sls)) throw InvalidConfig("SLS must be > 0");
  }
};

struct AgentState {
  std::vector<double> strategy_weights;  // length K
  std::vector<double> link_weights;      // length N, own entry fixed at 0

  bool operator==(const AgentState&) const = default;
};

using Population = std::vector<AgentState>;

// One payoff credit: an index (partner or strategy) and the payoff earned.
struct Credit {
  std::size_t index = 0;
  double payoff = 0.0;
};

namespace detail {

inline double checked_total(std::span<const double> w, const char* what) {
  double total = 0.0;
  for (double v : w) total += v;
  if (!(total > 0.0)) throw DegenerateState(std::string(what) + " weights sum to zero");
  return total;
}

}  // namespace detail

// Pr(j) = (1 - eps) w_ij / sum_k w_ik + eps / (N - 1) for j != i, 0 for j = i.
inline std::vector<double> partner_probabilities(const AgentState& agent, std::size_t self, double epsilon) {
  const auto& w = agent.link_weights;
  const std::size_t n = w.size();
  if (n < 2) throw InvalidArgument("partner selection needs at least 2 agents");
  if (self >= n) throw InvalidArgument("self index out of range");
  if (w[self] != 0.0) throw ContractViolation("self link weight must be 0");
  const double total = detail::checked_total(w, "link");
  const double floor = epsilon / static_cast<double>(n - 1);
  std::vector<double> p(n);
  for (std::size_t j = 0; j < n; ++j)
    p[j] = j == self ? 0.0 : (1.0 - epsilon) * w[j] / total + floor;
  return p;
}

// Pr(n) = (1 - eps) s_n / sum_k s_k + eps / K. The uniform term spans every strategy.
inline std::vector<double> strategy_probabilities(const AgentState& agent, double epsilon) {
  const auto& s = agent.strategy_weights;
  if (s.empty()) throw InvalidArgument("agent has no strategies");
  const double total = detail::checked_total(s, "strategy");
  const double floor = epsilon / static_cast<double>(s.size());
  std::vector<double> p(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) p[k] = (1.0 - epsilon) * s[k] / total + floor;
  return p;
}

// Sums credits per index; result sorted by index.
inline std::vector<Credit> merge_credits(std::span<const Credit> credits) {
  std::vector<Credit> merged(credits.begin(), credits.end());
  std::stable_sort(merged.begin(), merged.end(),
                   [](const Credit& a, const Credit& b) { return a.index < b.index; });
  std::vector<Credit> out;
  for (const auto& c : merged) {
    if (!out.empty() && out.back().index == c.index)
      out.back().payoff += c.payoff;
    else
      out.push_back(c);
  }
  return out;
}

// w' = (1 - delta) w + NLS * pi for every link; pi = 0 for unvisited targets.
inline AgentState update_link_weights(AgentState agent, std::size_t self, std::span<const Credit> payoffs,
                                      const LearningParams& params) {
  auto& w = agent.link_weights;
  if (self >= w.size()) throw InvalidArgument("self index out of range");
  for (const auto& c : payoffs) {
    if (c.index == self) throw ContractViolation("payoff credited to a self link");
    if (c.index >= w.size()) throw InvalidArgument("link credit index out of range");
    if (!(c.payoff >= 0.0)) throw InvalidArgument("payoffs must be nonnegative");
  }
  const double keep = 1.0 - params.network_discount();
  for (double& v : w) v *= keep;
  for (const auto& c : merge_credits(payoffs)) w[c.index] += params.nls * c.payoff;
  w[self] = 0.0;
  return agent;
}

// s' = (1 - delta) s + SLS * pi, pi = summed payoff earned with that strategy.
inline AgentState update_strategy_weights(AgentState agent, std::span<const Credit> payoffs,
                                          const LearningParams& params) {
  auto& s = agent.strategy_weights;
  for (const auto& c : payoffs) {
    if (c.index >= s.size()) throw InvalidArgument("strategy credit index out of range");
    if (!(c.payoff >= 0.0)) throw InvalidArgument("payoffs must be nonnegative");
  }
  const double keep = 1.0 - params.strategy_discount();
  for (double& v : s) v *= keep;
  for (const auto& c : merge_credits(payoffs)) s[c.index] += params.sls * c.payoff;
  return agent;
}

struct InitialWeights {
  double strategy = 5.0;
  // Unset: 19 / (N - 1).
  std::optional<double> link;

  double link_for(std::size_t n) const { return link.value_or(19.0 / static_cast<double>(n - 1)); }
};

inline AgentState uniform_agent(std::size_t self, std::size_t n_agents, std::size_t n_strategies,
                                const InitialWeights& init = {}) {
  AgentState a;
  a.strategy_weights.assign(n_strategies, init.strategy);
  a.link_weights.assign(n_agents, init.link_for(n_agents));
  a.link_weights[self] = 0.0;
  return a;
}

inline Population init_uniform(std::size_t n_agents, std::size_t n_strategies, const InitialWeights& init = {}) {
  if (n_agents < 2) throw InvalidConfig("population needs at least 2 agents");
  if (n_strategies == 0) throw InvalidConfig("strategy set is empty");
  if (!(init.strategy > 0.0) || !(init.link_for(n_agents) > 0.0))
    throw InvalidConfig("initial weights must be positive");
  Population pop;
  pop.reserve(n_agents);
  for (std::size_t i = 0; i < n_agents; ++i) pop.push_back(uniform_agent(i, n_agents, n_strategies, init));
  return pop;
}

// An established group placed into the population at initialization.
// One strategy: homogeneous group. Two strategies: hybrid group split between
// two mutually complementary strategies.
struct SeedGroup {
  std::vector<std::size_t> strategies;
  std::size_t size = 0;
};

// Weights used for established (seeded) agents.
struct StylizedWeights {
  double preferred_strategy = 10.0;
  double other_strategy = 0.1;
  double preferred_link = 90.0;
  double other_link = 0.1;
};

// Parses "S1R1x4; S1R2/S2R1x4" into seed groups.
inline std::vector<SeedGroup> parse_seed_groups(std::string_view text, const StrategySpace& space) {
  std::vector<SeedGroup> groups;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find(';', start);
    if (end == std::string_view::npos) end = text.size();
    std::string item(text.substr(start, end - start));
    start = end + 1;
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item.empty()) {
      if (end == text.size()) break;
      continue;
    }
    auto x = item.rfind('x');
    if (x == std::string::npos || x + 1 >= item.size())
      throw InvalidConfig("seed group '" + item + "' needs a size suffix like x4");
    SeedGroup g;
    try {
      g.size = std::stoul(item.substr(x + 1));
    } catch (const std::exception&) {
      throw InvalidConfig("bad seed group size in '" + item + "'");
    }
    std::string strategies = item.substr(0, x);
    std::size_t s0 = 0;
    while (s0 <= strategies.size()) {
      auto slash = strategies.find('/', s0);
      if (slash == std::string::npos) slash = strategies.size();
      try {
        std::string token = strategies.substr(s0, slash - s0);
        token.erase(0, token.find_first_not_of(" \t"));
        token.erase(token.find_last_not_of(" \t") + 1);
        g.strategies.push_back(space.parse_label(token));
      } catch (const InvalidArgument& e) {
        throw InvalidConfig(e.what());
      }
      s0 = slash + 1;
    }
    groups.push_back(std::move(g));
    if (end == text.size()) break;
  }
  return groups;
}

// Stylized established groups occupy agents 0, 1, ... in group order; every
// remaining agent is uniform. Each established member puts the preferred
// strategy weight on its designated strategy and the preferred link weight on
// one complementary group member drawn uniformly at random.
inline Population init_seeded(std::size_t n_agents, const PayoffTable& table, std::span<const SeedGroup> groups,
                              SplitMix64& rng, const InitialWeights& init = {},
                              const StylizedWeights& style = {}) {
  Population pop = init_uniform(n_agents, table.size(), init);
  std::size_t next = 0;
  for (const auto& g : groups) {
    if (g.strategies.empty() || g.strategies.size() > 2)
      throw InvalidConfig("a seed group names one (homogeneous) or two (hybrid) strategies");
    for (auto s : g.strategies)
      if (s >= table.size()) throw InvalidConfig("seed group strategy out of range");
    const bool hybrid = g.strategies.size() == 2;
    if (hybrid) {
      if (g.size < 2) throw InvalidConfig("hybrid seed group needs at least 2 members");
      if (table.classify(g.strategies[0], g.strategies[1]) != PairClass::HybridComplement)
        throw InvalidConfig("hybrid seed group strategies are not complementary");
    } else {
      if (g.size < 2) throw InvalidConfig("homogeneous seed group needs at least 2 members");
      if (table.classify(g.strategies[0], g.strategies[0]) != PairClass::Homogeneous)
        throw InvalidConfig("homogeneous seed group strategy is not self-complementary");
    }
    if (next + g.size > n_agents) throw InvalidConfig("seed groups exceed the population size");

    std::vector<std::size_t> designated(g.size, g.strategies[0]);
    if (hybrid) {
      const std::size_t half = g.size / 2;
      for (std::size_t m = half; m < 2 * half; ++m) designated[m] = g.strategies[1];
      if (g.size % 2 == 1) designated.back() = g.strategies[rng.below(2)];
    }
    for (std::size_t m = 0; m < g.size; ++m) {
      auto& agent = pop[next + m];
      std::fill(agent.strategy_weights.begin(), agent.strategy_weights.end(), style.other_strategy);
      agent.strategy_weights[designated[m]] = style.preferred_strategy;

      std::vector<std::size_t> partners;
      for (std::size_t o = 0; o < g.size; ++o) {
        if (o == m) continue;
        if (table.is_success(designated[m], designated[o])) partners.push_back(next + o);
      }
      if (partners.empty()) throw InvalidConfig("seed group member has no complementary partner");
      std::fill(agent.link_weights.begin(), agent.link_weights.end(), style.other_link);
      agent.link_weights[next + m] = 0.0;
      agent.link_weights[partners[rng.below(partners.size())]] = style.preferred_link;
    }
    next += g.size;
  }
  return pop;
}

// Index of the largest weight; ties go to the lowest index.
inline std::size_t argmax(std::span<const double> w) {
  return static_cast<std::size_t>(std::max_element(w.begin(), w.end()) - w.begin());
}

}  // namespace siggame
