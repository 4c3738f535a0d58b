#pragma once

// The round loop. Each round every agent picks a partner and both sides of
// every visit pick a strategy, all from start-of-round weights; afterwards
// all agents discount and reinforce simultaneously.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "siggame/digest.hpp"
#include "siggame/error.hpp"
#include "siggame/game.hpp"
#include "siggame/population.hpp"
#include "siggame/rng.hpp"
#include "siggame/sampling.hpp"

namespace siggame {

struct PopulationSnapshot {
  std::uint64_t round = 0;
  std::uint64_t params_digest = 0;
  GameSpec game;
  Population agents;

  std::size_t size() const { return agents.size(); }
  std::size_t strategies() const { return agents.empty() ? 0 : agents.front().strategy_weights.size(); }

  void validate() const {
    game.validate();
    const std::size_t n = agents.size();
    if (n < 2) throw InvalidArgument("snapshot holds fewer than 2 agents");
    const std::size_t k = strategies();
    for (std::size_t i = 0; i < n; ++i) {
      const auto& a = agents[i];
      if (a.strategy_weights.size() != k || a.link_weights.size() != n)
        throw InvalidArgument("snapshot agent " + std::to_string(i) + " has inconsistent dimensions");
      if (a.link_weights[i] != 0.0) throw InvalidArgument("snapshot agent has nonzero self link");
    }
  }

  bool operator==(const PopulationSnapshot&) const = default;
};

struct UniformInit {};

struct SeededInit {
  std::vector<SeedGroup> groups;
  StylizedWeights style;
};

struct SnapshotInit {
  std::shared_ptr<const PopulationSnapshot> snapshot;
};

using InitScheme = std::variant<UniformInit, SeededInit, SnapshotInit>;

struct SimParams {
  std::size_t N = 100;
  GameSpec game;
  LearningParams learning;
  std::uint64_t T = 1'000'000;
  std::uint64_t master_seed = 1;
  bool symmetric_network_updates = false;
  std::vector<std::uint64_t> snapshot_schedule;
  std::uint64_t trajectory_stride = 1000;
  InitialWeights initial;
  InitScheme init;

  void validate() const {
    if (N < 2) throw InvalidConfig("N must be at least 2");
    game.validate();
    learning.validate();
    for (auto r : snapshot_schedule)
      if (r > T) throw InvalidConfig("snapshot round " + std::to_string(r) + " is beyond T");
    if (trajectory_stride == 0) throw InvalidConfig("trajectory stride must be positive");
    if (const auto* s = std::get_if<SnapshotInit>(&init)) {
      if (!s->snapshot) throw InvalidConfig("snapshot initialization without a snapshot");
      if (s->snapshot->size() != N) throw InvalidConfig("snapshot population size differs from N");
      if (!(s->snapshot->game == game)) throw InvalidConfig("snapshot game differs from the configured game");
    }
  }

  // Everything that determines the trajectory. T, the snapshot schedule and
  // the trajectory stride only decide what is recorded, so they are excluded.
  std::string canonical() const {
    std::ostringstream os;
    os.precision(17);
    os << "N=" << N << ";n=" << game.n << ";probs=";
    for (double p : game.state_probs) os << p << ',';
    os << ";success=" << game.success_payoff << ";delta=" << learning.delta << ";eps=" << learning.epsilon
       << ";nls=" << learning.nls << ";sls=" << learning.sls;
    auto opt = [&](const char* k, const std::optional<double>& v) {
      if (v) os << ';' << k << '=' << *v;
    };
    opt("delta_s", learning.delta_strategy);
    opt("delta_n", learning.delta_network);
    opt("eps_s", learning.epsilon_strategy);
    opt("eps_n", learning.epsilon_network);
    os << ";seed=" << master_seed << ";sym=" << symmetric_network_updates << ";s0=" << initial.strategy;
    if (initial.link) os << ";l0=" << *initial.link;
    std::visit(
        [&](const auto& scheme) {
          using S = std::decay_t<decltype(scheme)>;
          if constexpr (std::is_same_v<S, UniformInit>) {
            os << ";init=uniform";
          } else if constexpr (std::is_same_v<S, SeededInit>) {
            os << ";init=seeded";
            for (const auto& g : scheme.groups) {
              os << '[';
              for (auto s : g.strategies) os << s << '/';
              os << 'x' << g.size << ']';
            }
            os << ";style=" << scheme.style.preferred_strategy << ',' << scheme.style.other_strategy << ','
               << scheme.style.preferred_link << ',' << scheme.style.other_link;
          } else {
            os << ";init=snapshot:" << (scheme.snapshot ? scheme.snapshot->params_digest : 0) << '@'
               << (scheme.snapshot ? scheme.snapshot->round : 0);
          }
        },
        init);
    return os.str();
  }

  std::uint64_t digest() const { return fnv1a(canonical()); }
};

struct Interaction {
  std::uint32_t initiator = 0;
  std::uint32_t target = 0;
  std::uint32_t initiator_strategy = 0;
  std::uint32_t target_strategy = 0;
  double payoff = 0.0;  // earned by both participants

  bool operator==(const Interaction&) const = default;
};

// Interaction i is the visit initiated by agent i.
struct RoundRecord {
  std::uint64_t round = 0;  // 1-based index of the completed round
  std::vector<Interaction> interactions;
  double mean_payoff = 0.0;  // mean over interactions

  std::vector<std::uint64_t> strategy_usage(std::size_t k) const {
    std::vector<std::uint64_t> counts(k, 0);
    for (const auto& x : interactions) {
      ++counts[x.initiator_strategy];
      ++counts[x.target_strategy];
    }
    return counts;
  }

  double payoff_received(std::size_t agent) const {
    double total = 0.0;
    for (const auto& x : interactions)
      if (x.initiator == agent || x.target == agent) total += x.payoff;
    return total;
  }
};

inline Population build_initial_population(const SimParams& params, const PayoffTable& table) {
  return std::visit(
      [&](const auto& scheme) -> Population {
        using S = std::decay_t<decltype(scheme)>;
        if constexpr (std::is_same_v<S, UniformInit>) {
          return init_uniform(params.N, table.size(), params.initial);
        } else if constexpr (std::is_same_v<S, SeededInit>) {
          auto rng = derive_stream(params.master_seed, ~std::uint64_t{0}, 1);
          return init_seeded(params.N, table, scheme.groups, rng, params.initial, scheme.style);
        } else {
          return scheme.snapshot->agents;
        }
      },
      params.init);
}

// A running population. Holds a reference to the payoff table, which must
// outlive it.
class Simulation {
 public:
  Simulation(const SimParams& params, const PayoffTable& table)
      : Simulation(params, table, (params.validate(), build_initial_population(params, table)), start_round(params)) {}

  Simulation(const SimParams& params, const PayoffTable& table, const Population& agents, std::uint64_t round)
      : params_(params), table_(table), round_(round) {
    params_.validate();
    if (!(table.spec() == params_.game)) throw InvalidArgument("payoff table was built for a different game");
    const std::size_t n = params_.N;
    if (agents.size() != n) throw InvalidArgument("population size differs from N");
    strategies_.reserve(n);
    links_.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& a = agents[i];
      if (a.strategy_weights.size() != table.size() || a.link_weights.size() != n)
        throw InvalidArgument("agent " + std::to_string(i) + " has inconsistent dimensions");
      if (a.link_weights[i] != 0.0) throw ContractViolation("agent has a nonzero self link");
      strategies_.emplace_back(a.strategy_weights);
      links_.emplace_back(a.link_weights);
      if (!(strategies_.back().total() > 0.0) || !(links_.back().total() > 0.0))
        throw DegenerateState("agent " + std::to_string(i) + " has zero total weight");
    }
    record_.interactions.resize(n);
    visitor_offsets_.resize(n + 1);
    visitors_.resize(n);
  }

  std::uint64_t round() const { return round_; }
  std::size_t size() const { return params_.N; }
  const SimParams& params() const { return params_; }
  const PayoffTable& table() const { return table_; }

  // Phases 1 and 2 for the visit initiated by `agent`, from the current
  // (start-of-round) weights. Pure: depends only on weights, round and agent.
  Interaction draw_interaction(std::size_t agent) const {
    auto rng = derive_stream(params_.master_seed, round_, agent);
    const std::size_t n = params_.N;
    const double eps_n = params_.learning.network_error();
    std::size_t target;
    if (rng.uniform() < eps_n) {
      target = rng.below(n - 1);
      if (target >= agent) ++target;
    } else {
      target = links_[agent].sample(rng.uniform());
    }
    const std::size_t s_init = draw_strategy(agent, rng);
    const std::size_t s_target = draw_strategy(target, rng);
    return Interaction{static_cast<std::uint32_t>(agent), static_cast<std::uint32_t>(target),
                       static_cast<std::uint32_t>(s_init), static_cast<std::uint32_t>(s_target),
                       table_(s_init, s_target)};
  }

  const RoundRecord& step() {
    const std::size_t n = params_.N;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      record_.interactions[i] = draw_interaction(i);
      sum += record_.interactions[i].payoff;
    }
    apply_updates();
    ++round_;
    record_.round = round_;
    record_.mean_payoff = sum / static_cast<double>(n);
    return record_;
  }

  // Phase 3 from an externally supplied set of draws (one per initiator).
  const RoundRecord& step_with(const std::vector<Interaction>& interactions) {
    if (interactions.size() != params_.N) throw InvalidArgument("need one interaction per agent");
    double sum = 0.0;
    for (std::size_t i = 0; i < interactions.size(); ++i) {
      if (interactions[i].initiator != i) throw InvalidArgument("interactions must be ordered by initiator");
      sum += interactions[i].payoff;
    }
    record_.interactions = interactions;
    apply_updates();
    ++round_;
    record_.round = round_;
    record_.mean_payoff = sum / static_cast<double>(params_.N);
    return record_;
  }

  Population agents() const {
    Population out(params_.N);
    for (std::size_t i = 0; i < params_.N; ++i) {
      out[i].strategy_weights = strategies_[i].values();
      out[i].link_weights = links_[i].values();
    }
    return out;
  }

  PopulationSnapshot snapshot() const {
    return PopulationSnapshot{round_, params_.digest(), params_.game, agents()};
  }

  std::size_t primary_strategy(std::size_t agent) const {
    const auto& w = strategies_[agent];
    std::size_t best = 0;
    double best_w = w.weight(0);
    for (std::size_t k = 1; k < w.size(); ++k)
      if (w.weight(k) > best_w) best_w = w.weight(k), best = k;
    return best;
  }

 private:
  static std::uint64_t start_round(const SimParams& params) {
    if (const auto* s = std::get_if<SnapshotInit>(&params.init)) return s->snapshot->round;
    return 0;
  }

  std::size_t draw_strategy(std::size_t agent, SplitMix64& rng) const {
    const double eps_s = params_.learning.strategy_error();
    if (rng.uniform() < eps_s) return rng.below(table_.size());
    return strategies_[agent].sample(rng.uniform());
  }

  void apply_updates() {
    const std::size_t n = params_.N;
    const auto& x = record_.interactions;

    // Visitors of each agent, ascending by initiator (counting sort).
    std::fill(visitor_offsets_.begin(), visitor_offsets_.end(), 0);
    for (const auto& e : x) ++visitor_offsets_[e.target + 1];
    for (std::size_t i = 0; i < n; ++i) visitor_offsets_[i + 1] += visitor_offsets_[i];
    {
      std::vector<std::size_t>& cursor = scratch_cursor_;
      cursor.assign(visitor_offsets_.begin(), visitor_offsets_.end() - 1);
      for (std::size_t i = 0; i < n; ++i) visitors_[cursor[x[i].target]++] = i;
    }

    const double keep_s = 1.0 - params_.learning.strategy_discount();
    const double keep_n = 1.0 - params_.learning.network_discount();
    const double nls = params_.learning.nls;
    const double sls = params_.learning.sls;
    const bool symmetric = params_.symmetric_network_updates;

    for (std::size_t a = 0; a < n; ++a) {
      strategy_credits_.clear();
      link_credits_.clear();
      strategy_credits_.push_back({x[a].initiator_strategy, x[a].payoff});
      link_credits_.push_back({x[a].target, x[a].payoff});
      for (auto v = visitor_offsets_[a]; v < visitor_offsets_[a + 1]; ++v) {
        const auto& e = x[visitors_[v]];
        strategy_credits_.push_back({e.target_strategy, e.payoff});
        if (symmetric) link_credits_.push_back({e.initiator, e.payoff});
      }
      strategies_[a].discount(keep_s);
      links_[a].discount(keep_n);
      apply_summed(strategies_[a], strategy_credits_, sls);
      apply_summed(links_[a], link_credits_, nls);
    }
  }

  // Sums credits per index (insertion order within an index), then applies
  // multiplier * sum.
  static void apply_summed(DiscountedWeights& w, std::vector<Credit>& credits, double multiplier) {
    // Insertion sort: lists are short and it is stable without allocating.
    for (std::size_t i = 1; i < credits.size(); ++i)
      for (std::size_t j = i; j > 0 && credits[j - 1].index > credits[j].index; --j)
        std::swap(credits[j - 1], credits[j]);
    for (std::size_t i = 0; i < credits.size();) {
      double total = 0.0;
      std::size_t j = i;
      for (; j < credits.size() && credits[j].index == credits[i].index; ++j) total += credits[j].payoff;
      w.add(credits[i].index, multiplier * total);
      i = j;
    }
  }

  SimParams params_;
  const PayoffTable& table_;
  std::uint64_t round_ = 0;
  std::vector<DiscountedWeights> strategies_;
  std::vector<DiscountedWeights> links_;
  RoundRecord record_;
  std::vector<std::size_t> visitor_offsets_;
  std::vector<std::size_t> visitors_;
  std::vector<std::size_t> scratch_cursor_;
  std::vector<Credit> strategy_credits_;
  std::vector<Credit> link_credits_;
};

// One round from an explicit population. Returns the updated population and
// the record of the round.
inline std::pair<Population, RoundRecord> run_round(const Population& population, const PayoffTable& table,
                                                    const SimParams& params, std::uint64_t round = 0) {
  Simulation sim(params, table, population, round);
  RoundRecord record = sim.step();
  return {sim.agents(), std::move(record)};
}

struct TrajectoryPoint {
  std::uint64_t round = 0;
  double mean_payoff = 0.0;                   // mean over the rounds since the previous point
  std::vector<std::uint32_t> primary_counts;  // agents per primary (argmax) strategy

  bool operator==(const TrajectoryPoint&) const = default;
};

struct SimulationResult {
  PopulationSnapshot final;
  std::vector<PopulationSnapshot> snapshots;  // scheduled ones not handed to a sink
  std::vector<TrajectoryPoint> trajectory;
};

using SnapshotSink = std::function<void(const PopulationSnapshot&)>;

inline TrajectoryPoint trajectory_point(const Simulation& sim, double mean_payoff) {
  TrajectoryPoint p{sim.round(), mean_payoff, std::vector<std::uint32_t>(sim.table().size(), 0)};
  for (std::size_t i = 0; i < sim.size(); ++i) ++p.primary_counts[sim.primary_strategy(i)];
  return p;
}

// Runs params.T rounds. Scheduled snapshots go to `sink` when given,
// otherwise they are collected in the result.
inline SimulationResult run_simulation(const SimParams& params, const PayoffTable& table,
                                       const SnapshotSink& sink = {}) {
  Simulation sim(params, table);
  SimulationResult result;
  std::vector<std::uint64_t> schedule = params.snapshot_schedule;
  std::sort(schedule.begin(), schedule.end());
  schedule.erase(std::unique(schedule.begin(), schedule.end()), schedule.end());
  const std::uint64_t start = sim.round();
  auto next_snap = schedule.begin();

  auto emit = [&] {
    while (next_snap != schedule.end() && *next_snap == sim.round() - start) {
      auto snap = sim.snapshot();
      if (sink) {
        try {
          sink(snap);
        } catch (const std::exception& e) {
          throw IoError("snapshot write failed at round " + std::to_string(snap.round) + ": " + e.what());
        }
      } else {
        result.snapshots.push_back(std::move(snap));
      }
      ++next_snap;
    }
  };

  emit();
  double window_sum = 0.0;
  std::uint64_t window_len = 0;
  for (std::uint64_t t = 0; t < params.T; ++t) {
    window_sum += sim.step().mean_payoff;
    ++window_len;
    const std::uint64_t done = t + 1;
    if (done % params.trajectory_stride == 0 || done == params.T) {
      result.trajectory.push_back(trajectory_point(sim, window_sum / static_cast<double>(window_len)));
      window_sum = 0.0;
      window_len = 0;
    }
    emit();
  }
  result.final = sim.snapshot();
  return result;
}

struct NaiveOptions {
  double existing_to_newcomer = 0.1;  // link weight every established agent gets toward the newcomer
  std::uint64_t rounds = 50'000;
};

struct NaiveSetup {
  SimParams params;
  std::shared_ptr<const PopulationSnapshot> snapshot;
  std::size_t newcomer = 0;
};

// Appends one agent with uniform weights. The result continues from the
// snapshot's round for `options.rounds` rounds; established agents keep learning.
inline NaiveSetup inject_naive_agent(const PopulationSnapshot& snapshot, const SimParams& params,
                                     const NaiveOptions& options = {}) {
  snapshot.validate();
  if (!(options.existing_to_newcomer > 0.0)) throw InvalidConfig("newcomer link weight must be positive");
  const std::size_t n = snapshot.size();
  const std::size_t k = snapshot.strategies();
  auto grown = std::make_shared<PopulationSnapshot>(snapshot);
  for (auto& a : grown->agents) a.link_weights.push_back(options.existing_to_newcomer);
  grown->agents.push_back(uniform_agent(n, n + 1, k, params.initial));

  Fnv1a h;
  h.update(to_hex(snapshot.params_digest));
  h.update("@" + std::to_string(snapshot.round) + "+naive:" + std::to_string(options.existing_to_newcomer));
  grown->params_digest = h.value();

  NaiveSetup setup;
  setup.params = params;
  setup.params.N = n + 1;
  setup.params.game = snapshot.game;
  setup.params.T = options.rounds;
  setup.params.snapshot_schedule.clear();
  setup.params.init = SnapshotInit{grown};
  setup.snapshot = grown;
  setup.newcomer = n;
  return setup;
}

}  // namespace siggame
