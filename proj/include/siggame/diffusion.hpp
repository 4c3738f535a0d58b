#pragma once

// Susceptible-infected spreading on a frozen snapshot. Information passes
// only through a fully successful signaling interaction between two members
// of the same group.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "siggame/engine.hpp"
#include "siggame/error.hpp"
#include "siggame/game.hpp"
#include "siggame/rng.hpp"

namespace siggame {

struct DiffusionConfig {
  std::vector<std::size_t> group;  // member agent indices
  std::size_t trials = 50;
  std::size_t max_steps = 1000;
  double epsilon = 0.01;  // selection error for both partner and strategy draws
  std::uint64_t seed = 1;
};

struct DiffusionCurve {
  // mean_fraction[t] is the mean fraction infected after step t (t = 0 is the
  // seeded state). Finished trials count as fully infected afterwards.
  std::vector<double> mean_fraction;
  std::vector<std::vector<double>> traces;                 // per trial, same indexing
  std::vector<std::optional<std::size_t>> steps_to_full;   // nullopt when capped

  double mean_steps_to_full() const {
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& s : steps_to_full)
      if (s) sum += static_cast<double>(*s), ++count;
    return count ? sum / static_cast<double>(count) : 0.0;
  }
};

namespace detail {

// Inverse-CDF sampler over a frozen weight vector.
class FrozenSampler {
 public:
  explicit FrozenSampler(const std::vector<double>& w) : cum_(w.size()) {
    double acc = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) cum_[i] = acc += w[i];
    if (!(acc > 0.0)) throw DegenerateState("cannot sample from all-zero weights");
  }
  std::size_t sample(double u) const {
    const double target = u * cum_.back();
    auto it = std::upper_bound(cum_.begin(), cum_.end(), target);
    if (it == cum_.end()) --it;
    return static_cast<std::size_t>(it - cum_.begin());
  }

 private:
  std::vector<double> cum_;
};

}  // namespace detail

inline DiffusionCurve run_diffusion(const PopulationSnapshot& snap, const PayoffTable& table,
                                    const DiffusionConfig& config) {
  snap.validate();
  if (config.group.empty()) throw InvalidArgument("diffusion group is empty");
  if (config.trials == 0) throw InvalidArgument("diffusion needs at least one trial");
  if (!(config.epsilon >= 0.0 && config.epsilon <= 1.0)) throw InvalidArgument("epsilon must lie in [0, 1]");
  if (snap.strategies() != table.size()) throw InvalidArgument("snapshot strategy count differs from the table");
  const std::size_t n = snap.size();
  const std::size_t g = config.group.size();
  const std::size_t k = table.size();

  std::vector<std::size_t> slot(n, SIZE_MAX);  // agent -> position in group
  for (std::size_t m = 0; m < g; ++m) {
    if (config.group[m] >= n) throw InvalidArgument("group member out of range");
    if (slot[config.group[m]] != SIZE_MAX) throw InvalidArgument("duplicate group member");
    slot[config.group[m]] = m;
  }
  std::vector<detail::FrozenSampler> partner, strategy;
  partner.reserve(g);
  strategy.reserve(g);
  for (auto a : config.group) {
    partner.emplace_back(snap.agents[a].link_weights);
    strategy.emplace_back(snap.agents[a].strategy_weights);
  }
  const double eps = config.epsilon;
  auto draw_strategy = [&](std::size_t m, SplitMix64& rng) {
    if (rng.uniform() < eps) return static_cast<std::size_t>(rng.below(k));
    return strategy[m].sample(rng.uniform());
  };

  DiffusionCurve curve;
  curve.traces.resize(config.trials);
  curve.steps_to_full.resize(config.trials);
  std::vector<char> infected(g);
  std::vector<std::size_t> order(g);
  for (std::size_t trial = 0; trial < config.trials; ++trial) {
    auto rng = derive_stream(config.seed, trial, 0xd1ff);
    std::fill(infected.begin(), infected.end(), 0);
    infected[rng.below(g)] = 1;
    std::size_t count = 1;
    auto& trace = curve.traces[trial];
    trace.push_back(1.0 / static_cast<double>(g));
    if (count == g) {
      curve.steps_to_full[trial] = 0;
      continue;
    }
    for (std::size_t step = 1; step <= config.max_steps; ++step) {
      for (std::size_t m = 0; m < g; ++m) order[m] = m;
      shuffle_in_place(order, rng);
      for (auto m : order) {
        const std::size_t self = config.group[m];
        std::size_t target;
        if (rng.uniform() < eps) {
          target = rng.below(n - 1);
          if (target >= self) ++target;
        } else {
          target = partner[m].sample(rng.uniform());
        }
        const std::size_t other = slot[target];
        if (other == SIZE_MAX) continue;  // partner outside the group: no interaction
        const auto s_self = draw_strategy(m, rng);
        const auto s_other = draw_strategy(other, rng);
        if (!table.is_success(s_self, s_other)) continue;
        if (infected[m] != infected[other]) {
          infected[m] = infected[other] = 1;
          ++count;
        }
      }
      trace.push_back(static_cast<double>(count) / static_cast<double>(g));
      if (count == g) {
        curve.steps_to_full[trial] = step;
        break;
      }
    }
  }

  std::size_t len = 0;
  for (const auto& t : curve.traces) len = std::max(len, t.size());
  curve.mean_fraction.assign(len, 0.0);
  for (const auto& t : curve.traces)
    for (std::size_t s = 0; s < len; ++s) curve.mean_fraction[s] += s < t.size() ? t[s] : t.back();
  for (auto& v : curve.mean_fraction) v /= static_cast<double>(config.trials);
  return curve;
}

}  // namespace siggame
