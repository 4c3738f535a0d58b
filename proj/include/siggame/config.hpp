#pragma once

// Experiment configuration: a flat "key = value" text file. Keys follow the
// parameter table names (N, delta, epsilon, NLS, SLS, T, state_probs, ...);
// "sweep.<key>" lines list alternative values for a sweep axis.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "siggame/diffusion.hpp"
#include "siggame/digest.hpp"
#include "siggame/engine.hpp"
#include "siggame/error.hpp"
#include "siggame/snapshot_io.hpp"

namespace siggame {

enum class ExperimentKind { Baseline, ThreeState, UnequalStates, Seeded, Naive, Diffusion, Sweep };

inline std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Baseline: return "baseline";
    case ExperimentKind::ThreeState: return "three_state";
    case ExperimentKind::UnequalStates: return "unequal_states";
    case ExperimentKind::Seeded: return "seeded";
    case ExperimentKind::Naive: return "naive";
    case ExperimentKind::Diffusion: return "diffusion";
    case ExperimentKind::Sweep: return "sweep";
  }
  return "?";
}

inline ExperimentKind parse_kind(std::string_view s) {
  for (auto k : {ExperimentKind::Baseline, ExperimentKind::ThreeState, ExperimentKind::UnequalStates,
                 ExperimentKind::Seeded, ExperimentKind::Naive, ExperimentKind::Diffusion, ExperimentKind::Sweep})
    if (to_string(k) == s) return k;
  throw InvalidConfig("unknown experiment kind '" + std::string(s) + "'");
}

namespace config_detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, std::string_view delims) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (delims.find(c) != std::string_view::npos) {
      if (auto t = trim(cur); !t.empty()) out.push_back(t);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (auto t = trim(cur); !t.empty()) out.push_back(t);
  return out;
}

inline double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size())
    throw InvalidConfig("'" + key + "' expects a number, got '" + v + "'");
  return out;
}

inline std::uint64_t to_u64(const std::string& key, const std::string& v) {
  // Accept 1e6-style integers as well as plain digits.
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec == std::errc{} && p == v.data() + v.size()) return out;
  const double d = to_double(key, v);
  if (!(d >= 0.0) || d != static_cast<double>(static_cast<std::uint64_t>(d)))
    throw InvalidConfig("'" + key + "' expects a nonnegative integer, got '" + v + "'");
  return static_cast<std::uint64_t>(d);
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw InvalidConfig("'" + key + "' expects true/false, got '" + v + "'");
}

inline std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& t : split(v, ", \t")) out.push_back(to_double(key, t));
  if (out.empty()) throw InvalidConfig("'" + key + "' needs at least one value");
  return out;
}

inline std::string format_number(double v) { return detail::format_double(v); }

}  // namespace config_detail

struct SweepAxes {
  std::vector<std::size_t> N;
  std::vector<std::uint64_t> T;
  std::vector<double> delta;
  std::vector<double> epsilon;
  std::vector<double> nls;
  std::vector<std::vector<double>> state_probs;

  bool empty() const {
    return N.empty() && T.empty() && delta.empty() && epsilon.empty() && nls.empty() && state_probs.empty();
  }
};

// One point of the sweep grid.
struct Cell {
  std::size_t index = 0;
  SimParams params;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Baseline;
  SimParams base;
  SweepAxes sweep;
  std::string seed_groups;  // textual; resolved against the game of each cell
  StylizedWeights style;
  std::size_t seeds = 1;
  std::size_t first_seed = 0;
  std::uint64_t base_seed = 1;
  double threshold = 0.1;
  double purity = 0.9;
  std::size_t min_group_size = 2;
  NaiveOptions naive;
  std::size_t diffusion_trials = 50;
  std::size_t diffusion_max_steps = 1000;
  std::optional<double> diffusion_epsilon;
  std::string init_snapshot;
  SnapshotEncoding snapshot_encoding = SnapshotEncoding::Binary;
  int max_states = kDefaultMaxStates;
  std::filesystem::path out;

  // Every key as given (after CLI overrides). The digest covers all of them
  // except the output location and the seed range, so runs over disjoint
  // seed ranges of one experiment share a digest and can be merged.
  std::map<std::string, std::string> entries;

  std::string canonical() const {
    std::string s;
    for (const auto& [k, v] : entries) {
      if (k == "out" || k == "seeds" || k == "first_seed") continue;
      s += k + "=" + v + "\n";
    }
    return s;
  }
  std::uint64_t digest() const { return fnv1a(canonical()); }

  // Derived RNG seed of (cell, seed index). The finalizer is a bijection and
  // the packed key is injective for cell, seed < 2^32, so distinct jobs of one
  // experiment never share a stream.
  std::uint64_t job_seed(std::size_t cell, std::size_t seed_index) const {
    return mix64(base_seed + (static_cast<std::uint64_t>(cell) << 32) + static_cast<std::uint64_t>(seed_index));
  }

  std::vector<Cell> cells() const;
};

inline const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys = {
      "kind", "N", "n", "state_probs", "success_payoff", "delta", "epsilon", "NLS", "SLS", "T", "seeds",
      "first_seed", "base_seed", "delta_strategy", "delta_network", "epsilon_strategy", "epsilon_network",
      "symmetric", "initial_strategy_weight", "initial_link_weight", "threshold", "purity", "min_group_size",
      "trajectory_stride", "snapshot_at", "snapshot_format", "seed_groups", "naive_rounds",
      "naive_existing_link", "diffusion_trials", "diffusion_max_steps", "diffusion_epsilon", "init_snapshot",
      "max_states", "out", "sweep.N", "sweep.T", "sweep.delta", "sweep.epsilon", "sweep.NLS",
      "sweep.state_probs"};
  return keys;
}

inline std::map<std::string, std::string> parse_config_entries(std::string_view text) {
  std::map<std::string, std::string> entries;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto body = config_detail::trim(line);
    if (body.empty()) continue;
    auto eq = body.find('=');
    if (eq == std::string::npos)
      throw InvalidConfig("line " + std::to_string(lineno) + ": expected 'key = value'");
    auto key = config_detail::trim(body.substr(0, eq));
    auto value = config_detail::trim(body.substr(eq + 1));
    if (!known_config_keys().count(key))
      throw InvalidConfig("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (!entries.emplace(key, value).second)
      throw InvalidConfig("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
  }
  return entries;
}

inline ExperimentConfig config_from_entries(std::map<std::string, std::string> entries) {
  using namespace config_detail;
  for (const auto& [k, v] : entries)
    if (!known_config_keys().count(k)) throw InvalidConfig("unknown key '" + k + "'");
  ExperimentConfig c;
  auto get = [&](const std::string& k) -> const std::string* {
    auto it = entries.find(k);
    return it == entries.end() ? nullptr : &it->second;
  };
  if (auto v = get("kind")) c.kind = parse_kind(*v);

  int n = c.kind == ExperimentKind::ThreeState ? 3 : 2;
  if (auto v = get("n")) n = static_cast<int>(to_u64("n", *v));
  std::vector<double> probs;
  if (auto v = get("state_probs")) {
    probs = to_doubles("state_probs", *v);
    if (!get("n")) n = static_cast<int>(probs.size());
  } else if (c.kind == ExperimentKind::UnequalStates) {
    probs = {0.9, 0.1};
  }
  double success = 2.0;
  if (auto v = get("success_payoff")) success = to_double("success_payoff", *v);
  if (n < 2) throw InvalidConfig("n must be at least 2");
  c.base.game = probs.empty() ? GameSpec::equiprobable(n, success) : GameSpec{n, probs, success};
  try {
    c.base.game.validate();
  } catch (const InvalidGame& e) {
    throw InvalidConfig(e.what());
  }

  if (auto v = get("N")) c.base.N = to_u64("N", *v);
  if (auto v = get("T")) c.base.T = to_u64("T", *v);
  else if (c.kind == ExperimentKind::Naive) c.base.T = 0;  // newcomer joins the stylized population directly
  auto& L = c.base.learning;
  if (auto v = get("delta")) L.delta = to_double("delta", *v);
  if (auto v = get("epsilon")) L.epsilon = to_double("epsilon", *v);
  if (auto v = get("NLS")) L.nls = to_double("NLS", *v);
  if (auto v = get("SLS")) L.sls = to_double("SLS", *v);
  if (auto v = get("delta_strategy")) L.delta_strategy = to_double("delta_strategy", *v);
  if (auto v = get("delta_network")) L.delta_network = to_double("delta_network", *v);
  if (auto v = get("epsilon_strategy")) L.epsilon_strategy = to_double("epsilon_strategy", *v);
  if (auto v = get("epsilon_network")) L.epsilon_network = to_double("epsilon_network", *v);
  if (auto v = get("symmetric")) c.base.symmetric_network_updates = to_bool("symmetric", *v);
  if (auto v = get("initial_strategy_weight")) c.base.initial.strategy = to_double("initial_strategy_weight", *v);
  if (auto v = get("initial_link_weight")) c.base.initial.link = to_double("initial_link_weight", *v);
  if (auto v = get("trajectory_stride")) c.base.trajectory_stride = to_u64("trajectory_stride", *v);
  if (auto v = get("snapshot_at"))
    for (const auto& t : split(*v, ", \t")) c.base.snapshot_schedule.push_back(to_u64("snapshot_at", t));
  if (auto v = get("snapshot_format")) {
    if (*v == "binary") c.snapshot_encoding = SnapshotEncoding::Binary;
    else if (*v == "text") c.snapshot_encoding = SnapshotEncoding::Text;
    else throw InvalidConfig("snapshot_format must be binary or text");
  }
  if (auto v = get("seeds")) c.seeds = to_u64("seeds", *v);
  if (auto v = get("first_seed")) c.first_seed = to_u64("first_seed", *v);
  if (auto v = get("base_seed")) c.base_seed = to_u64("base_seed", *v);
  if (auto v = get("threshold")) c.threshold = to_double("threshold", *v);
  if (auto v = get("purity")) c.purity = to_double("purity", *v);
  if (auto v = get("min_group_size")) c.min_group_size = to_u64("min_group_size", *v);
  if (auto v = get("seed_groups")) c.seed_groups = *v;
  if (auto v = get("naive_rounds")) c.naive.rounds = to_u64("naive_rounds", *v);
  if (auto v = get("naive_existing_link")) c.naive.existing_to_newcomer = to_double("naive_existing_link", *v);
  if (auto v = get("diffusion_trials")) c.diffusion_trials = to_u64("diffusion_trials", *v);
  if (auto v = get("diffusion_max_steps")) c.diffusion_max_steps = to_u64("diffusion_max_steps", *v);
  if (auto v = get("diffusion_epsilon")) c.diffusion_epsilon = to_double("diffusion_epsilon", *v);
  if (auto v = get("init_snapshot")) c.init_snapshot = *v;
  if (auto v = get("max_states")) c.max_states = static_cast<int>(to_u64("max_states", *v));
  if (auto v = get("out")) c.out = *v;

  if (auto v = get("sweep.N"))
    for (const auto& t : split(*v, ", \t")) c.sweep.N.push_back(to_u64("sweep.N", t));
  if (auto v = get("sweep.T"))
    for (const auto& t : split(*v, ", \t")) c.sweep.T.push_back(to_u64("sweep.T", t));
  if (auto v = get("sweep.delta")) c.sweep.delta = to_doubles("sweep.delta", *v);
  if (auto v = get("sweep.epsilon")) c.sweep.epsilon = to_doubles("sweep.epsilon", *v);
  if (auto v = get("sweep.NLS")) c.sweep.nls = to_doubles("sweep.NLS", *v);
  if (auto v = get("sweep.state_probs"))
    for (const auto& alt : split(*v, ";")) c.sweep.state_probs.push_back(to_doubles("sweep.state_probs", alt));

  // Kind-specific requirements.
  switch (c.kind) {
    case ExperimentKind::ThreeState:
      if (c.base.game.n != 3) throw InvalidConfig("three_state experiments need n = 3");
      break;
    case ExperimentKind::UnequalStates: {
      const auto& p = c.base.game.state_probs;
      if (std::all_of(p.begin(), p.end(), [&](double x) { return x == p[0]; }) && c.sweep.state_probs.empty())
        throw InvalidConfig("unequal_states experiments need unequal state_probs");
      break;
    }
    case ExperimentKind::Seeded:
    case ExperimentKind::Naive:
      if (c.seed_groups.empty()) throw InvalidConfig(std::string(to_string(c.kind)) + " experiments need seed_groups");
      break;
    case ExperimentKind::Sweep:
      if (c.sweep.empty()) throw InvalidConfig("sweep experiments need at least one sweep.* axis");
      break;
    default:
      break;
  }
  if (c.seeds == 0) throw InvalidConfig("seeds must be at least 1");
  if (c.first_seed + c.seeds > (std::uint64_t{1} << 32)) throw InvalidConfig("seed range too large");
  if (!(c.threshold > 0.0 && c.threshold < 1.0)) throw InvalidConfig("threshold must lie in (0, 1)");
  if (!(c.purity > 0.0 && c.purity <= 1.0)) throw InvalidConfig("purity must lie in (0, 1]");
  if (c.diffusion_trials == 0) throw InvalidConfig("diffusion_trials must be at least 1");
  c.entries = std::move(entries);
  if (!c.entries.count("kind")) c.entries["kind"] = std::string(to_string(c.kind));

  // Validate every cell now so bad sweeps fail before any work starts.
  for (const auto& cell : c.cells()) {
    cell.params.validate();
    if (c.seed_groups.empty()) continue;
    std::size_t seeded = 0;
    for (const auto& g : parse_seed_groups(c.seed_groups, StrategySpace(cell.params.game.n, c.max_states)))
      seeded += g.size;
    if (seeded > cell.params.N)
      throw InvalidConfig("seed groups hold " + std::to_string(seeded) + " agents but N = " +
                          std::to_string(cell.params.N));
  }
  return c;
}

inline ExperimentConfig parse_config(std::string_view text) { return config_from_entries(parse_config_entries(text)); }

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  try {
    return parse_config(read_file(path));
  } catch (const InvalidConfig& e) {
    throw InvalidConfig(path.string() + ": " + e.what());
  }
}

// Cartesian product of the sweep axes, in the order N, T, delta, epsilon,
// NLS, state_probs (last axis varies fastest).
inline std::vector<Cell> ExperimentConfig::cells() const {
  std::vector<Cell> out{Cell{0, base}};
  auto expand = [&](auto const& values, auto&& apply) {
    if (values.empty()) return;
    std::vector<Cell> next;
    for (const auto& cell : out)
      for (const auto& v : values) {
        Cell c = cell;
        apply(c.params, v);
        next.push_back(std::move(c));
      }
    out = std::move(next);
  };
  expand(sweep.N, [](SimParams& p, std::size_t v) { p.N = v; });
  expand(sweep.T, [](SimParams& p, std::uint64_t v) { p.T = v; });
  expand(sweep.delta, [](SimParams& p, double v) { p.learning.delta = v; });
  expand(sweep.epsilon, [](SimParams& p, double v) { p.learning.epsilon = v; });
  expand(sweep.nls, [](SimParams& p, double v) { p.learning.nls = v; });
  expand(sweep.state_probs, [&](SimParams& p, const std::vector<double>& v) {
    p.game = GameSpec{static_cast<int>(v.size()), v, base.game.success_payoff};
  });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].index = i;
  return out;
}

}  // namespace siggame
