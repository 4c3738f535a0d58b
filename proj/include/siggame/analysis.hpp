#pragma once

// Post-hoc analysis of snapshots: thresholded group recovery, group labels,
// bipartiteness, weight concentration and mutual information.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "siggame/engine.hpp"
#include "siggame/error.hpp"
#include "siggame/game.hpp"
#include "siggame/population.hpp"

namespace siggame {

inline constexpr double kDefaultThreshold = 0.1;
inline constexpr double kDefaultPurity = 0.9;

// Directed interaction probabilities p_ij = w_ij / sum_k w_ik. The error
// mixture is left out: it adds the same floor to every edge.
struct InteractionGraph {
  std::size_t n = 0;
  std::vector<double> p;  // row-major n x n

  double operator()(std::size_t i, std::size_t j) const { return p[i * n + j]; }
  std::span<const double> row(std::size_t i) const { return {p.data() + i * n, n}; }
};

inline InteractionGraph interaction_graph(const PopulationSnapshot& snap) {
  InteractionGraph g;
  g.n = snap.size();
  g.p.assign(g.n * g.n, 0.0);
  for (std::size_t i = 0; i < g.n; ++i) {
    const auto& w = snap.agents[i].link_weights;
    if (w.size() != g.n) throw InvalidArgument("link vector length differs from population size");
    double total = 0.0;
    for (double v : w) total += v;
    if (!(total > 0.0)) throw DegenerateState("agent " + std::to_string(i) + " has zero total link weight");
    for (std::size_t j = 0; j < g.n; ++j) g.p[i * g.n + j] = j == i ? 0.0 : w[j] / total;
  }
  return g;
}

// p_ij >= threshold, forgiving the last-bit rounding of the row normalization
// (uniform rows of N = 11 give 1.9 / 19.000000000000004).
inline bool keeps_edge(double p, double threshold) { return p >= threshold * (1.0 - 1e-12); }

// Weakly connected components after dropping edges with p_ij < threshold.
// Returns the component index of each node; components are numbered by
// their smallest member.
inline std::vector<std::size_t> threshold_components(const InteractionGraph& g, double threshold) {
  std::vector<std::size_t> parent(g.n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (std::size_t i = 0; i < g.n; ++i)
    for (std::size_t j = 0; j < g.n; ++j)
      if (i != j && keeps_edge(g(i, j), threshold)) {
        auto a = find(i), b = find(j);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
  std::vector<std::size_t> label(g.n, SIZE_MAX), out(g.n);
  std::size_t next = 0;
  for (std::size_t i = 0; i < g.n; ++i) {
    auto r = find(i);
    if (label[r] == SIZE_MAX) label[r] = next++;
    out[i] = label[r];
  }
  return out;
}

enum class GroupType { Homogeneous, Hybrid, Pooling, Mixed };

inline std::string_view to_string(GroupType t) {
  switch (t) {
    case GroupType::Homogeneous: return "homogeneous";
    case GroupType::Hybrid: return "hybrid";
    case GroupType::Pooling: return "pooling";
    case GroupType::Mixed: return "mixed";
  }
  return "?";
}

struct GroupLabel {
  GroupType type = GroupType::Mixed;
  std::size_t first = 0;   // the strategy (homogeneous) or lower id of the pair (hybrid)
  std::size_t second = 0;  // higher id of the pair (hybrid)

  bool operator==(const GroupLabel&) const = default;
  auto operator<=>(const GroupLabel&) const = default;
};

// "homogeneous(S1R1)", "hybrid(S1R2/S2R1)", "pooling", "mixed".
inline std::string label_name(const GroupLabel& l, const StrategySpace& space) {
  switch (l.type) {
    case GroupType::Homogeneous: return "homogeneous(" + space.label(l.first) + ")";
    case GroupType::Hybrid: return "hybrid(" + space.label(l.first) + "/" + space.label(l.second) + ")";
    case GroupType::Pooling: return "pooling";
    case GroupType::Mixed: return "mixed";
  }
  return "?";
}

inline std::vector<std::size_t> primary_strategies(const PopulationSnapshot& snap) {
  std::vector<std::size_t> out(snap.size());
  for (std::size_t i = 0; i < snap.size(); ++i) out[i] = argmax(snap.agents[i].strategy_weights);
  return out;
}

// Labels a group by its members' primary strategies:
//   Homogeneous(s) when >= purity of members use one self-complementary s;
//   Hybrid(a, b)   when >= purity use a or b, both present, (a, b) complementary;
//   Pooling        when the modal primary strategy is pooling-classed;
//   Mixed          otherwise.
inline GroupLabel label_group(std::span<const std::size_t> members, std::span<const std::size_t> primaries,
                              const PayoffTable& table, double purity = kDefaultPurity) {
  std::map<std::size_t, std::size_t> counts;
  for (auto m : members) ++counts[primaries[m]];
  if (counts.empty()) return {};
  // Modal strategy, lowest id on ties.
  std::size_t modal = counts.begin()->first, modal_count = 0;
  for (auto [s, c] : counts)
    if (c > modal_count) modal = s, modal_count = c;
  const double need = purity * static_cast<double>(members.size());

  if (table.classify(modal, modal) == PairClass::Homogeneous && static_cast<double>(modal_count) >= need - 1e-9)
    return {GroupType::Homogeneous, modal, modal};

  std::size_t partner = SIZE_MAX, partner_count = 0;
  for (auto [s, c] : counts)
    if (s != modal && table.classify(modal, s) == PairClass::HybridComplement && c > partner_count)
      partner = s, partner_count = c;
  if (partner != SIZE_MAX && static_cast<double>(modal_count + partner_count) >= need - 1e-9)
    return {GroupType::Hybrid, std::min(modal, partner), std::max(modal, partner)};

  if (table.space().is_pooling_classed(modal)) return {GroupType::Pooling, modal, modal};
  return {GroupType::Mixed, modal, modal};
}

struct GroupPartition {
  double threshold = kDefaultThreshold;
  double purity = kDefaultPurity;
  std::vector<std::vector<std::size_t>> groups;  // ascending members; groups ordered by smallest member
  std::vector<GroupLabel> labels;
  std::vector<std::size_t> group_of;   // per agent
  std::vector<std::size_t> primaries;  // per agent argmax strategy
};

inline GroupPartition recover_groups(const InteractionGraph& graph, const PopulationSnapshot& snap,
                                     const PayoffTable& table, double threshold = kDefaultThreshold,
                                     double purity = kDefaultPurity) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw InvalidArgument("threshold must lie in (0, 1)");
  if (!(purity > 0.0 && purity <= 1.0)) throw InvalidArgument("purity must lie in (0, 1]");
  if (graph.n != snap.size()) throw InvalidArgument("graph and snapshot sizes differ");
  if (snap.strategies() != table.size()) throw InvalidArgument("snapshot strategy count differs from the table");
  GroupPartition part;
  part.threshold = threshold;
  part.purity = purity;
  part.group_of = threshold_components(graph, threshold);
  part.primaries = primary_strategies(snap);
  const std::size_t count = part.group_of.empty() ? 0 : *std::max_element(part.group_of.begin(), part.group_of.end()) + 1;
  part.groups.resize(count);
  for (std::size_t i = 0; i < graph.n; ++i) part.groups[part.group_of[i]].push_back(i);
  for (const auto& g : part.groups) part.labels.push_back(label_group(g, part.primaries, table, purity));
  return part;
}

struct BipartiteResult {
  bool bipartite = true;
  std::vector<std::size_t> odd_cycle;  // closed walk u0 .. uk with an edge uk-u0; empty when bipartite
  std::vector<int> side;               // per group member (in group order): 0 or 1
};

// 2-colors the group's undirected thresholded subgraph.
inline BipartiteResult bipartiteness(const GroupPartition& part, const InteractionGraph& graph, std::size_t group) {
  if (group >= part.groups.size()) throw InvalidArgument("group index out of range");
  const auto& members = part.groups[group];
  const std::size_t m = members.size();
  const double t = part.threshold;
  auto adjacent = [&](std::size_t a, std::size_t b) {
    return keeps_edge(graph(members[a], members[b]), t) || keeps_edge(graph(members[b], members[a]), t);
  };
  BipartiteResult res;
  res.side.assign(m, -1);
  std::vector<std::size_t> parent(m, SIZE_MAX), depth(m, 0), queue;
  for (std::size_t root = 0; root < m; ++root) {
    if (res.side[root] != -1) continue;
    res.side[root] = 0;
    queue.assign(1, root);
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
      const auto u = queue[qi];
      for (std::size_t v = 0; v < m; ++v) {
        if (v == u || !adjacent(u, v)) continue;
        if (res.side[v] == -1) {
          res.side[v] = 1 - res.side[u];
          parent[v] = u;
          depth[v] = depth[u] + 1;
          queue.push_back(v);
        } else if (res.side[v] == res.side[u]) {
          // Same BFS depth; walk both up to the common ancestor.
          std::vector<std::size_t> left, right;
          std::size_t a = u, b = v;
          while (a != b) {
            left.push_back(a);
            right.push_back(b);
            a = parent[a];
            b = parent[b];
          }
          res.bipartite = false;
          res.odd_cycle.clear();
          for (auto x : left) res.odd_cycle.push_back(members[x]);
          res.odd_cycle.push_back(members[a]);
          for (auto it = right.rbegin(); it != right.rend(); ++it) res.odd_cycle.push_back(members[*it]);
          return res;
        }
      }
    }
  }
  return res;
}

struct MutualInformation {
  double signal_action = 0.0;          // bits, primary strategies
  double signal_state = 0.0;           // bits, primary strategies
  double signal_action_mixture = 0.0;  // bits, weight-normalized strategy mixtures
};

namespace detail {

// I(X;Y) in bits from a row-major joint distribution.
inline double mutual_information_bits(const std::vector<double>& joint, std::size_t rows, std::size_t cols) {
  std::vector<double> px(rows, 0.0), py(cols, 0.0);
  for (std::size_t x = 0; x < rows; ++x)
    for (std::size_t y = 0; y < cols; ++y) {
      px[x] += joint[x * cols + y];
      py[y] += joint[x * cols + y];
    }
  double mi = 0.0;
  for (std::size_t x = 0; x < rows; ++x)
    for (std::size_t y = 0; y < cols; ++y) {
      const double p = joint[x * cols + y];
      if (p > 0.0) mi += p * std::log2(p / (px[x] * py[y]));
    }
  return std::max(mi, 0.0);
}

}  // namespace detail

// A sender and a receiver are drawn independently and uniformly from the
// group; the state follows the game's distribution. Returns I(signal; action)
// and I(signal; state) in bits.
inline MutualInformation mutual_information(std::span<const std::size_t> members, const PopulationSnapshot& snap,
                                            const PayoffTable& table) {
  if (members.empty()) throw InvalidArgument("mutual information of an empty group");
  const auto& space = table.space();
  const std::size_t n = static_cast<std::size_t>(space.states());
  const auto& probs = snap.game.state_probs;
  const double share = 1.0 / static_cast<double>(members.size());

  // send[s][m] = P(signal m | state s); recv[m][a] = P(action a | signal m).
  auto joint_from = [&](auto&& strategy_mix) {
    std::vector<double> send(n * n, 0.0), recv(n * n, 0.0);
    for (auto agent : members)
      strategy_mix(agent, [&](std::size_t id, double weight) {
        auto sm = space.sender_map(id);
        auto rm = space.receiver_map(id);
        for (std::size_t s = 0; s < n; ++s) send[s * n + sm[s]] += share * weight;
        for (std::size_t m = 0; m < n; ++m) recv[m * n + rm[m]] += share * weight;
      });
    std::vector<double> signal_action(n * n, 0.0), signal_state(n * n, 0.0);
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t m = 0; m < n; ++m) {
        const double psm = probs[s] * send[s * n + m];
        signal_state[m * n + s] += psm;
        for (std::size_t a = 0; a < n; ++a) signal_action[m * n + a] += psm * recv[m * n + a];
      }
    return std::pair{signal_action, signal_state};
  };

  MutualInformation out;
  auto [sa, ss] = joint_from([&](std::size_t agent, auto&& emit) {
    emit(argmax(snap.agents[agent].strategy_weights), 1.0);
  });
  out.signal_action = detail::mutual_information_bits(sa, n, n);
  out.signal_state = detail::mutual_information_bits(ss, n, n);
  auto [sa_mix, ss_mix] = joint_from([&](std::size_t agent, auto&& emit) {
    const auto& w = snap.agents[agent].strategy_weights;
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    for (std::size_t k = 0; k < w.size(); ++k)
      if (w[k] > 0.0) emit(k, w[k] / total);
  });
  out.signal_action_mixture = detail::mutual_information_bits(sa_mix, n, n);
  return out;
}

struct AgentStats {
  std::size_t agent = 0;
  std::size_t group = 0;
  std::size_t primary = 0;
  double preferred_share = 0.0;      // max strategy weight / total strategy weight
  double complementary_share = 0.0;  // link weight to agents whose primary fully succeeds with ours
  std::size_t top_partner = 0;
  double top_partner_prob = 0.0;
};

struct GroupSummary {
  std::size_t id = 0;
  GroupLabel label;
  std::size_t size = 0;
  double mean_preferred_share = 0.0;
  double mean_complementary_share = 0.0;
  bool bipartite = true;
  MutualInformation mi;
};

struct TypeShares {
  double homogeneous = 0.0;
  double hybrid = 0.0;
  double pooling = 0.0;
  double mixed = 0.0;
};

struct GroupStats {
  std::vector<AgentStats> agents;
  std::vector<GroupSummary> groups;
  double mean_preferred_share = 0.0;
  double mean_complementary_share = 0.0;
  TypeShares agent_shares;            // fraction of agents by the label of their group
  double pooling_primary_share = 0.0;  // fraction of agents whose primary strategy is pooling-classed
};

inline GroupStats concentration_stats(const PopulationSnapshot& snap, const GroupPartition& part,
                                      const InteractionGraph& graph, const PayoffTable& table) {
  const std::size_t n = snap.size();
  if (part.group_of.size() != n || graph.n != n) throw InvalidArgument("partition does not match the snapshot");
  GroupStats st;
  st.agents.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = snap.agents[i];
    auto& s = st.agents[i];
    s.agent = i;
    s.group = part.group_of[i];
    s.primary = part.primaries[i];
    const double s_total = std::accumulate(a.strategy_weights.begin(), a.strategy_weights.end(), 0.0);
    s.preferred_share = s_total > 0.0 ? a.strategy_weights[s.primary] / s_total : 0.0;
    const double l_total = std::accumulate(a.link_weights.begin(), a.link_weights.end(), 0.0);
    double comp = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && table.is_success(s.primary, part.primaries[j])) comp += a.link_weights[j];
    s.complementary_share = l_total > 0.0 ? std::clamp(comp / l_total, 0.0, 1.0) : 0.0;
    s.top_partner = argmax(graph.row(i));
    s.top_partner_prob = graph(i, s.top_partner);
    st.mean_preferred_share += s.preferred_share;
    st.mean_complementary_share += s.complementary_share;
    if (table.space().is_pooling_classed(s.primary)) st.pooling_primary_share += 1.0;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  st.mean_preferred_share *= inv_n;
  st.mean_complementary_share *= inv_n;
  st.pooling_primary_share *= inv_n;

  for (std::size_t g = 0; g < part.groups.size(); ++g) {
    const auto& members = part.groups[g];
    GroupSummary sum;
    sum.id = g;
    sum.label = part.labels[g];
    sum.size = members.size();
    for (auto m : members) {
      sum.mean_preferred_share += st.agents[m].preferred_share;
      sum.mean_complementary_share += st.agents[m].complementary_share;
    }
    sum.mean_preferred_share /= static_cast<double>(members.size());
    sum.mean_complementary_share /= static_cast<double>(members.size());
    sum.bipartite = bipartiteness(part, graph, g).bipartite;
    sum.mi = mutual_information(members, snap, table);
    const double frac = static_cast<double>(members.size()) * inv_n;
    switch (sum.label.type) {
      case GroupType::Homogeneous: st.agent_shares.homogeneous += frac; break;
      case GroupType::Hybrid: st.agent_shares.hybrid += frac; break;
      case GroupType::Pooling: st.agent_shares.pooling += frac; break;
      case GroupType::Mixed: st.agent_shares.mixed += frac; break;
    }
    st.groups.push_back(sum);
  }
  return st;
}

// One-call analysis of a snapshot.
struct SnapshotAnalysis {
  InteractionGraph graph;
  GroupPartition partition;
  GroupStats stats;
};

inline SnapshotAnalysis analyze_snapshot(const PopulationSnapshot& snap, const PayoffTable& table,
                                         double threshold = kDefaultThreshold, double purity = kDefaultPurity) {
  SnapshotAnalysis out;
  out.graph = interaction_graph(snap);
  out.partition = recover_groups(out.graph, snap, table, threshold, purity);
  out.stats = concentration_stats(snap, out.partition, out.graph, table);
  return out;
}

}  // namespace siggame
