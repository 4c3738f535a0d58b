#pragma once

// The n-state Lewis sender-receiver game: strategy enumeration, expected
// payoffs under role averaging, and strategy/pair classification.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "siggame/error.hpp"

namespace siggame {

inline constexpr double kPayoffTolerance = 1e-12;
inline constexpr int kDefaultMaxStates = 4;
// 2^26 doubles = 512 MiB. n = 3 needs 729^2, n = 4 would need 2^32.
inline constexpr std::size_t kDefaultMaxTableEntries = std::size_t{1} << 26;

struct GameSpec {
  int n = 2;
  std::vector<double> state_probs{0.5, 0.5};
  double success_payoff = 2.0;

  static GameSpec equiprobable(int n, double success_payoff = 2.0) {
    if (n < 2) throw InvalidGame("game needs at least 2 states, got " + std::to_string(n));
    return GameSpec{n, std::vector<double>(static_cast<std::size_t>(n), 1.0 / n),
                    success_payoff};
  }

  static GameSpec with_probs(std::vector<double> probs, double success_payoff = 2.0) {
    GameSpec spec{static_cast<int>(probs.size()), std::move(probs), success_payoff};
    spec.validate();
    return spec;
  }

  void validate() const {
    if (n < 2) throw InvalidGame("game needs at least 2 states, got " + std::to_string(n));
    if (state_probs.size() != static_cast<std::size_t>(n))
      throw InvalidGame("state_probs has " + std::to_string(state_probs.size()) +
                        " entries, expected " + std::to_string(n));
    double sum = 0.0;
    for (double p : state_probs) {
      if (!(p >= 0.0) || !std::isfinite(p)) throw InvalidGame("state probability must be >= 0");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw InvalidGame("state probabilities must sum to 1");
    if (!(success_payoff >= 0.0) || !std::isfinite(success_payoff))
      throw InvalidGame("success payoff must be a nonnegative real");
  }

  bool operator==(const GameSpec&) const = default;
};

enum class RoleClass { Separating, Pooling, Partial };

// Pair classes, from the perspective of two strategies meeting each other.
enum class PairClass { Homogeneous, HybridComplement, Partial, Failing };

// Coarse agent type by primary strategy. Pooling covers every strategy with
// a non-bijective role map, including the partial maps that exist for n >= 3.
enum class StrategyKind { Homogeneous, Hybrid, Pooling };

inline std::string_view to_string(RoleClass c) {
  switch (c) {
    case RoleClass::Separating: return "separating";
    case RoleClass::Pooling: return "pooling";
    case RoleClass::Partial: return "partial";
  }
  return "?";
}

inline std::string_view to_string(PairClass c) {
  switch (c) {
    case PairClass::Homogeneous: return "homogeneous";
    case PairClass::HybridComplement: return "hybrid-complement";
    case PairClass::Partial: return "partial";
    case PairClass::Failing: return "failing";
  }
  return "?";
}

inline std::string_view to_string(StrategyKind k) {
  switch (k) {
    case StrategyKind::Homogeneous: return "homogeneous";
    case StrategyKind::Hybrid: return "hybrid";
    case StrategyKind::Pooling: return "pooling";
  }
  return "?";
}

inline RoleClass classify_role(std::span<const std::uint8_t> map) {
  const auto n = map.size();
  if (n > 0 && std::all_of(map.begin(), map.end(), [&](auto v) { return v == map[0]; }))
    return RoleClass::Pooling;
  std::vector<bool> hit(n, false);
  for (auto v : map) {
    if (v >= n || hit[v]) return RoleClass::Partial;
    hit[v] = true;
  }
  return RoleClass::Separating;
}

struct PureStrategy {
  std::vector<std::uint8_t> sender_map;    // state -> signal
  std::vector<std::uint8_t> receiver_map;  // signal -> act
  std::size_t id = 0;

  int states() const { return static_cast<int>(sender_map.size()); }
  bool operator==(const PureStrategy&) const = default;
};

// Canonical ordering of all n^n role maps and of the n^(2n) strategies.
//
// Role maps are ordered separating (bijective) maps first, lexicographically,
// then every other map lexicographically. For n = 2 this yields
// [0,1], [1,0], [0,0], [1,1], i.e. S1..S4 and R1..R4. A strategy id is
// sender_rank * n^n + receiver_rank, so n = 2 ids run S1R1, S1R2, ... S4R4.
class StrategySpace {
 public:
  explicit StrategySpace(int n, int max_states = kDefaultMaxStates) : n_(n) {
    if (n < 2) throw InvalidGame("game needs at least 2 states, got " + std::to_string(n));
    if (n > max_states)
      throw ResourceLimit("n = " + std::to_string(n) + " exceeds the state limit of " +
                          std::to_string(max_states));
    maps_count_ = 1;
    for (int i = 0; i < n; ++i) maps_count_ *= static_cast<std::size_t>(n);

    std::vector<std::size_t> separating, other;
    std::vector<std::uint8_t> digits(static_cast<std::size_t>(n));
    for (std::size_t code = 0; code < maps_count_; ++code) {
      decode_radix(code, digits);
      (classify_role(digits) == RoleClass::Separating ? separating : other).push_back(code);
    }
    maps_.resize(maps_count_ * static_cast<std::size_t>(n));
    rank_of_code_.resize(maps_count_);
    std::size_t rank = 0;
    for (const auto* bucket : {&separating, &other}) {
      for (auto code : *bucket) {
        decode_radix(code, digits);
        std::copy(digits.begin(), digits.end(), maps_.begin() + static_cast<std::ptrdiff_t>(rank * n));
        rank_of_code_[code] = rank++;
      }
    }
    separating_count_ = separating.size();
  }

  int states() const { return n_; }
  std::size_t role_map_count() const { return maps_count_; }
  std::size_t separating_map_count() const { return separating_count_; }
  std::size_t size() const { return maps_count_ * maps_count_; }

  std::span<const std::uint8_t> role_map(std::size_t rank) const {
    return {maps_.data() + rank * static_cast<std::size_t>(n_), static_cast<std::size_t>(n_)};
  }
  std::span<const std::uint8_t> sender_map(std::size_t id) const { return role_map(id / maps_count_); }
  std::span<const std::uint8_t> receiver_map(std::size_t id) const { return role_map(id % maps_count_); }
  std::size_t sender_rank(std::size_t id) const { return id / maps_count_; }
  std::size_t receiver_rank(std::size_t id) const { return id % maps_count_; }

  std::size_t rank_of(std::span<const std::uint8_t> map) const {
    if (map.size() != static_cast<std::size_t>(n_))
      throw InvalidArgument("role map length " + std::to_string(map.size()) + " != n = " +
                            std::to_string(n_));
    std::size_t code = 0;
    for (auto v : map) {
      if (v >= n_) throw InvalidArgument("role map entry out of range");
      code = code * static_cast<std::size_t>(n_) + v;
    }
    return rank_of_code_[code];
  }

  std::size_t encode(std::span<const std::uint8_t> sender, std::span<const std::uint8_t> receiver) const {
    return rank_of(sender) * maps_count_ + rank_of(receiver);
  }
  std::size_t encode(const PureStrategy& s) const { return encode(s.sender_map, s.receiver_map); }

  PureStrategy decode(std::size_t id) const {
    if (id >= size()) throw InvalidArgument("strategy id " + std::to_string(id) + " out of range");
    auto s = sender_map(id);
    auto r = receiver_map(id);
    return PureStrategy{{s.begin(), s.end()}, {r.begin(), r.end()}, id};
  }

  RoleClass sender_class(std::size_t id) const { return classify_role(sender_map(id)); }
  RoleClass receiver_class(std::size_t id) const { return classify_role(receiver_map(id)); }

  // True when either role map is non-separating.
  bool is_pooling_classed(std::size_t id) const {
    return sender_rank(id) >= separating_count_ || receiver_rank(id) >= separating_count_;
  }

  // Self-complementary: the receiver map inverts the sender map.
  bool is_self_complementary(std::size_t id) const {
    if (is_pooling_classed(id)) return false;
    auto s = sender_map(id);
    auto r = receiver_map(id);
    for (int st = 0; st < n_; ++st)
      if (r[s[static_cast<std::size_t>(st)]] != st) return false;
    return true;
  }

  StrategyKind kind(std::size_t id) const {
    if (is_pooling_classed(id)) return StrategyKind::Pooling;
    return is_self_complementary(id) ? StrategyKind::Homogeneous : StrategyKind::Hybrid;
  }

  // "S{i}R{j}" for n = 2, "s:[...]|r:[...]" otherwise.
  std::string label(std::size_t id) const {
    if (n_ == 2)
      return "S" + std::to_string(sender_rank(id) + 1) + "R" + std::to_string(receiver_rank(id) + 1);
    auto fmt = [](std::span<const std::uint8_t> m) {
      std::string out = "[";
      for (std::size_t i = 0; i < m.size(); ++i) {
        if (i) out += ' ';
        out += std::to_string(m[i]);
      }
      return out + "]";
    };
    return "s:" + fmt(sender_map(id)) + "|r:" + fmt(receiver_map(id));
  }

  // Accepts both label forms ("S{i}R{j}" only when n = 2).
  std::size_t parse_label(std::string_view text) const {
    auto fail = [&] { return InvalidArgument("cannot parse strategy label '" + std::string(text) + "'"); };
    if (!text.empty() && text[0] == 'S') {
      if (n_ != 2) throw fail();
      auto r = text.find('R');
      if (r == std::string_view::npos) throw fail();
      auto whole = [&](std::string_view digits, std::size_t& out) {
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), out);
        if (digits.empty() || ec != std::errc{} || ptr != digits.data() + digits.size()) throw fail();
      };
      std::size_t si = 0, ri = 0;
      whole(text.substr(1, r - 1), si);
      whole(text.substr(r + 1), ri);
      if (si < 1 || si > maps_count_ || ri < 1 || ri > maps_count_) throw fail();
      return (si - 1) * maps_count_ + (ri - 1);
    }
    if (text.rfind("s:[", 0) != 0) throw fail();
    auto bar = text.find("|r:[");
    if (bar == std::string_view::npos || text.back() != ']') throw fail();
    auto parse_map = [&](std::string_view body) {
      std::vector<std::uint8_t> out;
      std::string token;
      for (char c : std::string(body) + " ") {
        if (c == ' ' || c == ',') {
          if (!token.empty()) {
            int v = std::stoi(token);
            if (v < 0 || v >= n_) throw fail();
            out.push_back(static_cast<std::uint8_t>(v));
            token.clear();
          }
        } else if (c >= '0' && c <= '9') {
          token += c;
        } else {
          throw fail();
        }
      }
      if (out.size() != static_cast<std::size_t>(n_)) throw fail();
      return out;
    };
    auto sender = parse_map(text.substr(3, bar - 4));
    auto receiver = parse_map(text.substr(bar + 4, text.size() - bar - 5));
    return encode(sender, receiver);
  }

 private:
  void decode_radix(std::size_t code, std::vector<std::uint8_t>& digits) const {
    for (int i = n_ - 1; i >= 0; --i) {
      digits[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(code % static_cast<std::size_t>(n_));
      code /= static_cast<std::size_t>(n_);
    }
  }

  int n_;
  std::size_t maps_count_ = 0;
  std::size_t separating_count_ = 0;
  std::vector<std::uint8_t> maps_;
  std::vector<std::size_t> rank_of_code_;
};

inline std::vector<PureStrategy> enumerate_strategies(int n, int max_states = kDefaultMaxStates) {
  StrategySpace space(n, max_states);
  std::vector<PureStrategy> out;
  out.reserve(space.size());
  for (std::size_t id = 0; id < space.size(); ++id) out.push_back(space.decode(id));
  return out;
}

// Probability that a receiver acts correctly given the sender's signal.
inline double role_success(std::span<const std::uint8_t> sender, std::span<const std::uint8_t> receiver,
                           std::span<const double> state_probs) {
  double p = 0.0;
  for (std::size_t s = 0; s < state_probs.size(); ++s)
    if (receiver[sender[s]] == s) p += state_probs[s];
  return p;
}

// Expected payoff to each participant, averaging over states and over which
// agent takes the sender role.
inline double expected_payoff(const GameSpec& spec, const PureStrategy& a, const PureStrategy& b) {
  const auto n = static_cast<std::size_t>(spec.n);
  if (spec.state_probs.size() != n || a.sender_map.size() != n || a.receiver_map.size() != n ||
      b.sender_map.size() != n || b.receiver_map.size() != n)
    throw InvalidArgument("strategy dimension does not match the game");
  for (const auto* s : {&a, &b})
    for (const auto* m : {&s->sender_map, &s->receiver_map})
      for (auto v : *m)
        if (v >= n) throw InvalidArgument("role map entry out of range");
  const double a_sends = role_success(a.sender_map, b.receiver_map, spec.state_probs);
  const double b_sends = role_success(b.sender_map, a.receiver_map, spec.state_probs);
  return 0.5 * spec.success_payoff * (a_sends + b_sends);
}

inline PairClass classify_payoff(double payoff, bool same, double success_payoff) {
  if (std::abs(payoff - success_payoff) <= kPayoffTolerance)
    return same ? PairClass::Homogeneous : PairClass::HybridComplement;
  if (std::abs(payoff) <= kPayoffTolerance) return PairClass::Failing;
  return PairClass::Partial;
}

inline PairClass classify_pair(const GameSpec& spec, const PureStrategy& a, const PureStrategy& b) {
  const double payoff = expected_payoff(spec, a, b);
  const bool same = a.sender_map == b.sender_map && a.receiver_map == b.receiver_map;
  return classify_payoff(payoff, same, spec.success_payoff);
}

// Dense, symmetric K x K table of expected payoffs, K = n^(2n).
class PayoffTable {
 public:
  PayoffTable(const GameSpec& spec, int max_states = kDefaultMaxStates,
              std::size_t max_entries = kDefaultMaxTableEntries)
      : spec_(spec), space_(spec.n, max_states) {
    spec_.validate();
    const std::size_t k = space_.size();
    if (k > max_entries / k)
      throw ResourceLimit("payoff table with " + std::to_string(k) + "^2 entries exceeds the limit of " +
                          std::to_string(max_entries));
    // success[sender_rank][receiver_rank]; every table entry is a sum of two.
    const std::size_t m = space_.role_map_count();
    std::vector<double> success(m * m);
    for (std::size_t s = 0; s < m; ++s)
      for (std::size_t r = 0; r < m; ++r)
        success[s * m + r] = role_success(space_.role_map(s), space_.role_map(r), spec_.state_probs);
    values_.resize(k * k);
    const double half = 0.5 * spec_.success_payoff;
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t si = i / m, ri = i % m;
      double* row = values_.data() + i * k;
      for (std::size_t j = 0; j < k; ++j) {
        const std::size_t sj = j / m, rj = j % m;
        row[j] = half * (success[si * m + rj] + success[sj * m + ri]);
      }
    }
  }

  const GameSpec& spec() const { return spec_; }
  const StrategySpace& space() const { return space_; }
  int states() const { return spec_.n; }
  std::size_t size() const { return space_.size(); }
  double success_payoff() const { return spec_.success_payoff; }

  double operator()(std::size_t i, std::size_t j) const { return values_[i * size() + j]; }
  std::span<const double> row(std::size_t i) const { return {values_.data() + i * size(), size()}; }
  std::span<const double> values() const { return values_; }

  bool is_success(std::size_t i, std::size_t j) const {
    return std::abs((*this)(i, j) - spec_.success_payoff) <= kPayoffTolerance;
  }
  PairClass classify(std::size_t i, std::size_t j) const {
    return classify_payoff((*this)(i, j), i == j, spec_.success_payoff);
  }

 private:
  GameSpec spec_;
  StrategySpace space_;
  std::vector<double> values_;
};

inline PayoffTable build_payoff_table(const GameSpec& spec, int max_states = kDefaultMaxStates) {
  return PayoffTable(spec, max_states);
}

struct SignalingSystemCount {
  std::uint64_t homogeneous = 0;
  std::uint64_t hybrid_pairs = 0;
  bool operator==(const SignalingSystemCount&) const = default;
};

// (n!, n!(n!-1)/2) in exact integer arithmetic.
inline SignalingSystemCount count_signaling_systems(int n) {
  if (n < 2) throw InvalidGame("game needs at least 2 states, got " + std::to_string(n));
  std::uint64_t fact = 1;
  for (int i = 2; i <= n; ++i)
    if (__builtin_mul_overflow(fact, static_cast<std::uint64_t>(i), &fact))
      throw ResourceLimit(std::to_string(n) + "! overflows 64 bits");
  // fact and fact - 1 have opposite parity, so halve the even one first.
  std::uint64_t a = fact, b = fact - 1;
  if (a % 2 == 0) a /= 2; else b /= 2;
  std::uint64_t pairs = 0;
  if (__builtin_mul_overflow(a, b, &pairs))
    throw ResourceLimit("hybrid pair count for n = " + std::to_string(n) + " overflows 64 bits");
  return {fact, pairs};
}

}  // namespace siggame
