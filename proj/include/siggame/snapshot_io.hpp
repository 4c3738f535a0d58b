#pragma once

// Snapshot serialization. Two encodings of the same schema (version 1):
//
// Binary, all integers and floats little-endian:
//   char[8]  magic "SGSNAP01"
//   u32      version (1)
//   u32      n, number of states
//   u64      N, agents
//   u64      K, strategies
//   u64      round
//   u64      params digest
//   f64      success payoff
//   f64[n]   state probabilities
//   N times: f64[K] strategy weights (canonical strategy order), f64[N] link weights
//
// Text: line oriented, "siggame-snapshot 1" header, then key/value lines and
// one "agent i" block per agent with "strategy ..." and "links ..." lines.
// Floats are written in shortest round-trip form, so both encodings are exact.

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "siggame/digest.hpp"
#include "siggame/engine.hpp"
#include "siggame/error.hpp"

namespace siggame {

inline constexpr char kSnapshotMagic[8] = {'S', 'G', 'S', 'N', 'A', 'P', '0', '1'};
inline constexpr std::uint32_t kSnapshotVersion = 1;

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}
  std::uint64_t u64() { return take(8); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(take(4)); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string_view raw(std::size_t n) {
    need(n);
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  bool done() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw IoError("snapshot is truncated");
  }
  std::uint64_t take(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(i)]))
           << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw IoError("bad number '" + std::string(s) + "' in snapshot");
  return v;
}

inline std::uint64_t parse_u64(std::string_view s, int base = 10) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw IoError("bad integer '" + std::string(s) + "' in snapshot");
  return v;
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace detail

inline std::string encode_snapshot_binary(const PopulationSnapshot& snap) {
  snap.validate();
  const std::size_t n = snap.size(), k = snap.strategies();
  std::string out;
  out.reserve(64 + 8 * snap.game.state_probs.size() + 8 * n * (n + k));
  out.append(kSnapshotMagic, 8);
  detail::put_u32(out, kSnapshotVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(snap.game.n));
  detail::put_u64(out, n);
  detail::put_u64(out, k);
  detail::put_u64(out, snap.round);
  detail::put_u64(out, snap.params_digest);
  detail::put_f64(out, snap.game.success_payoff);
  for (double p : snap.game.state_probs) detail::put_f64(out, p);
  for (const auto& a : snap.agents) {
    for (double w : a.strategy_weights) detail::put_f64(out, w);
    for (double w : a.link_weights) detail::put_f64(out, w);
  }
  return out;
}

inline PopulationSnapshot decode_snapshot_binary(std::string_view bytes) {
  detail::ByteReader in(bytes);
  if (in.raw(8) != std::string_view(kSnapshotMagic, 8)) throw IoError("not a binary snapshot");
  if (auto v = in.u32(); v != kSnapshotVersion) throw IoError("unsupported snapshot version " + std::to_string(v));
  PopulationSnapshot snap;
  snap.game.n = static_cast<int>(in.u32());
  const std::uint64_t n = in.u64(), k = in.u64();
  snap.round = in.u64();
  snap.params_digest = in.u64();
  snap.game.success_payoff = in.f64();
  if (snap.game.n < 2 || snap.game.n > 16) throw IoError("snapshot has an implausible state count");
  snap.game.state_probs.resize(static_cast<std::size_t>(snap.game.n));
  for (auto& p : snap.game.state_probs) p = in.f64();
  if (n == 0 || k == 0 || in.remaining() / 8 / n < n + k || in.remaining() != 8 * n * (n + k))
    throw IoError("snapshot size does not match its header");
  snap.agents.resize(n);
  for (auto& a : snap.agents) {
    a.strategy_weights.resize(k);
    a.link_weights.resize(n);
    for (auto& w : a.strategy_weights) w = in.f64();
    for (auto& w : a.link_weights) w = in.f64();
  }
  try {
    snap.validate();
  } catch (const Error& e) {
    throw IoError(std::string("invalid snapshot: ") + e.what());
  }
  return snap;
}

inline std::string encode_snapshot_text(const PopulationSnapshot& snap) {
  snap.validate();
  std::string out = "siggame-snapshot 1\n";
  out += "states " + std::to_string(snap.game.n) + "\n";
  out += "agents " + std::to_string(snap.size()) + "\n";
  out += "strategies " + std::to_string(snap.strategies()) + "\n";
  out += "round " + std::to_string(snap.round) + "\n";
  out += "digest " + to_hex(snap.params_digest) + "\n";
  out += "success_payoff " + detail::format_double(snap.game.success_payoff) + "\n";
  out += "state_probs";
  for (double p : snap.game.state_probs) out += " " + detail::format_double(p);
  out += "\n";
  for (std::size_t i = 0; i < snap.size(); ++i) {
    out += "agent " + std::to_string(i) + "\nstrategy";
    for (double w : snap.agents[i].strategy_weights) out += " " + detail::format_double(w);
    out += "\nlinks";
    for (double w : snap.agents[i].link_weights) out += " " + detail::format_double(w);
    out += "\n";
  }
  return out;
}

inline PopulationSnapshot decode_snapshot_text(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  auto next = [&](std::string_view key) {
    while (std::getline(in, line)) {
      auto tok = detail::split_ws(line);
      if (tok.empty()) continue;
      if (tok[0] != key) throw IoError("expected '" + std::string(key) + "' in text snapshot, got '" +
                                       std::string(tok[0]) + "'");
      return std::vector<std::string>(tok.begin() + 1, tok.end());
    }
    throw IoError("text snapshot ends before '" + std::string(key) + "'");
  };
  auto single = [&](std::string_view key) {
    auto v = next(key);
    if (v.size() != 1) throw IoError("'" + std::string(key) + "' takes one value");
    return v[0];
  };
  if (auto v = next("siggame-snapshot"); v.size() != 1 || v[0] != "1")
    throw IoError("unsupported text snapshot version");
  PopulationSnapshot snap;
  snap.game.n = static_cast<int>(detail::parse_u64(single("states")));
  const auto n = detail::parse_u64(single("agents"));
  const auto k = detail::parse_u64(single("strategies"));
  snap.round = detail::parse_u64(single("round"));
  snap.params_digest = detail::parse_u64(single("digest"), 16);
  snap.game.success_payoff = detail::parse_double(single("success_payoff"));
  snap.game.state_probs.clear();
  for (const auto& p : next("state_probs")) snap.game.state_probs.push_back(detail::parse_double(p));
  snap.agents.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (detail::parse_u64(single("agent")) != i) throw IoError("text snapshot agents out of order");
    auto s = next("strategy");
    auto l = next("links");
    if (s.size() != k || l.size() != n) throw IoError("text snapshot agent " + std::to_string(i) + " has wrong length");
    for (const auto& v : s) snap.agents[i].strategy_weights.push_back(detail::parse_double(v));
    for (const auto& v : l) snap.agents[i].link_weights.push_back(detail::parse_double(v));
  }
  try {
    snap.validate();
  } catch (const Error& e) {
    throw IoError(std::string("invalid snapshot: ") + e.what());
  }
  return snap;
}

// Detects the encoding from the leading bytes.
inline PopulationSnapshot decode_snapshot(std::string_view bytes) {
  if (bytes.size() >= 8 && bytes.substr(0, 8) == std::string_view(kSnapshotMagic, 8))
    return decode_snapshot_binary(bytes);
  return decode_snapshot_text(bytes);
}

enum class SnapshotEncoding { Binary, Text };

inline void write_snapshot(const std::filesystem::path& path, const PopulationSnapshot& snap,
                           SnapshotEncoding encoding = SnapshotEncoding::Binary) {
  const std::string bytes =
      encoding == SnapshotEncoding::Binary ? encode_snapshot_binary(snap) : encode_snapshot_text(snap);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write to " + path.string() + " failed");
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline PopulationSnapshot read_snapshot(const std::filesystem::path& path) {
  try {
    return decode_snapshot(read_file(path));
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

}  // namespace siggame
