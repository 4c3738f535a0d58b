#pragma once

// Experiment runner. An experiment is a grid of cells (one per sweep point)
// times a range of seed indices; every (cell, seed) job writes its own
// directory, and a manifest.json in the output root records the resolved
// configuration and the status of each job so interrupted runs can resume.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "siggame/analysis.hpp"
#include "siggame/config.hpp"
#include "siggame/diffusion.hpp"
#include "siggame/engine.hpp"
#include "siggame/snapshot_io.hpp"

#ifndef SIGGAME_VERSION
#define SIGGAME_VERSION "0.0.0"
#endif

namespace siggame {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline constexpr int kManifestVersion = 1;

// ---------------------------------------------------------------------------
// Small CSV helpers. Fields never contain commas, so no quoting is needed.

namespace csv {

inline std::string num(double v) { return detail::format_double(v); }
inline std::string num(std::size_t v) { return std::to_string(v); }

inline std::string row(std::initializer_list<std::string> fields) {
  std::string out;
  bool first = true;
  for (const auto& f : fields) {
    if (!first) out += ',';
    out += f;
    first = false;
  }
  return out + '\n';
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw IoError("missing CSV column '" + std::string(name) + "'");
  }
};

inline std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline Table parse(std::string_view text) {
  Table t;
  std::size_t pos = 0;
  bool header = true;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    auto fields = split_line(line);
    if (header) {
      t.header = std::move(fields);
      header = false;
    } else {
      if (fields.size() != t.header.size()) throw IoError("CSV row has the wrong number of fields");
      t.rows.push_back(std::move(fields));
    }
  }
  return t;
}

inline Table read(const fs::path& path) { return parse(read_file(path)); }

}  // namespace csv

inline void write_text_file(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write to " + path.string() + " failed");
}

// Write to a sibling temporary file, then rename over the target.
inline void write_file_atomic(const fs::path& path, std::string_view text) {
  fs::path tmp = path;
  tmp += ".tmp";
  write_text_file(tmp, text);
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot replace " + path.string() + ": " + ec.message());
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Wilson score interval for k successes in n trials.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

inline Interval wilson_interval(std::size_t k, std::size_t n, double z = 1.959963984540054) {
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half = z / denom * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

// ---------------------------------------------------------------------------
// Manifest

struct JobRecord {
  std::size_t cell = 0;
  std::size_t seed = 0;
  std::uint64_t master_seed = 0;
  std::string status = "pending";  // pending | done | failed
  std::vector<std::string> files;  // relative to the output root
  std::string error;

  std::string dir() const {
    char buf[64];
    std::snprintf(buf, sizeof buf, "cell_%03zu/seed_%04zu", cell, seed);
    return buf;
  }
};

struct Manifest {
  int version = kManifestVersion;
  std::string artifact_version = SIGGAME_VERSION;
  std::string kind;
  std::string config_digest;
  std::map<std::string, std::string> config;
  json cells = json::array();
  std::string created;
  std::string updated;
  std::vector<JobRecord> jobs;
  std::vector<std::string> aggregates;
  fs::path root;  // directory holding the manifest; not serialized

  json to_json() const {
    json j;
    j["format"] = "siggame-manifest";
    j["version"] = version;
    j["artifact_version"] = artifact_version;
    j["kind"] = kind;
    j["config_digest"] = config_digest;
    j["config"] = config;
    j["cells"] = cells;
    j["created"] = created;
    j["updated"] = updated;
    j["jobs"] = json::array();
    for (const auto& r : jobs) {
      json jr{{"cell", r.cell},     {"seed", r.seed},   {"master_seed", to_hex(r.master_seed)},
              {"status", r.status}, {"files", r.files}, {"dir", r.dir()}};
      if (!r.error.empty()) jr["error"] = r.error;
      j["jobs"].push_back(std::move(jr));
    }
    j["aggregates"] = aggregates;
    return j;
  }

  static Manifest from_json(const json& j) {
    if (j.value("format", "") != "siggame-manifest") throw IoError("not a siggame manifest");
    Manifest m;
    m.version = j.at("version").get<int>();
    if (m.version != kManifestVersion) throw IoError("unsupported manifest version " + std::to_string(m.version));
    m.artifact_version = j.value("artifact_version", "");
    m.kind = j.at("kind").get<std::string>();
    m.config_digest = j.at("config_digest").get<std::string>();
    m.config = j.at("config").get<std::map<std::string, std::string>>();
    m.cells = j.at("cells");
    m.created = j.value("created", "");
    m.updated = j.value("updated", "");
    for (const auto& jr : j.at("jobs")) {
      JobRecord r;
      r.cell = jr.at("cell").get<std::size_t>();
      r.seed = jr.at("seed").get<std::size_t>();
      r.master_seed = detail::parse_u64(jr.at("master_seed").get<std::string>(), 16);
      r.status = jr.at("status").get<std::string>();
      r.files = jr.at("files").get<std::vector<std::string>>();
      r.error = jr.value("error", "");
      m.jobs.push_back(std::move(r));
    }
    m.aggregates = j.value("aggregates", std::vector<std::string>{});
    return m;
  }

  void save() const { write_file_atomic(root / "manifest.json", to_json().dump(2) + "\n"); }

  bool job_complete(const JobRecord& r) const {
    if (r.status != "done") return false;
    return std::all_of(r.files.begin(), r.files.end(), [&](const std::string& f) { return fs::exists(root / f); });
  }
};

// Accepts either a manifest file or a directory containing manifest.json.
inline Manifest load_manifest(const fs::path& path) {
  const fs::path file = fs::is_directory(path) ? path / "manifest.json" : path;
  Manifest m;
  try {
    m = Manifest::from_json(json::parse(read_file(file)));
  } catch (const json::exception& e) {
    throw IoError(file.string() + ": " + e.what());
  }
  m.root = file.parent_path();
  return m;
}

// ---------------------------------------------------------------------------
// Single job

struct JobContext {
  const ExperimentConfig* config = nullptr;
  SimParams params;  // cell parameters with the job's master seed and init scheme
  std::shared_ptr<const PayoffTable> table;
};

namespace harness_detail {

inline std::string probs_string(const std::vector<double>& p) {
  std::string s;
  for (std::size_t i = 0; i < p.size(); ++i) s += (i ? " " : "") + csv::num(p[i]);
  return s;
}

inline json cell_json(const Cell& c) {
  const auto& p = c.params;
  return json{{"index", c.index},
              {"N", p.N},
              {"T", p.T},
              {"delta", p.learning.delta},
              {"epsilon", p.learning.epsilon},
              {"NLS", p.learning.nls},
              {"SLS", p.learning.sls},
              {"state_probs", probs_string(p.game.state_probs)}};
}

struct Summary {
  std::size_t groups = 0;
  std::size_t signaling_groups = 0;  // homogeneous or hybrid, at least min_group_size agents
  bool hybrid_present = false;
  std::size_t homogeneous_types = 0;
  std::size_t system_types = 0;
  bool all_three = false;
};

inline Summary summarize(const GroupPartition& part, std::size_t min_size) {
  Summary s;
  s.groups = part.groups.size();
  std::set<GroupLabel> systems;
  std::set<std::size_t> homogeneous;
  for (std::size_t g = 0; g < part.groups.size(); ++g) {
    const auto& l = part.labels[g];
    if (part.groups[g].size() < min_size) continue;
    if (l.type == GroupType::Homogeneous) {
      homogeneous.insert(l.first);
    } else if (l.type == GroupType::Hybrid) {
      s.hybrid_present = true;
    } else {
      continue;
    }
    ++s.signaling_groups;
    systems.insert(l);
  }
  s.homogeneous_types = homogeneous.size();
  s.system_types = systems.size();
  s.all_three = s.hybrid_present && s.homogeneous_types >= 2;
  return s;
}

inline const std::string& summary_header() {
  static const std::string h =
      "seed,master_seed,rounds,final_mean_payoff,groups,signaling_groups,hybrid_present,homogeneous_types,"
      "system_types,all_three,hybrid_share,homogeneous_share,pooling_share,mixed_share,pooling_primary_share,"
      "mean_pref_share,mean_comp_share,newcomer_group_type,newcomer_group_size,newcomer_primary\n";
  return h;
}

}  // namespace harness_detail

// Runs one job and writes its files into root/<job dir>. Returns the written
// file names relative to root.
inline std::vector<std::string> run_job(const JobContext& ctx, const JobRecord& job, const fs::path& root) {
  using namespace harness_detail;
  const ExperimentConfig& cfg = *ctx.config;
  const PayoffTable& table = *ctx.table;
  const StrategySpace& space = table.space();
  const std::string rel = job.dir();
  const fs::path dir = root / rel;
  fs::create_directories(dir);
  std::vector<std::string> files;
  auto add = [&](const std::string& name) { files.push_back(rel + "/" + name); };

  SimParams params = ctx.params;
  std::size_t newcomer = SIZE_MAX;
  if (cfg.kind == ExperimentKind::Naive) {
    // Pre-run the stylized population for T rounds (often zero), then add the newcomer.
    SimParams pre = params;
    pre.snapshot_schedule.clear();
    auto established = run_simulation(pre, table).final;
    auto setup = inject_naive_agent(established, params, cfg.naive);
    params = setup.params;
    newcomer = setup.newcomer;
  }

  auto sink = [&](const PopulationSnapshot& s) {
    const std::string name = "snap_" + std::to_string(s.round) + ".snap";
    write_snapshot(dir / name, s, cfg.snapshot_encoding);
    add(name);
  };
  auto result = run_simulation(params, table, sink);
  write_snapshot(dir / "final.snap", result.final, cfg.snapshot_encoding);
  add("final.snap");

  {
    std::string traj = "round,mean_payoff\n", adopt = "round,strategy,label,count\n";
    for (const auto& p : result.trajectory) {
      traj += csv::row({std::to_string(p.round), csv::num(p.mean_payoff)});
      for (std::size_t s = 0; s < p.primary_counts.size(); ++s)
        if (p.primary_counts[s])
          adopt += csv::row({std::to_string(p.round), csv::num(s), space.label(s), std::to_string(p.primary_counts[s])});
    }
    write_text_file(dir / "trajectory.csv", traj);
    write_text_file(dir / "adoption.csv", adopt);
    add("trajectory.csv");
    add("adoption.csv");
  }

  const auto analysis = analyze_snapshot(result.final, table, cfg.threshold, cfg.purity);
  const auto& part = analysis.partition;
  const auto& st = analysis.stats;
  const std::string seed_s = std::to_string(job.seed);
  {
    std::string groups =
        "seed,group_id,type,label,size,bipartite,mi_bits,mi_signal_state,mi_mixture,mean_pref_share,"
        "mean_comp_share\n";
    for (const auto& g : st.groups)
      groups += csv::row({seed_s, csv::num(g.id), std::string(to_string(g.label.type)), label_name(g.label, space),
                          csv::num(g.size), g.bipartite ? "1" : "0", csv::num(g.mi.signal_action),
                          csv::num(g.mi.signal_state), csv::num(g.mi.signal_action_mixture),
                          csv::num(g.mean_preferred_share), csv::num(g.mean_complementary_share)});
    write_text_file(dir / "groups.csv", groups);
    add("groups.csv");

    std::string agents = "agent,group,primary,primary_label,preferred_share,complementary_share,top_partner,top_partner_prob\n";
    for (const auto& a : st.agents)
      agents += csv::row({csv::num(a.agent), csv::num(a.group), csv::num(a.primary), space.label(a.primary),
                          csv::num(a.preferred_share), csv::num(a.complementary_share), csv::num(a.top_partner),
                          csv::num(a.top_partner_prob)});
    write_text_file(dir / "agents.csv", agents);
    add("agents.csv");
  }

  const auto sum = summarize(part, cfg.min_group_size);
  std::string nc_type, nc_size, nc_primary;
  if (newcomer != SIZE_MAX) {
    const auto g = part.group_of[newcomer];
    nc_type = to_string(part.labels[g].type);
    nc_size = csv::num(part.groups[g].size());
    nc_primary = space.label(part.primaries[newcomer]);
    std::string naive = "seed,newcomer,group_id,group_type,group_label,group_size,primary\n";
    naive += csv::row({seed_s, csv::num(newcomer), csv::num(g), nc_type, label_name(part.labels[g], space), nc_size,
                       nc_primary});
    write_text_file(dir / "naive.csv", naive);
    add("naive.csv");
  }
  {
    const double final_payoff = result.trajectory.empty() ? 0.0 : result.trajectory.back().mean_payoff;
    std::string summary = summary_header();
    summary += csv::row({seed_s, to_hex(job.master_seed), std::to_string(result.final.round), csv::num(final_payoff),
                         csv::num(sum.groups), csv::num(sum.signaling_groups), sum.hybrid_present ? "1" : "0",
                         csv::num(sum.homogeneous_types), csv::num(sum.system_types), sum.all_three ? "1" : "0",
                         csv::num(st.agent_shares.hybrid), csv::num(st.agent_shares.homogeneous),
                         csv::num(st.agent_shares.pooling), csv::num(st.agent_shares.mixed),
                         csv::num(st.pooling_primary_share), csv::num(st.mean_preferred_share),
                         csv::num(st.mean_complementary_share), nc_type, nc_size, nc_primary});
    write_text_file(dir / "summary.csv", summary);
    add("summary.csv");
  }

  if (cfg.kind == ExperimentKind::Diffusion) {
    std::string out = "seed,group_id,group_type,group_size,trial,step,fraction_infected\n";
    for (std::size_t g = 0; g < part.groups.size(); ++g) {
      if (part.groups[g].size() < std::max<std::size_t>(cfg.min_group_size, 2)) continue;
      DiffusionConfig dc;
      dc.group = part.groups[g];
      dc.trials = cfg.diffusion_trials;
      dc.max_steps = cfg.diffusion_max_steps;
      dc.epsilon = cfg.diffusion_epsilon.value_or(params.learning.epsilon);
      dc.seed = derive_stream(job.master_seed, g, 0xd1f)();
      const auto curve = run_diffusion(result.final, table, dc);
      const std::string type(to_string(part.labels[g].type));
      for (std::size_t t = 0; t < curve.traces.size(); ++t)
        for (std::size_t s = 0; s < curve.traces[t].size(); ++s)
          out += csv::row({seed_s, csv::num(g), type, csv::num(part.groups[g].size()), csv::num(t), csv::num(s),
                           csv::num(curve.traces[t][s])});
    }
    write_text_file(dir / "diffusion.csv", out);
    add("diffusion.csv");
  }
  return files;
}

// ---------------------------------------------------------------------------
// Aggregation over one or more manifests

struct AggregateTables {
  std::map<std::string, std::string> files;  // file name -> CSV text
};

namespace harness_detail {

struct CellKey {
  std::string config;
  std::size_t cell;
  auto operator<=>(const CellKey&) const = default;
};

struct CellData {
  std::string kind;
  std::string seed_groups;
  json info;
  // (seed index, master seed) -> rows
  std::map<std::pair<std::size_t, std::uint64_t>, std::vector<std::string>> summary;
  std::vector<std::string> summary_header;
  std::map<std::pair<std::size_t, std::uint64_t>, csv::Table> groups, naive, diffusion;
};

inline double to_num(const std::string& s) { return s.empty() ? 0.0 : detail::parse_double(s); }

inline std::string json_scalar(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_float()) return csv::num(v.get<double>());
  return v.dump();
}

}  // namespace harness_detail

inline AggregateTables aggregate(const std::vector<Manifest>& manifests) {
  using namespace harness_detail;
  std::map<CellKey, CellData> cells;
  std::vector<std::string> missing;
  std::size_t completed = 0;
  for (const auto& m : manifests) {
    for (const auto& jc : m.cells) {
      auto& cd = cells[CellKey{m.config_digest, jc.at("index").get<std::size_t>()}];
      cd.kind = m.kind;
      auto sg = m.config.find("seed_groups");
      cd.seed_groups = sg == m.config.end() ? "" : sg->second;
      cd.info = jc;
    }
    for (const auto& job : m.jobs) {
      if (job.status != "done") continue;
      bool complete = true;
      for (const auto& f : job.files)
        if (!fs::exists(m.root / f)) {
          missing.push_back((m.root / f).string());
          complete = false;
        }
      if (!complete) continue;
      ++completed;
      auto it = cells.find(CellKey{m.config_digest, job.cell});
      if (it == cells.end()) throw IoError("manifest job refers to unknown cell " + std::to_string(job.cell));
      auto& cd = it->second;
      const auto key = std::make_pair(job.seed, job.master_seed);
      const fs::path dir = m.root / job.dir();
      auto summary = csv::read(dir / "summary.csv");
      if (summary.rows.size() != 1) throw IoError((dir / "summary.csv").string() + " must have one row");
      cd.summary_header = summary.header;
      cd.summary[key] = summary.rows[0];
      cd.groups[key] = csv::read(dir / "groups.csv");
      if (fs::exists(dir / "naive.csv")) cd.naive[key] = csv::read(dir / "naive.csv");
      if (fs::exists(dir / "diffusion.csv")) cd.diffusion[key] = csv::read(dir / "diffusion.csv");
    }
  }

  if (!missing.empty()) {
    std::string msg = "missing result files:";
    for (const auto& f : missing) msg += "\n  " + f;
    throw IoError(msg);
  }
  if (completed == 0) throw InvalidArgument("nothing to aggregate: no completed jobs");

  std::string seeds, cells_csv, sizes, contingency, naive, diffusion, diffusion_mean;
  bool have_contingency = false, have_naive = false, have_diffusion = false;
  for (const auto& [key, cd] : cells) {
    const std::string prefix = key.config + "," + std::to_string(key.cell) + ",";
    if (seeds.empty() && !cd.summary_header.empty()) {
      seeds = "config,cell";
      for (const auto& h : cd.summary_header) seeds += "," + h;
      seeds += "\n";
    }
    const std::size_t n = cd.summary.size();
    std::size_t hybrid = 0, all_three = 0, second = 0;
    double sh = 0, shom = 0, spool = 0, smix = 0, sprim = 0, spref = 0, scomp = 0, sgroups = 0, spay = 0;
    std::map<std::pair<std::string, std::size_t>, std::size_t> size_counts;
    for (const auto& [sk, row] : cd.summary) {
      std::string line = prefix;
      for (std::size_t i = 0; i < row.size(); ++i) line += (i ? "," : "") + row[i];
      seeds += line + "\n";
      auto col = [&](std::string_view name) { return row[csv::Table{cd.summary_header, {}}.column(name)]; };
      hybrid += col("hybrid_present") == "1";
      all_three += col("all_three") == "1";
      second += to_num(col("system_types")) >= 2.0;
      sh += to_num(col("hybrid_share"));
      shom += to_num(col("homogeneous_share"));
      spool += to_num(col("pooling_share"));
      smix += to_num(col("mixed_share"));
      sprim += to_num(col("pooling_primary_share"));
      spref += to_num(col("mean_pref_share"));
      scomp += to_num(col("mean_comp_share"));
      sgroups += to_num(col("groups"));
      spay += to_num(col("final_mean_payoff"));
      const auto& g = cd.groups.at(sk);
      const auto tcol = g.column("type"), scol = g.column("size");
      for (const auto& r : g.rows) ++size_counts[{r[tcol], static_cast<std::size_t>(to_num(r[scol]))}];
    }
    const double inv = n ? 1.0 / static_cast<double>(n) : 0.0;
    auto frac = [&](std::size_t k) {
      const auto ci = wilson_interval(k, n);
      return csv::num(k) + "," + csv::num(static_cast<double>(k) * inv) + "," + csv::num(ci.lo) + "," + csv::num(ci.hi);
    };
    const auto& info = cd.info;
    cells_csv += prefix + cd.kind + "," + json_scalar(info.at("N")) + "," + json_scalar(info.at("T")) + "," +
                 json_scalar(info.at("delta")) + "," + json_scalar(info.at("epsilon")) + "," +
                 json_scalar(info.at("NLS")) + "," + json_scalar(info.at("SLS")) + "," +
                 json_scalar(info.at("state_probs")) + "," + cd.seed_groups + "," + csv::num(n) + "," +
                 frac(hybrid) + "," + frac(all_three) + "," + frac(second) + "," + csv::num(sh * inv) + "," +
                 csv::num(shom * inv) + "," + csv::num(spool * inv) + "," + csv::num(smix * inv) + "," +
                 csv::num(sprim * inv) + "," + csv::num(spref * inv) + "," + csv::num(scomp * inv) + "," +
                 csv::num(sgroups * inv) + "," + csv::num(spay * inv) + "\n";
    for (const auto& [ts, count] : size_counts)
      sizes += prefix + ts.first + "," + csv::num(ts.second) + "," + csv::num(count) + "\n";

    if (cd.kind == "seeded") {
      have_contingency = true;
      contingency += prefix + cd.seed_groups + "," + csv::num(n) + "," + csv::num(second) + "," + csv::num(n - second) + "\n";
    }
    if (!cd.naive.empty()) {
      have_naive = true;
      std::map<std::string, std::size_t> joined;
      std::size_t joined_any = 0;
      for (const auto& [sk, t] : cd.naive) {
        const auto tcol = t.column("group_type"), scol = t.column("group_size");
        for (const auto& r : t.rows) {
          if (to_num(r[scol]) < 2.0) continue;
          ++joined_any;
          ++joined[r[tcol]];
        }
      }
      naive += prefix + csv::num(cd.naive.size()) + "," + csv::num(joined_any);
      for (auto t : {"homogeneous", "hybrid", "pooling", "mixed"}) naive += "," + csv::num(joined[t]);
      naive += "\n";
    }
    if (!cd.diffusion.empty()) {
      have_diffusion = true;
      // Mean infected fraction per (group type, step); shorter traces are
      // padded with their final value.
      std::map<std::string, std::vector<std::vector<double>>> traces;
      for (const auto& [sk, t] : cd.diffusion) {
        const auto gcol = t.column("group_id"), tcol = t.column("group_type"), trcol = t.column("trial"),
                   stcol = t.column("step"), fcol = t.column("fraction_infected");
        std::map<std::pair<std::string, std::string>, std::vector<double>> by_trial;
        std::map<std::pair<std::string, std::string>, std::string> type_of;
        for (const auto& r : t.rows) {
          std::string line = prefix;
          for (std::size_t i = 0; i < r.size(); ++i) line += (i ? "," : "") + r[i];
          diffusion += line + "\n";
          const auto k = std::make_pair(r[gcol], r[trcol]);
          auto& v = by_trial[k];
          if (static_cast<std::size_t>(to_num(r[stcol])) != v.size()) throw IoError("diffusion steps out of order");
          v.push_back(to_num(r[fcol]));
          type_of[k] = r[tcol];
        }
        for (auto& [k, v] : by_trial) traces[type_of[k]].push_back(std::move(v));
      }
      for (const auto& [type, list] : traces) {
        std::size_t len = 0;
        for (const auto& v : list) len = std::max(len, v.size());
        for (std::size_t s = 0; s < len; ++s) {
          double total = 0.0;
          for (const auto& v : list) total += s < v.size() ? v[s] : v.back();
          diffusion_mean += prefix + type + "," + csv::num(s) + "," + csv::num(total / static_cast<double>(list.size())) +
                            "," + csv::num(list.size()) + "\n";
        }
      }
    }
  }

  AggregateTables out;
  out.files["seeds.csv"] = seeds.empty() ? "config,cell\n" : seeds;
  out.files["cells.csv"] =
      "config,cell,kind,N,T,delta,epsilon,NLS,SLS,state_probs,seed_groups,seeds,hybrid_present,hybrid_frac,"
      "hybrid_ci_lo,hybrid_ci_hi,all_three,all_three_frac,all_three_ci_lo,all_three_ci_hi,second_type,"
      "second_type_frac,second_type_ci_lo,second_type_ci_hi,mean_hybrid_share,mean_homogeneous_share,"
      "mean_pooling_share,mean_mixed_share,mean_pooling_primary_share,mean_pref_share,mean_comp_share,mean_groups,"
      "mean_final_payoff\n" +
      cells_csv;
  out.files["group_sizes.csv"] = "config,cell,type,size,count\n" + sizes;
  if (have_contingency)
    out.files["contingency.csv"] = "config,cell,seed_groups,seeds,second_group,no_second_group\n" + contingency;
  if (have_naive)
    out.files["naive_summary.csv"] =
        "config,cell,seeds,joined,joined_homogeneous,joined_hybrid,joined_pooling,joined_mixed\n" + naive;
  if (have_diffusion) {
    out.files["diffusion_all.csv"] =
        "config,cell,seed,group_id,group_type,group_size,trial,step,fraction_infected\n" + diffusion;
    out.files["diffusion_mean.csv"] = "config,cell,group_type,step,mean_fraction,trials\n" + diffusion_mean;
  }
  return out;
}

inline std::vector<std::string> write_aggregates(const AggregateTables& tables, const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<std::string> names;
  for (const auto& [name, text] : tables.files) {
    write_file_atomic(dir / name, text);
    names.push_back(name);
  }
  return names;
}

// ---------------------------------------------------------------------------
// Experiment driver

struct RunOptions {
  std::size_t threads = 0;  // 0: hardware concurrency
  bool resume = false;
  std::function<void(const std::string&)> log = {};
};

struct RunReport {
  fs::path out;
  std::size_t executed = 0;
  std::size_t skipped = 0;
  std::size_t failed = 0;
  Manifest manifest;
};

// Output root: the config's "out" key, else $SIGGAME_OUT, else ./siggame-out.
inline fs::path resolve_output_dir(const ExperimentConfig& config) {
  if (!config.out.empty()) return config.out;
  if (const char* env = std::getenv("SIGGAME_OUT"); env && *env) return env;
  return "siggame-out";
}

inline RunReport run_experiment(const ExperimentConfig& config, const RunOptions& options = {}) {
  using namespace harness_detail;
  RunReport report;
  report.out = resolve_output_dir(config);
  fs::create_directories(report.out);
  auto log = [&](const std::string& msg) {
    if (options.log) options.log(msg);
  };

  const auto cells = config.cells();
  Manifest m;
  m.root = report.out;
  m.kind = std::string(to_string(config.kind));
  m.config_digest = to_hex(config.digest());
  m.config = config.entries;
  for (const auto& c : cells) m.cells.push_back(cell_json(c));
  m.created = utc_timestamp();

  Manifest previous;
  bool have_previous = false;
  if (options.resume && fs::exists(report.out / "manifest.json")) {
    previous = load_manifest(report.out);
    if (previous.config_digest != m.config_digest)
      throw InvalidConfig("configuration differs from the one recorded in " + (report.out / "manifest.json").string());
    have_previous = true;
    m.created = previous.created;
  }

  for (const auto& c : cells)
    for (std::size_t s = config.first_seed; s < config.first_seed + config.seeds; ++s) {
      JobRecord r;
      r.cell = c.index;
      r.seed = s;
      r.master_seed = config.job_seed(c.index, s);
      if (have_previous) {
        for (const auto& p : previous.jobs)
          if (p.cell == r.cell && p.seed == r.seed && p.master_seed == r.master_seed && previous.job_complete(p)) {
            r = p;
            break;
          }
      }
      m.jobs.push_back(std::move(r));
    }

  // Shared inputs: one payoff table per distinct game, the optional start snapshot.
  std::vector<std::shared_ptr<const PayoffTable>> tables(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    for (std::size_t j = 0; j < i && !tables[i]; ++j)
      if (cells[j].params.game == cells[i].params.game) tables[i] = tables[j];
    if (!tables[i]) tables[i] = std::make_shared<const PayoffTable>(cells[i].params.game, config.max_states);
  }
  std::shared_ptr<const PopulationSnapshot> start;
  if (!config.init_snapshot.empty()) start = std::make_shared<const PopulationSnapshot>(read_snapshot(config.init_snapshot));

  std::vector<JobContext> contexts(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    auto& ctx = contexts[i];
    ctx.config = &config;
    ctx.table = tables[i];
    ctx.params = cells[i].params;
    if (start) {
      ctx.params.init = SnapshotInit{start};
    } else if (config.kind == ExperimentKind::Seeded || config.kind == ExperimentKind::Naive) {
      ctx.params.init = SeededInit{parse_seed_groups(config.seed_groups, tables[i]->space()), config.style};
    }
    ctx.params.validate();
  }

  std::vector<std::size_t> todo;
  for (std::size_t i = 0; i < m.jobs.size(); ++i) {
    if (m.jobs[i].status == "done") {
      ++report.skipped;
    } else {
      m.jobs[i].status = "pending";
      m.jobs[i].files.clear();
      m.jobs[i].error.clear();
      todo.push_back(i);
    }
  }
  m.updated = utc_timestamp();
  m.save();
  log("jobs: " + std::to_string(m.jobs.size()) + " total, " + std::to_string(todo.size()) + " to run, " +
      std::to_string(report.skipped) + " already done");

  std::mutex mu;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    while (true) {
      const std::size_t t = next.fetch_add(1);
      if (t >= todo.size()) return;
      JobRecord job;
      {
        std::lock_guard lock(mu);
        job = m.jobs[todo[t]];
      }
      auto ctx = contexts[job.cell];
      ctx.params.master_seed = job.master_seed;
      try {
        job.files = run_job(ctx, job, report.out);
        job.status = "done";
      } catch (const std::exception& e) {
        job.status = "failed";
        job.error = e.what();
      }
      std::lock_guard lock(mu);
      m.jobs[todo[t]] = job;
      if (job.status == "done") {
        ++report.executed;
        log("done " + job.dir());
      } else {
        ++report.failed;
        log("FAILED " + job.dir() + ": " + job.error);
      }
      m.updated = utc_timestamp();
      m.save();
    }
  };
  std::size_t threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(todo.size(), 1));
  {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
  }

  if (report.executed + report.skipped > 0) m.aggregates = write_aggregates(aggregate({m}), report.out);
  m.updated = utc_timestamp();
  m.save();
  report.manifest = std::move(m);
  return report;
}

}  // namespace siggame
