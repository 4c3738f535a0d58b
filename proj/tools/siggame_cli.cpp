// siggame command line: run experiments, analyze snapshots, aggregate runs.

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "siggame/analysis.hpp"
#include "siggame/config.hpp"
#include "siggame/diffusion.hpp"
#include "siggame/harness.hpp"
#include "siggame/snapshot_io.hpp"

namespace {

using namespace siggame;

struct RunArgs {
  std::string config;
  std::size_t seeds = 0;
  std::string out;
  std::size_t threads = 0;
  bool resume = false;
  std::string snapshot_at;
  std::vector<std::string> set;
  bool quiet = false;
};

void add_run_options(CLI::App* cmd, RunArgs& a) {
  cmd->add_option("-c,--config", a.config, "experiment config file (key = value lines)")->required();
  cmd->add_option("--seeds", a.seeds, "number of seeds per cell (overrides the config)");
  cmd->add_option("-o,--out", a.out, "output directory (default: config 'out', then $SIGGAME_OUT)");
  cmd->add_option("-j,--threads", a.threads, "worker threads (default: hardware concurrency)");
  cmd->add_flag("--resume", a.resume, "skip jobs already completed in the output directory");
  cmd->add_option("--snapshot-at", a.snapshot_at, "comma-separated rounds at which to save snapshots");
  cmd->add_option("--set", a.set, "override a config key, e.g. --set NLS=10")->take_all();
  cmd->add_flag("-q,--quiet", a.quiet, "only print the final report");
}

int run_command(const RunArgs& a, std::optional<ExperimentKind> forced) {
  auto entries = parse_config_entries(read_file(a.config));
  if (forced) entries["kind"] = std::string(to_string(*forced));
  if (a.seeds) entries["seeds"] = std::to_string(a.seeds);
  if (!a.out.empty()) entries["out"] = a.out;
  if (!a.snapshot_at.empty()) entries["snapshot_at"] = a.snapshot_at;
  for (const auto& kv : a.set) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw InvalidConfig("--set expects key=value, got '" + kv + "'");
    entries[config_detail::trim(kv.substr(0, eq))] = config_detail::trim(kv.substr(eq + 1));
  }
  const auto config = config_from_entries(std::move(entries));

  RunOptions opts;
  opts.threads = a.threads;
  opts.resume = a.resume;
  if (!a.quiet) opts.log = [](const std::string& msg) { std::cerr << msg << '\n'; };
  const auto report = run_experiment(config, opts);
  std::cout << "output: " << report.out.string() << "\n"
            << "executed " << report.executed << " job(s), skipped " << report.skipped << ", failed "
            << report.failed << "\n";
  return report.failed ? 1 : 0;
}

int analyze_command(const std::string& path, double threshold, double purity, const std::string& out) {
  const auto snap = read_snapshot(path);
  const PayoffTable table(snap.game);
  const auto a = analyze_snapshot(snap, table, threshold, purity);
  const auto& space = table.space();
  std::string groups = "group_id,type,label,size,bipartite,mi_bits,mi_signal_state,mi_mixture,mean_pref_share,mean_comp_share\n";
  for (const auto& g : a.stats.groups)
    groups += csv::row({csv::num(g.id), std::string(to_string(g.label.type)), label_name(g.label, space),
                        csv::num(g.size), g.bipartite ? "1" : "0", csv::num(g.mi.signal_action),
                        csv::num(g.mi.signal_state), csv::num(g.mi.signal_action_mixture),
                        csv::num(g.mean_preferred_share), csv::num(g.mean_complementary_share)});
  if (out.empty()) {
    std::cout << groups;
  } else {
    std::string agents = "agent,group,primary,primary_label,preferred_share,complementary_share,top_partner,top_partner_prob\n";
    for (const auto& s : a.stats.agents)
      agents += csv::row({csv::num(s.agent), csv::num(s.group), csv::num(s.primary), space.label(s.primary),
                          csv::num(s.preferred_share), csv::num(s.complementary_share), csv::num(s.top_partner),
                          csv::num(s.top_partner_prob)});
    fs::create_directories(out);
    write_text_file(fs::path(out) / "groups.csv", groups);
    write_text_file(fs::path(out) / "agents.csv", agents);
    std::cout << "wrote " << a.stats.groups.size() << " group(s) to " << out << "\n";
  }
  return 0;
}

int diffuse_command(const std::string& path, double threshold, double purity, const DiffusionConfig& base,
                    std::size_t min_size, const std::string& out) {
  const auto snap = read_snapshot(path);
  const PayoffTable table(snap.game);
  const auto a = analyze_snapshot(snap, table, threshold, purity);
  std::string text = "group_id,group_type,group_size,step,mean_fraction,mean_steps_to_full,capped_trials\n";
  for (std::size_t g = 0; g < a.partition.groups.size(); ++g) {
    if (a.partition.groups[g].size() < std::max<std::size_t>(min_size, 2)) continue;
    auto dc = base;
    dc.group = a.partition.groups[g];
    dc.seed = derive_stream(base.seed, g, 0xd1f)();
    const auto curve = run_diffusion(snap, table, dc);
    std::size_t capped = 0;
    for (const auto& s : curve.steps_to_full) capped += !s;
    for (std::size_t s = 0; s < curve.mean_fraction.size(); ++s)
      text += csv::row({csv::num(g), std::string(to_string(a.partition.labels[g].type)), csv::num(dc.group.size()),
                        csv::num(s), csv::num(curve.mean_fraction[s]), csv::num(curve.mean_steps_to_full()),
                        csv::num(capped)});
  }
  if (out.empty()) std::cout << text;
  else write_text_file(out, text);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Networked signaling game simulator"};
  app.set_version_flag("--version", SIGGAME_VERSION);
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "run the experiment described by a config file");
  add_run_options(run, run_args);
  auto* sweep = app.add_subcommand("sweep", "run a parameter sweep (config needs sweep.* keys)");
  add_run_options(sweep, run_args);
  auto* seeded = app.add_subcommand("seeded", "run a seeded-population experiment");
  add_run_options(seeded, run_args);
  auto* naive = app.add_subcommand("naive", "run a naive-newcomer experiment");
  add_run_options(naive, run_args);

  std::string snap_path, out;
  double threshold = kDefaultThreshold, purity = kDefaultPurity;
  auto* analyze = app.add_subcommand("analyze", "recover groups from a snapshot");
  analyze->add_option("-s,--snapshot", snap_path, "snapshot file")->required()->check(CLI::ExistingFile);
  analyze->add_option("--threshold", threshold, "edge threshold on interaction probability");
  analyze->add_option("--purity", purity, "label purity");
  analyze->add_option("-o,--out", out, "directory for groups.csv and agents.csv (default: print groups)");

  DiffusionConfig dc;
  std::size_t min_size = 2;
  auto* diffuse = app.add_subcommand("diffuse", "spread information through each group of a snapshot");
  diffuse->add_option("-s,--snapshot", snap_path, "snapshot file")->required()->check(CLI::ExistingFile);
  diffuse->add_option("--threshold", threshold, "edge threshold on interaction probability");
  diffuse->add_option("--purity", purity, "label purity");
  diffuse->add_option("--trials", dc.trials, "trials per group");
  diffuse->add_option("--max-steps", dc.max_steps, "step cap per trial");
  diffuse->add_option("--epsilon", dc.epsilon, "selection error during spreading");
  diffuse->add_option("--seed", dc.seed, "random seed");
  diffuse->add_option("--min-group-size", min_size, "skip smaller groups");
  diffuse->add_option("-o,--out", out, "CSV output file (default: stdout)");

  std::vector<std::string> manifests;
  auto* agg = app.add_subcommand("aggregate", "merge the results of one or more runs");
  agg->add_option("manifests", manifests, "manifest files or run directories")->required();
  agg->add_option("-o,--out", out, "directory for the aggregate tables")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return run_command(run_args, std::nullopt);
    if (sweep->parsed()) return run_command(run_args, ExperimentKind::Sweep);
    if (seeded->parsed()) return run_command(run_args, ExperimentKind::Seeded);
    if (naive->parsed()) return run_command(run_args, ExperimentKind::Naive);
    if (analyze->parsed()) return analyze_command(snap_path, threshold, purity, out);
    if (diffuse->parsed()) return diffuse_command(snap_path, threshold, purity, dc, min_size, out);
    if (agg->parsed()) {
      std::vector<Manifest> loaded;
      for (const auto& m : manifests) loaded.push_back(load_manifest(m));
      const auto names = write_aggregates(aggregate(loaded), out);
      std::cout << "aggregated " << loaded.size() << " manifest(s) into " << out << ":";
      for (const auto& n : names) std::cout << ' ' << n;
      std::cout << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
