#pragma once

// Command-line front end: run, compare (paired PSG / no-PSG) and sweep.
// Exit codes: 0 success, 1 output error, 2 usage or configuration error.

#include <future>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vodsim/reports.hpp"
#include "vodsim/simulator.hpp"

namespace vodsim {

struct CliOptions {
  std::string configPath;
  std::optional<std::uint64_t> seed;
  std::string outDir = "vodsim_out";
  bool noPsg = false;
  std::vector<double> rates;
  int seeds = 1;
};

inline SimConfig resolve_config(const CliOptions& o) {
  SimConfig cfg;
  if (!o.configPath.empty()) cfg = load_config(o.configPath, cfg);
  if (o.seed) cfg.seed = *o.seed;
  if (o.noPsg) cfg.psgEnabled = false;
  cfg.validate();
  return cfg;
}

inline void write_audit(const Simulator& sim, const MetricsBundle& b, const std::filesystem::path& dir) {
  std::map<std::string, std::string> files;
  std::ostringstream ledger, tours, arrivals;
  write_ledger_csv(ledger, sim.world().ledger);
  write_tour_header(tours);
  for (const auto& t : sim.tours()) write_tour_row(tours, t);
  arrivals << "time,proxy,video,class\n";
  for (const auto& a : b.arrivals) {
    arrivals << fixed6(a.time) << ',' << a.proxy << ',' << a.video.value << ',' << class_number(a.cls) << '\n';
  }
  std::ostringstream catalog;
  write_catalog(catalog, sim.world().cms.catalog);
  files["ledger.csv"] = ledger.str();
  files["agent_tours.csv"] = tours.str();
  files["arrivals.csv"] = arrivals.str();
  files["catalog.txt"] = catalog.str();
  files["placement_start.txt"] = sim.initial_placement();
  files["placement_end.txt"] = sim.final_placement();
  write_files(dir, files);
}

inline void print_counters(std::ostream& out, const char* label, const Counters& k) {
  out << label << ": requested=" << k.requested << " local=" << k.localHits << " lps=" << k.servedLps
      << " rps=" << k.servedRps << " cms=" << k.servedCms << " rejected=" << k.rejected
      << " remote_rejection_ratio=" << fixed6(k.remote_rejection_ratio()) << '\n';
}

inline int cmd_run(const CliOptions& o, std::ostream& out) {
  const SimConfig cfg = resolve_config(o);
  Simulator sim(cfg);
  RunReport report{cfg, sim.run(), std::nullopt};
  emit_reports(report, o.outDir);
  write_audit(sim, report.primary, std::filesystem::path(o.outDir) / "audit");
  print_counters(out, cfg.psgEnabled ? "psg" : "no-psg", report.primary.counters);
  return 0;
}

inline int cmd_compare(const CliOptions& o, std::ostream& out) {
  SimConfig cfg = resolve_config(o);
  cfg.psgEnabled = true;
  Simulator sim(cfg);
  RunReport report{cfg, sim.run(), baseline_no_psg(cfg)};
  emit_reports(report, o.outDir);
  write_audit(sim, report.primary, std::filesystem::path(o.outDir) / "audit");
  print_counters(out, "psg", report.primary.counters);
  print_counters(out, "no-psg", report.noPsg->counters);
  out << "arrival_logs_identical=" << (report.primary.arrivals == report.noPsg->arrivals ? "true" : "false")
      << '\n';
  return 0;
}

struct SweepRow {
  double rate = 0.0;
  double requested = 0.0;
  double rejected = 0.0;
  double rejectionAll = 0.0;
  double rejectionRemote = 0.0;
  PerClass<double> meanAlloc;
  PerLinkKind<double> util;
};

/// Mean over `seeds` replications (seed, seed+1, ...) at total arrival rate `rate`.
/// Replications run concurrently; each owns its simulator.
inline SweepRow sweep_point(SimConfig cfg, double rate, int seeds) {
  cfg.totalArrivalRate = rate;
  std::vector<std::future<MetricsBundle>> runs;
  for (int s = 0; s < seeds; ++s) {
    SimConfig c = cfg;
    c.seed = cfg.seed + static_cast<std::uint64_t>(s);
    runs.push_back(std::async(std::launch::async, [c] { return run(c); }));
  }
  SweepRow row;
  row.rate = rate;
  const double n = static_cast<double>(seeds);
  for (auto& f : runs) {
    const MetricsBundle b = f.get();
    row.requested += static_cast<double>(b.counters.requested) / n;
    row.rejected += static_cast<double>(b.counters.rejected) / n;
    row.rejectionAll += b.counters.rejection_ratio() / n;
    row.rejectionRemote += b.counters.remote_rejection_ratio() / n;
    for (auto c : kAllClasses) row.meanAlloc[c] += mean_alloc_per_stream(b, c).value_or(0.0) / n;
    for (auto k : kAllLinkKinds) row.util[k] += b.timeAvgUtilization[k] / n;
  }
  return row;
}

inline std::string render_sweep_csv(const std::vector<SweepRow>& rows, int seeds) {
  std::ostringstream out;
  out << "rate,seeds,requested,rejected,rejection_ratio_all,rejection_ratio_remote,"
         "mean_alloc_class1,mean_alloc_class2,mean_alloc_class3,util_ps_lps,util_ps_rps,util_ps_cms\n";
  for (const auto& r : rows) {
    out << fixed6(r.rate) << ',' << seeds << ',' << fixed6(r.requested) << ',' << fixed6(r.rejected) << ','
        << fixed6(r.rejectionAll) << ',' << fixed6(r.rejectionRemote);
    for (auto c : kAllClasses) out << ',' << fixed6(r.meanAlloc[c]);
    for (auto k : kAllLinkKinds) out << ',' << fixed6(r.util[k]);
    out << '\n';
  }
  return out.str();
}

inline int cmd_sweep(const CliOptions& o, std::ostream& out) {
  const SimConfig cfg = resolve_config(o);
  if (o.rates.empty()) throw ConfigError("sweep needs --rates");
  if (o.seeds < 1) throw ConfigError("--seeds must be at least 1");
  for (double r : o.rates) {
    if (!(r >= 0.0)) throw ConfigError("sweep rates must be non-negative");
  }
  std::vector<SweepRow> rows;
  for (double r : o.rates) rows.push_back(sweep_point(cfg, r, o.seeds));
  const std::string csv = render_sweep_csv(rows, o.seeds);
  write_files(o.outDir, {{"sweep.csv", csv}});
  out << csv;
  return 0;
}

inline int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Distributed video-on-demand bandwidth allocation simulator", "vodsim"};
  app.require_subcommand(1);
  CliOptions o;

  auto common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.configPath, "key=value configuration file");
    sub->add_option("--seed", o.seed, "random seed (overrides config)");
    sub->add_option("--out", o.outDir, "output directory");
  };
  auto* runCmd = app.add_subcommand("run", "single simulation");
  common(runCmd);
  runCmd->add_flag("--no-psg", o.noPsg, "disable neighbour proxies (central server only)");

  auto* compareCmd = app.add_subcommand("compare", "paired PSG / no-PSG runs on one seed");
  common(compareCmd);

  auto* sweepCmd = app.add_subcommand("sweep", "load sweep over total arrival rates");
  common(sweepCmd);
  sweepCmd->add_flag("--no-psg", o.noPsg, "disable neighbour proxies (central server only)");
  sweepCmd->add_option("--rates", o.rates, "comma-separated total arrival rates (req/s)")
      ->delimiter(',')
      ->required();
  sweepCmd->add_option("--seeds", o.seeds, "replications per rate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (runCmd->parsed()) return cmd_run(o, out);
    if (compareCmd->parsed()) return cmd_compare(o, out);
    return cmd_sweep(o, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ReportError& e) {
    err << "output error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace vodsim
