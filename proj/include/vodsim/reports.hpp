#pragma once

// CSV and summary emission. Every file is rendered in memory first; nothing is
// written unless the output directory is usable.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "vodsim/metrics.hpp"
#include "vodsim/simulator.hpp"

namespace vodsim {

class ReportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline std::string fixed6(const std::optional<double>& v) { return v ? fixed6(*v) : std::string(); }

struct RunReport {
  SimConfig config;
  MetricsBundle primary;               // the run as configured
  std::optional<MetricsBundle> noPsg;  // paired baseline (compare mode)
};

inline std::string render_alloc_csv(const std::vector<SeriesPoint>& series) {
  std::ostringstream out;
  out << "time,stream_count,avg_max_bw,avg_min_bw,avg_alloc_bw\n";
  for (const auto& p : series) {
    out << fixed6(p.time) << ',' << p.streamCount << ',' << fixed6(p.avgMaxBw) << ',' << fixed6(p.avgMinBw)
        << ',' << fixed6(p.avgAllocBw) << '\n';
  }
  return out.str();
}

inline std::string render_util_csv(const std::vector<UtilPoint>& series) {
  std::ostringstream out;
  out << "time,utilization\n";
  for (const auto& p : series) out << fixed6(p.time) << ',' << fixed6(p.fraction) << '\n';
  return out.str();
}

inline std::string render_rejections_csv(const MetricsBundle* psg, const MetricsBundle* noPsg) {
  std::ostringstream out;
  out << "metric,psg,no_psg\n";
  auto row = [&](const char* name, auto get) {
    out << name << ',';
    if (psg) out << get(*psg);
    out << ',';
    if (noPsg) out << get(*noPsg);
    out << '\n';
  };
  row("requested", [](const MetricsBundle& b) { return std::to_string(b.counters.requested); });
  row("local_hits", [](const MetricsBundle& b) { return std::to_string(b.counters.localHits); });
  row("remote_requests", [](const MetricsBundle& b) { return std::to_string(b.counters.remote()); });
  row("rejected", [](const MetricsBundle& b) { return std::to_string(b.counters.rejected); });
  row("rejection_ratio_all", [](const MetricsBundle& b) { return fixed6(b.counters.rejection_ratio()); });
  row("rejection_ratio_remote",
      [](const MetricsBundle& b) { return fixed6(b.counters.remote_rejection_ratio()); });
  return out.str();
}

inline std::string render_summary(const RunReport& r) {
  const MetricsBundle& b = r.primary;
  const Counters& k = b.counters;
  std::ostringstream out;
  out << "seed=" << r.config.seed << '\n';
  out << "psg_enabled=" << (r.config.psgEnabled ? "true" : "false") << '\n';
  out << "total_arrival_rate=" << fixed6(r.config.totalArrivalRate) << '\n';
  out << "horizon=" << fixed6(r.config.horizon) << '\n';
  out << "requested=" << k.requested << '\n';
  out << "local_hits=" << k.localHits << '\n';
  out << "served_lps=" << k.servedLps << '\n';
  out << "served_rps=" << k.servedRps << '\n';
  out << "served_cms=" << k.servedCms << '\n';
  out << "rejected=" << k.rejected << '\n';
  out << "completed=" << k.completed << '\n';
  out << "in_flight_at_horizon=" << k.inFlightAtHorizon << '\n';
  out << "rejection_ratio_all=" << fixed6(k.rejection_ratio()) << '\n';
  out << "rejection_ratio_remote=" << fixed6(k.remote_rejection_ratio()) << '\n';
  out << "agent_tours=" << b.tours << '\n';
  for (auto kind : kAllLinkKinds) {
    out << "time_avg_util_" << link_kind_name(kind) << '=' << fixed6(b.timeAvgUtilization[kind]) << '\n';
  }
  for (auto kind : kAllLinkKinds) {
    for (auto c : kAllClasses) {
      out << "mean_alloc_" << link_kind_name(kind) << "_class" << class_number(c) << '='
          << fixed6(mean_alloc_per_stream(b, kind, c)) << '\n';
    }
  }
  out << "capacity_violations=" << b.audit.capacityViolations << '\n';
  out << "bound_violations=" << b.audit.boundViolations << '\n';
  out << "max_byte_rel_error=" << fixed6(b.audit.maxByteRelError) << '\n';
  if (r.noPsg) out << "rejected_no_psg=" << r.noPsg->counters.rejected << '\n';

  auto check = [&](const std::string& name, bool ok) {
    out << "CHECK:" << name << '=' << (ok ? "PASS" : "FAIL") << '\n';
  };
  check("counter_conservation", k.requested == k.outcomes());
  check("capacity_conservation", b.audit.capacityViolations == 0);
  check("bound_safety", b.audit.boundViolations == 0);
  check("byte_conservation", b.audit.maxByteRelError <= 1e-6);
  for (auto kind : kAllLinkKinds) {
    check("class_ordering_" + std::string(link_kind_name(kind)), class_ordering_holds(b, kind));
  }
  if (r.noPsg) check("psg_benefit", r.noPsg->counters.rejected >= k.rejected);
  return out.str();
}

/// File name -> contents for every report file.
inline std::map<std::string, std::string> render_reports(const RunReport& r) {
  std::map<std::string, std::string> files;
  for (auto kind : kAllLinkKinds) {
    for (auto c : kAllClasses) {
      files["alloc_" + std::string(link_kind_name(kind)) + "_class" + std::to_string(class_number(c)) + ".csv"] =
          render_alloc_csv(r.primary.series[kind][c]);
    }
    files["util_" + std::string(link_kind_name(kind)) + ".csv"] = render_util_csv(r.primary.utilization[kind]);
  }
  const MetricsBundle* psg = r.config.psgEnabled ? &r.primary : nullptr;
  const MetricsBundle* noPsg = r.config.psgEnabled ? (r.noPsg ? &*r.noPsg : nullptr) : &r.primary;
  files["rejections.csv"] = render_rejections_csv(psg, noPsg);
  files["summary.txt"] = render_summary(r);
  return files;
}

/// Creates `dir` if needed and probes that it is writable before writing anything.
inline void prepare_output_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw ReportError("cannot create output directory '" + dir.string() + "'");
  }
  const auto probe = dir / ".write_probe";
  {
    std::ofstream out(probe, std::ios::binary);
    if (!out) throw ReportError("output directory '" + dir.string() + "' is not writable");
  }
  std::filesystem::remove(probe, ec);
}

inline void write_files(const std::filesystem::path& dir, const std::map<std::string, std::string>& files) {
  prepare_output_dir(dir);
  for (const auto& [name, body] : files) {
    std::ofstream out(dir / name, std::ios::binary);
    out << body;
    if (!out) throw ReportError("failed writing '" + (dir / name).string() + "'");
  }
}

inline void emit_reports(const RunReport& r, const std::filesystem::path& outDir) {
  write_files(outDir, render_reports(r));
}

}  // namespace vodsim
