#pragma once

// Measurement surface: per-(link kind, class) bandwidth series, utilization
// series, outcome counters and exact time-averaged utilization from the ledger.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "vodsim/allocation_engine.hpp"
#include "vodsim/topology_router.hpp"

namespace vodsim {

struct SeriesPoint {
  double time = 0.0;
  std::optional<double> avgMaxBw;
  std::optional<double> avgMinBw;
  std::optional<double> avgAllocBw;
  std::size_t streamCount = 0;
};

struct UtilPoint {
  double time = 0.0;
  double fraction = 0.0;
};

struct Counters {
  std::int64_t requested = 0;
  std::int64_t localHits = 0;
  std::int64_t servedLps = 0;
  std::int64_t servedRps = 0;
  std::int64_t servedCms = 0;
  std::int64_t rejected = 0;
  std::int64_t completed = 0;
  std::int64_t inFlightAtHorizon = 0;  // admitted, still transferring at the horizon

  std::int64_t outcomes() const { return localHits + servedLps + servedRps + servedCms + rejected; }
  std::int64_t remote() const { return requested - localHits; }

  double rejection_ratio() const {
    return requested > 0 ? static_cast<double>(rejected) / static_cast<double>(requested) : 0.0;
  }
  double remote_rejection_ratio() const {
    return remote() > 0 ? static_cast<double>(rejected) / static_cast<double>(remote()) : 0.0;
  }
};

struct ArrivalRecord {
  double time = 0.0;
  int proxy = 0;
  VideoId video;
  UserClass cls = UserClass::Class3;
  friend bool operator==(const ArrivalRecord&, const ArrivalRecord&) = default;
};

/// Invariant sweep results, accumulated at every event.
struct InvariantAudit {
  std::int64_t eventsChecked = 0;
  std::int64_t capacityViolations = 0;
  std::int64_t boundViolations = 0;
  std::int64_t causalityViolations = 0;
  double maxByteRelError = 0.0;
};

struct MetricsBundle {
  PerLinkKind<PerClass<std::vector<SeriesPoint>>> series;
  PerLinkKind<std::vector<UtilPoint>> utilization;
  Counters counters;
  PerLinkKind<double> timeAvgUtilization;
  InvariantAudit audit;
  std::vector<ArrivalRecord> arrivals;
  std::int64_t tours = 0;
  double horizon = 0.0;
};

/// Averages over the live allocations of each class on all links of each kind.
inline PerLinkKind<PerClass<SeriesPoint>> snapshot(const World& w, double now) {
  struct Acc {
    double max = 0, min = 0, alloc = 0;
    std::size_t n = 0;
  };
  PerLinkKind<PerClass<Acc>> acc;
  for (const auto& link : w.links) {
    for (const auto& a : link.allocations()) {
      auto& s = acc[link.kind()][a.cls];
      s.max += static_cast<double>(a.maxRate);
      s.min += static_cast<double>(a.minRate);
      s.alloc += static_cast<double>(a.rate);
      s.n += 1;
    }
  }
  PerLinkKind<PerClass<SeriesPoint>> out;
  for (auto k : kAllLinkKinds) {
    for (auto c : kAllClasses) {
      const auto& s = acc[k][c];
      SeriesPoint p;
      p.time = now;
      p.streamCount = s.n;
      if (s.n > 0) {
        const double n = static_cast<double>(s.n);
        p.avgMaxBw = s.max / n;
        p.avgMinBw = s.min / n;
        p.avgAllocBw = s.alloc / n;
      }
      out[k][c] = p;
    }
  }
  return out;
}

/// Instantaneous used/capacity over all links of each kind.
inline PerLinkKind<UtilPoint> utilization_snapshot(const World& w, double now) {
  PerLinkKind<double> used, cap;
  for (const auto& link : w.links) {
    used[link.kind()] += static_cast<double>(link.used());
    cap[link.kind()] += static_cast<double>(link.capacity());
  }
  PerLinkKind<UtilPoint> out;
  for (auto k : kAllLinkKinds) out[k] = {now, cap[k] > 0 ? used[k] / cap[k] : 0.0};
  return out;
}

struct LinkInfo {
  LinkKind kind;
  Rate capacity;
};

inline std::vector<LinkInfo> link_census(const World& w) {
  std::vector<LinkInfo> out;
  for (const auto& l : w.links) out.push_back({l.kind(), l.capacity()});
  return out;
}

/// (1/horizon) * integral of sum(rates)/capacity over [0, horizon], per link
/// kind, replayed from a chronological ledger.
inline PerLinkKind<double> time_avg_utilization(const Ledger& ledger, double horizon,
                                                std::span<const LinkInfo> links) {
  PerLinkKind<double> out;
  if (!(horizon > 0.0)) return out;
  PerLinkKind<double> capacity;
  for (const auto& l : links) capacity[l.kind] += static_cast<double>(l.capacity);

  PerLinkKind<Rate> level;
  PerLinkKind<double> area, last;
  for (const auto& e : ledger) {
    const double t = std::min(e.time, horizon);
    area[e.kind] += static_cast<double>(level[e.kind]) * (t - last[e.kind]);
    last[e.kind] = t;
    level[e.kind] += e.delta;
  }
  for (auto k : kAllLinkKinds) {
    area[k] += static_cast<double>(level[k]) * (horizon - last[k]);
    out[k] = capacity[k] > 0 ? area[k] / (capacity[k] * horizon) : 0.0;
  }
  return out;
}

/// Stream-weighted mean allocated rate over all samples of one (kind, class).
inline std::optional<double> mean_alloc_per_stream(const MetricsBundle& b, LinkKind k, UserClass c) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& p : b.series[k][c]) {
    if (p.streamCount == 0) continue;
    sum += *p.avgAllocBw * static_cast<double>(p.streamCount);
    n += p.streamCount;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

/// Same, pooled across all link kinds.
inline std::optional<double> mean_alloc_per_stream(const MetricsBundle& b, UserClass c) {
  double sum = 0.0;
  std::size_t n = 0;
  for (auto k : kAllLinkKinds) {
    for (const auto& p : b.series[k][c]) {
      if (p.streamCount == 0) continue;
      sum += *p.avgAllocBw * static_cast<double>(p.streamCount);
      n += p.streamCount;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

/// Class 1 > class 2 > class 3 in mean allocated rate on link kind `k`.
inline bool class_ordering_holds(const MetricsBundle& b, LinkKind k) {
  auto c1 = mean_alloc_per_stream(b, k, UserClass::Class1);
  auto c2 = mean_alloc_per_stream(b, k, UserClass::Class2);
  auto c3 = mean_alloc_per_stream(b, k, UserClass::Class3);
  return c1 && c2 && c3 && *c1 > *c2 && *c2 > *c3;
}

}  // namespace vodsim
