#pragma once

// Periodic agent that tours the ring, sums the proxies' demand counts and
// writes the resulting popularity tiers and weight tables back everywhere.

#include <cstdint>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <vector>

#include "vodsim/topology_router.hpp"

namespace vodsim {

struct AgentTourReport {
  double tourTime = 0.0;
  std::vector<int> visitedOrder;
  DemandProfile globalCounts;
  std::vector<PopularityTier> newTiers;
  std::int64_t totalRequests = 0;
  std::size_t tierChanges = 0;
};

/// Instantaneous tour: proxies are visited 0..P-1, counts are cumulative and
/// never reset.
inline AgentTourReport agent_tour(World& w, double now) {
  AgentTourReport report;
  report.tourTime = now;
  DemandProfile global(w.cms.catalog.size());
  for (const auto& ps : w.proxies) {
    report.visitedOrder.push_back(ps.id);
    global += ps.localCounts;
  }
  const WeightProfile weights = derive_weights(global, w.profits);
  for (auto& ps : w.proxies) ps.tourWeights = weights;

  report.newTiers = retier_by_rank(global, w.cms.catalog.size());
  for (std::size_t i = 0; i < report.newTiers.size(); ++i) {
    if (report.newTiers[i] != w.cms.tiers[i]) ++report.tierChanges;
  }
  w.cms.tiers = report.newTiers;
  w.cms.globalCounts = global;
  report.totalRequests = global.grand_total();
  report.globalCounts = std::move(global);
  return report;
}

inline double schedule_next_tour(double now, double period) {
  if (!(period > 0.0)) throw ConfigError("agent period must be positive");
  return now + period;
}

inline void write_tour_header(std::ostream& out) { out << "time,total_requests,tier_changes\n"; }

inline void write_tour_row(std::ostream& out, const AgentTourReport& r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", r.tourTime);
  out << buf << ',' << r.totalRequests << ',' << r.tierChanges << '\n';
}

}  // namespace vodsim
