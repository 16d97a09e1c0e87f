#pragma once

// Deterministic discrete-event simulation of the proxy ring.
//
// Events are popped in (time, sequence) order. Stream completions are scheduled
// from the bytes left and the current rate; when reclamation lowers a rate the
// completion is rescheduled and the old event is dropped lazily by generation.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <queue>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "vodsim/metrics.hpp"
#include "vodsim/profile_agent.hpp"
#include "vodsim/topology_router.hpp"

namespace vodsim {

struct SimConfig {
  int proxies = 6;
  std::size_t NOV = 480;
  Rate linkCapacity = 300;
  std::array<double, 3> classMix{0.20, 0.30, 0.50};
  std::array<double, 3> tierMix{0.50, 0.35, 0.15};
  double totalArrivalRate = 1.0;
  double horizon = 10000.0;
  std::uint64_t seed = 1;
  double agentPeriod = 100.0;
  double samplePeriod = 10.0;
  RateRange videoSizeRange{2000, 6000};
  std::size_t cacheCapacity = 160;
  bool psgEnabled = true;
  PerClass<Profit> profits{{3, 2, 1}};

  void validate() const {
    auto checkMix = [](const std::array<double, 3>& mix, const char* name) {
      double sum = 0.0;
      for (double m : mix) {
        if (!(m >= 0.0)) throw ConfigError(std::string(name) + " entries must be non-negative");
        sum += m;
      }
      if (std::abs(sum - 1.0) > 1e-9) throw ConfigError(std::string(name) + " must sum to 1");
    };
    checkMix(classMix, "classMix");
    checkMix(tierMix, "tierMix");
    if (proxies < 1) throw ConfigError("proxies must be at least 1");
    tier_census(NOV);
    if (linkCapacity <= 0) throw ConfigError("linkCapacity must be positive");
    if (!(totalArrivalRate >= 0.0) || !std::isfinite(totalArrivalRate)) {
      throw ConfigError("totalArrivalRate must be non-negative");
    }
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ConfigError("horizon must be positive");
    if (!(agentPeriod > 0.0)) throw ConfigError("agentPeriod must be positive");
    if (!(samplePeriod > 0.0)) throw ConfigError("samplePeriod must be positive");
    if (videoSizeRange.lo <= 0 || videoSizeRange.hi < videoSizeRange.lo) {
      throw ConfigError("videoSizeRange must be positive and ordered");
    }
    if (cacheCapacity < 1) throw ConfigError("cacheCapacity must be at least 1");
    for (auto c : kAllClasses) {
      if (profits[c] <= 0) throw ConfigError("profits must be positive");
    }
  }
};

namespace detail {

inline std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(trim(item));
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  T value{};
  in >> value;
  std::string rest;
  if (in.fail() || (in >> rest)) throw ConfigError("bad value for " + key + ": '" + text + "'");
  return value;
}

template <class T, std::size_t N>
std::array<T, N> parse_list(const std::string& key, const std::string& text) {
  const auto parts = split(text, ',');
  if (parts.size() != N) {
    throw ConfigError(key + " expects " + std::to_string(N) + " comma-separated values");
  }
  std::array<T, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = parse_number<T>(key, parts[i]);
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("bad boolean for " + key + ": '" + text + "'");
}

}  // namespace detail

/// Applies one key=value setting; keys are the SimConfig field names.
inline void apply_setting(SimConfig& cfg, const std::string& key, const std::string& value) {
  using detail::parse_list;
  using detail::parse_number;
  if (key == "proxies") {
    cfg.proxies = parse_number<int>(key, value);
  } else if (key == "NOV") {
    cfg.NOV = parse_number<std::size_t>(key, value);
  } else if (key == "linkCapacity") {
    cfg.linkCapacity = parse_number<Rate>(key, value);
  } else if (key == "classMix") {
    cfg.classMix = parse_list<double, 3>(key, value);
  } else if (key == "tierMix") {
    cfg.tierMix = parse_list<double, 3>(key, value);
  } else if (key == "totalArrivalRate") {
    cfg.totalArrivalRate = parse_number<double>(key, value);
  } else if (key == "horizon") {
    cfg.horizon = parse_number<double>(key, value);
  } else if (key == "seed") {
    cfg.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "agentPeriod") {
    cfg.agentPeriod = parse_number<double>(key, value);
  } else if (key == "samplePeriod") {
    cfg.samplePeriod = parse_number<double>(key, value);
  } else if (key == "videoSizeRange") {
    const auto r = parse_list<Rate, 2>(key, value);
    cfg.videoSizeRange = {r[0], r[1]};
  } else if (key == "cacheCapacity") {
    cfg.cacheCapacity = parse_number<std::size_t>(key, value);
  } else if (key == "psgEnabled") {
    cfg.psgEnabled = detail::parse_bool(key, value);
  } else if (key == "profits") {
    const auto p = parse_list<Profit, 3>(key, value);
    cfg.profits = PerClass<Profit>{{p[0], p[1], p[2]}};
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

/// Flat key=value text; '#' starts a comment. Settings override `base`.
inline SimConfig parse_config(std::istream& in, SimConfig base = {}) {
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineNo) + ": expected key=value");
    apply_setting(base, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  return base;
}

inline SimConfig load_config(const std::string& path, SimConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in, base);
}

struct Arrival {
  double interarrival = 0.0;
  int proxy = 0;
  VideoId video;
  UserClass cls = UserClass::Class3;
};

/// Poisson arrivals: exponential gaps, uniform proxy, tier by tierMix, video
/// uniform within its tier, class by classMix. Draws depend only on the seed and
/// the catalog, never on system state.
class ArrivalGenerator {
 public:
  ArrivalGenerator(const SimConfig& cfg, std::span<const VideoMeta> catalog, std::uint64_t seed)
      : rng_(seed),
        gap_(cfg.totalArrivalRate > 0.0 ? cfg.totalArrivalRate : 1.0),
        proxy_(0, cfg.proxies - 1),
        tier_(cfg.tierMix.begin(), cfg.tierMix.end()),
        class_(cfg.classMix.begin(), cfg.classMix.end()) {
    for (const auto& v : catalog) byTier_[index_of(v.tier)].push_back(v.id);
  }

  Arrival next() {
    Arrival a;
    a.interarrival = gap_(rng_);
    a.proxy = proxy_(rng_);
    auto tier = static_cast<std::size_t>(tier_(rng_));
    const auto& members = byTier_[tier];
    a.video = members[std::uniform_int_distribution<std::size_t>(0, members.size() - 1)(rng_)];
    a.cls = static_cast<UserClass>(class_(rng_));
    return a;
  }

 private:
  std::mt19937_64 rng_;
  std::exponential_distribution<double> gap_;
  std::uniform_int_distribution<int> proxy_;
  std::discrete_distribution<int> tier_;
  std::discrete_distribution<int> class_;
  std::array<std::vector<VideoId>, 3> byTier_;
};

template <class Rng>
Arrival generate_arrival(Rng& gen) {
  return gen.next();
}

struct StreamProgress {
  AllocId id = 0;
  Megabytes size = 0;
  double bytesRemaining = 0.0;
  double delivered = 0.0;
  double lastRateChange = 0.0;
  double completionTime = 0.0;
  Rate currentRate = 0;
  Rate minRate = 0;
  Rate maxRate = 0;
  std::uint64_t generation = 0;
  int rateChanges = 0;
};

inline StreamProgress start_stream(const Allocation& a, double now) {
  StreamProgress p;
  p.id = a.id;
  p.size = a.size;
  p.bytesRemaining = static_cast<double>(a.size);
  p.lastRateChange = now;
  p.currentRate = a.rate;
  p.minRate = a.minRate;
  p.maxRate = a.maxRate;
  p.completionTime = now + p.bytesRemaining / static_cast<double>(a.rate);
  return p;
}

/// Settles bytes at the old rate up to `now`, switches to `newRate` and returns
/// the new completion time. Bumps the generation so the old completion is stale.
inline double on_rate_change(StreamProgress& p, double now, Rate newRate) {
  if (newRate < p.minRate || newRate > p.maxRate) {
    throw std::logic_error("rate change outside stream bounds");
  }
  if (now < p.lastRateChange) throw std::logic_error("rate change in the past");
  if (newRate == p.currentRate) return p.completionTime;
  const double moved = static_cast<double>(p.currentRate) * (now - p.lastRateChange);
  p.delivered += moved;
  p.bytesRemaining = std::max(0.0, p.bytesRemaining - moved);
  p.lastRateChange = now;
  p.currentRate = newRate;
  p.completionTime = now + p.bytesRemaining / static_cast<double>(newRate);
  p.generation += 1;
  p.rateChanges += 1;
  return p.completionTime;
}

/// Settles the final segment; returns |delivered - size| / size.
inline double finish_stream(StreamProgress& p, double now) {
  const double moved = static_cast<double>(p.currentRate) * (now - p.lastRateChange);
  p.delivered += moved;
  p.bytesRemaining = 0.0;
  p.lastRateChange = now;
  const double size = static_cast<double>(p.size);
  return std::abs(p.delivered - size) / size;
}

class Simulator {
 public:
  explicit Simulator(SimConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    std::mt19937_64 setupRng(cfg_.seed);
    CatalogParams cp;
    cp.nov = cfg_.NOV;
    cp.sizeRange = cfg_.videoSizeRange;
    cp.tierMix = cfg_.tierMix;
    cp.totalArrivalRate = cfg_.totalArrivalRate;
    Catalog catalog = build_catalog(cp, setupRng);
    TopologyParams tp;
    tp.proxies = cfg_.proxies;
    tp.linkCapacity = cfg_.linkCapacity;
    tp.cacheCapacity = cfg_.cacheCapacity;
    tp.profits = cfg_.profits;
    tp.psgEnabled = cfg_.psgEnabled;
    world_ = build_world(std::move(catalog), tp, setupRng);
    std::ostringstream placement;
    write_placement(placement, world_, 0.0);
    initialPlacement_ = placement.str();
  }

  const SimConfig& config() const { return cfg_; }
  const World& world() const { return world_; }
  const std::vector<AgentTourReport>& tours() const { return tours_; }
  const std::string& initial_placement() const { return initialPlacement_; }

  std::string final_placement() const {
    std::ostringstream out;
    write_placement(out, world_, cfg_.horizon);
    return out.str();
  }

  /// Optional hook invoked after every processed event.
  std::function<void(const World&, double)> onEvent;

  MetricsBundle run() {
    if (ran_) throw std::logic_error("Simulator::run called twice");
    ran_ = true;
    bundle_ = {};
    bundle_.horizon = cfg_.horizon;

    ArrivalGenerator arrivals(cfg_, world_.cms.catalog, cfg_.seed ^ 0x9e3779b97f4a7c15ULL);
    if (cfg_.totalArrivalRate > 0.0) schedule_arrival(0.0, arrivals);
    push(0.0, SampleEvent{});
    if (const double t = schedule_next_tour(0.0, cfg_.agentPeriod); t <= cfg_.horizon) push(t, TourEvent{});

    double clock = 0.0;
    while (!queue_.empty()) {
      Event e = queue_.top();
      queue_.pop();
      if (e.time > cfg_.horizon) break;
      if (e.time < clock) bundle_.audit.causalityViolations += 1;
      clock = e.time;
      std::visit([&](auto& payload) { handle(e.time, payload, arrivals); }, e.payload);
      audit_world();
      if (onEvent) onEvent(world_, clock);
    }
    drain(cfg_.horizon);
    bundle_.timeAvgUtilization = time_avg_utilization(world_.ledger, cfg_.horizon, link_census(world_));
    return std::move(bundle_);
  }

 private:
  struct ArrivalEvent {
    int proxy;
    VideoId video;
    UserClass cls;
  };
  struct CompletionEvent {
    AllocId alloc;
    std::uint64_t generation;
  };
  struct TourEvent {};
  struct SampleEvent {};

  struct Event {
    double time;
    std::uint64_t seq;
    std::variant<ArrivalEvent, CompletionEvent, TourEvent, SampleEvent> payload;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.time != b.time) return a.time > b.time;
      return a.seq > b.seq;
    }
  };

  template <class Payload>
  void push(double time, Payload p) {
    queue_.push(Event{time, seq_++, p});
  }

  void schedule_arrival(double now, ArrivalGenerator& gen) {
    const Arrival a = generate_arrival(gen);
    const double t = now + a.interarrival;
    if (t <= cfg_.horizon) push(t, ArrivalEvent{a.proxy, a.video, a.cls});
  }

  void handle(double now, const ArrivalEvent& e, ArrivalGenerator& gen) {
    bundle_.arrivals.push_back({now, e.proxy, e.video, e.cls});
    bundle_.counters.requested += 1;
    const RouteDecision d = handle_request(world_, e.proxy, world_.video(e.video), e.cls, now);
    switch (d.source) {
      case RouteSource::LocalHit: bundle_.counters.localHits += 1; break;
      case RouteSource::FromLPS: bundle_.counters.servedLps += 1; break;
      case RouteSource::FromRPS: bundle_.counters.servedRps += 1; break;
      case RouteSource::FromCMS: bundle_.counters.servedCms += 1; break;
      case RouteSource::Rejected: bundle_.counters.rejected += 1; break;
    }
    for (const auto& change : d.rateChanges) {
      auto& p = progress_.at(change.id);
      const double done = on_rate_change(p, now, change.newRate);
      push(done, CompletionEvent{p.id, p.generation});
    }
    if (d.allocation) {
      StreamProgress p = start_stream(*d.allocation, now);
      push(p.completionTime, CompletionEvent{p.id, p.generation});
      progress_.emplace(p.id, p);
    }
    schedule_arrival(now, gen);
  }

  void handle(double now, const CompletionEvent& e, ArrivalGenerator&) {
    auto it = progress_.find(e.alloc);
    if (it == progress_.end() || it->second.generation != e.generation) return;  // stale
    const double err = finish_stream(it->second, now);
    bundle_.audit.maxByteRelError = std::max(bundle_.audit.maxByteRelError, err);
    progress_.erase(it);
    complete_transfer(world_, e.alloc, now);
    bundle_.counters.completed += 1;
  }

  void handle(double now, const TourEvent&, ArrivalGenerator&) {
    tours_.push_back(agent_tour(world_, now));
    bundle_.tours += 1;
    if (const double t = schedule_next_tour(now, cfg_.agentPeriod); t <= cfg_.horizon) push(t, TourEvent{});
  }

  void handle(double now, const SampleEvent&, ArrivalGenerator&) {
    const auto points = snapshot(world_, now);
    const auto util = utilization_snapshot(world_, now);
    for (auto k : kAllLinkKinds) {
      for (auto c : kAllClasses) bundle_.series[k][c].push_back(points[k][c]);
      bundle_.utilization[k].push_back(util[k]);
    }
    // Multiply rather than accumulate so sample times do not drift.
    const double t = static_cast<double>(++samples_) * cfg_.samplePeriod;
    if (t <= cfg_.horizon) push(t, SampleEvent{});
  }

  void audit_world() {
    auto& audit = bundle_.audit;
    audit.eventsChecked += 1;
    for (const auto& link : world_.links) {
      Rate sum = 0;
      for (const auto& a : link.allocations()) {
        sum += a.rate;
        if (a.rate < a.minRate || a.rate > a.maxRate) audit.boundViolations += 1;
      }
      if (sum > link.capacity() || sum != link.used()) audit.capacityViolations += 1;
    }
  }

  /// Streams still live at the horizon are settled up to it and counted apart.
  void drain(double horizon) {
    for (auto& [id, p] : progress_) {
      p.delivered += static_cast<double>(p.currentRate) * (horizon - p.lastRateChange);
      p.lastRateChange = horizon;
    }
    bundle_.counters.inFlightAtHorizon = static_cast<std::int64_t>(progress_.size());
  }

  SimConfig cfg_;
  World world_;
  std::string initialPlacement_;
  std::vector<AgentTourReport> tours_;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::uint64_t seq_ = 0;
  std::uint64_t samples_ = 0;
  std::unordered_map<AllocId, StreamProgress> progress_;
  MetricsBundle bundle_;
  bool ran_ = false;
};

inline MetricsBundle run(const SimConfig& cfg) { return Simulator(cfg).run(); }

/// Same run with neighbour lookups disabled: every miss goes to the central server.
inline MetricsBundle baseline_no_psg(SimConfig cfg) {
  cfg.psgEnabled = false;
  return run(cfg);
}

}  // namespace vodsim
