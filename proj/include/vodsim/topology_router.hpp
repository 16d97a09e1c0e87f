#pragma once

// Proxy ring, central server, per-proxy video caches and request routing.
//
// Every proxy i owns three inbound links: from its left neighbour (i-1 mod P),
// from its right neighbour (i+1 mod P) and from the central server. A request
// that misses the local cache is served over one of them, chosen by where the
// video is cached and how much bandwidth each neighbour link has free.

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <stdexcept>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "vodsim/allocation_engine.hpp"
#include "vodsim/core_model.hpp"

namespace vodsim {

/// Video cache with a capacity in videos. Eviction picks the least recently
/// requested entry that is not pinned by a live transfer; when every entry is
/// pinned the insert still succeeds and the overshoot is trimmed by reconcile().
class VideoCache {
 public:
  struct Entry {
    double lastRequest = 0.0;
    int pins = 0;
  };

  explicit VideoCache(std::size_t capacity = 0) : capacity_(capacity) {}

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }
  bool contains(VideoId v) const { return entries_.contains(v); }
  const std::map<VideoId, Entry>& entries() const { return entries_; }

  void touch(VideoId v, double now) { entries_.at(v).lastRequest = now; }

  /// Places a video without eviction (initial load).
  void preload(VideoId v, double now = 0.0) { entries_.try_emplace(v, Entry{now, 0}); }

  std::optional<VideoId> insert(VideoId v, double now) {
    if (contains(v)) throw std::logic_error("video already cached");
    std::optional<VideoId> evicted;
    if (entries_.size() >= capacity_) {
      evicted = lru_unpinned();
      if (evicted) entries_.erase(*evicted);
    }
    entries_.emplace(v, Entry{now, 0});
    return evicted;
  }

  void pin(VideoId v) { entries_.at(v).pins += 1; }

  void unpin(VideoId v) {
    auto& e = entries_.at(v);
    if (e.pins <= 0) throw std::logic_error("unbalanced cache unpin");
    e.pins -= 1;
  }

  bool pinned(VideoId v) const {
    auto it = entries_.find(v);
    return it != entries_.end() && it->second.pins > 0;
  }

  /// Evicts idle LRU entries until the cache is back within capacity.
  std::vector<VideoId> reconcile() {
    std::vector<VideoId> evicted;
    while (entries_.size() > capacity_) {
      auto victim = lru_unpinned();
      if (!victim) break;
      entries_.erase(*victim);
      evicted.push_back(*victim);
    }
    return evicted;
  }

 private:
  std::optional<VideoId> lru_unpinned() const {
    std::optional<VideoId> best;
    double bestTime = 0.0;
    for (const auto& [v, e] : entries_) {
      if (e.pins > 0) continue;
      if (!best || e.lastRequest < bestTime) {
        best = v;
        bestTime = e.lastRequest;
      }
    }
    return best;
  }

  std::size_t capacity_;
  std::map<VideoId, Entry> entries_;
};

struct ProxyServer {
  int id = 0;
  VideoCache cache;
  int lpsLink = -1;
  int rpsLink = -1;
  int cmsLink = -1;
  DemandProfile localCounts;
  WeightProfile tourWeights;  // last table written by the agent

  /// Weight used for reclamation ordering at this proxy: the agent's global
  /// table, overridden by the local count when that is larger.
  Weight weight_of(VideoId v, UserClass c, const PerClass<Profit>& profits) const {
    const Weight local = compute_weight(localCounts, v, c, profits[c]);
    const Weight global = tourWeights.size() > v.index() ? tourWeights.at(v, c) : 0;
    return std::max(local, global);
  }
};

struct CentralServer {
  Catalog catalog;
  DemandProfile globalCounts;
  std::vector<PopularityTier> tiers;  // latest agent view
};

enum class RouteSource : std::uint8_t { LocalHit, FromLPS, FromRPS, FromCMS, Rejected };

inline std::string_view route_source_name(RouteSource s) {
  switch (s) {
    case RouteSource::LocalHit: return "local";
    case RouteSource::FromLPS: return "lps";
    case RouteSource::FromRPS: return "rps";
    case RouteSource::FromCMS: return "cms";
    case RouteSource::Rejected: return "rejected";
  }
  return "?";
}

struct RouteDecision {
  RouteSource source = RouteSource::Rejected;
  std::optional<Allocation> allocation;
  int link = -1;
  AdmitLevel level = AdmitLevel::Rejected;
  std::vector<RateChange> rateChanges;  // victims of reclamation on `link`
  std::optional<VideoId> evicted;
};

enum class LocateCase : std::uint8_t { AtPS, LPSonly, RPSonly, Both, Neither };

/// A live non-local transfer: which proxy receives it, over which link, from whom.
struct Transfer {
  int proxy = 0;
  int link = -1;
  int sourceProxy = -1;  // -1 = central server
  VideoId video;
};

struct World {
  CentralServer cms;
  std::vector<ProxyServer> proxies;
  std::vector<Link> links;
  std::unordered_map<AllocId, Transfer> transfers;
  Ledger ledger;
  PerClass<Profit> profits{{3, 2, 1}};
  bool psgEnabled = true;
  bool recordLedger = true;
  AllocId nextAllocId = 1;

  int proxy_count() const { return static_cast<int>(proxies.size()); }
  int lps_of(int i) const { return (i - 1 + proxy_count()) % proxy_count(); }
  int rps_of(int i) const { return (i + 1) % proxy_count(); }
  const VideoMeta& video(VideoId v) const { return cms.catalog.at(v.index()); }
};

struct TopologyParams {
  int proxies = 6;
  Rate linkCapacity = 300;
  std::size_t cacheCapacity = 160;
  PerClass<Profit> profits{{3, 2, 1}};
  bool psgEnabled = true;
};

/// Per-tier initial load for a proxy: capacity split 1/4, 1/4, 1/2, capped by tier size.
inline std::array<std::size_t, 3> initial_load(std::size_t cacheCapacity, std::size_t nov) {
  const auto census = tier_census(nov);
  const std::size_t most = std::min(cacheCapacity / 4, census[0]);
  const std::size_t second = std::min(cacheCapacity / 4, census[1]);
  const std::size_t least = std::min(cacheCapacity - most - second, census[2]);
  return {most, second, least};
}

/// Builds the ring and loads each proxy with a per-tier random sample. Samples
/// are dealt from a shuffled pool that is only refilled once exhausted, so copies
/// are spread as evenly as possible across proxies.
template <class Rng>
World build_world(Catalog catalog, const TopologyParams& params, Rng& rng) {
  if (params.proxies < 1) throw ConfigError("need at least one proxy");
  validate_catalog(catalog);
  World w;
  const std::size_t nov = catalog.size();
  w.profits = params.profits;
  w.psgEnabled = params.psgEnabled;
  w.cms.catalog = std::move(catalog);
  w.cms.globalCounts = DemandProfile(nov);
  w.cms.tiers.resize(nov);
  std::array<std::vector<VideoId>, 3> byTier;
  for (const auto& v : w.cms.catalog) {
    w.cms.tiers[v.id.index()] = v.tier;
    byTier[index_of(v.tier)].push_back(v.id);
  }

  for (int i = 0; i < params.proxies; ++i) {
    ProxyServer ps;
    ps.id = i;
    ps.cache = VideoCache(params.cacheCapacity);
    ps.localCounts = DemandProfile(nov);
    ps.tourWeights = WeightProfile(nov);
    const int base = 3 * i;
    const int lps = (i - 1 + params.proxies) % params.proxies;
    const int rps = (i + 1) % params.proxies;
    w.links.emplace_back(base + 0, LinkKind::PsLps, params.linkCapacity, i, lps);
    w.links.emplace_back(base + 1, LinkKind::PsRps, params.linkCapacity, i, rps);
    w.links.emplace_back(base + 2, LinkKind::PsCms, params.linkCapacity, i, -1);
    ps.lpsLink = base + 0;
    ps.rpsLink = base + 1;
    ps.cmsLink = base + 2;
    w.proxies.push_back(std::move(ps));
  }

  const auto load = initial_load(params.cacheCapacity, nov);
  for (auto tier : kAllTiers) {
    const auto& members = byTier[index_of(tier)];
    std::vector<VideoId> pool;
    for (auto& ps : w.proxies) {
      std::set<VideoId> taken;
      while (taken.size() < load[index_of(tier)]) {
        if (pool.empty()) {
          pool = members;
          std::shuffle(pool.begin(), pool.end(), rng);
        }
        // Take the first pooled video this proxy does not hold yet.
        auto it = std::find_if(pool.begin(), pool.end(), [&](VideoId v) { return !taken.contains(v); });
        if (it == pool.end()) {
          pool.clear();
          continue;
        }
        taken.insert(*it);
        pool.erase(it);
      }
      for (auto v : taken) ps.cache.preload(v);
    }
  }
  return w;
}

inline LocateCase locate(const World& w, VideoId video, int ps) {
  if (w.proxies.at(ps).cache.contains(video)) return LocateCase::AtPS;
  const bool inLps = w.proxies[w.lps_of(ps)].cache.contains(video);
  const bool inRps = w.proxies[w.rps_of(ps)].cache.contains(video);
  if (inLps && inRps) return LocateCase::Both;
  if (inLps) return LocateCase::LPSonly;
  if (inRps) return LocateCase::RPSonly;
  return LocateCase::Neither;
}

namespace detail {

inline RouteDecision try_link(World& w, int ps, int linkId, RouteSource source, const VideoMeta& video,
                              UserClass cls, double now) {
  const ProxyServer& proxy = w.proxies[ps];
  auto weightOf = [&](VideoId v, UserClass c) { return proxy.weight_of(v, c, w.profits); };
  auto r = ba_allocate(w.links[linkId], video, cls, weightOf, w.nextAllocId, now,
                       w.recordLedger ? &w.ledger : nullptr);
  RouteDecision d;
  if (!r.admitted()) return d;
  ++w.nextAllocId;
  d.source = source;
  d.link = linkId;
  d.level = r.level;
  d.allocation = r.allocation;
  d.rateChanges = std::move(r.rateChanges);
  return d;
}

}  // namespace detail

/// Chooses the link for a request that missed the local cache and runs admission
/// on it, falling back to the central server link. Does not touch caches.
inline RouteDecision dynamic_band(World& w, int ps, const VideoMeta& video, UserClass cls, double now = 0.0) {
  const ProxyServer& proxy = w.proxies.at(ps);
  if (proxy.cache.contains(video.id)) throw std::logic_error("dynamic_band called for a cached video");

  LocateCase where = w.psgEnabled ? locate(w, video.id, ps) : LocateCase::Neither;
  RouteDecision d;
  switch (where) {
    case LocateCase::LPSonly:
      d = detail::try_link(w, ps, proxy.lpsLink, RouteSource::FromLPS, video, cls, now);
      break;
    case LocateCase::RPSonly:
      d = detail::try_link(w, ps, proxy.rpsLink, RouteSource::FromRPS, video, cls, now);
      break;
    case LocateCase::Both:
      if (free_bandwidth(w.links[proxy.lpsLink]) > free_bandwidth(w.links[proxy.rpsLink])) {
        d = detail::try_link(w, ps, proxy.lpsLink, RouteSource::FromLPS, video, cls, now);
      } else {
        d = detail::try_link(w, ps, proxy.rpsLink, RouteSource::FromRPS, video, cls, now);
      }
      break;
    case LocateCase::Neither:
    case LocateCase::AtPS:
      break;
  }
  if (d.source == RouteSource::Rejected) {
    d = detail::try_link(w, ps, proxy.cmsLink, RouteSource::FromCMS, video, cls, now);
  }
  return d;
}

inline std::optional<VideoId> cache_insert(World& w, int ps, VideoId video, double now) {
  return w.proxies.at(ps).cache.insert(video, now);
}

/// Full request path at proxy `ps`: count the request, serve locally if cached,
/// otherwise route, then store the video at the proxy and pin both ends of the
/// transfer for its lifetime.
inline RouteDecision handle_request(World& w, int ps, const VideoMeta& video, UserClass cls, double now) {
  ProxyServer& proxy = w.proxies.at(ps);
  record_request(proxy.localCounts, video.id, cls);
  if (proxy.cache.contains(video.id)) {
    proxy.cache.touch(video.id, now);
    RouteDecision d;
    d.source = RouteSource::LocalHit;
    return d;
  }
  RouteDecision d = dynamic_band(w, ps, video, cls, now);
  if (d.source == RouteSource::Rejected) return d;

  d.evicted = cache_insert(w, ps, video.id, now);
  proxy.cache.pin(video.id);
  Transfer t;
  t.proxy = ps;
  t.link = d.link;
  t.video = video.id;
  t.sourceProxy = w.links[d.link].peer();
  if (t.sourceProxy >= 0) w.proxies[t.sourceProxy].cache.pin(video.id);
  w.transfers.emplace(d.allocation->id, t);
  return d;
}

/// Ends a transfer: frees its bandwidth, unpins both caches and trims any cache
/// overshoot left by inserts made while every entry was pinned.
inline Rate complete_transfer(World& w, AllocId id, double now) {
  auto it = w.transfers.find(id);
  if (it == w.transfers.end()) throw std::invalid_argument("double release");
  const Transfer t = it->second;
  w.transfers.erase(it);
  const Rate freed = release(w.links[t.link], id, now, w.recordLedger ? &w.ledger : nullptr);
  w.proxies[t.proxy].cache.unpin(t.video);
  w.proxies[t.proxy].cache.reconcile();
  if (t.sourceProxy >= 0) {
    w.proxies[t.sourceProxy].cache.unpin(t.video);
    w.proxies[t.sourceProxy].cache.reconcile();
  }
  return freed;
}

/// Per-proxy cache contents, one line per proxy: "proxy <i> size <n>: id id ...".
inline void write_placement(std::ostream& out, const World& w, double time) {
  out << "# placement at t=" << time << '\n';
  for (const auto& ps : w.proxies) {
    std::array<std::size_t, 3> census{};
    for (const auto& [v, e] : ps.cache.entries()) census[index_of(w.video(v).tier)] += 1;
    out << "proxy " << ps.id << " size " << ps.cache.size() << " most " << census[0] << " secondary "
        << census[1] << " least " << census[2] << ':';
    for (const auto& [v, e] : ps.cache.entries()) out << ' ' << v.value;
    out << '\n';
  }
}

}  // namespace vodsim
