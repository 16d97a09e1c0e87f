#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "ba_oracle.hpp"
#include "vodsim/topology_router.hpp"

using namespace vodsim;

namespace {

Catalog small_catalog(std::size_t nov = 16) {
  Catalog c;
  for (std::uint32_t i = 0; i < nov; ++i) {
    VideoMeta v;
    v.id = VideoId{i};
    v.size = 3000;
    v.tier = i < nov / 4 ? PopularityTier::MostPopular
                         : (i < nov / 2 ? PopularityTier::SecondaryPopular : PopularityTier::LeastPopular);
    v.minBw = PerClass<Rate>{{8, 6, 4}};
    v.maxBw = PerClass<Rate>{{24, 18, 12}};
    v.arrivalRate = 0.1;
    c.push_back(v);
  }
  return c;
}

/// Ring with empty caches.
World empty_world(int proxies = 4, std::size_t cacheCapacity = 4, Rate capacity = 300) {
  std::mt19937_64 rng(1);
  TopologyParams p;
  p.proxies = proxies;
  p.cacheCapacity = cacheCapacity;
  p.linkCapacity = capacity;
  World w = build_world(small_catalog(), p, rng);
  for (auto& ps : w.proxies) ps.cache = VideoCache(cacheCapacity);
  return w;
}

/// Occupies `amount` MB/s of a link with a stream that has no excess to reclaim.
void occupy(World& w, int link, Rate amount, AllocId id = 9000) {
  Allocation a;
  a.id = id;
  a.video = VideoId{15};
  a.cls = UserClass::Class3;
  a.rate = amount;
  a.minRate = amount;
  a.maxRate = amount;
  a.size = 1;
  w.links[link].admit(a);
}

std::vector<Link> link_snapshot(const World& w) { return w.links; }

}  // namespace

TEST(Ring, NeighbourRelationIsConsistent) {
  for (int p = 1; p <= 8; ++p) {
    World w = empty_world(p);
    for (int i = 0; i < p; ++i) {
      EXPECT_EQ(w.rps_of(w.lps_of(i)), i);
      EXPECT_EQ(w.lps_of(w.rps_of(i)), i);
      EXPECT_EQ(w.links[w.proxies[i].lpsLink].peer(), w.lps_of(i));
      EXPECT_EQ(w.links[w.proxies[i].rpsLink].peer(), w.rps_of(i));
      EXPECT_EQ(w.links[w.proxies[i].cmsLink].peer(), -1);
    }
  }
}

TEST(Locate, PsCheckDominates) {
  World w = empty_world();
  for (int p : {0, 1, 3}) w.proxies[p].cache.preload(VideoId{2});
  EXPECT_EQ(locate(w, VideoId{2}, 0), LocateCase::AtPS);
}

TEST(Locate, EnumeratesNeighbourCases) {
  World w = empty_world();
  w.proxies[3].cache.preload(VideoId{1});  // LPS of 0
  w.proxies[1].cache.preload(VideoId{1});  // RPS of 0
  w.proxies[3].cache.preload(VideoId{2});
  w.proxies[1].cache.preload(VideoId{3});
  w.proxies[2].cache.preload(VideoId{4});  // not a neighbour of 0
  EXPECT_EQ(locate(w, VideoId{1}, 0), LocateCase::Both);
  EXPECT_EQ(locate(w, VideoId{2}, 0), LocateCase::LPSonly);
  EXPECT_EQ(locate(w, VideoId{3}, 0), LocateCase::RPSonly);
  EXPECT_EQ(locate(w, VideoId{4}, 0), LocateCase::Neither);
  EXPECT_EQ(locate(w, VideoId{5}, 0), LocateCase::Neither);
}

TEST(HandleRequest, LocalHitTouchesNoLink) {
  World w = empty_world();
  w.proxies[0].cache.preload(VideoId{2});
  const auto before = link_snapshot(w);
  const auto d = handle_request(w, 0, w.video(VideoId{2}), UserClass::Class1, 5.0);
  EXPECT_EQ(d.source, RouteSource::LocalHit);
  EXPECT_FALSE(d.allocation);
  EXPECT_EQ(w.links, before);
  EXPECT_EQ(w.proxies[0].localCounts.count(VideoId{2}, UserClass::Class1), 1);
}

TEST(HandleRequest, LpsOnlyServedAtMax) {
  World w = empty_world();
  w.proxies[3].cache.preload(VideoId{6});
  const auto d = handle_request(w, 0, w.video(VideoId{6}), UserClass::Class2, 1.0);
  ASSERT_EQ(d.source, RouteSource::FromLPS);
  EXPECT_EQ(d.link, w.proxies[0].lpsLink);
  EXPECT_EQ(d.level, AdmitLevel::Max);
  EXPECT_EQ(d.allocation->rate, 18);
  EXPECT_TRUE(w.proxies[0].cache.contains(VideoId{6}));
  EXPECT_TRUE(w.proxies[0].cache.pinned(VideoId{6}));
  EXPECT_TRUE(w.proxies[3].cache.pinned(VideoId{6}));

  complete_transfer(w, d.allocation->id, 10.0);
  EXPECT_FALSE(w.proxies[0].cache.pinned(VideoId{6}));
  EXPECT_FALSE(w.proxies[3].cache.pinned(VideoId{6}));
  EXPECT_EQ(free_bandwidth(w.links[d.link]), 300);
  EXPECT_THROW(complete_transfer(w, d.allocation->id, 11.0), std::invalid_argument);
}

TEST(HandleRequest, RejectedWhenCmsSaturated) {
  World w = empty_world();
  occupy(w, w.proxies[0].cmsLink, 300);
  const auto before = link_snapshot(w);
  const auto d = handle_request(w, 0, w.video(VideoId{9}), UserClass::Class1, 1.0);
  EXPECT_EQ(d.source, RouteSource::Rejected);
  EXPECT_FALSE(d.allocation);
  EXPECT_EQ(w.links, before);
  EXPECT_FALSE(w.proxies[0].cache.contains(VideoId{9}));
  EXPECT_TRUE(w.transfers.empty());
}

TEST(DynamicBand, BothPrefersStrictlyFreerNeighbour) {
  World w = empty_world();
  w.proxies[3].cache.preload(VideoId{1});
  w.proxies[1].cache.preload(VideoId{1});
  occupy(w, w.proxies[0].lpsLink, 200);  // free 100
  occupy(w, w.proxies[0].rpsLink, 250);  // free 50
  const auto d = dynamic_band(w, 0, w.video(VideoId{1}), UserClass::Class1);
  EXPECT_EQ(d.source, RouteSource::FromLPS);
}

TEST(DynamicBand, EqualFreeBandwidthGoesRight) {
  World w = empty_world();
  w.proxies[3].cache.preload(VideoId{1});
  w.proxies[1].cache.preload(VideoId{1});
  occupy(w, w.proxies[0].lpsLink, 250);
  occupy(w, w.proxies[0].rpsLink, 250);
  const auto d = dynamic_band(w, 0, w.video(VideoId{1}), UserClass::Class1);
  EXPECT_EQ(d.source, RouteSource::FromRPS);
}

TEST(DynamicBand, FallsBackToCmsAtMin) {
  World w = empty_world();
  w.proxies[3].cache.preload(VideoId{1});
  occupy(w, w.proxies[0].lpsLink, 300);  // LPS attempt infeasible
  occupy(w, w.proxies[0].cmsLink, 290);  // CMS free 10: min fits, max does not
  const auto d = dynamic_band(w, 0, w.video(VideoId{1}), UserClass::Class1);
  ASSERT_EQ(d.source, RouteSource::FromCMS);
  EXPECT_EQ(d.level, AdmitLevel::Min);
  EXPECT_EQ(d.allocation->rate, 8);
}

TEST(DynamicBand, NoPsgGoesStraightToCms) {
  World w = empty_world();
  w.psgEnabled = false;
  w.proxies[3].cache.preload(VideoId{1});
  w.proxies[1].cache.preload(VideoId{1});
  const auto d = dynamic_band(w, 0, w.video(VideoId{1}), UserClass::Class1);
  EXPECT_EQ(d.source, RouteSource::FromCMS);
}

TEST(DynamicBand, RefusesCachedVideo) {
  World w = empty_world();
  w.proxies[0].cache.preload(VideoId{1});
  EXPECT_THROW(dynamic_band(w, 0, w.video(VideoId{1}), UserClass::Class1), std::logic_error);
}

TEST(CacheInsert, BelowCapacityNoEviction) {
  World w = empty_world(4, 3);
  EXPECT_FALSE(cache_insert(w, 0, VideoId{1}, 1.0));
  EXPECT_FALSE(cache_insert(w, 0, VideoId{2}, 2.0));
  EXPECT_EQ(w.proxies[0].cache.size(), 2u);
}

TEST(CacheInsert, EvictsLeastRecentlyRequestedIdleEntry) {
  VideoCache cache(3);
  cache.insert(VideoId{1}, 1.0);
  cache.insert(VideoId{2}, 2.0);
  cache.insert(VideoId{3}, 3.0);
  cache.touch(VideoId{1}, 4.0);  // access order now 2, 3, 1
  cache.pin(VideoId{2});         // 2 is streaming
  const auto evicted = cache.insert(VideoId{4}, 5.0);
  ASSERT_TRUE(evicted);
  EXPECT_EQ(*evicted, VideoId{3});
  EXPECT_EQ(cache.size(), 3u);
}

TEST(CacheInsert, OvershootsWhenAllLiveThenReconciles) {
  World w = empty_world(4, 2);
  w.proxies[0].cache = VideoCache(2);
  const auto a = handle_request(w, 0, w.video(VideoId{1}), UserClass::Class3, 1.0);
  const auto b = handle_request(w, 0, w.video(VideoId{2}), UserClass::Class3, 2.0);
  const auto c = handle_request(w, 0, w.video(VideoId{3}), UserClass::Class3, 3.0);
  ASSERT_TRUE(a.allocation && b.allocation && c.allocation);
  EXPECT_FALSE(c.evicted);
  EXPECT_EQ(w.proxies[0].cache.size(), 3u);  // one slot over

  complete_transfer(w, a.allocation->id, 4.0);
  EXPECT_EQ(w.proxies[0].cache.size(), 2u);
  EXPECT_FALSE(w.proxies[0].cache.contains(VideoId{1}));
}

TEST(HandleRequest, StoresVideoAfterEverySuccessfulRemoteDecision) {
  std::mt19937_64 rng(8);
  TopologyParams p;
  p.proxies = 6;
  p.cacheCapacity = 8;
  p.linkCapacity = 120;
  World w = build_world(small_catalog(32), p, rng);
  for (int step = 0; step < 2000; ++step) {
    const int ps = std::uniform_int_distribution<int>(0, 5)(rng);
    const VideoId v{std::uniform_int_distribution<std::uint32_t>(0, 31)(rng)};
    const auto cls = kAllClasses[std::uniform_int_distribution<std::size_t>(0, 2)(rng)];
    const auto before = link_snapshot(w);
    const auto d = handle_request(w, ps, w.video(v), cls, static_cast<double>(step));
    if (d.source == RouteSource::LocalHit || d.source == RouteSource::Rejected) {
      EXPECT_FALSE(d.allocation);
      EXPECT_EQ(w.links, before);
    } else {
      ASSERT_TRUE(d.allocation);
      EXPECT_TRUE(w.proxies[ps].cache.contains(v));
    }
    // Retire some transfers so caches and links keep turning over.
    if (!w.transfers.empty() && std::uniform_int_distribution<int>(0, 1)(rng) == 0) {
      complete_transfer(w, w.transfers.begin()->first, static_cast<double>(step));
    }
    for (const auto& proxy : w.proxies) {
      std::size_t pinnedEntries = 0;
      for (const auto& [id, e] : proxy.cache.entries()) pinnedEntries += e.pins > 0;
      EXPECT_LE(proxy.cache.size(), std::max(proxy.cache.capacity(), pinnedEntries + 1));
    }
  }
}

TEST(HandleRequest, NoPsgOnlyUsesCentralServer) {
  std::mt19937_64 rng(4);
  TopologyParams p;
  p.proxies = 6;
  p.cacheCapacity = 8;
  p.psgEnabled = false;
  World w = build_world(small_catalog(32), p, rng);
  for (int step = 0; step < 1000; ++step) {
    const int ps = std::uniform_int_distribution<int>(0, 5)(rng);
    const VideoId v{std::uniform_int_distribution<std::uint32_t>(0, 31)(rng)};
    const auto d = handle_request(w, ps, w.video(v), UserClass::Class2, static_cast<double>(step));
    EXPECT_TRUE(d.source == RouteSource::LocalHit || d.source == RouteSource::FromCMS ||
                d.source == RouteSource::Rejected);
  }
  for (const auto& link : w.links) {
    if (link.kind() != LinkKind::PsCms) {
      EXPECT_TRUE(link.allocations().empty());
    }
  }
}

// Case-table oracle: for random link loads and placements the routed source
// matches what the case table predicts using the brute-force admission rule.
TEST(DynamicBand, MatchesCaseTableOracle) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 500; ++trial) {
    World w = empty_world(4, 4, 60);
    const VideoId v{5};
    const bool inL = std::uniform_int_distribution<int>(0, 1)(rng) == 1;
    const bool inR = std::uniform_int_distribution<int>(0, 1)(rng) == 1;
    if (inL) w.proxies[3].cache.preload(v);
    if (inR) w.proxies[1].cache.preload(v);
    std::map<int, Rate> freeOf;
    for (int link : {w.proxies[0].lpsLink, w.proxies[0].rpsLink, w.proxies[0].cmsLink}) {
      const Rate used = std::uniform_int_distribution<Rate>(0, 60)(rng);
      if (used > 0) occupy(w, link, used, 100 + static_cast<AllocId>(link));
      freeOf[link] = 60 - used;
    }
    const auto cls = kAllClasses[std::uniform_int_distribution<std::size_t>(0, 2)(rng)];
    const VideoMeta& meta = w.video(v);
    auto admits = [&](int link) { return freeOf[link] >= meta.minBw[cls]; };  // fixtures hold no excess

    RouteSource expected = RouteSource::Rejected;
    const int l = w.proxies[0].lpsLink, r = w.proxies[0].rpsLink, c = w.proxies[0].cmsLink;
    if (inL && inR) {
      const int first = freeOf[l] > freeOf[r] ? l : r;
      if (admits(first)) expected = first == l ? RouteSource::FromLPS : RouteSource::FromRPS;
    } else if (inL) {
      if (admits(l)) expected = RouteSource::FromLPS;
    } else if (inR) {
      if (admits(r)) expected = RouteSource::FromRPS;
    }
    if (expected == RouteSource::Rejected && admits(c)) expected = RouteSource::FromCMS;

    const auto d = dynamic_band(w, 0, meta, cls);
    EXPECT_EQ(d.source, expected) << "trial " << trial;
  }
}

TEST(BuildWorld, InitialPlacementCensus) {
  std::mt19937_64 rng(5);
  CatalogParams cp;
  const Catalog catalog = build_catalog(cp, rng);
  World w = build_world(catalog, TopologyParams{}, rng);
  ASSERT_EQ(w.proxies.size(), 6u);
  ASSERT_EQ(w.links.size(), 18u);
  std::vector<int> copies(480, 0);
  for (const auto& ps : w.proxies) {
    std::array<int, 3> census{};
    for (const auto& [v, e] : ps.cache.entries()) {
      census[index_of(w.video(v).tier)] += 1;
      copies[v.index()] += 1;
    }
    EXPECT_EQ(census, (std::array<int, 3>{40, 40, 80}));
    EXPECT_EQ(ps.cache.size(), 160u);
  }
  // 6 x 40 of 120 and 6 x 80 of 240: every video placed exactly twice.
  for (int n : copies) EXPECT_EQ(n, 2);

  std::ostringstream dump;
  write_placement(dump, w, 0.0);
  EXPECT_NE(dump.str().find("proxy 0 size 160 most 40 secondary 40 least 80:"), std::string::npos);
}

TEST(ProxyServer, LocalCountOverridesSmallerGlobalWeight) {
  World w = empty_world();
  auto& ps = w.proxies[0];
  ps.tourWeights.set(VideoId{3}, UserClass::Class1, 6);
  EXPECT_EQ(ps.weight_of(VideoId{3}, UserClass::Class1, w.profits), 6);
  for (int i = 0; i < 3; ++i) ps.localCounts.record(VideoId{3}, UserClass::Class1);
  EXPECT_EQ(ps.weight_of(VideoId{3}, UserClass::Class1, w.profits), 9);
}
