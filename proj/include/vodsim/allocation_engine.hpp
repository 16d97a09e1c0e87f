#pragma once

// Bandwidth admission on a single capacity-bounded link.
//
// A request is admitted at its maximum rate when that fits, otherwise at its
// minimum rate. When even the minimum does not fit, excess bandwidth
// (rate - minRate) is reclaimed from live streams of the same class, lowest
// weight first, until the minimum is covered. If that is not possible the
// request is rejected and the link is left untouched.

#include <algorithm>
#include <array>
#include <concepts>
#include <cstdio>
#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "vodsim/core_model.hpp"

namespace vodsim {

enum class LinkKind : std::uint8_t { PsLps = 0, PsRps = 1, PsCms = 2 };

inline constexpr std::size_t kLinkKindCount = 3;
inline constexpr std::array<LinkKind, kLinkKindCount> kAllLinkKinds = {
    LinkKind::PsLps, LinkKind::PsRps, LinkKind::PsCms};

constexpr std::size_t index_of(LinkKind k) { return static_cast<std::size_t>(k); }

inline std::string_view link_kind_name(LinkKind k) {
  switch (k) {
    case LinkKind::PsLps: return "ps_lps";
    case LinkKind::PsRps: return "ps_rps";
    case LinkKind::PsCms: return "ps_cms";
  }
  return "?";
}

template <class T>
struct PerLinkKind {
  std::array<T, kLinkKindCount> values{};

  constexpr T& operator[](LinkKind k) { return values[index_of(k)]; }
  constexpr const T& operator[](LinkKind k) const { return values[index_of(k)]; }
};

using AllocId = std::uint64_t;

struct Allocation {
  AllocId id = 0;
  VideoId video;
  UserClass cls = UserClass::Class3;
  Rate rate = 0;
  Rate minRate = 0;
  Rate maxRate = 0;
  Megabytes size = 0;
  double startTime = 0.0;

  Rate excess() const { return rate - minRate; }
  friend bool operator==(const Allocation&, const Allocation&) = default;
};

enum class LedgerOp : std::uint8_t { Allocate, Reclaim, Release };

inline std::string_view ledger_op_name(LedgerOp op) {
  switch (op) {
    case LedgerOp::Allocate: return "allocate";
    case LedgerOp::Reclaim: return "reclaim";
    case LedgerOp::Release: return "release";
  }
  return "?";
}

/// One change of a link's committed bandwidth. `delta` is the signed change of
/// the link total; `rate` is the stream's rate after the operation.
struct LedgerEntry {
  double time = 0.0;
  int link = 0;
  LinkKind kind = LinkKind::PsCms;
  LedgerOp op = LedgerOp::Allocate;
  AllocId alloc = 0;
  VideoId video;
  UserClass cls = UserClass::Class3;
  Rate rate = 0;
  Rate delta = 0;
};

using Ledger = std::vector<LedgerEntry>;

inline void write_ledger_csv(std::ostream& out, const Ledger& ledger) {
  out << "time,link,kind,op,alloc_id,video,class,rate,delta\n";
  char buf[64];
  for (const auto& e : ledger) {
    std::snprintf(buf, sizeof buf, "%.6f", e.time);
    out << buf << ',' << e.link << ',' << link_kind_name(e.kind) << ',' << ledger_op_name(e.op) << ','
        << e.alloc << ',' << e.video.value << ',' << class_number(e.cls) << ',' << e.rate << ','
        << e.delta << '\n';
  }
}

/// A capacity-bounded channel holding live allocations. The mutators enforce
/// sum(rate) <= capacity and minRate <= rate <= maxRate; a violation is an
/// engine defect and throws std::logic_error.
class Link {
 public:
  Link(int id, LinkKind kind, Rate capacity, int owner = 0, int peer = -1)
      : id_(id), kind_(kind), capacity_(capacity), owner_(owner), peer_(peer) {
    if (capacity <= 0) throw ConfigError("link capacity must be positive");
  }

  int id() const { return id_; }
  LinkKind kind() const { return kind_; }
  Rate capacity() const { return capacity_; }
  /// Proxy whose requests this link carries.
  int owner() const { return owner_; }
  /// Source proxy at the far end, -1 for the central server.
  int peer() const { return peer_; }

  Rate used() const { return used_; }
  const std::vector<Allocation>& allocations() const { return allocations_; }

  const Allocation* find(AllocId id) const {
    auto it = std::find_if(allocations_.begin(), allocations_.end(),
                           [id](const Allocation& a) { return a.id == id; });
    return it == allocations_.end() ? nullptr : &*it;
  }

  void admit(const Allocation& a) {
    if (find(a.id) != nullptr) throw std::logic_error("duplicate allocation id");
    check_bounds(a.rate, a);
    if (used_ + a.rate > capacity_) throw std::logic_error("allocation exceeds link capacity");
    allocations_.push_back(a);
    used_ += a.rate;
  }

  void set_rate(AllocId id, Rate rate) {
    auto& a = mutable_find(id);
    check_bounds(rate, a);
    if (used_ - a.rate + rate > capacity_) throw std::logic_error("rate change exceeds link capacity");
    used_ += rate - a.rate;
    a.rate = rate;
  }

  Allocation remove(AllocId id) {
    auto it = std::find_if(allocations_.begin(), allocations_.end(),
                           [id](const Allocation& a) { return a.id == id; });
    if (it == allocations_.end()) throw std::invalid_argument("double release");
    Allocation a = *it;
    allocations_.erase(it);
    used_ -= a.rate;
    return a;
  }

  friend bool operator==(const Link&, const Link&) = default;

 private:
  static void check_bounds(Rate rate, const Allocation& a) {
    if (rate < a.minRate || rate > a.maxRate) {
      throw std::logic_error("allocation " + std::to_string(a.id) + " rate " + std::to_string(rate) +
                             " outside [" + std::to_string(a.minRate) + ", " + std::to_string(a.maxRate) + "]");
    }
  }

  Allocation& mutable_find(AllocId id) {
    auto it = std::find_if(allocations_.begin(), allocations_.end(),
                           [id](const Allocation& a) { return a.id == id; });
    if (it == allocations_.end()) throw std::logic_error("unknown allocation id");
    return *it;
  }

  int id_;
  LinkKind kind_;
  Rate capacity_;
  int owner_;
  int peer_;
  Rate used_ = 0;
  std::vector<Allocation> allocations_;
};

inline Rate free_bandwidth(const Link& link) { return link.capacity() - link.used(); }

template <class F>
concept WeightLookup = requires(const F& f, VideoId v, UserClass c) {
  { f(v, c) } -> std::convertible_to<Weight>;
};

struct ReclaimVictim {
  AllocId id = 0;
  Rate amount = 0;
  friend bool operator==(const ReclaimVictim&, const ReclaimVictim&) = default;
};

struct ReclaimPlan {
  std::vector<ReclaimVictim> victims;
  Rate totalReclaimed = 0;
  friend bool operator==(const ReclaimPlan&, const ReclaimPlan&) = default;
};

/// Plans how to cover `needed` MB/s on `link` for a request of class `cls`:
/// current free bandwidth first, then the excess of same-class allocations in
/// ascending (weight, video, allocId) order, taking only the remainder from the
/// last victim. Returns nullopt when free + total excess < needed. Pure.
template <WeightLookup WeightOf>
std::optional<ReclaimPlan> plan_reclaim(const Link& link, UserClass cls, Rate needed, const WeightOf& weightOf) {
  if (needed <= 0) throw std::invalid_argument("plan_reclaim needs a positive amount");

  struct Candidate {
    Weight weight;
    VideoId video;
    AllocId id;
    Rate excess;
  };
  std::vector<Candidate> candidates;
  Rate totalExcess = 0;
  for (const auto& a : link.allocations()) {
    if (a.cls != cls || a.excess() <= 0) continue;
    candidates.push_back({static_cast<Weight>(weightOf(a.video, a.cls)), a.video, a.id, a.excess()});
    totalExcess += a.excess();
  }

  const Rate free = free_bandwidth(link);
  if (free + totalExcess < needed) return std::nullopt;

  std::sort(candidates.begin(), candidates.end(), [](const Candidate& x, const Candidate& y) {
    if (x.weight != y.weight) return x.weight < y.weight;
    if (x.video != y.video) return x.video < y.video;
    return x.id < y.id;
  });

  ReclaimPlan plan;
  Rate remaining = needed - std::min(free, needed);
  for (const auto& c : candidates) {
    if (remaining == 0) break;
    const Rate take = std::min(c.excess, remaining);
    plan.victims.push_back({c.id, take});
    plan.totalReclaimed += take;
    remaining -= take;
  }
  return plan;
}

enum class AdmitLevel : std::uint8_t { Max, Min, Reclaimed, Rejected };

struct RateChange {
  AllocId id = 0;
  Rate oldRate = 0;
  Rate newRate = 0;
};

struct BaResult {
  AdmitLevel level = AdmitLevel::Rejected;
  std::optional<Allocation> allocation;
  ReclaimPlan reclaimed;
  std::vector<RateChange> rateChanges;

  bool admitted() const { return level != AdmitLevel::Rejected; }
};

namespace detail {
inline void log(Ledger* ledger, const Link& link, double now, LedgerOp op, const Allocation& a, Rate rate,
                Rate delta) {
  if (ledger == nullptr) return;
  ledger->push_back({now, link.id(), link.kind(), op, a.id, a.video, a.cls, rate, delta});
}
}  // namespace detail

/// Admits one stream of `video` for class `cls` on `link` (max, then min, then
/// reclaim). All-or-nothing: on rejection the link is unchanged.
template <WeightLookup WeightOf>
BaResult ba_allocate(Link& link, const VideoMeta& video, UserClass cls, const WeightOf& weightOf, AllocId id,
                     double now = 0.0, Ledger* ledger = nullptr) {
  Allocation a;
  a.id = id;
  a.video = video.id;
  a.cls = cls;
  a.minRate = video.minBw[cls];
  a.maxRate = video.maxBw[cls];
  a.size = video.size;
  a.startTime = now;

  BaResult result;
  const Rate free = free_bandwidth(link);
  if (free >= a.maxRate) {
    a.rate = a.maxRate;
    result.level = AdmitLevel::Max;
  } else if (free >= a.minRate) {
    a.rate = a.minRate;
    result.level = AdmitLevel::Min;
  } else {
    auto plan = plan_reclaim(link, cls, a.minRate, weightOf);
    if (!plan) return result;
    for (const auto& v : plan->victims) {
      const Allocation& victim = *link.find(v.id);
      const Rate oldRate = victim.rate;
      link.set_rate(v.id, oldRate - v.amount);
      result.rateChanges.push_back({v.id, oldRate, oldRate - v.amount});
      detail::log(ledger, link, now, LedgerOp::Reclaim, victim, victim.rate, -v.amount);
    }
    result.reclaimed = std::move(*plan);
    a.rate = a.minRate;
    result.level = AdmitLevel::Reclaimed;
  }
  link.admit(a);
  detail::log(ledger, link, now, LedgerOp::Allocate, a, a.rate, a.rate);
  result.allocation = a;
  return result;
}

/// Removes a live allocation and returns the bandwidth it held.
inline Rate release(Link& link, AllocId id, double now = 0.0, Ledger* ledger = nullptr) {
  const Allocation a = link.remove(id);
  detail::log(ledger, link, now, LedgerOp::Release, a, 0, -a.rate);
  return a.rate;
}

}  // namespace vodsim
