#pragma once

// Catalog, user classes, demand counts and the weights derived from them.
// Everything here is plain data plus pure functions.

#include <algorithm>
#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vodsim {

/// Raised for invalid configuration or malformed input files.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Rate = std::int64_t;    // MB/s
using Megabytes = std::int64_t;
using Weight = std::int64_t;
using Profit = std::int64_t;

struct VideoId {
  std::uint32_t value = 0;

  constexpr std::size_t index() const { return value; }
  friend constexpr auto operator<=>(VideoId, VideoId) = default;
};

enum class UserClass : std::uint8_t { Class1 = 0, Class2 = 1, Class3 = 2 };

inline constexpr std::size_t kClassCount = 3;
inline constexpr std::array<UserClass, kClassCount> kAllClasses = {
    UserClass::Class1, UserClass::Class2, UserClass::Class3};

constexpr std::size_t index_of(UserClass c) { return static_cast<std::size_t>(c); }

/// 1-based class number as used in report file names.
constexpr int class_number(UserClass c) { return static_cast<int>(c) + 1; }

/// Fixed-size table indexed by UserClass.
template <class T>
struct PerClass {
  std::array<T, kClassCount> values{};

  constexpr T& operator[](UserClass c) { return values[index_of(c)]; }
  constexpr const T& operator[](UserClass c) const { return values[index_of(c)]; }

  friend constexpr bool operator==(const PerClass&, const PerClass&) = default;
};

enum class PopularityTier : std::uint8_t { MostPopular = 0, SecondaryPopular = 1, LeastPopular = 2 };

inline constexpr std::array<PopularityTier, 3> kAllTiers = {
    PopularityTier::MostPopular, PopularityTier::SecondaryPopular, PopularityTier::LeastPopular};

constexpr std::size_t index_of(PopularityTier t) { return static_cast<std::size_t>(t); }

inline std::string_view tier_name(PopularityTier t) {
  switch (t) {
    case PopularityTier::MostPopular: return "most";
    case PopularityTier::SecondaryPopular: return "secondary";
    case PopularityTier::LeastPopular: return "least";
  }
  return "?";
}

inline PopularityTier parse_tier(std::string_view s) {
  for (auto t : kAllTiers) {
    if (tier_name(t) == s) return t;
  }
  throw ConfigError("unknown popularity tier '" + std::string(s) + "'");
}

/// Census sizes of the three tiers for a catalog of `nov` videos: nov/4, nov/4, nov/2.
inline std::array<std::size_t, 3> tier_census(std::size_t nov) {
  if (nov == 0 || nov % 4 != 0) {
    throw ConfigError("NOV must be a positive multiple of 4, got " + std::to_string(nov));
  }
  return {nov / 4, nov / 4, nov / 2};
}

struct VideoMeta {
  VideoId id;
  Megabytes size = 0;
  PopularityTier tier = PopularityTier::LeastPopular;
  PerClass<Rate> minBw;
  PerClass<Rate> maxBw;
  double arrivalRate = 0.0;  // requests/s
};

using Catalog = std::vector<VideoMeta>;

struct RateRange {
  Rate lo = 0;
  Rate hi = 0;

  constexpr bool contains(Rate r) const { return lo <= r && r <= hi; }
};

/// Per-class Max/Min bandwidth ranges in MB/s.
struct BandwidthTable {
  PerClass<RateRange> maxRange{{RateRange{24, 29}, RateRange{18, 23}, RateRange{12, 17}}};
  PerClass<RateRange> minRange{{RateRange{8, 11}, RateRange{6, 8}, RateRange{4, 6}}};
};

/// Checks the per-video invariants: positive size, 0 < min < max, ids equal positions.
inline void validate_catalog(std::span<const VideoMeta> catalog) {
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    const auto& v = catalog[i];
    if (v.id.index() != i) throw ConfigError("catalog ids must be dense and ordered");
    if (v.size <= 0) throw ConfigError("video " + std::to_string(i) + " has non-positive size");
    if (v.arrivalRate < 0.0) throw ConfigError("video " + std::to_string(i) + " has negative rate");
    for (auto c : kAllClasses) {
      if (!(0 < v.minBw[c] && v.minBw[c] < v.maxBw[c])) {
        throw ConfigError("video " + std::to_string(i) + " violates 0 < minBW < maxBW");
      }
    }
  }
}

/// P_i = lambda_i / sum(lambda).
inline std::vector<double> request_probability(std::span<const VideoMeta> catalog) {
  if (catalog.empty()) throw std::invalid_argument("degenerate catalog");
  double total = 0.0;
  for (const auto& v : catalog) {
    if (v.arrivalRate < 0.0) throw std::invalid_argument("negative arrival rate");
    total += v.arrivalRate;
  }
  if (!(total > 0.0)) throw std::invalid_argument("degenerate catalog");
  std::vector<double> p;
  p.reserve(catalog.size());
  for (const auto& v : catalog) p.push_back(v.arrivalRate / total);
  return p;
}

/// Request counts k_ij per (video, class) with the per-video totals k_i.
class DemandProfile {
 public:
  DemandProfile() = default;
  explicit DemandProfile(std::size_t videos) : counts_(videos), totals_(videos, 0) {}

  std::size_t size() const { return counts_.size(); }
  bool contains(VideoId v) const { return v.index() < counts_.size(); }

  std::int64_t count(VideoId v, UserClass c) const { return counts_.at(v.index())[c]; }
  std::int64_t total(VideoId v) const { return totals_.at(v.index()); }

  void record(VideoId v, UserClass c) {
    counts_.at(v.index())[c] += 1;
    totals_[v.index()] += 1;
  }

  std::int64_t grand_total() const {
    return std::accumulate(totals_.begin(), totals_.end(), std::int64_t{0});
  }

  /// Cell-wise sum.
  DemandProfile& operator+=(const DemandProfile& other) {
    if (other.size() != size()) throw std::invalid_argument("demand profiles differ in size");
    for (std::size_t i = 0; i < counts_.size(); ++i) {
      for (auto c : kAllClasses) counts_[i][c] += other.counts_[i][c];
      totals_[i] += other.totals_[i];
    }
    return *this;
  }

  friend bool operator==(const DemandProfile&, const DemandProfile&) = default;

 private:
  std::vector<PerClass<std::int64_t>> counts_;
  std::vector<std::int64_t> totals_;
};

inline void record_request(DemandProfile& counts, VideoId video, UserClass cls) {
  counts.record(video, cls);
}

/// w_ij = k_ij * p_j
inline Weight compute_weight(const DemandProfile& counts, VideoId video, UserClass cls, Profit profit) {
  if (!counts.contains(video)) {
    throw std::out_of_range("unknown video " + std::to_string(video.value));
  }
  return counts.count(video, cls) * profit;
}

class WeightProfile {
 public:
  WeightProfile() = default;
  explicit WeightProfile(std::size_t videos) : weights_(videos) {}

  std::size_t size() const { return weights_.size(); }
  Weight at(VideoId v, UserClass c) const { return weights_.at(v.index())[c]; }
  void set(VideoId v, UserClass c, Weight w) { weights_.at(v.index())[c] = w; }

  friend bool operator==(const WeightProfile&, const WeightProfile&) = default;

 private:
  std::vector<PerClass<Weight>> weights_;
};

inline WeightProfile derive_weights(const DemandProfile& counts, const PerClass<Profit>& profits) {
  WeightProfile w(counts.size());
  for (std::uint32_t i = 0; i < counts.size(); ++i) {
    for (auto c : kAllClasses) w.set(VideoId{i}, c, compute_weight(counts, VideoId{i}, c, profits[c]));
  }
  return w;
}

/// Ranks videos by k_i (descending, ties by ascending id) and cuts the ranking
/// into nov/4 most popular, nov/4 secondary and nov/2 least popular.
inline std::vector<PopularityTier> retier_by_rank(const DemandProfile& counts, std::size_t nov) {
  const auto census = tier_census(nov);
  if (counts.size() != nov) throw ConfigError("demand profile size does not match NOV");

  std::vector<std::uint32_t> order(nov);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return counts.total(VideoId{a}) > counts.total(VideoId{b});
  });

  std::vector<PopularityTier> tiers(nov, PopularityTier::LeastPopular);
  for (std::size_t rank = 0; rank < nov; ++rank) {
    PopularityTier t = PopularityTier::LeastPopular;
    if (rank < census[0]) {
      t = PopularityTier::MostPopular;
    } else if (rank < census[0] + census[1]) {
      t = PopularityTier::SecondaryPopular;
    }
    tiers[order[rank]] = t;
  }
  return tiers;
}

struct CatalogParams {
  std::size_t nov = 480;
  RateRange sizeRange{2000, 6000};  // MB
  BandwidthTable bandwidth;
  std::array<double, 3> tierMix{0.50, 0.35, 0.15};
  double totalArrivalRate = 1.0;
};

/// Builds a catalog: ids [0, nov/4) most popular, [nov/4, nov/2) secondary, the
/// rest least popular. Sizes and per-class Min/Max rates are drawn uniformly from
/// their integer ranges; lambda_i = totalRate * tierShare / tierSize.
template <class Rng>
Catalog build_catalog(const CatalogParams& params, Rng& rng) {
  const auto census = tier_census(params.nov);
  Catalog catalog;
  catalog.reserve(params.nov);
  auto draw = [&rng](RateRange r) { return std::uniform_int_distribution<Rate>(r.lo, r.hi)(rng); };
  for (std::uint32_t i = 0; i < params.nov; ++i) {
    VideoMeta v;
    v.id = VideoId{i};
    if (i < census[0]) {
      v.tier = PopularityTier::MostPopular;
    } else if (i < census[0] + census[1]) {
      v.tier = PopularityTier::SecondaryPopular;
    } else {
      v.tier = PopularityTier::LeastPopular;
    }
    v.size = draw(params.sizeRange);
    for (auto c : kAllClasses) {
      v.maxBw[c] = draw(params.bandwidth.maxRange[c]);
      v.minBw[c] = draw(params.bandwidth.minRange[c]);
    }
    const auto t = index_of(v.tier);
    v.arrivalRate = params.totalArrivalRate * params.tierMix[t] / static_cast<double>(census[t]);
    catalog.push_back(v);
  }
  validate_catalog(catalog);
  return catalog;
}

// Plain-text catalog: one row per video,
//   id size tier min1 max1 min2 max2 min3 max3 lambda
// whitespace separated, '#' starts a comment line.

inline void write_catalog(std::ostream& out, std::span<const VideoMeta> catalog) {
  out << "# id size tier min1 max1 min2 max2 min3 max3 lambda\n";
  for (const auto& v : catalog) {
    std::ostringstream lambda;
    lambda.precision(std::numeric_limits<double>::max_digits10);
    lambda << v.arrivalRate;
    out << v.id.value << ' ' << v.size << ' ' << tier_name(v.tier);
    for (auto c : kAllClasses) out << ' ' << v.minBw[c] << ' ' << v.maxBw[c];
    out << ' ' << lambda.str() << '\n';
  }
}

inline Catalog read_catalog(std::istream& in) {
  Catalog catalog;
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.empty() || line.front() == '#') continue;
    std::istringstream row(line);
    VideoMeta v;
    std::string tier;
    row >> v.id.value >> v.size >> tier;
    for (auto c : kAllClasses) row >> v.minBw[c] >> v.maxBw[c];
    row >> v.arrivalRate;
    std::string extra;
    if (row.fail() || (row >> extra)) {
      throw ConfigError("malformed catalog row at line " + std::to_string(lineNo));
    }
    v.tier = parse_tier(tier);
    catalog.push_back(v);
  }
  validate_catalog(catalog);
  return catalog;
}

}  // namespace vodsim
