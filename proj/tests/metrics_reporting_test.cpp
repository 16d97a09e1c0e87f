#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "vodsim/reports.hpp"

using namespace vodsim;
namespace fs = std::filesystem;

namespace {

World small_world() {
  std::mt19937_64 rng(5);
  CatalogParams cp;
  cp.nov = 8;
  Catalog c = build_catalog(cp, rng);
  TopologyParams tp;
  tp.proxies = 2;
  tp.cacheCapacity = 4;
  return build_world(std::move(c), tp, rng);
}

Allocation stream(AllocId id, UserClass cls, Rate rate, Rate minRate, Rate maxRate) {
  Allocation a;
  a.id = id;
  a.video = VideoId{0};
  a.cls = cls;
  a.rate = rate;
  a.minRate = minRate;
  a.maxRate = maxRate;
  a.size = 1000;
  return a;
}

LedgerEntry delta(double t, LinkKind k, Rate d) {
  LedgerEntry e;
  e.time = t;
  e.kind = k;
  e.delta = d;
  return e;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("vodsim_metrics_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

SimConfig quick_config() {
  SimConfig cfg;
  cfg.NOV = 48;
  cfg.cacheCapacity = 16;
  cfg.horizon = 1000.0;
  cfg.totalArrivalRate = 1.0;
  cfg.seed = 11;
  return cfg;
}

}  // namespace

TEST(Snapshot, AveragesPerKindAndClass) {
  World w = small_world();
  Link& lps = w.links[static_cast<std::size_t>(w.proxies[0].lpsLink)];
  lps.admit(stream(1, UserClass::Class1, 24, 8, 24));
  lps.admit(stream(2, UserClass::Class1, 9, 9, 26));
  const auto s = snapshot(w, 40.0);
  const auto& p = s[LinkKind::PsLps][UserClass::Class1];
  EXPECT_EQ(p.time, 40.0);
  EXPECT_EQ(p.streamCount, 2u);
  EXPECT_DOUBLE_EQ(*p.avgMaxBw, 25.0);
  EXPECT_DOUBLE_EQ(*p.avgMinBw, 8.5);
  EXPECT_DOUBLE_EQ(*p.avgAllocBw, 16.5);
}

TEST(Snapshot, WorkedExample) {
  World w = small_world();
  Link& cms = w.links[2];
  cms.admit(stream(1, UserClass::Class1, 24, 8, 24));
  cms.admit(stream(2, UserClass::Class1, 8, 8, 26));
  const auto& p = snapshot(w, 0.0)[LinkKind::PsCms][UserClass::Class1];
  EXPECT_DOUBLE_EQ(*p.avgAllocBw, 16.0);
  EXPECT_DOUBLE_EQ(*p.avgMaxBw, 25.0);
  EXPECT_DOUBLE_EQ(*p.avgMinBw, 8.0);
}

TEST(Snapshot, EmptyHasNoAverages) {
  World w = small_world();
  const auto s = snapshot(w, 0.0);
  for (auto k : kAllLinkKinds) {
    for (auto c : kAllClasses) {
      EXPECT_EQ(s[k][c].streamCount, 0u);
      EXPECT_FALSE(s[k][c].avgAllocBw.has_value());
      EXPECT_FALSE(s[k][c].avgMaxBw.has_value());
    }
  }
}

TEST(Snapshot, AllAtMinimumEqualsAverageMinimum) {
  World w = small_world();
  Link& rps = w.links[static_cast<std::size_t>(w.proxies[1].rpsLink)];
  rps.admit(stream(1, UserClass::Class3, 4, 4, 12));
  rps.admit(stream(2, UserClass::Class3, 6, 6, 17));
  const auto& p = snapshot(w, 0.0)[LinkKind::PsRps][UserClass::Class3];
  EXPECT_DOUBLE_EQ(*p.avgAllocBw, *p.avgMinBw);
}

TEST(TimeAvgUtilization, Examples) {
  const std::vector<LinkInfo> one{{LinkKind::PsCms, 300}};
  EXPECT_DOUBLE_EQ(time_avg_utilization({delta(0, LinkKind::PsCms, 300)}, 100.0, one)[LinkKind::PsCms], 1.0);
  const Ledger half{delta(0, LinkKind::PsCms, 150), delta(50, LinkKind::PsCms, -150)};
  EXPECT_DOUBLE_EQ(time_avg_utilization(half, 100.0, one)[LinkKind::PsCms], 0.25);
  EXPECT_EQ(time_avg_utilization({}, 100.0, one)[LinkKind::PsCms], 0.0);
  const std::vector<LinkInfo> two{{LinkKind::PsLps, 100}, {LinkKind::PsLps, 100}};
  EXPECT_DOUBLE_EQ(time_avg_utilization({delta(0, LinkKind::PsLps, 100)}, 10.0, two)[LinkKind::PsLps], 0.5);
}

TEST(TimeAvgUtilization, MatchesSampledAverageOnARun) {
  SimConfig cfg = quick_config();
  cfg.samplePeriod = 0.5;
  const auto b = run(cfg);
  for (auto k : kAllLinkKinds) {
    double sum = 0.0;
    for (const auto& p : b.utilization[k]) sum += p.fraction;
    const double sampled = sum / static_cast<double>(b.utilization[k].size());
    EXPECT_NEAR(b.timeAvgUtilization[k], sampled, 0.02) << link_kind_name(k);
    EXPECT_GE(b.timeAvgUtilization[k], 0.0);
    EXPECT_LE(b.timeAvgUtilization[k], 1.0);
  }
}

TEST(MeanAllocPerStream, WeightsSamplesByStreamCount) {
  MetricsBundle b;
  SeriesPoint p1;
  p1.streamCount = 1;
  p1.avgAllocBw = 10.0;
  SeriesPoint p2;
  p2.streamCount = 3;
  p2.avgAllocBw = 20.0;
  SeriesPoint empty;
  b.series[LinkKind::PsRps][UserClass::Class2] = {p1, empty, p2};
  EXPECT_DOUBLE_EQ(*mean_alloc_per_stream(b, LinkKind::PsRps, UserClass::Class2), 17.5);
  EXPECT_FALSE(mean_alloc_per_stream(b, LinkKind::PsLps, UserClass::Class2).has_value());
  EXPECT_DOUBLE_EQ(*mean_alloc_per_stream(b, UserClass::Class2), 17.5);
}

TEST(EmitReports, WritesAllFilesWithHeaders) {
  RunReport r;
  r.config = quick_config();
  r.config.totalArrivalRate = 0.0;
  r.primary = run(r.config);
  const auto dir = fresh_dir("empty");
  emit_reports(r, dir);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    (void)e;
    ++files;
  }
  EXPECT_EQ(files, 14u);
  const std::string alloc = slurp(dir / "alloc_ps_lps_class1.csv");
  EXPECT_EQ(alloc.substr(0, alloc.find('\n')), "time,stream_count,avg_max_bw,avg_min_bw,avg_alloc_bw");
  EXPECT_NE(alloc.find("\n0.000000,0,,,\n"), std::string::npos);
  EXPECT_EQ(slurp(dir / "util_ps_cms.csv").substr(0, 17), "time,utilization\n");
  const std::string rej = slurp(dir / "rejections.csv");
  EXPECT_EQ(rej.substr(0, rej.find('\n')), "metric,psg,no_psg");
  EXPECT_NE(rej.find("\nrejected,0,\n"), std::string::npos);
  EXPECT_NE(slurp(dir / "summary.txt").find("CHECK:counter_conservation=PASS"), std::string::npos);
  fs::remove_all(dir);
}

TEST(EmitReports, SameSeedByteIdentical) {
  RunReport a, b;
  a.config = b.config = quick_config();
  a.primary = run(a.config);
  b.primary = run(b.config);
  const auto da = fresh_dir("a"), db = fresh_dir("b");
  emit_reports(a, da);
  emit_reports(b, db);
  for (const auto& e : fs::directory_iterator(da)) {
    EXPECT_EQ(slurp(e.path()), slurp(db / e.path().filename())) << e.path().filename();
  }
  fs::remove_all(da);
  fs::remove_all(db);
}

TEST(EmitReports, ComparisonFillsBothColumns) {
  RunReport r;
  r.config = quick_config();
  r.primary = run(r.config);
  r.noPsg = baseline_no_psg(r.config);
  const auto files = render_reports(r);
  std::istringstream in(files.at("rejections.csv"));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    const auto first = line.find(',');
    const auto second = line.find(',', first + 1);
    EXPECT_GT(second - first, 1u) << line;
    EXPECT_LT(second + 1, line.size()) << line;
  }
  EXPECT_NE(files.at("summary.txt").find("CHECK:psg_benefit="), std::string::npos);
}

TEST(EmitReports, UnwritableDirectoryFailsBeforeWriting) {
  RunReport r;
  r.config = quick_config();
  r.config.totalArrivalRate = 0.0;
  r.primary = run(r.config);
  const auto blocker = fresh_dir("blocker");
  { std::ofstream(blocker) << "not a directory"; }
  EXPECT_THROW(emit_reports(r, blocker / "out"), ReportError);
  EXPECT_FALSE(fs::exists(blocker / "out"));
  fs::remove_all(blocker);
}
