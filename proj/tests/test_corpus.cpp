#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "test_support.hpp"
#include "tradenet/corpus.hpp"
#include "tradenet/synthetic.hpp"

using namespace tradenet;
using namespace tradenet::corpus;
using testing_support::TempDir;

namespace {

const std::string kFlowHeader = "reporter,partner,year,direction,value_usd\n";

std::vector<CountryRecord> three_countries() {
  return {{"AAA", "A", 0.0, 0.0, {}}, {"BBB", "B", 0.0, 10.0, {}}, {"CCC", "C", 10.0, 0.0, {}}};
}

}  // namespace

TEST(LoadFlows, ParsesImportRow) {
  TempDir dir("flows");
  const auto p = dir.write("f.csv", kFlowHeader + "USA,CHN,2007,import,321442865091\n");
  const auto load = load_flows(p, 2007);
  ASSERT_EQ(load.table.entries.size(), 1u);
  const auto it = load.table.entries.find({"USA", "CHN", Direction::Import});
  ASSERT_NE(it, load.table.entries.end());
  EXPECT_DOUBLE_EQ(it->second, 321442865091.0);
}

TEST(LoadFlows, EmptyFileGivesEmptyTable) {
  TempDir dir("flows");
  const auto p = dir.write("f.csv", "");
  EXPECT_TRUE(load_flows(p, 2007).table.entries.empty());
  const auto q = dir.write("g.csv", kFlowHeader);
  EXPECT_TRUE(load_flows(q, 2007).table.entries.empty());
}

TEST(LoadFlows, NegativeValueRejectedOthersKept) {
  TempDir dir("flows");
  const auto p = dir.write("f.csv", kFlowHeader + "AAA,BBB,2007,import,-5\nAAA,CCC,2007,import,7\n");
  const auto load = load_flows(p, 2007);
  EXPECT_EQ(load.table.entries.size(), 1u);
  EXPECT_EQ(load.diagnostics.rejected_rows, 1u);
  ASSERT_EQ(load.diagnostics.messages.size(), 1u);
  EXPECT_NE(load.diagnostics.messages[0].find(":2:"), std::string::npos);
}

TEST(LoadFlows, NonNumericSelfPairAndDirectionRejected) {
  TempDir dir("flows");
  const auto p = dir.write("f.csv", kFlowHeader +
                                        "AAA,BBB,2007,import,abc\n"
                                        "AAA,AAA,2007,import,1\n"
                                        "AAA,BBB,2007,sideways,1\n"
                                        "AAA,BBB,2007,import,inf\n");
  const auto load = load_flows(p, 2007);
  EXPECT_TRUE(load.table.entries.empty());
  EXPECT_EQ(load.diagnostics.rejected_rows, 4u);
}

TEST(LoadFlows, MissingFileAndMalformedRowsAreErrors) {
  TempDir dir("flows");
  EXPECT_THROW(load_flows(dir / "nope.csv", 2007), DataError);
  const auto bad = dir.write("bad.csv", kFlowHeader + "AAA,BBB,2007,import\n");
  try {
    load_flows(bad, 2007);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
  const auto hdr = dir.write("hdr.csv", "a,b,c\n");
  EXPECT_THROW(load_flows(hdr, 2007), DataError);
}

TEST(LoadFlows, UnknownIsoSkippedAndCounted) {
  TempDir dir("flows");
  const auto p = dir.write("f.csv", kFlowHeader + "AAA,ZZZ,2007,import,1\nAAA,BBB,2007,import,2\n");
  const std::set<std::string> known{"AAA", "BBB"};
  const auto load = load_flows(p, 2007, &known);
  EXPECT_EQ(load.table.entries.size(), 1u);
  EXPECT_EQ(load.diagnostics.unknown_iso_rows, 1u);
}

TEST(LoadFlows, OnlyRequestedYear) {
  TempDir dir("flows");
  const auto p = dir.write("f.csv", kFlowHeader + "AAA,BBB,2007,import,1\nAAA,BBB,2008,import,2\n");
  const auto load = load_flows(p, 2008);
  ASSERT_EQ(load.table.entries.size(), 1u);
  EXPECT_EQ(load.table.entries.begin()->second, 2.0);
}

TEST(LoadFlows, ConflictingDuplicatesIndependentOfRowOrder) {
  TempDir dir("flows");
  const auto a = dir.write("a.csv", kFlowHeader + "AAA,BBB,2007,import,5\nAAA,BBB,2007,import,9\n");
  const auto b = dir.write("b.csv", kFlowHeader + "AAA,BBB,2007,import,9\nAAA,BBB,2007,import,5\n");
  const auto la = load_flows(a, 2007);
  const auto lb = load_flows(b, 2007);
  EXPECT_EQ(la.table.entries, lb.table.entries);
  EXPECT_EQ(la.diagnostics.duplicate_rows, 1u);
  EXPECT_EQ(la.table.entries.begin()->second, 9.0);
}

TEST(MergeFlows, ImporterPreferred) {
  FlowTable t;
  t.entries[{"BBB", "AAA", Direction::Import}] = 100.0;
  t.entries[{"AAA", "BBB", Direction::Export}] = 90.0;
  const auto F = merge_flows(t, {"AAA", "BBB"});
  EXPECT_EQ(F(0, 1), 100.0);
}

TEST(MergeFlows, ExporterSupplements) {
  FlowTable t;
  t.entries[{"AAA", "BBB", Direction::Export}] = 90.0;
  const auto F = merge_flows(t, {"AAA", "BBB"});
  EXPECT_EQ(F(0, 1), 90.0);
  EXPECT_EQ(F(1, 0), 0.0);
}

TEST(MergeFlows, BothAbsentIsZero) {
  const auto F = merge_flows(FlowTable{}, {"AAA", "BBB", "CCC"});
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(F(i, j), 0.0);
}

TEST(MergeFlows, IdempotentAndRowOrderIndependent) {
  synthetic::CorpusSpec spec;
  spec.countries = 12;
  const auto c = synthetic::generate(spec);
  std::vector<std::string> isos;
  for (const auto& r : c.coordinates) isos.push_back(r.iso);
  std::sort(isos.begin(), isos.end());

  std::string text = kFlowHeader;
  std::vector<std::string> lines;
  for (const auto& [k, v] : c.flows.entries)
    lines.push_back(k.reporter + "," + k.partner + ",2007," + to_string(k.direction) + "," + format_exact(v) + "\n");
  TempDir dir("merge");
  std::string fwd = kFlowHeader, rev = kFlowHeader;
  for (const auto& l : lines) fwd += l;
  std::mt19937 rng(3);
  std::shuffle(lines.begin(), lines.end(), rng);
  for (const auto& l : lines) rev += l;
  const auto a = load_flows(dir.write("a.csv", fwd), 2007).table;
  const auto b = load_flows(dir.write("b.csv", rev), 2007).table;
  const auto Fa = merge_flows(a, isos);
  EXPECT_EQ(Fa, merge_flows(b, isos));
  EXPECT_EQ(Fa, merge_flows(a, isos));
}

TEST(GreatCircle, Examples) {
  EXPECT_EQ(great_circle_distance({0, 0}, {0, 0}), 0.0);
  EXPECT_NEAR(great_circle_distance({0, 0}, {0, 180}), 6371.0 * std::numbers::pi, 1e-9);
  EXPECT_NEAR(great_circle_distance({0, 0}, {0, 180}), 20015.09, 0.01);
  EXPECT_NEAR(great_circle_distance({0, 0}, {0, 90}), 6371.0 * std::numbers::pi / 2.0, 1e-9);
  EXPECT_NEAR(great_circle_distance({0, 0}, {0, 90}), 10007.54, 0.01);
}

TEST(GreatCircle, MetricPropertiesOnRandomTriples) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> lat(-90.0, 90.0);
  std::uniform_real_distribution<double> lon(-179.999999, 180.0);
  for (int t = 0; t < 1000; ++t) {
    const LatLon a{lat(rng), lon(rng)}, b{lat(rng), lon(rng)}, c{lat(rng), lon(rng)};
    const double ab = great_circle_distance(a, b);
    const double ba = great_circle_distance(b, a);
    const double bc = great_circle_distance(b, c);
    const double ac = great_circle_distance(a, c);
    EXPECT_EQ(ab, ba);
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ac, ab + bc + 1e-9);
    EXPECT_LE(ab, std::numbers::pi * kEarthRadiusKm + 1e-9);
  }
}

TEST(GreatCircle, ZeroOnlyForCoincidentPoints) {
  EXPECT_GT(great_circle_distance({10, 10}, {10, 10.0001}), 0.0);
  EXPECT_EQ(great_circle_distance({-33.5, 151.2}, {-33.5, 151.2}), 0.0);
}

TEST(Loaders, CoordinatesDuplicateIsoNamed) {
  TempDir dir("coords");
  const auto p = dir.write("c.csv", "iso,name,mean_lat,mean_lon\nAAA,A,0,0\nAAA,A2,1,1\n");
  try {
    load_coordinates(p);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("AAA"), std::string::npos);
  }
}

TEST(Loaders, CoordinatesOutOfRange) {
  TempDir dir("coords");
  EXPECT_THROW(load_coordinates(dir.write("a.csv", "iso,name,mean_lat,mean_lon\nAAA,A,91,0\n")), DataError);
  EXPECT_THROW(load_coordinates(dir.write("b.csv", "iso,name,mean_lat,mean_lon\nAAA,A,0,-180\n")), DataError);
  EXPECT_NO_THROW(load_coordinates(dir.write("c.csv", "iso,name,mean_lat,mean_lon\nAAA,A,-90,180\n")));
}

TEST(Loaders, QuotedNamesParse) {
  TempDir dir("coords");
  const auto c = load_coordinates(dir.write("a.csv", "iso,name,mean_lat,mean_lon\nKOR,\"Korea, Rep.\",36.5,127.9\n"));
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].name, "Korea, Rep.");
}

TEST(Loaders, GdpRejectsNonPositiveAndFlagsDuplicates) {
  TempDir dir("gdp");
  LoadDiagnostics diag;
  const auto g = load_gdp(dir.write("g.csv", "iso,year,gdp_usd\nAAA,2007,0\nBBB,2007,5\n"), &diag);
  EXPECT_EQ(diag.rejected_rows, 1u);
  EXPECT_FALSE(g.contains("AAA"));
  EXPECT_THROW(load_gdp(dir.write("h.csv", "iso,year,gdp_usd\nAAA,2007,1\nAAA,2007,2\n")), DataError);
}

TEST(Loaders, UnionsFile) {
  TempDir dir("unions");
  const auto u = load_unions(dir.write("u.txt", "# comment\nEU,DEU;FRA; ITA\n\nNAFTA,USA;CAN;MEX\n"));
  ASSERT_EQ(u.unions.size(), 2u);
  EXPECT_EQ(u.unions.at("EU"), (std::set<std::string>{"DEU", "FRA", "ITA"}));
  EXPECT_EQ(u.unions.at("NAFTA").size(), 3u);
  EXPECT_THROW(load_unions(dir.write("v.txt", "EU DEU\n")), DataError);
  EXPECT_THROW(load_unions(dir / "missing.txt"), DataError);
}

TEST(BuildPanel, SyntheticWithGdpGaps) {
  synthetic::CorpusSpec spec;
  spec.countries = 198;
  spec.regions = 6;
  spec.gdp_gaps = 5;
  const auto c = synthetic::generate(spec);
  const auto b = synthetic::to_panel(c, 2007);
  EXPECT_EQ(b.panel.size(), 193u);
  ASSERT_EQ(b.excluded.size(), 5u);
  for (const auto& e : b.excluded) EXPECT_NE(e.reason.find("GDP"), std::string::npos);
}

TEST(BuildPanel, CountryWithoutFlowsExcluded) {
  FlowTable t;
  t.year = 2007;
  t.entries[{"AAA", "BBB", Direction::Export}] = 1.0;
  t.entries[{"BBB", "CCC", Direction::Export}] = 1.0;
  auto coords = three_countries();
  coords.push_back({"DDD", "D", 5.0, 5.0, {}});
  std::map<std::string, std::map<int, double>> gdp{
      {"AAA", {{2007, 1.0}}}, {"BBB", {{2007, 1.0}}}, {"CCC", {{2007, 1.0}}}, {"DDD", {{2007, 1.0}}}};
  const auto b = build_panel(2007, t, gdp, coords, {});
  EXPECT_EQ(b.panel.size(), 3u);
  ASSERT_EQ(b.excluded.size(), 1u);
  EXPECT_EQ(b.excluded[0].iso, "DDD");
}

TEST(BuildPanel, ErrorsOnDuplicatesTooFewAndUnknownUnionMember) {
  FlowTable t;
  t.entries[{"AAA", "BBB", Direction::Export}] = 1.0;
  t.entries[{"BBB", "CCC", Direction::Export}] = 1.0;
  std::map<std::string, std::map<int, double>> gdp{{"AAA", {{2007, 1.0}}}, {"BBB", {{2007, 1.0}}}, {"CCC", {{2007, 1.0}}}};
  auto dup = three_countries();
  dup.push_back({"AAA", "again", 1.0, 1.0, {}});
  EXPECT_THROW(build_panel(2007, t, gdp, dup, {}), DataError);

  auto few = gdp;
  few.erase("CCC");
  EXPECT_THROW(build_panel(2007, t, few, three_countries(), {}), DataError);

  UnionRegistry u;
  u.unions["X"] = {"AAA", "QQQ"};
  EXPECT_THROW(build_panel(2007, t, gdp, three_countries(), u), DataError);
}

TEST(BuildPanel, InvariantsAndDeterminism) {
  const auto c = synthetic::generate({});
  const auto a = synthetic::to_panel(c, 2007).panel;
  const auto b = synthetic::to_panel(c, 2007).panel;
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
  const auto isos = a.iso_codes();
  EXPECT_TRUE(std::is_sorted(isos.begin(), isos.end()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.distance(i, i), 0.0);
    EXPECT_EQ(a.flow(i, i), 0.0);
    EXPECT_GT(a.gdp[i], 0.0);
    for (std::size_t j = 0; j < a.size(); ++j) {
      EXPECT_EQ(a.distance(i, j), a.distance(j, i));
      if (i != j) {
        EXPECT_GE(a.distance(i, j), kMinDistanceKm);
      }
    }
  }
}

TEST(BuildPanel, CoincidentPositionsFloored) {
  FlowTable t;
  t.entries[{"AAA", "BBB", Direction::Export}] = 1.0;
  t.entries[{"BBB", "CCC", Direction::Export}] = 1.0;
  std::vector<CountryRecord> coords{{"AAA", "A", 1.0, 1.0, {}}, {"BBB", "B", 1.0, 1.0, {}}, {"CCC", "C", 2.0, 2.0, {}}};
  std::map<std::string, std::map<int, double>> gdp{{"AAA", {{2007, 1.0}}}, {"BBB", {{2007, 1.0}}}, {"CCC", {{2007, 1.0}}}};
  const auto p = build_panel(2007, t, gdp, coords, {}).panel;
  EXPECT_EQ(p.distance(0, 1), 1.0);
}

TEST(BuildPanel, JsonRoundTrip) {
  const auto p = synthetic::to_panel(synthetic::generate({}), 2007).panel;
  const auto j = to_json(p);
  const auto q = panel_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(to_json(q).dump(), j.dump());
  EXPECT_EQ(q.flow, p.flow);
  EXPECT_EQ(q.distance, p.distance);
  EXPECT_EQ(q.gdp, p.gdp);
}

TEST(BuildPanel, FileLoadMatchesInMemory) {
  TempDir dir("panel");
  const auto c = synthetic::generate({});
  synthetic::write_corpus(c, dir.path());
  const auto coords = load_coordinates(dir / "coordinates.csv");
  std::set<std::string> known;
  for (const auto& r : coords) known.insert(r.iso);
  const auto flows = load_flows(dir / "flows.csv", 2007, &known);
  EXPECT_EQ(flows.diagnostics.rejected_rows, 0u);
  const auto p = build_panel(2007, flows.table, load_gdp(dir / "gdp.csv"), coords, load_unions(dir / "unions.txt")).panel;
  EXPECT_EQ(p.size(), 20u);
  EXPECT_EQ(p.unions.unions.at("UNION_A").size(), 5u);
  EXPECT_EQ(p.flow, synthetic::to_panel(c, 2007).panel.flow);
}
