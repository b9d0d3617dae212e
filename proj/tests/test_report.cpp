#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "tradenet/report.hpp"
#include "tradenet/synthetic.hpp"

using namespace tradenet;
using namespace tradenet::report;

namespace {

gravity::ResistanceMatrix constant_union_matrix(std::size_t n, std::size_t members, double inside, double rest) {
  gravity::ResistanceMatrix R;
  for (std::size_t i = 0; i < n; ++i) R.countries.push_back("C" + std::to_string(10 + i));
  R.ln_r = SquareMatrix(n, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) R.ln_r(i, j) = R.ln_r(j, i) = (i < members && j < members) ? inside : rest;
  return R;
}

corpus::UnionRegistry first_k(const gravity::ResistanceMatrix& R, std::size_t k, const std::string& name = "U") {
  corpus::UnionRegistry u;
  for (std::size_t i = 0; i < k; ++i) u.unions[name].insert(R.countries[i]);
  return u;
}

double phi(double x, double m, double s) {
  return std::exp(-0.5 * (x - m) * (x - m) / (s * s)) / (s * std::sqrt(2.0 * std::numbers::pi));
}

}  // namespace

TEST(UnionTable, ConstantMeans) {
  const auto R = constant_union_matrix(8, 3, 10.0, 20.0);
  const auto t = union_resistance_table(R, first_k(R, 3));
  ASSERT_EQ(t.rows.size(), 1u);
  const auto& row = t.rows[0];
  EXPECT_EQ(row.mean_ln_r_member, 10.0);
  EXPECT_EQ(row.mean_ln_r_others, 20.0);
  EXPECT_EQ(row.member_pairs, 3u);
  EXPECT_EQ(row.other_pairs, 15u);
  EXPECT_NEAR(row.world_mean, (3 * 10.0 + 25 * 20.0) / 28.0, 1e-12);
}

TEST(UnionTable, FullCoverFlagged) {
  const auto R = constant_union_matrix(5, 5, 10.0, 20.0);
  const auto t = union_resistance_table(R, first_k(R, 5));
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_FALSE(t.rows[0].others_defined);
  EXPECT_TRUE(std::isnan(t.rows[0].mean_ln_r_others));
}

TEST(UnionTable, SmallUnionSkipped) {
  const auto R = constant_union_matrix(5, 1, 10.0, 20.0);
  auto u = first_k(R, 1);
  u.unions["EMPTY"] = {"ZZZ"};
  const auto t = union_resistance_table(R, u);
  EXPECT_TRUE(t.rows.empty());
  EXPECT_EQ(t.skipped.size(), 2u);
}

TEST(UnionTable, WorldMeanCrossCheck) {
  const auto panel = synthetic::to_panel(synthetic::generate({}), 2007).panel;
  const auto R = gravity::resistance_matrix(panel, {1.0, 1.0}, {0.0, 0.01});
  const auto t = union_resistance_table(R, panel.unions);
  ASSERT_EQ(t.rows.size(), 1u);
  const auto& row = t.rows[0];
  // recompute from raw pairs: member, mixed and outside-outside sums
  const auto& m = panel.unions.unions.at("UNION_A");
  double s_in = 0, s_mix = 0, s_out = 0;
  std::size_t n_in = 0, n_mix = 0, n_out = 0;
  for (std::size_t i = 0; i < R.size(); ++i)
    for (std::size_t j = i + 1; j < R.size(); ++j) {
      const int k = m.contains(R.countries[i]) + m.contains(R.countries[j]);
      (k == 2 ? s_in : k == 1 ? s_mix : s_out) += R.ln_r(i, j);
      ++(k == 2 ? n_in : k == 1 ? n_mix : n_out);
    }
  EXPECT_EQ(row.member_pairs, n_in);
  EXPECT_EQ(row.other_pairs, n_mix);
  EXPECT_NEAR(row.mean_ln_r_member, s_in / n_in, 1e-12);
  EXPECT_NEAR(row.mean_ln_r_others, s_mix / n_mix, 1e-12);
  const double combined = (row.mean_ln_r_member * n_in + row.mean_ln_r_others * n_mix + s_out) / (n_in + n_mix + n_out);
  EXPECT_NEAR(row.world_mean, combined, 1e-12);
  EXPECT_LT(row.mean_ln_r_member, row.mean_ln_r_others);
  const auto text = union_table_csv(t);
  EXPECT_NE(text.find("UNION_A"), std::string::npos);
}

TEST(Scatter, AllOnesAtUpperCorner) {
  const std::vector<std::string> c{"AAA", "BBB", "CCC", "DDD"};
  const auto tau = mixture::tau_matrix(4, std::vector<double>(6, 1.0));
  corpus::UnionRegistry u;
  u.unions["U"] = {"AAA", "BBB"};
  const auto pts = tpi_union_scatter(tau, c, u, SquareMatrix(4, 0.0));
  ASSERT_EQ(pts.size(), 2u);
  for (const auto& p : pts) {
    EXPECT_EQ(p.tpi_inside, 1.0);
    EXPECT_EQ(p.tpi_outside, 1.0);
  }
}

TEST(Scatter, NetFlowAndBalance) {
  const std::vector<std::string> c{"AAA", "BBB", "CCC"};
  SquareMatrix F(3, 0.0);
  F(0, 1) = 6.0;  // AAA exports 10 in total
  F(0, 2) = 4.0;
  F(1, 0) = 3.0;  // and imports 4
  F(2, 0) = 1.0;
  corpus::UnionRegistry u;
  u.unions["U"] = {"AAA", "BBB"};
  const auto pts = tpi_union_scatter(mixture::tau_matrix(3, std::vector<double>(3, 0.5)), c, u, F);
  ASSERT_EQ(pts.size(), 2u);
  EXPECT_EQ(pts[0].iso, "AAA");
  EXPECT_EQ(pts[0].net_flow, 6.0);
  EXPECT_EQ(pts[0].balance, Balance::Surplus);
  EXPECT_EQ(pts[1].net_flow, 3.0 - 6.0);
  EXPECT_EQ(pts[1].balance, Balance::Deficit);
  EXPECT_NE(scatter_csv(pts).find("surplus"), std::string::npos);
}

TEST(Scatter, PlantedUnionBelowDiagonal) {
  const std::size_t n = 12;
  std::vector<std::string> c;
  for (std::size_t i = 0; i < n; ++i) c.push_back("C" + std::to_string(10 + i));
  corpus::UnionRegistry u;
  for (std::size_t i = 0; i < 5; ++i) u.unions["U"].insert(c[i]);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> jitter(0.0, 0.01);
  SquareMatrix tau(n, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) tau(i, j) = tau(j, i) = ((i < 5 && j < 5) ? 0.9 : 0.4) + jitter(rng);
  const auto pts = tpi_union_scatter(tau, c, u, SquareMatrix(n, 0.0));
  ASSERT_EQ(pts.size(), 5u);
  for (const auto& p : pts) {
    EXPECT_NEAR(p.tpi_inside, 0.9, 0.02);
    EXPECT_NEAR(p.tpi_outside, 0.4, 0.02);
    EXPECT_LT(p.tpi_outside, p.tpi_inside);
  }
}

TEST(Histogram, ConstantInput) {
  const std::vector<double> v(17, 3.25);
  const auto h = histogram(v, 10);
  std::size_t occupied = 0;
  for (auto c : h.counts) occupied += c > 0;
  EXPECT_EQ(occupied, 1u);
  EXPECT_EQ(h.stddev, 0.0);
  EXPECT_EQ(h.mean, 3.25);
}

TEST(Histogram, ValidationAndCounts) {
  EXPECT_THROW(histogram(std::vector<double>{1.0, 2.0}, 0), ConfigError);
  EXPECT_THROW(histogram(std::vector<double>{}, 5), DataError);
  std::vector<double> v;
  for (int k = 0; k <= 100; ++k) v.push_back(k);
  const auto h = histogram(v, 10);
  ASSERT_EQ(h.counts.size(), 10u);
  ASSERT_EQ(h.edges.size(), 11u);
  std::size_t total = 0;
  for (auto c : h.counts) total += c;
  EXPECT_EQ(total, 101u);
  EXPECT_EQ(h.counts.back(), 11u);  // the maximum falls in the last bin
  EXPECT_EQ(h.median, 50.0);
}

TEST(Density, IntegratesToOne) {
  const mixture::MixtureParams p{2.0, 0.9, 0.3, 12.0, 1.0};
  const auto s = synthetic::mixture_sample(p, 5000, 4);
  const auto lo = *std::min_element(s.ln_r.begin(), s.ln_r.end());
  const auto hi = *std::max_element(s.ln_r.begin(), s.ln_r.end());
  const auto c = mixture_density(p, s.ln_d, lo, hi);
  double area = 0.0;
  for (std::size_t k = 1; k < c.x.size(); ++k) area += 0.5 * (c.density[k] + c.density[k - 1]) * (c.x[k] - c.x[k - 1]);
  EXPECT_NEAR(area, 1.0, 1e-3);
  EXPECT_LE(c.x.front(), lo);
  EXPECT_GE(c.x.back(), hi);
}

TEST(DetectionThreshold, WeightedComponentsCross) {
  const mixture::MixtureParams p{2.0, 0.9, 0.3, 12.0, 1.0};
  const auto s = synthetic::mixture_sample(p, 2000, 6);
  const double t = detection_threshold(p, s.ln_d);
  ASSERT_TRUE(std::isfinite(t));
  auto diff = [&](double x) {
    double line = 0.0;
    for (double d : s.ln_d) line += phi(x, p.a + p.b * d, p.sigma1);
    return line / s.ln_d.size() - phi(x, p.mu, p.sigma2);
  };
  EXPECT_GT(diff(t - 1e-3), 0.0);
  EXPECT_LT(diff(t + 1e-3), 0.0);
  EXPECT_LT(t, p.mu);
}

TEST(DetectionThreshold, NoCrossingIsNan) {
  // barrier mean below the line: nothing to detect between them
  const mixture::MixtureParams p{10.0, 1.0, 0.3, 2.0, 1.0};
  const std::vector<double> d{2.0, 3.0, 4.0};
  EXPECT_TRUE(std::isnan(detection_threshold(p, d)));
}

TEST(Summary, NullNetworkSection) {
  SummaryInputs in;
  in.year = 2007;
  in.stages_run = {"ingest", "gravity", "mixture"};
  in.gravity = nlohmann::json{{"mu", 0.1}};
  in.mixture = mixture::to_json(mixture::MixtureFit{{1, 1, 1, 5, 1}, {}, {-3.0}, 1, true}, 2007, std::nullopt);
  in.mean_tpi = 0.5;
  const auto j = summary_report(in);
  EXPECT_TRUE(j.at("network").is_null());
  EXPECT_EQ(j.at("stages_run").size(), 3u);
  EXPECT_EQ(j.at("schema_version"), kSummarySchemaVersion);
  EXPECT_TRUE(j.at("mixture").at("detection_threshold").is_null());
  EXPECT_EQ(j.dump(), summary_report(in).dump());
}

TEST(Summary, MissingStageOutputNamed) {
  SummaryInputs in;
  in.stages_run = {"gravity", "network"};
  in.gravity = nlohmann::json::object();
  try {
    summary_report(in);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("network"), std::string::npos);
  }
}

TEST(Summary, NetworkJsonCarriesBothGraphs) {
  NetworkSummary s;
  s.q = 0.7;
  s.ei_backbone = {1.0, 0.5};
  s.ei_full = net::EiIndices{-0.2, 0.1};
  const auto j = network_summary_json(s);
  EXPECT_EQ(j.at("ei_degree"), 1.0);
  EXPECT_EQ(j.at("ei_degree_full"), -0.2);
  s.ei_full.reset();
  EXPECT_TRUE(network_summary_json(s).at("ei_weight_full").is_null());
}
