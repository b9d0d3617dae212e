#pragma once

// Tables and plot-ready data: union resistance averages, TPI scatter,
// distributions with mixture overlays, and the per-year summary document.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "tradenet/common.hpp"
#include "tradenet/corpus.hpp"
#include "tradenet/csv.hpp"
#include "tradenet/gravity.hpp"
#include "tradenet/mixture.hpp"
#include "tradenet/netgraph.hpp"

namespace tradenet::report {

inline constexpr int kSummarySchemaVersion = 1;

struct UnionResistanceRow {
  int year = 0;
  std::string union_name;
  std::size_t members = 0;        // union members present in the panel
  std::size_t member_pairs = 0;   // both endpoints in the union
  std::size_t other_pairs = 0;    // exactly one endpoint in the union
  double mean_ln_r_member = std::numeric_limits<double>::quiet_NaN();
  double mean_ln_r_others = std::numeric_limits<double>::quiet_NaN();
  double world_mean = std::numeric_limits<double>::quiet_NaN();
  bool others_defined = true;  // false when the union covers the whole panel
};

struct UnionResistanceTable {
  std::vector<UnionResistanceRow> rows;
  std::vector<std::string> skipped;  // "<union>: <reason>"
  double world_mean = std::numeric_limits<double>::quiet_NaN();
  std::size_t world_pairs = 0;
};

inline UnionResistanceTable union_resistance_table(const gravity::ResistanceMatrix& R,
                                                   const corpus::UnionRegistry& unions) {
  UnionResistanceTable out;
  const std::size_t n = R.size();
  CompensatedSum world;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) world += R.ln_r(i, j);
  out.world_pairs = PairIndex(n).size();
  out.world_mean = out.world_pairs ? world.value() / static_cast<double>(out.world_pairs) : out.world_mean;

  for (const auto& [name, members] : unions.unions) {
    std::vector<bool> in(n, false);
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (members.contains(R.countries[i])) {
        in[i] = true;
        ++count;
      }
    if (count < 2) {
      out.skipped.push_back(name + ": fewer than 2 members in the panel");
      continue;
    }
    UnionResistanceRow row;
    row.year = R.year;
    row.union_name = name;
    row.members = count;
    row.world_mean = out.world_mean;
    CompensatedSum sm, so;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (in[i] && in[j]) {
          sm += R.ln_r(i, j);
          ++row.member_pairs;
        } else if (in[i] != in[j]) {
          so += R.ln_r(i, j);
          ++row.other_pairs;
        }
      }
    }
    row.mean_ln_r_member = sm.value() / static_cast<double>(row.member_pairs);
    if (row.other_pairs == 0) {
      row.others_defined = false;
    } else {
      row.mean_ln_r_others = so.value() / static_cast<double>(row.other_pairs);
    }
    out.rows.push_back(row);
  }
  return out;
}

inline std::string union_table_csv(const UnionResistanceTable& t) {
  csv::Writer w({"year", "union", "members", "member_pairs", "other_pairs", "member", "others", "world",
                 "others_defined"});
  for (const auto& r : t.rows) {
    w.row({std::to_string(r.year), r.union_name, std::to_string(r.members), std::to_string(r.member_pairs),
           std::to_string(r.other_pairs), format_double(r.mean_ln_r_member, 4), format_double(r.mean_ln_r_others, 4),
           format_double(r.world_mean, 4), r.others_defined ? "1" : "0"});
  }
  return w.str();
}

// ---------------------------------------------------------------------------
// TPI inside / outside unions

enum class Balance { Surplus, Deficit };

inline const char* to_string(Balance b) { return b == Balance::Surplus ? "surplus" : "deficit"; }

struct TpiScatterPoint {
  std::string iso;
  std::string union_name;
  double tpi_inside = std::numeric_limits<double>::quiet_NaN();
  double tpi_outside = std::numeric_limits<double>::quiet_NaN();
  double net_flow = 0.0;  // exports - imports, USD
  Balance balance = Balance::Surplus;
};

/// One point per (union, member country): mean tau over partners inside
/// and outside the union, and the net flow over all partners.
inline std::vector<TpiScatterPoint> tpi_union_scatter(const SquareMatrix& tau, const std::vector<std::string>& countries,
                                                      const corpus::UnionRegistry& unions, const SquareMatrix& flow) {
  const std::size_t n = countries.size();
  if (tau.size() != n || flow.size() != n) throw ConfigError("tau, flow and country list sizes differ");
  std::vector<TpiScatterPoint> out;
  for (const auto& [name, members] : unions.unions) {
    for (std::size_t i = 0; i < n; ++i) {
      if (!members.contains(countries[i])) continue;
      CompensatedSum in_s, out_s, exports, imports;
      std::size_t in_n = 0, out_n = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        exports += flow(i, j);
        imports += flow(j, i);
        if (std::isnan(tau(i, j))) continue;
        if (members.contains(countries[j])) {
          in_s += tau(i, j);
          ++in_n;
        } else {
          out_s += tau(i, j);
          ++out_n;
        }
      }
      TpiScatterPoint p;
      p.iso = countries[i];
      p.union_name = name;
      if (in_n) p.tpi_inside = in_s.value() / static_cast<double>(in_n);
      if (out_n) p.tpi_outside = out_s.value() / static_cast<double>(out_n);
      p.net_flow = exports.value() - imports.value();
      p.balance = p.net_flow >= 0.0 ? Balance::Surplus : Balance::Deficit;
      out.push_back(std::move(p));
    }
  }
  return out;
}

inline std::string scatter_csv(const std::vector<TpiScatterPoint>& pts) {
  csv::Writer w({"union", "iso", "tpi_inside", "tpi_outside", "net_flow_usd", "balance"});
  for (const auto& p : pts)
    w.row({p.union_name, p.iso, format_double(p.tpi_inside, 4), format_double(p.tpi_outside, 4),
           format_double(p.net_flow, 4), to_string(p.balance)});
  return w.str();
}

// ---------------------------------------------------------------------------
// Distributions

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<double> edges;  // bins + 1
  std::vector<std::size_t> counts;
  double mean = 0.0;
  double median = 0.0;
  double stddev = 0.0;
  std::size_t n = 0;
};

/// Equal-width histogram over [min, max] of the data. A constant input
/// lands in a single bin.
inline Histogram histogram(std::span<const double> values, std::size_t bins) {
  if (bins == 0) throw ConfigError("histogram bins must be positive");
  if (values.empty()) throw DataError("histogram of an empty sample");
  Histogram h;
  h.n = values.size();
  h.lo = *std::min_element(values.begin(), values.end());
  h.hi = *std::max_element(values.begin(), values.end());
  h.mean = stats::mean(values);
  h.median = stats::median(std::vector<double>(values.begin(), values.end()));
  h.stddev = stats::stddev(values);
  if (h.hi == h.lo) {
    h.edges = {h.lo - 0.5, h.lo + 0.5};
    h.counts = {values.size()};
    h.stddev = 0.0;
    return h;
  }
  h.edges.resize(bins + 1);
  for (std::size_t k = 0; k <= bins; ++k)
    h.edges[k] = h.lo + (h.hi - h.lo) * static_cast<double>(k) / static_cast<double>(bins);
  h.counts.assign(bins, 0);
  const double width = (h.hi - h.lo) / static_cast<double>(bins);
  for (double v : values) {
    auto k = static_cast<std::size_t>((v - h.lo) / width);
    h.counts[std::min(k, bins - 1)]++;
  }
  return h;
}

struct DensityCurve {
  std::vector<double> x;
  std::vector<double> density;
};

/// Marginal density of ln r under the fitted equal-weight mixture, averaging
/// the category-I component over the observed ln d values. The grid spans
/// the data range and 8 standard deviations around every component, with a
/// spacing no coarser than a quarter of the smaller sigma.
inline DensityCurve mixture_density(const mixture::MixtureParams& p, std::span<const double> ln_d, double data_lo,
                                    double data_hi, std::size_t min_points = 400) {
  if (ln_d.empty()) throw DataError("mixture density needs at least one ln d value");
  double line_lo = std::numeric_limits<double>::infinity();
  double line_hi = -line_lo;
  for (double d : ln_d) {
    line_lo = std::min(line_lo, p.a + p.b * d);
    line_hi = std::max(line_hi, p.a + p.b * d);
  }
  const double lo = std::min({data_lo, line_lo - 8.0 * p.sigma1, p.mu - 8.0 * p.sigma2});
  const double hi = std::max({data_hi, line_hi + 8.0 * p.sigma1, p.mu + 8.0 * p.sigma2});
  const double h_target = 0.25 * std::min(p.sigma1, p.sigma2);
  std::size_t points = std::max(min_points, static_cast<std::size_t>(std::ceil((hi - lo) / h_target)) + 1);
  points = std::min<std::size_t>(points, 20000);

  DensityCurve c;
  c.x.resize(points);
  c.density.resize(points);
  const double inv_n = 1.0 / static_cast<double>(ln_d.size());
  for (std::size_t k = 0; k < points; ++k) {
    const double x = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1);
    CompensatedSum s;
    for (double d : ln_d) s += stats::normal_pdf(x, p.a + p.b * d, p.sigma1);
    c.x[k] = x;
    c.density[k] = 0.5 * s.value() * inv_n + 0.5 * stats::normal_pdf(x, p.mu, p.sigma2);
  }
  return c;
}

inline std::string histogram_csv(const Histogram& h) {
  csv::Writer w({"bin_lo", "bin_hi", "count"});
  for (std::size_t k = 0; k < h.counts.size(); ++k)
    w.row({format_double(h.edges[k], 4), format_double(h.edges[k + 1], 4), std::to_string(h.counts[k])});
  return w.str();
}

inline std::string density_csv(const DensityCurve& c) {
  csv::Writer w({"x", "density"});
  for (std::size_t k = 0; k < c.x.size(); ++k) w.row({format_double(c.x[k], 4), format_exact(c.density[k])});
  return w.str();
}

/// Category-I regression line a + b ln d at the observed distances (sorted).
inline std::string regression_line_csv(const mixture::MixtureParams& p, std::vector<double> ln_d) {
  std::sort(ln_d.begin(), ln_d.end());
  ln_d.erase(std::unique(ln_d.begin(), ln_d.end()), ln_d.end());
  csv::Writer w({"ln_d", "ln_r_category1"});
  for (double d : ln_d) w.row({format_double(d, 4), format_double(p.a + p.b * d, 4)});
  return w.str();
}

/// Detection threshold: the ln r above which the barrier component of the
/// fitted marginal density exceeds the distance-driven one, i.e. the upper
/// crossing of the two weighted components, found by bisection between the
/// median category-I line value and mu. NaN when they do not cross there.
inline double detection_threshold(const mixture::MixtureParams& p, std::span<const double> ln_d) {
  if (ln_d.empty()) throw DataError("detection threshold needs at least one ln d value");
  std::vector<double> line(ln_d.size());
  for (std::size_t k = 0; k < ln_d.size(); ++k) line[k] = p.a + p.b * ln_d[k];
  const double log_n = std::log(static_cast<double>(ln_d.size()));
  auto h = [&](double x) {
    double lse = -std::numeric_limits<double>::infinity();
    for (double m : line) lse = stats::log_add_exp(lse, stats::normal_log_pdf(x, m, p.sigma1));
    return (lse - log_n) - stats::normal_log_pdf(x, p.mu, p.sigma2);
  };
  double lo = stats::median(line);
  double hi = p.mu;
  if (!(hi > lo)) return std::numeric_limits<double>::quiet_NaN();
  double h_lo = h(lo);
  if (!(h_lo > 0.0) || !(h(hi) < 0.0)) return std::numeric_limits<double>::quiet_NaN();
  for (int it = 0; it < 200 && std::abs(hi - lo) > 1e-10; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (h(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

inline nlohmann::json histogram_summary(const Histogram& h) {
  return {{"n", h.n}, {"mean", h.mean}, {"median", h.median}, {"std", h.stddev}, {"min", h.lo}, {"max", h.hi}};
}

// ---------------------------------------------------------------------------
// Summary document

struct NetworkSummary {
  double q = 0.0;
  int n_communities = 0;
  double alpha_s = 0.05;
  std::uint64_t seed = 42;
  double mean_clustering_backbone = 0.0;
  double mean_clustering_full = 0.0;
  net::EiIndices ei_backbone;
  std::optional<net::EiIndices> ei_full;
  std::size_t backbone_edges = 0;
  std::size_t full_edges = 0;
};

inline nlohmann::json network_summary_json(const NetworkSummary& s) {
  nlohmann::json j = {{"q", s.q},
                      {"n_communities", s.n_communities},
                      {"alpha_s", s.alpha_s},
                      {"seed", s.seed},
                      {"mean_clustering", s.mean_clustering_backbone},
                      {"mean_clustering_full", s.mean_clustering_full},
                      {"ei_degree", s.ei_backbone.degree_index},
                      {"ei_weight", s.ei_backbone.weight_index},
                      {"ei_degree_full", nullptr},
                      {"ei_weight_full", nullptr},
                      {"backbone_edges", s.backbone_edges},
                      {"full_edges", s.full_edges}};
  if (s.ei_full) {
    j["ei_degree_full"] = s.ei_full->degree_index;
    j["ei_weight_full"] = s.ei_full->weight_index;
  }
  return j;
}

/// Per-year stage outputs feeding the summary. Absent optionals mean the
/// stage was not run.
struct SummaryInputs {
  int year = 0;
  std::vector<std::string> stages_run;
  std::optional<nlohmann::json> gravity;  // resistance sidecar
  std::optional<nlohmann::json> mixture;  // mixture JSON
  std::optional<double> mean_tpi;
  std::optional<double> detection_threshold;
  std::optional<nlohmann::json> network;  // network summary JSON
  nlohmann::json files = nlohmann::json::object();
};

inline nlohmann::json summary_report(const SummaryInputs& in) {
  auto ran = [&](const std::string& s) {
    return std::find(in.stages_run.begin(), in.stages_run.end(), s) != in.stages_run.end();
  };
  if (ran("gravity") && !in.gravity) throw DataError("missing stage output: gravity");
  if (ran("mixture") && !in.mixture) throw DataError("missing stage output: mixture");
  if (ran("network") && !in.network) throw DataError("missing stage output: network");

  nlohmann::json j;
  j["schema_version"] = kSummarySchemaVersion;
  j["year"] = in.year;
  j["stages_run"] = in.stages_run;
  j["gravity"] = in.gravity ? *in.gravity : nlohmann::json(nullptr);
  if (in.mixture) {
    const auto& m = *in.mixture;
    j["mixture"] = {{"a", m.at("a")},
                    {"b", m.at("b")},
                    {"sigma1", m.at("sigma1")},
                    {"mu", m.at("mu")},
                    {"sigma2", m.at("sigma2")},
                    {"iterations", m.at("iterations")},
                    {"converged", m.at("converged")},
                    {"loglik_final", m.at("loglik_final")},
                    {"detection_threshold", in.detection_threshold && std::isfinite(*in.detection_threshold)
                                                ? nlohmann::json(*in.detection_threshold)
                                                : nlohmann::json(nullptr)}};
    j["ks"] = {{"statistic", m.at("ks_statistic")}, {"p_value", m.at("ks_pvalue")}};
    j["tpi"] = {{"mean", in.mean_tpi ? nlohmann::json(*in.mean_tpi) : nlohmann::json(nullptr)},
                {"denominator", "defined_partners"}};
  } else {
    j["mixture"] = nullptr;
    j["ks"] = nullptr;
    j["tpi"] = nullptr;
  }
  j["network"] = in.network ? *in.network : nlohmann::json(nullptr);
  j["files"] = in.files;
  return j;
}

}  // namespace tradenet::report
