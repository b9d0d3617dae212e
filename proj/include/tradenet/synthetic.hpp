#pragma once

// Synthetic corpora with planted structure: countries clustered in
// geographic regions, resistance log-linear in distance for most pairs, an
// artificial-barrier category on some cross-region pairs, and a trade
// union (region 0) with an extra resistance discount among its members.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "tradenet/common.hpp"
#include "tradenet/corpus.hpp"
#include "tradenet/csv.hpp"
#include "tradenet/mixture.hpp"

namespace tradenet::synthetic {

struct CorpusSpec {
  std::size_t countries = 20;
  std::size_t regions = 4;
  int year = 2007;
  std::uint64_t seed = 7;
  double alpha = 1.0;              // GDP exponent used to generate flows
  double line_a = 22.0;            // ln r = a + b ln d + eta for natural pairs
  double line_b = 1.0;
  double line_sigma = 0.3;
  double barrier_mu = 35.0;        // ln r of artificial-barrier pairs
  double barrier_sigma = 1.0;
  double barrier_fraction = 0.15;  // share of cross-region pairs with a barrier
  double union_discount = 0.5;     // subtracted from ln r among union members
  double region_spread_deg = 3.0;  // jitter of country positions around the region centre
  double flow_noise = 0.02;        // lognormal sd of directional flow noise
  double zero_flow_usd = 1e5;      // flows below this are not reported at all
  double missing_import_share = 0.2;  // import reports dropped (exporter fills in)
  std::size_t gdp_gaps = 0;        // last countries with no GDP for `year`
  std::string union_name = "UNION_A";
};

struct Corpus {
  std::vector<corpus::CountryRecord> coordinates;
  std::map<std::string, std::map<int, double>> gdp;
  corpus::FlowTable flows;
  corpus::UnionRegistry unions;
  SquareMatrix planted_ln_r;           // generation order (same as coordinates)
  std::vector<std::size_t> region_of;  // per country
};

inline std::string iso_code(std::size_t region, std::size_t k) {
  std::string s(3, 'A');
  s[0] = static_cast<char>('A' + region % 26);
  s[1] = static_cast<char>('A' + (k / 26) % 26);
  s[2] = static_cast<char>('A' + k % 26);
  return s;
}

inline Corpus generate(const CorpusSpec& spec) {
  static constexpr std::array<std::array<double, 2>, 8> kCentres{{{50.0, 10.0},
                                                                  {35.0, 105.0},
                                                                  {-15.0, -60.0},
                                                                  {5.0, 20.0},
                                                                  {40.0, -95.0},
                                                                  {-25.0, 135.0},
                                                                  {25.0, 45.0},
                                                                  {60.0, 60.0}}};
  if (spec.regions == 0 || spec.regions > kCentres.size()) throw ConfigError("regions must be in [1, 8]");
  if (spec.countries < spec.regions) throw ConfigError("need at least one country per region");

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  Corpus c;
  const std::size_t n = spec.countries;
  std::vector<std::size_t> per_region(spec.regions, 0);
  std::vector<double> gdp_draw(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = i % spec.regions;
    const std::size_t k = per_region[r]++;
    const double lat = std::clamp(kCentres[r][0] + spec.region_spread_deg * (2.0 * u01(rng) - 1.0), -89.0, 89.0);
    double lon = kCentres[r][1] + spec.region_spread_deg * (2.0 * u01(rng) - 1.0);
    if (lon > 180.0) lon -= 360.0;
    if (lon <= -180.0) lon += 360.0;
    const std::string iso = iso_code(r, k);
    c.coordinates.push_back({iso, "Synthetic " + iso, lat, lon, {}});
    c.region_of.push_back(r);
    const double gdp = std::exp(25.3 + 1.2 * z(rng));
    gdp_draw[i] = gdp;
    c.gdp[iso][spec.year - 1] = gdp * 0.97;
    if (i + spec.gdp_gaps < n) c.gdp[iso][spec.year] = gdp;
  }

  auto& members = c.unions.unions[spec.union_name];
  for (std::size_t i = 0; i < n; ++i)
    if (c.region_of[i] == 0) members.insert(c.coordinates[i].iso);

  c.planted_ln_r = SquareMatrix(n, 0.0);
  c.flows.year = spec.year;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = std::max(corpus::kMinDistanceKm, corpus::great_circle_distance(c.coordinates[i].position(),
                                                                                      c.coordinates[j].position()));
      double ln_r = spec.line_a + spec.line_b * std::log(d) + spec.line_sigma * z(rng);
      const bool cross = c.region_of[i] != c.region_of[j];
      const double draw = u01(rng);
      if (cross && draw < spec.barrier_fraction) ln_r = spec.barrier_mu + spec.barrier_sigma * z(rng);
      if (c.region_of[i] == 0 && c.region_of[j] == 0) ln_r -= spec.union_discount;
      c.planted_ln_r(i, j) = ln_r;
      c.planted_ln_r(j, i) = ln_r;
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const auto& a = c.coordinates[i].iso;
      const auto& b = c.coordinates[j].iso;
      // countries with a GDP gap still trade at their underlying size
      const double ln_f =
          spec.alpha * (std::log(gdp_draw[i]) + std::log(gdp_draw[j])) - c.planted_ln_r(i, j) + spec.flow_noise * z(rng);
      const double f = std::round(std::exp(ln_f));
      const double drop = u01(rng);
      if (f < spec.zero_flow_usd) continue;
      if (drop >= spec.missing_import_share) c.flows.entries[{b, a, corpus::Direction::Import}] = f;
      c.flows.entries[{a, b, corpus::Direction::Export}] = std::round(f * 0.98);
    }
  }
  return c;
}

/// Writes flows.csv, gdp.csv, coordinates.csv and unions.txt into `dir`.
inline void write_corpus(const Corpus& c, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  csv::Writer flows({"reporter", "partner", "year", "direction", "value_usd"});
  for (const auto& [key, value] : c.flows.entries)
    flows.row({key.reporter, key.partner, std::to_string(c.flows.year), corpus::to_string(key.direction),
               format_double(value, 0)});
  flows.save(dir / "flows.csv");

  csv::Writer gdp({"iso", "year", "gdp_usd"});
  for (const auto& [iso, years] : c.gdp)
    for (const auto& [year, value] : years) gdp.row({iso, std::to_string(year), format_double(value, 0)});
  gdp.save(dir / "gdp.csv");

  csv::Writer coords({"iso", "name", "mean_lat", "mean_lon"});
  for (const auto& rec : c.coordinates)
    coords.row({rec.iso, rec.name, format_double(rec.mean_lat, 4), format_double(rec.mean_lon, 4)});
  coords.save(dir / "coordinates.csv");

  std::string unions = "# union_name,iso1;iso2;...\n";
  for (const auto& [name, members] : c.unions.unions) {
    unions += name + ",";
    bool first = true;
    for (const auto& iso : members) {
      unions += (first ? "" : ";") + iso;
      first = false;
    }
    unions += "\n";
  }
  csv::write_text_file(dir / "unions.txt", unions);
}

/// Builds the panel directly from an in-memory corpus.
inline corpus::PanelBuild to_panel(const Corpus& c, int year) {
  return corpus::build_panel(year, c.flows, c.gdp, c.coordinates, c.unions);
}

/// Pairs drawn from the two-category model with known labels. ln d is
/// uniform on [ln_d_lo, ln_d_hi]; each pair is category I with probability
/// `share1`.
struct MixtureSample {
  std::vector<double> ln_r;
  std::vector<double> ln_d;
  std::vector<bool> category1;
};

inline MixtureSample mixture_sample(const mixture::MixtureParams& p, std::size_t n, std::uint64_t seed,
                                    double share1 = 0.5, double ln_d_lo = 2.0, double ln_d_hi = 6.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  MixtureSample s;
  s.ln_r.reserve(n);
  s.ln_d.reserve(n);
  s.category1.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double d = ln_d_lo + (ln_d_hi - ln_d_lo) * u01(rng);
    const bool c1 = u01(rng) < share1;
    const double e = z(rng);
    s.ln_d.push_back(d);
    s.category1.push_back(c1);
    s.ln_r.push_back(c1 ? p.a + p.b * d + p.sigma1 * e : p.mu + p.sigma2 * e);
  }
  return s;
}

/// Panel whose flows follow the error model directly: with
/// r_ij = sqrt(G (m_i m_j)^alpha) and F_ij = r_ij - eps_ij, eps ~ LN(mu, sigma),
/// the least-squares resistance is r_ij + O(eps) so the density argument
/// r*_ij - F_ij tracks eps_ij.
struct PmlSpec {
  std::size_t countries = 30;
  double mu = 0.4;
  double sigma = 0.01;
  double alpha = 1.0;
  double log_gdp_lo = 6.0;
  double log_gdp_hi = 8.0;
  int year = 2007;
  std::uint64_t seed = 11;
};

inline corpus::CountryPanel pml_panel(const PmlSpec& spec) {
  if (spec.countries < 3) throw ConfigError("need at least 3 countries");
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const std::size_t n = spec.countries;
  corpus::CountryPanel p;
  p.year = spec.year;
  for (std::size_t i = 0; i < n; ++i) {
    const std::string iso = iso_code(i / 26, i % 26);
    const double lat = -60.0 + 120.0 * u01(rng);
    const double lon = -179.0 + 358.0 * u01(rng);
    const double gdp = std::exp(spec.log_gdp_lo + (spec.log_gdp_hi - spec.log_gdp_lo) * u01(rng));
    p.countries.push_back({iso, "Synthetic " + iso, lat, lon, {{spec.year, gdp}}});
    p.gdp.push_back(gdp);
  }
  p.distance = SquareMatrix(n, 0.0);
  p.flow = SquareMatrix(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      if (i < j) {
        const double d = std::max(corpus::kMinDistanceKm, corpus::great_circle_distance(p.countries[i].position(),
                                                                                        p.countries[j].position()));
        p.distance(i, j) = d;
        p.distance(j, i) = d;
      }
      const double r = std::sqrt(std::pow(p.gdp[i] * p.gdp[j], spec.alpha));
      const double eps = std::exp(spec.mu + spec.sigma * z(rng));
      p.flow(i, j) = std::max(0.0, r - eps);
    }
  }
  return p;
}

}  // namespace tradenet::synthetic
