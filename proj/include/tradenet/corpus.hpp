#pragma once

// Ingest and alignment of trade flows, GDP, coordinates and union
// membership into one immutable per-year CountryPanel.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "tradenet/common.hpp"
#include "tradenet/csv.hpp"

namespace tradenet::corpus {

inline constexpr double kEarthRadiusKm = 6371.0;
inline constexpr double kMinDistanceKm = 1.0;

struct LatLon {
  double lat = 0.0;  // degrees, [-90, 90]
  double lon = 0.0;  // degrees, (-180, 180]
};

struct CountryRecord {
  std::string iso;
  std::string name;
  double mean_lat = 0.0;
  double mean_lon = 0.0;
  std::map<int, double> gdp_by_year;  // current USD, strictly positive

  LatLon position() const { return {mean_lat, mean_lon}; }
  bool operator==(const CountryRecord&) const = default;
};

enum class Direction { Import, Export };

inline const char* to_string(Direction d) { return d == Direction::Import ? "import" : "export"; }

struct FlowKey {
  std::string reporter;
  std::string partner;
  Direction direction = Direction::Import;

  auto operator<=>(const FlowKey&) const = default;
};

struct FlowTable {
  int year = 0;
  std::map<FlowKey, double> entries;  // USD, >= 0
};

struct UnionRegistry {
  std::map<std::string, std::set<std::string>> unions;

  bool operator==(const UnionRegistry&) const = default;
};

/// Row-level problems that did not stop a load.
struct LoadDiagnostics {
  std::vector<std::string> messages;
  std::size_t rejected_rows = 0;
  std::size_t unknown_iso_rows = 0;
  std::size_t duplicate_rows = 0;
};

struct FlowLoad {
  FlowTable table;
  LoadDiagnostics diagnostics;
};

struct CountryPanel {
  int year = 0;
  std::vector<CountryRecord> countries;  // sorted by iso
  std::vector<double> gdp;               // m_i for `year`
  SquareMatrix distance;                 // km, symmetric, zero diagonal
  SquareMatrix flow;                     // flow(i, j) = F_ij, i exports to j
  UnionRegistry unions;                  // restricted to panel countries

  std::size_t size() const { return countries.size(); }

  std::vector<std::string> iso_codes() const {
    std::vector<std::string> out;
    out.reserve(countries.size());
    for (const auto& c : countries) out.push_back(c.iso);
    return out;
  }

  std::optional<std::size_t> index_of(const std::string& iso) const {
    auto it = std::lower_bound(countries.begin(), countries.end(), iso,
                               [](const CountryRecord& c, const std::string& k) { return c.iso < k; });
    if (it == countries.end() || it->iso != iso) return std::nullopt;
    return static_cast<std::size_t>(it - countries.begin());
  }

  bool operator==(const CountryPanel&) const = default;
};

struct Exclusion {
  std::string iso;
  std::string reason;
};

struct PanelBuild {
  CountryPanel panel;
  std::vector<Exclusion> excluded;
};

// ---------------------------------------------------------------------------
// Loaders

/// Reads `reporter,partner,year,direction,value_usd` rows for one year.
/// Negative, non-finite and non-numeric values are rejected per row; rows
/// naming an iso outside `known_iso` (when given) are skipped and counted.
/// Conflicting duplicate reports keep the larger value so the result does
/// not depend on row order.
inline FlowLoad load_flows(const std::filesystem::path& path, int year,
                           const std::set<std::string>* known_iso = nullptr) {
  const auto rows = csv::read(path, {"reporter", "partner", "year", "direction", "value_usd"});
  FlowLoad out;
  out.table.year = year;
  auto& diag = out.diagnostics;
  auto reject = [&](const csv::Row& r, const std::string& why) {
    ++diag.rejected_rows;
    diag.messages.push_back(path.filename().string() + ":" + std::to_string(r.line) + ": " + why);
  };

  for (const auto& r : rows) {
    const auto& f = r.fields;
    const auto y = csv::parse_int(f[2]);
    if (!y) {
      reject(r, "non-numeric year '" + f[2] + "'");
      continue;
    }
    if (*y != year) continue;

    Direction dir;
    if (f[3] == "import")
      dir = Direction::Import;
    else if (f[3] == "export")
      dir = Direction::Export;
    else {
      reject(r, "unknown direction '" + f[3] + "'");
      continue;
    }
    const auto value = csv::parse_double(f[4]);
    if (!value || !std::isfinite(*value)) {
      reject(r, "non-numeric value '" + f[4] + "'");
      continue;
    }
    if (*value < 0.0) {
      reject(r, "negative value " + f[4]);
      continue;
    }
    if (f[0] == f[1]) {
      reject(r, "self-pair " + f[0]);
      continue;
    }
    if (known_iso && (!known_iso->contains(f[0]) || !known_iso->contains(f[1]))) {
      ++diag.unknown_iso_rows;
      diag.messages.push_back(path.filename().string() + ":" + std::to_string(r.line) +
                              ": unknown iso code, row skipped");
      continue;
    }

    FlowKey key{f[0], f[1], dir};
    auto [it, inserted] = out.table.entries.emplace(key, *value);
    if (!inserted) {
      ++diag.duplicate_rows;
      it->second = std::max(it->second, *value);
    }
  }
  return out;
}

/// Reads `iso,year,gdp_usd`. Returns iso -> (year -> GDP).
inline std::map<std::string, std::map<int, double>> load_gdp(const std::filesystem::path& path,
                                                             LoadDiagnostics* diag = nullptr) {
  const auto rows = csv::read(path, {"iso", "year", "gdp_usd"});
  std::map<std::string, std::map<int, double>> out;
  for (const auto& r : rows) {
    const auto y = csv::parse_int(r.fields[1]);
    const auto v = csv::parse_double(r.fields[2]);
    if (!y || !v || !std::isfinite(*v) || *v <= 0.0) {
      if (diag) {
        ++diag->rejected_rows;
        diag->messages.push_back(path.filename().string() + ":" + std::to_string(r.line) +
                                 ": invalid gdp row, skipped");
      }
      continue;
    }
    auto [it, inserted] = out[r.fields[0]].emplace(static_cast<int>(*y), *v);
    if (!inserted)
      throw DataError(path.string() + ":" + std::to_string(r.line) + ": duplicate gdp for " + r.fields[0] +
                      " in " + r.fields[1]);
  }
  return out;
}

/// Reads `iso,name,mean_lat,mean_lon`.
inline std::vector<CountryRecord> load_coordinates(const std::filesystem::path& path) {
  const auto rows = csv::read(path, {"iso", "name", "mean_lat", "mean_lon"});
  std::vector<CountryRecord> out;
  std::set<std::string> seen;
  for (const auto& r : rows) {
    const auto where = path.string() + ":" + std::to_string(r.line);
    const auto lat = csv::parse_double(r.fields[2]);
    const auto lon = csv::parse_double(r.fields[3]);
    if (!lat || !lon) throw DataError(where + ": non-numeric coordinate");
    if (*lat < -90.0 || *lat > 90.0 || *lon <= -180.0 || *lon > 180.0)
      throw DataError(where + ": coordinate out of range for " + r.fields[0]);
    if (!seen.insert(r.fields[0]).second) throw DataError(where + ": duplicate iso_code " + r.fields[0]);
    out.push_back({r.fields[0], r.fields[1], *lat, *lon, {}});
  }
  return out;
}

/// Reads one union per line: `union_name,iso1;iso2;...`. Blank lines and
/// lines starting with '#' are ignored.
inline UnionRegistry load_unions(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("missing file: " + path.string());
  const std::string text = csv::read_text_file(path);
  UnionRegistry reg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos || line[line.find_first_not_of(" \t")] == '#')
      continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected 'union_name,iso1;iso2;...'");
    std::string name = line.substr(0, comma);
    std::string members = line.substr(comma + 1);
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t"));
      s.erase(s.find_last_not_of(" \t") + 1);
      return s;
    };
    name = trim(name);
    if (name.empty()) throw DataError(path.string() + ":" + std::to_string(lineno) + ": empty union name");
    if (reg.unions.contains(name))
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": duplicate union " + name);
    auto& set = reg.unions[name];
    std::istringstream ms(members);
    std::string iso;
    while (std::getline(ms, iso, ';')) {
      iso = trim(iso);
      if (!iso.empty()) set.insert(iso);
    }
  }
  return reg;
}

// ---------------------------------------------------------------------------
// Alignment

/// Directed flow matrix F(i, j) = flow from countries[i] to countries[j].
/// The importer's (j's) report wins; i's export report fills gaps; absent
/// both, the flow is a true zero.
inline SquareMatrix merge_flows(const FlowTable& flows, const std::vector<std::string>& countries) {
  const std::size_t n = countries.size();
  SquareMatrix F(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      auto imp = flows.entries.find({countries[j], countries[i], Direction::Import});
      if (imp != flows.entries.end()) {
        F(i, j) = imp->second;
        continue;
      }
      auto exp = flows.entries.find({countries[i], countries[j], Direction::Export});
      if (exp != flows.entries.end()) F(i, j) = exp->second;
    }
  }
  return F;
}

/// Haversine distance in km on a sphere of radius 6371.0 km.
inline double great_circle_distance(LatLon a, LatLon b) {
  constexpr double deg = std::numbers::pi / 180.0;
  const double phi1 = a.lat * deg;
  const double phi2 = b.lat * deg;
  const double dphi = (b.lat - a.lat) * deg;
  const double dlambda = (b.lon - a.lon) * deg;
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlambda / 2.0);
  double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  h = std::clamp(h, 0.0, 1.0);
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

/// Aligns one year. Eligible countries have coordinates, a GDP for `year`
/// and at least one flow entry in `flows`. Ordering is lexicographic by iso.
inline PanelBuild build_panel(int year, const FlowTable& flows,
                              const std::map<std::string, std::map<int, double>>& gdp,
                              const std::vector<CountryRecord>& coordinates, const UnionRegistry& unions) {
  std::map<std::string, const CountryRecord*> by_iso;
  for (const auto& c : coordinates) {
    if (!by_iso.emplace(c.iso, &c).second) throw DataError("duplicate iso_code " + c.iso);
  }
  for (const auto& [name, members] : unions.unions) {
    for (const auto& iso : members) {
      if (!by_iso.contains(iso)) throw DataError("union " + name + " lists unknown iso_code " + iso);
    }
  }

  std::set<std::string> has_flow;
  for (const auto& [key, value] : flows.entries) {
    has_flow.insert(key.reporter);
    has_flow.insert(key.partner);
  }

  PanelBuild out;
  std::set<std::string> all_isos;
  for (const auto& [iso, rec] : by_iso) all_isos.insert(iso);
  for (const auto& iso : has_flow) all_isos.insert(iso);
  for (const auto& [iso, years] : gdp) all_isos.insert(iso);

  std::vector<CountryRecord> eligible;
  for (const auto& iso : all_isos) {
    auto c = by_iso.find(iso);
    if (c == by_iso.end()) {
      out.excluded.push_back({iso, "no coordinates"});
      continue;
    }
    auto g = gdp.find(iso);
    if (g == gdp.end() || !g->second.contains(year)) {
      out.excluded.push_back({iso, "no GDP for " + std::to_string(year)});
      continue;
    }
    if (!has_flow.contains(iso)) {
      out.excluded.push_back({iso, "no flow entries in " + std::to_string(year)});
      continue;
    }
    CountryRecord rec = *c->second;
    rec.gdp_by_year = g->second;
    eligible.push_back(std::move(rec));
  }
  if (eligible.size() < 3)
    throw DataError("only " + std::to_string(eligible.size()) + " eligible countries for " + std::to_string(year) +
                    "; at least 3 are required");

  auto& p = out.panel;
  p.year = year;
  p.countries = std::move(eligible);
  const std::size_t n = p.countries.size();
  p.gdp.resize(n);
  for (std::size_t i = 0; i < n; ++i) p.gdp[i] = p.countries[i].gdp_by_year.at(year);

  p.distance = SquareMatrix(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d =
          std::max(kMinDistanceKm, great_circle_distance(p.countries[i].position(), p.countries[j].position()));
      p.distance(i, j) = d;
      p.distance(j, i) = d;
    }
  }
  const auto isos = p.iso_codes();
  p.flow = merge_flows(flows, isos);

  const std::set<std::string> in_panel(isos.begin(), isos.end());
  for (const auto& [name, members] : unions.unions) {
    auto& dst = p.unions.unions[name];
    for (const auto& iso : members)
      if (in_panel.contains(iso)) dst.insert(iso);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json matrix_to_json(const SquareMatrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.size(); ++i) {
    auto r = m.row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return rows;
}

inline SquareMatrix matrix_from_json(const nlohmann::json& j) {
  SquareMatrix m(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (j[i].size() != j.size()) throw DataError("matrix is not square");
    for (std::size_t k = 0; k < j.size(); ++k) m(i, k) = j[i][k].get<double>();
  }
  return m;
}

inline nlohmann::json to_json(const CountryPanel& p) {
  nlohmann::json countries = nlohmann::json::array();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto& c = p.countries[i];
    countries.push_back({{"iso", c.iso},
                         {"name", c.name},
                         {"mean_lat", c.mean_lat},
                         {"mean_lon", c.mean_lon},
                         {"gdp_usd", p.gdp[i]}});
  }
  nlohmann::json unions = nlohmann::json::object();
  for (const auto& [name, members] : p.unions.unions) unions[name] = members;
  return {{"year", p.year},
          {"countries", countries},
          {"distance_km", matrix_to_json(p.distance)},
          {"flow_usd", matrix_to_json(p.flow)},
          {"unions", unions}};
}

inline CountryPanel panel_from_json(const nlohmann::json& j) {
  CountryPanel p;
  p.year = j.at("year").get<int>();
  for (const auto& c : j.at("countries")) {
    CountryRecord rec{c.at("iso").get<std::string>(), c.at("name").get<std::string>(),
                      c.at("mean_lat").get<double>(), c.at("mean_lon").get<double>(), {}};
    const double g = c.at("gdp_usd").get<double>();
    rec.gdp_by_year[p.year] = g;
    p.gdp.push_back(g);
    p.countries.push_back(std::move(rec));
  }
  p.distance = matrix_from_json(j.at("distance_km"));
  p.flow = matrix_from_json(j.at("flow_usd"));
  for (const auto& [name, members] : j.at("unions").items())
    p.unions.unions[name] = members.get<std::set<std::string>>();
  if (p.distance.size() != p.size() || p.flow.size() != p.size())
    throw DataError("panel matrices do not match the country list");
  return p;
}

inline nlohmann::json exclusions_to_json(const std::vector<Exclusion>& ex) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : ex) out.push_back({{"iso", e.iso}, {"reason", e.reason}});
  return out;
}

}  // namespace tradenet::corpus
