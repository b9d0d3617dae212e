#pragma once

// Per-year orchestration: ingest -> gravity -> mixture -> network -> report.
// Stages talk only through files under <out>/<year>/. Each stage writes a
// stamp recording a SHA-256 key over its settings and input files plus the
// hashes of what it wrote; a stage is skipped only when both still match.

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tradenet/common.hpp"
#include "tradenet/corpus.hpp"
#include "tradenet/csv.hpp"
#include "tradenet/gravity.hpp"
#include "tradenet/mixture.hpp"
#include "tradenet/netgraph.hpp"
#include "tradenet/report.hpp"

namespace tradenet::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Hashing

inline std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) throw Error("SHA-256 failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0xf]);
  }
  return out;
}

inline std::string file_sha256(const fs::path& p) { return sha256_hex(csv::read_text_file(p)); }

// ---------------------------------------------------------------------------
// Stages

enum class Stage { Ingest, Gravity, Mixture, Network, Report };

inline constexpr std::array<Stage, 5> kAllStages{Stage::Ingest, Stage::Gravity, Stage::Mixture, Stage::Network,
                                                 Stage::Report};

inline std::string to_string(Stage s) {
  switch (s) {
    case Stage::Ingest: return "ingest";
    case Stage::Gravity: return "gravity";
    case Stage::Mixture: return "mixture";
    case Stage::Network: return "network";
    case Stage::Report: return "report";
  }
  return "?";
}

inline Stage stage_from_string(const std::string& s) {
  for (auto st : kAllStages)
    if (to_string(st) == s) return st;
  throw ConfigError("unknown stage '" + s + "' (expected ingest, gravity, mixture, network or report)");
}

/// "gravity,mixture" or "all".
inline std::vector<Stage> parse_stages(const std::string& text) {
  if (text.empty() || text == "all") return {kAllStages.begin(), kAllStages.end()};
  std::set<Stage> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto tok = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!tok.empty()) out.insert(stage_from_string(tok));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (out.empty()) throw ConfigError("no stages selected");
  return {out.begin(), out.end()};
}

inline std::vector<Stage> upstream_of(Stage s) {
  switch (s) {
    case Stage::Ingest: return {};
    case Stage::Gravity: return {Stage::Ingest};
    case Stage::Mixture: return {Stage::Ingest, Stage::Gravity};
    case Stage::Network: return {Stage::Ingest, Stage::Gravity};
    case Stage::Report: return {Stage::Ingest, Stage::Gravity, Stage::Mixture};
  }
  return {};
}

/// Requested stages plus everything they need, in execution order.
inline std::vector<Stage> with_upstream(const std::vector<Stage>& requested) {
  std::set<Stage> all(requested.begin(), requested.end());
  for (auto s : requested)
    for (auto u : upstream_of(s)) all.insert(u);
  return {all.begin(), all.end()};
}

inline std::vector<std::string> stage_outputs(Stage s) {
  switch (s) {
    case Stage::Ingest: return {"panel.json", "exclusions.json"};
    case Stage::Gravity: return {"resistance.csv", "resistance.json", "gravity_fit.json"};
    case Stage::Mixture: return {"mixture.json", "tau.csv", "tpi.csv", "loglik_trace.csv"};
    case Stage::Network: return {"edges.csv", "partition.csv", "network.json", "similarity.csv"};
    case Stage::Report:
      return {"union_resistance.csv", "tpi_scatter.csv", "hist_ln_r.csv", "density_ln_r.csv",
              "line_category1.csv",   "hist_tpi.csv",    "summary.json"};
  }
  return {};
}

// ---------------------------------------------------------------------------
// Configuration

struct PipelineConfig {
  fs::path flows, gdp, coordinates, unions;
  int year_first = 0;
  int year_last = -1;                 // empty range until set
  std::optional<double> alpha = 1.0;  // nullopt: search over [alpha_lo, alpha_hi]
  double alpha_lo = 0.1;
  double alpha_hi = 1.5;
  double alpha_s = 0.05;
  std::uint64_t seed = 42;
  double em_tol = 1e-6;
  std::size_t em_max_iter = 500;
  double pml_tol = 1e-8;
  std::size_t hist_bins = 40;
  std::size_t seed_sweep = 0;  // extra Louvain seeds reported for stability
  fs::path out = "out";
  fs::path cache = "cache";

  std::vector<int> years() const {
    std::vector<int> ys;
    for (int y = year_first; y <= year_last; ++y) ys.push_back(y);
    return ys;
  }
};

struct Violation {
  std::string field;
  std::string message;
};

/// "2007", "2007-2017" or "2007:2017".
inline std::pair<int, int> parse_years(const std::string& text) {
  auto sep = text.find_first_of("-:");
  const auto a = csv::parse_int(text.substr(0, sep));
  const auto b = sep == std::string::npos ? a : csv::parse_int(text.substr(sep + 1));
  if (!a || !b) throw ConfigError("years: cannot parse '" + text + "' (expected YYYY or YYYY-YYYY)");
  return {static_cast<int>(*a), static_cast<int>(*b)};
}

namespace detail {

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> k{"flows",   "gdp",         "coordinates", "unions",    "years",
                                       "alpha",   "alpha_range", "alpha_s",     "seed",      "em_tol",
                                       "em_max_iter", "pml_tol", "hist_bins",   "seed_sweep", "out",
                                       "cache"};
  return k;
}

template <class T>
T get_field(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string(key) + ": wrong type");
  }
}

inline fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace detail

/// Reads a config object. Relative paths resolve against `base_dir`.
/// Unknown keys and wrongly typed values raise ConfigError naming the key.
inline PipelineConfig config_from_json(const json& j, const fs::path& base_dir = {}) {
  using detail::get_field;
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  for (const auto& [k, v] : j.items())
    if (!detail::known_keys().contains(k)) throw ConfigError(k + ": unknown config key");
  PipelineConfig c;
  for (auto [key, dst] : {std::pair{"flows", &c.flows}, std::pair{"gdp", &c.gdp},
                          std::pair{"coordinates", &c.coordinates}, std::pair{"unions", &c.unions},
                          std::pair{"out", &c.out}, std::pair{"cache", &c.cache}})
    if (j.contains(key)) *dst = detail::resolve(base_dir, get_field<std::string>(j, key));
  if (j.contains("years")) {
    const auto& y = j["years"];
    if (y.is_number_integer()) {
      c.year_first = c.year_last = y.get<int>();
    } else if (y.is_string()) {
      std::tie(c.year_first, c.year_last) = parse_years(y.get<std::string>());
    } else if (y.is_array() && y.size() == 2 && y[0].is_number_integer() && y[1].is_number_integer()) {
      c.year_first = y[0].get<int>();
      c.year_last = y[1].get<int>();
    } else {
      throw ConfigError("years: expected YYYY, \"YYYY-YYYY\" or [first, last]");
    }
  }
  if (j.contains("alpha")) {
    const auto& a = j["alpha"];
    if (a.is_string() && a.get<std::string>() == "search")
      c.alpha = std::nullopt;
    else if (a.is_number())
      c.alpha = a.get<double>();
    else
      throw ConfigError("alpha: expected a number or \"search\"");
  }
  if (j.contains("alpha_range")) {
    const auto r = get_field<std::vector<double>>(j, "alpha_range");
    if (r.size() != 2) throw ConfigError("alpha_range: expected [lo, hi]");
    c.alpha_lo = r[0];
    c.alpha_hi = r[1];
  }
  if (j.contains("alpha_s")) c.alpha_s = get_field<double>(j, "alpha_s");
  if (j.contains("seed")) c.seed = get_field<std::uint64_t>(j, "seed");
  if (j.contains("em_tol")) c.em_tol = get_field<double>(j, "em_tol");
  if (j.contains("em_max_iter")) c.em_max_iter = get_field<std::size_t>(j, "em_max_iter");
  if (j.contains("pml_tol")) c.pml_tol = get_field<double>(j, "pml_tol");
  if (j.contains("hist_bins")) c.hist_bins = get_field<std::size_t>(j, "hist_bins");
  if (j.contains("seed_sweep")) c.seed_sweep = get_field<std::size_t>(j, "seed_sweep");
  return c;
}

inline PipelineConfig load_config(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config: file not found: " + path.string());
  json j;
  try {
    j = json::parse(csv::read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path.string() + ": " + e.what());
  }
  return config_from_json(j, path.parent_path());
}

/// The effective configuration, as recorded next to the outputs.
inline json config_to_json(const PipelineConfig& c) {
  return {{"flows", c.flows.string()},
          {"gdp", c.gdp.string()},
          {"coordinates", c.coordinates.string()},
          {"unions", c.unions.string()},
          {"years", json::array({c.year_first, c.year_last})},
          {"alpha", c.alpha ? json(*c.alpha) : json("search")},
          {"alpha_range", json::array({c.alpha_lo, c.alpha_hi})},
          {"alpha_s", c.alpha_s},
          {"seed", c.seed},
          {"em_tol", c.em_tol},
          {"em_max_iter", c.em_max_iter},
          {"pml_tol", c.pml_tol},
          {"hist_bins", c.hist_bins},
          {"seed_sweep", c.seed_sweep},
          {"out", c.out.string()},
          {"cache", c.cache.string()}};
}

/// Every violated rule, each naming its field. Input paths are checked only
/// when `check_paths` is set. Never touches the network.
inline std::vector<Violation> validate(const PipelineConfig& c, bool check_paths = true) {
  std::vector<Violation> v;
  auto need = [&](bool ok, const std::string& field, const std::string& msg) {
    if (!ok) v.push_back({field, msg});
  };
  need(c.year_first <= c.year_last, "years", "year range is empty");
  need((c.year_first >= 1900 && c.year_last <= 2100) || c.year_first > c.year_last, "years",
       "years must lie in [1900, 2100]");
  need(c.em_tol > 0.0 && std::isfinite(c.em_tol), "em_tol", "em_tol must be > 0");
  need(c.pml_tol > 0.0 && std::isfinite(c.pml_tol), "pml_tol", "pml_tol must be > 0");
  need(c.em_max_iter > 0, "em_max_iter", "em_max_iter must be > 0");
  need(c.alpha_s > 0.0 && c.alpha_s < 1.0, "alpha_s", "alpha_s must satisfy 0 < alpha_s < 1");
  need(c.hist_bins > 0, "hist_bins", "hist_bins must be > 0");
  if (c.alpha)
    need(*c.alpha > 0.0 && std::isfinite(*c.alpha), "alpha", "alpha must be > 0 or \"search\"");
  else
    need(c.alpha_lo > 0.0 && c.alpha_lo < c.alpha_hi, "alpha_range", "alpha_range must satisfy 0 < lo < hi");
  need(!c.out.empty(), "out", "output directory is not set");
  if (check_paths) {
    for (auto [field, p] : {std::pair{"flows", &c.flows}, std::pair{"gdp", &c.gdp},
                            std::pair{"coordinates", &c.coordinates}, std::pair{"unions", &c.unions}}) {
      if (p->empty())
        v.push_back({field, std::string(field) + " path is not set"});
      else if (!fs::is_regular_file(*p))
        v.push_back({field, std::string(field) + " path does not exist: " + p->string()});
    }
  }
  return v;
}

// ---------------------------------------------------------------------------
// Runner

enum class StageStatus { Ran, UpToDate };

struct RunReport {
  std::map<int, std::map<Stage, StageStatus>> status;
};

class StageFailure : public Error {
 public:
  StageFailure(int year, Stage stage, const std::string& what)
      : Error(std::to_string(year) + "/" + to_string(stage) + ": " + what), year_(year), stage_(stage) {}
  int year() const { return year_; }
  Stage stage() const { return stage_; }

 private:
  int year_;
  Stage stage_;
};

class Runner {
 public:
  explicit Runner(PipelineConfig cfg, std::ostream* log = &std::cerr) : cfg_(std::move(cfg)), log_(log) {}

  /// Runs `requested` stages (plus their upstream) for every configured year.
  /// `config_source` is copied verbatim into the output directory when given.
  RunReport run(const std::vector<Stage>& requested, const std::optional<fs::path>& config_source = std::nullopt) {
    const auto problems = validate(cfg_);
    if (!problems.empty()) {
      std::string msg = "invalid configuration:";
      for (const auto& p : problems) msg += "\n  " + p.field + ": " + p.message;
      throw ConfigError(msg);
    }
    fs::create_directories(cfg_.out);
    csv::write_text_file(cfg_.out / "config.json", config_to_json(cfg_).dump(2) + "\n");
    if (config_source) fs::copy_file(*config_source, cfg_.out / "config.source.json", fs::copy_options::overwrite_existing);

    RunReport rep;
    const auto stages = with_upstream(requested);
    for (int year : cfg_.years())
      for (auto s : stages) rep.status[year][s] = run_stage(year, s);
    return rep;
  }

  fs::path year_dir(int year) const { return cfg_.out / std::to_string(year); }

  /// Whether the stage's stamp matches its current key and outputs.
  bool up_to_date(int year, Stage s) const {
    const auto dir = year_dir(year);
    const auto stamp_path = dir / (to_string(s) + ".stamp");
    if (!fs::exists(stamp_path)) return false;
    json key;
    try {
      key = stage_key(year, s);
    } catch (const Error&) {
      return false;
    }
    const auto stamp = json::parse(csv::read_text_file(stamp_path), nullptr, false);
    if (stamp.is_discarded() || stamp.value("key", "") != sha256_hex(key.dump())) return false;
    for (const auto& name : stage_outputs(s)) {
      if (!fs::exists(dir / name)) return false;
      if (!stamp.contains("outputs") || stamp["outputs"].value(name, "") != file_sha256(dir / name)) return false;
    }
    return true;
  }

 private:
  PipelineConfig cfg_;
  std::ostream* log_;

  void say(const std::string& s) const {
    if (log_) *log_ << s << "\n";
  }

  json input_hashes(int year, const std::vector<std::string>& names) const {
    json h = json::object();
    for (const auto& n : names) {
      const auto p = year_dir(year) / n;
      if (!fs::exists(p)) throw DataError("missing stage output: " + p.string());
      h[n] = file_sha256(p);
    }
    return h;
  }

  /// Settings and input hashes that determine a stage's outputs.
  json stage_key(int year, Stage s) const {
    json k = {{"stage", to_string(s)}, {"version", kVersion}, {"year", year}};
    switch (s) {
      case Stage::Ingest:
        k["inputs"] = {{"flows", file_sha256(cfg_.flows)},
                       {"gdp", file_sha256(cfg_.gdp)},
                       {"coordinates", file_sha256(cfg_.coordinates)},
                       {"unions", file_sha256(cfg_.unions)}};
        break;
      case Stage::Gravity:
        k["alpha"] = cfg_.alpha ? json(*cfg_.alpha) : json("search");
        if (!cfg_.alpha) {
          k["alpha_range"] = {cfg_.alpha_lo, cfg_.alpha_hi};
          k["em"] = {cfg_.em_tol, cfg_.em_max_iter};
        }
        k["pml_tol"] = cfg_.pml_tol;
        k["inputs"] = input_hashes(year, {"panel.json"});
        break;
      case Stage::Mixture:
        k["em"] = {cfg_.em_tol, cfg_.em_max_iter};
        k["inputs"] = input_hashes(year, {"panel.json", "resistance.csv", "resistance.json"});
        break;
      case Stage::Network:
        k["alpha_s"] = cfg_.alpha_s;
        k["seed"] = cfg_.seed;
        k["seed_sweep"] = cfg_.seed_sweep;
        k["inputs"] = input_hashes(year, {"panel.json", "resistance.csv", "resistance.json"});
        break;
      case Stage::Report: {
        k["hist_bins"] = cfg_.hist_bins;
        std::vector<std::string> in{"panel.json", "resistance.csv", "resistance.json", "mixture.json", "tau.csv",
                                    "tpi.csv"};
        if (up_to_date(year, Stage::Network)) in.push_back("network.json");
        k["inputs"] = input_hashes(year, in);
        break;
      }
    }
    return k;
  }

  StageStatus run_stage(int year, Stage s) {
    const auto dir = year_dir(year);
    const auto stamp_path = dir / (to_string(s) + ".stamp");
    const auto failed_path = dir / (to_string(s) + ".failed");
    if (up_to_date(year, s)) {
      say(std::to_string(year) + " " + to_string(s) + ": up to date");
      return StageStatus::UpToDate;
    }
    fs::create_directories(dir);
    fs::remove(stamp_path);
    try {
      const auto key = stage_key(year, s);
      execute(year, s);
      json outputs = json::object();
      for (const auto& name : stage_outputs(s)) outputs[name] = file_sha256(dir / name);
      csv::write_text_file(stamp_path,
                           json{{"stage", to_string(s)}, {"key", sha256_hex(key.dump())}, {"outputs", outputs}}.dump(2) +
                               "\n");
      fs::remove(failed_path);
    } catch (const std::exception& e) {
      csv::write_text_file(failed_path, json{{"stage", to_string(s)}, {"error", e.what()}}.dump(2) + "\n");
      throw StageFailure(year, s, e.what());
    }
    say(std::to_string(year) + " " + to_string(s) + ": done");
    return StageStatus::Ran;
  }

  void write(int year, const std::string& name, const std::string& text) const {
    csv::write_text_file(year_dir(year) / name, text);
  }

  json read_json(int year, const std::string& name) const {
    return json::parse(csv::read_text_file(year_dir(year) / name));
  }

  corpus::CountryPanel load_panel(int year) const { return corpus::panel_from_json(read_json(year, "panel.json")); }

  gravity::ResistanceMatrix load_R(int year, const corpus::CountryPanel& panel) const {
    auto R = gravity::load_resistance(year_dir(year) / "resistance.csv", year_dir(year) / "resistance.json");
    if (R.countries != panel.iso_codes()) throw DataError("resistance matrix does not match the panel countries");
    return R;
  }

  void execute(int year, Stage s) {
    switch (s) {
      case Stage::Ingest: return ingest(year);
      case Stage::Gravity: return gravity_stage(year);
      case Stage::Mixture: return mixture_stage(year);
      case Stage::Network: return network_stage(year);
      case Stage::Report: return report_stage(year);
    }
  }

  void ingest(int year) {
    const auto coords = corpus::load_coordinates(cfg_.coordinates);
    std::set<std::string> known;
    for (const auto& c : coords) known.insert(c.iso);
    auto flows = corpus::load_flows(cfg_.flows, year, &known);
    corpus::LoadDiagnostics gdp_diag;
    const auto gdp = corpus::load_gdp(cfg_.gdp, &gdp_diag);
    const auto unions = corpus::load_unions(cfg_.unions);
    const auto build = corpus::build_panel(year, flows.table, gdp, coords, unions);
    for (const auto& m : flows.diagnostics.messages) say("  " + m);
    for (const auto& m : gdp_diag.messages) say("  " + m);

    write(year, "panel.json", corpus::to_json(build.panel).dump() + "\n");
    const json ex = {{"year", year},
                     {"countries", build.panel.size()},
                     {"excluded", corpus::exclusions_to_json(build.excluded)},
                     {"flow_rows_rejected", flows.diagnostics.rejected_rows},
                     {"flow_rows_unknown_iso", flows.diagnostics.unknown_iso_rows},
                     {"flow_rows_duplicate", flows.diagnostics.duplicate_rows},
                     {"gdp_rows_rejected", gdp_diag.rejected_rows}};
    write(year, "exclusions.json", ex.dump(2) + "\n");
  }

  mixture::MixtureOptions mix_options() const {
    mixture::MixtureOptions o;
    o.tol = cfg_.em_tol;
    o.max_iter = cfg_.em_max_iter;
    return o;
  }

  void gravity_stage(int year) {
    const auto panel = load_panel(year);
    gravity::PmlOptions pml_opt;
    pml_opt.tol = cfg_.pml_tol;
    gravity::GravityParams gp;
    gravity::PmlFit pml;
    json search = nullptr;
    if (cfg_.alpha) {
      gp.alpha = *cfg_.alpha;
      pml = gravity::fit_error_params(panel, gp, pml_opt);
    } else {
      mixture::AlphaSearch as;
      as.lo = cfg_.alpha_lo;
      as.hi = cfg_.alpha_hi;
      auto est = mixture::estimate_alpha(panel, as, pml_opt, mix_options());
      gp.alpha = est.alpha;
      pml = est.pml;
      json evals = json::array();
      for (const auto& [a, v] : est.evaluations)
        evals.push_back({{"alpha", a}, {"loglik", std::isfinite(v) ? json(v) : json(nullptr)}});
      search = {{"alpha", est.alpha},
                {"objective", est.objective},
                {"identifiable", est.identifiable},
                {"note", est.note},
                {"evaluations", evals}};
      if (!est.identifiable) say("  " + est.note);
    }
    const auto R = gravity::resistance_matrix(panel, gp, pml.error, pml.excluded_pair_count);
    gravity::save_resistance(R, year_dir(year) / "resistance.csv", year_dir(year) / "resistance.json");
    const json fit = {{"year", year},
                      {"alpha", gp.alpha},
                      {"mu", pml.error.mu},
                      {"sigma", pml.error.sigma},
                      {"expected_eps", pml.error.expected_eps()},
                      {"log_likelihood", pml.log_likelihood},
                      {"used_terms", pml.used_terms},
                      {"excluded_pair_count", pml.excluded_pair_count},
                      {"evaluations", pml.evaluations},
                      {"converged", pml.converged},
                      {"trace", pml.trace},
                      {"alpha_search", search}};
    write(year, "gravity_fit.json", fit.dump(2) + "\n");
  }

  void mixture_stage(int year) {
    const auto panel = load_panel(year);
    const auto R = load_R(year, panel);
    const auto ln_r = R.pair_values();
    const auto ln_d = gravity::log_distance_pairs(panel);
    const auto fit = mixture::fit_em(ln_r, ln_d, mix_options());
    if (!fit.converged) say("  EM stopped at max_iter without meeting em_tol");
    const auto ks = mixture::ks_test(fit.params, ln_r, ln_d);
    const auto tau_m = mixture::tau_matrix(panel.size(), fit.tau);
    const auto t = mixture::tpi(tau_m, R.countries, year);

    write(year, "mixture.json", mixture::to_json(fit, year, ks).dump(2) + "\n");
    write(year, "tau.csv", mixture::tau_csv(R.countries, fit.tau));
    write(year, "tpi.csv", mixture::tpi_csv(t));
    csv::Writer trace({"iteration", "loglik"});
    for (std::size_t k = 0; k < fit.loglik_trace.size(); ++k)
      trace.row({std::to_string(k), format_exact(fit.loglik_trace[k])});
    write(year, "loglik_trace.csv", trace.str());
  }

  void network_stage(int year) {
    const auto panel = load_panel(year);
    const auto R = load_R(year, panel);
    const auto full = net::build_graph(R);
    const auto bb = net::disparity_backbone(full, cfg_.alpha_s);
    const auto part = net::louvain(bb.base, cfg_.seed);

    report::NetworkSummary s;
    s.q = part.q;
    s.n_communities = part.communities;
    s.alpha_s = cfg_.alpha_s;
    s.seed = cfg_.seed;
    s.mean_clustering_backbone = net::mean_clustering(bb.base);
    s.mean_clustering_full = net::mean_clustering(full);
    s.ei_backbone = net::ei_indices(bb.base, part.assignment);
    s.ei_full = net::ei_indices(full, part.assignment);
    s.backbone_edges = bb.base.edges().size();
    s.full_edges = full.edges().size();
    auto j = report::network_summary_json(s);
    if (cfg_.seed_sweep > 0) {
      std::vector<std::uint64_t> seeds;
      for (std::size_t k = 0; k < cfg_.seed_sweep; ++k) seeds.push_back(cfg_.seed + 1 + k);
      const auto sweep = net::louvain_seed_sweep(bb.base, seeds);
      j["seed_sweep"] = {{"seeds", seeds}, {"q", sweep.q}, {"q_min", sweep.q_min}, {"q_max", sweep.q_max},
                         {"q_mean", sweep.q_mean}};
    }
    write(year, "edges.csv", net::edges_csv(bb, full));
    write(year, "partition.csv", net::partition_csv(bb.base, part));
    write(year, "network.json", j.dump(2) + "\n");
    write(year, "similarity.csv", net::similarity_csv(net::jaccard_matrix(panel.unions, bb.base, part)));
  }

  void report_stage(int year) {
    const auto panel = load_panel(year);
    const auto R = load_R(year, panel);
    const auto mix = read_json(year, "mixture.json");
    const auto params = mixture::params_from_json(mix);
    const auto tau = mixture::load_tau(year_dir(year) / "tau.csv", R.countries);
    const auto tau_m = mixture::tau_matrix(panel.size(), tau);
    const auto t = mixture::tpi(tau_m, R.countries, year);
    const auto ln_r = R.pair_values();
    const auto ln_d = gravity::log_distance_pairs(panel);

    write(year, "union_resistance.csv", report::union_table_csv(report::union_resistance_table(R, panel.unions)));
    write(year, "tpi_scatter.csv",
          report::scatter_csv(report::tpi_union_scatter(tau_m, R.countries, panel.unions, panel.flow)));
    const auto h = report::histogram(ln_r, cfg_.hist_bins);
    write(year, "hist_ln_r.csv", report::histogram_csv(h));
    write(year, "density_ln_r.csv", report::density_csv(report::mixture_density(params, ln_d, h.lo, h.hi)));
    write(year, "line_category1.csv", report::regression_line_csv(params, ln_d));
    std::vector<double> tpis;
    for (const auto& [iso, v] : t.tpi) tpis.push_back(v);
    write(year, "hist_tpi.csv", report::histogram_csv(report::histogram(tpis, cfg_.hist_bins)));

    report::SummaryInputs in;
    in.year = year;
    in.stages_run = {"ingest", "gravity", "mixture"};
    in.gravity = read_json(year, "resistance.json");
    in.mixture = mix;
    in.mean_tpi = stats::mean(tpis);
    in.detection_threshold = report::detection_threshold(params, ln_d);
    if (up_to_date(year, Stage::Network)) {
      in.stages_run.push_back("network");
      in.network = read_json(year, "network.json");
    }
    in.stages_run.push_back("report");
    json files = json::object();
    for (auto st : kAllStages) {
      if (st == Stage::Network && !in.network) continue;
      for (const auto& name : stage_outputs(st))
        if (name != "summary.json") files[name] = std::to_string(year) + "/" + name;
    }
    in.files = files;
    write(year, "summary.json", report::summary_report(in).dump(2) + "\n");
  }
};

}  // namespace tradenet::pipeline
