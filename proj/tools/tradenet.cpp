// tradenet: command-line front end for the per-year pipeline.
//
//   tradenet run --config cfg.json --years 2007-2009
//   tradenet fit-gravity --config cfg.json --years 2007
//   tradenet validate --config cfg.json
//
// Exit status: 0 success, 1 invalid configuration or arguments, 2 runtime failure.

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <CLI11.hpp>
#include <httplib.h>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "tradenet/fetch.hpp"
#include "tradenet/pipeline.hpp"

namespace {

using namespace tradenet;

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitRuntime = 2;

class HttplibTransport : public fetch::Transport {
 public:
  fetch::HttpResponse get(const std::string& url, const std::map<std::string, std::string>& headers) override {
    fetch::HttpResponse out;
    const auto scheme_end = url.find("://");
    const auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (scheme_end == std::string::npos) {
      out.error = "malformed url: " + url;
      return out;
    }
    httplib::Client cli(url.substr(0, path_start));
    cli.set_connection_timeout(10);
    cli.set_read_timeout(60);
    cli.set_follow_location(true);
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = cli.Get(path_start == std::string::npos ? "/" : url.substr(path_start), h);
    if (!res) {
      out.error = httplib::to_string(res.error());
      return out;
    }
    out.status = res->status;
    out.body = res->body;
    for (const auto& [k, v] : res->headers) out.headers[k] = v;
    return out;
  }
};

struct Overrides {
  std::string config;
  std::string years;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string flows, gdp, coordinates, unions;
  std::string alpha;
  std::optional<double> alpha_s;
  std::optional<double> em_tol;
  std::optional<double> pml_tol;
  std::optional<std::size_t> seed_sweep;
};

pipeline::PipelineConfig build_config(const Overrides& o) {
  pipeline::PipelineConfig c = o.config.empty() ? pipeline::PipelineConfig{} : pipeline::load_config(o.config);
  if (!o.years.empty()) std::tie(c.year_first, c.year_last) = pipeline::parse_years(o.years);
  if (!o.out.empty()) c.out = o.out;
  if (o.seed) c.seed = *o.seed;
  if (!o.flows.empty()) c.flows = o.flows;
  if (!o.gdp.empty()) c.gdp = o.gdp;
  if (!o.coordinates.empty()) c.coordinates = o.coordinates;
  if (!o.unions.empty()) c.unions = o.unions;
  if (o.alpha == "search") {
    c.alpha = std::nullopt;
  } else if (!o.alpha.empty()) {
    const auto a = csv::parse_double(o.alpha);
    if (!a) throw ConfigError("alpha: expected a number or \"search\"");
    c.alpha = *a;
  }
  if (o.alpha_s) c.alpha_s = *o.alpha_s;
  if (o.em_tol) c.em_tol = *o.em_tol;
  if (o.pml_tol) c.pml_tol = *o.pml_tol;
  if (o.seed_sweep) c.seed_sweep = *o.seed_sweep;
  return c;
}

int run_stages(const Overrides& o, const std::vector<pipeline::Stage>& stages) {
  const auto cfg = build_config(o);
  pipeline::Runner runner(cfg);
  std::optional<std::filesystem::path> source;
  if (!o.config.empty()) source = o.config;
  runner.run(stages, source);
  return kExitOk;
}

int do_validate(const Overrides& o) {
  const auto cfg = build_config(o);
  const auto v = pipeline::validate(cfg);
  if (v.empty()) {
    std::cout << "ok\n";
    return kExitOk;
  }
  for (const auto& x : v) std::cout << x.field << ": " << x.message << "\n";
  return kExitInvalid;
}

int do_fetch(const Overrides& o, const std::string& source) {
  const auto cfg = build_config(o);
  if (cfg.year_first > cfg.year_last) throw ConfigError("years: year range is empty");
  std::vector<fetch::Source> sources;
  if (source == "all")
    sources = {fetch::Source::TradeApi, fetch::Source::GdpApi};
  else
    sources = {fetch::source_from_string(source)};
  fetch::FetchOptions opt;
  if (const char* key = std::getenv("COMTRADE_API_KEY")) opt.api_key = key;
  HttplibTransport transport;
  for (auto s : sources) {
    const auto res = fetch::fetch_remote(s, cfg.year_first, cfg.year_last, cfg.cache, transport, opt);
    for (const auto& line : res.log) std::cerr << line << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trade resistance, mixture decomposition and network analysis"};
  app.require_subcommand(1);
  app.fallthrough();
  Overrides o;
  app.add_option("--config", o.config, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--years", o.years, "Year or range, e.g. 2007 or 2007-2017");
  app.add_option("--out", o.out, "Output directory");
  app.add_option("--seed", o.seed, "Louvain seed");
  app.add_option("--flows", o.flows, "Flows CSV");
  app.add_option("--gdp", o.gdp, "GDP CSV");
  app.add_option("--coordinates", o.coordinates, "Coordinates CSV");
  app.add_option("--unions", o.unions, "Union membership file");
  app.add_option("--alpha", o.alpha, "GDP exponent, or \"search\"");
  app.add_option("--alpha-s", o.alpha_s, "Disparity filter significance level");
  app.add_option("--em-tol", o.em_tol, "EM convergence tolerance");
  app.add_option("--pml-tol", o.pml_tol, "PML step tolerance");

  using pipeline::Stage;
  auto* ingest = app.add_subcommand("ingest", "Build the per-year country panel");
  auto* gravity = app.add_subcommand("fit-gravity", "Fit the error model and write resistance matrices");
  auto* mixture = app.add_subcommand("fit-mixture", "Fit the two-category mixture, TPI and KS test");
  auto* network = app.add_subcommand("network", "Backbone, communities, E-I indices and union similarity");
  network->add_option("--seed-sweep", o.seed_sweep, "Also report Q for this many further seeds");
  auto* report = app.add_subcommand("report", "Tables, plot data and the summary document");
  auto* run = app.add_subcommand("run", "Run several stages in dependency order");
  std::string stages = "all";
  run->add_option("--stages", stages, "Comma-separated stages, or all");
  run->add_option("--seed-sweep", o.seed_sweep, "Also report Q for this many further seeds");
  auto* fetch_cmd = app.add_subcommand("fetch", "Download trade and GDP data into the cache");
  std::string source = "all";
  fetch_cmd->add_option("--source", source, "trade-api, gdp-api or all");
  auto* validate = app.add_subcommand("validate", "Check a configuration without running anything");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*ingest) return run_stages(o, {Stage::Ingest});
    if (*gravity) return run_stages(o, {Stage::Gravity});
    if (*mixture) return run_stages(o, {Stage::Mixture});
    if (*network) return run_stages(o, {Stage::Network});
    if (*report) return run_stages(o, {Stage::Report});
    if (*run) return run_stages(o, pipeline::parse_stages(stages));
    if (*fetch_cmd) return do_fetch(o, source);
    if (*validate) return do_validate(o);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
