#pragma once

// Optional acquisition of raw trade and GDP data. Nothing else in the
// library depends on this; file inputs always suffice.
//
// Cache layout: <cache>/<source>/<year>.csv plus <cache>/manifest.json.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "tradenet/common.hpp"
#include "tradenet/csv.hpp"

namespace tradenet::fetch {

class FetchError : public Error {
 public:
  using Error::Error;
};

enum class Source { TradeApi, GdpApi };

inline std::string to_string(Source s) { return s == Source::TradeApi ? "trade-api" : "gdp-api"; }

inline Source source_from_string(const std::string& s) {
  if (s == "trade-api") return Source::TradeApi;
  if (s == "gdp-api") return Source::GdpApi;
  throw ConfigError("unknown source '" + s + "' (expected trade-api or gdp-api)");
}

struct HttpResponse {
  int status = 0;  // 0: transport failure, see `error`
  std::string body;
  std::map<std::string, std::string> headers;
  std::string error;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse get(const std::string& url, const std::map<std::string, std::string>& headers) = 0;
};

struct FetchOptions {
  std::string trade_url =
      "https://comtradeapi.un.org/public/v1/preview/C/A/HS?period={year}&cmdCode=TOTAL&flowCode=M,X&includeDesc=true";
  std::string gdp_url =
      "https://api.worldbank.org/v2/country/all/indicator/NY.GDP.MKTP.CD?date={year}&format=json&per_page=20000";
  std::string api_key;  // sent as Ocp-Apim-Subscription-Key to the trade API when set
  int max_retries = 3;
  std::chrono::milliseconds base_delay{500};
  std::chrono::milliseconds max_delay{30000};
  std::function<void(std::chrono::milliseconds)> sleep = [](std::chrono::milliseconds d) {
    std::this_thread::sleep_for(d);
  };
};

struct FetchResult {
  std::vector<std::filesystem::path> files;
  std::size_t cache_hits = 0;
  std::size_t network_calls = 0;
  std::vector<std::string> log;
};

inline std::string expand_url(std::string tmpl, int year) {
  const std::string key = "{year}";
  for (auto pos = tmpl.find(key); pos != std::string::npos; pos = tmpl.find(key)) tmpl.replace(pos, key.size(), std::to_string(year));
  return tmpl;
}

// ---------------------------------------------------------------------------
// Converters into the library's CSV formats

/// World Bank indicator JSON ([page-info, [records...]]) -> `iso,year,gdp_usd`.
inline std::string worldbank_to_gdp_csv(const std::string& body) {
  const auto j = nlohmann::json::parse(body);
  if (!j.is_array() || j.size() < 2 || !j[1].is_array()) throw FetchError("unexpected GDP API response shape");
  std::map<std::pair<std::string, int>, double> rows;
  for (const auto& rec : j[1]) {
    if (!rec.contains("countryiso3code") || !rec.contains("date") || !rec.contains("value")) continue;
    if (rec["value"].is_null() || !rec["countryiso3code"].is_string()) continue;
    const auto iso = rec["countryiso3code"].get<std::string>();
    if (iso.size() != 3) continue;
    const auto year = csv::parse_int(rec["date"].get<std::string>());
    if (!year) continue;
    const double v = rec["value"].get<double>();
    if (v > 0.0) rows[{iso, static_cast<int>(*year)}] = v;
  }
  csv::Writer w({"iso", "year", "gdp_usd"});
  for (const auto& [key, v] : rows) w.row({key.first, std::to_string(key.second), format_exact(v)});
  return w.str();
}

/// Trade API JSON ({"data": [...]}) -> `reporter,partner,year,direction,value_usd`.
/// World and other aggregate partners (non-3-letter or "W00") are dropped.
inline std::string comtrade_to_flows_csv(const std::string& body, int year) {
  const auto j = nlohmann::json::parse(body);
  if (!j.is_object() || !j.contains("data") || !j["data"].is_array())
    throw FetchError("unexpected trade API response shape");
  std::map<std::tuple<std::string, std::string, std::string>, double> rows;
  for (const auto& rec : j["data"]) {
    auto str = [&](const char* k) { return rec.contains(k) && rec[k].is_string() ? rec[k].get<std::string>() : ""; };
    const auto rep = str("reporterISO");
    const auto par = str("partnerISO");
    const auto flow = str("flowCode");
    if (rep.size() != 3 || par.size() != 3 || par == "W00" || rep == par) continue;
    if (!rec.contains("primaryValue") || !rec["primaryValue"].is_number()) continue;
    std::string dir;
    if (flow == "M")
      dir = "import";
    else if (flow == "X")
      dir = "export";
    else
      continue;
    const double v = rec["primaryValue"].get<double>();
    if (v < 0.0) continue;
    auto& slot = rows[{rep, par, dir}];
    slot = std::max(slot, v);
  }
  csv::Writer w({"reporter", "partner", "year", "direction", "value_usd"});
  for (const auto& [key, v] : rows)
    w.row({std::get<0>(key), std::get<1>(key), std::to_string(year), std::get<2>(key), format_exact(v)});
  return w.str();
}

// ---------------------------------------------------------------------------

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline nlohmann::json read_manifest(const std::filesystem::path& cache_dir) {
  const auto p = cache_dir / "manifest.json";
  if (!std::filesystem::exists(p)) return {{"entries", nlohmann::json::array()}};
  return nlohmann::json::parse(csv::read_text_file(p));
}

inline void record_manifest(const std::filesystem::path& cache_dir, Source src, int year, const std::string& url) {
  auto m = read_manifest(cache_dir);
  auto& entries = m["entries"];
  nlohmann::json keep = nlohmann::json::array();
  for (const auto& e : entries)
    if (!(e.value("source", "") == to_string(src) && e.value("year", 0) == year)) keep.push_back(e);
  keep.push_back({{"source", to_string(src)},
                  {"year", year},
                  {"path", to_string(src) + "/" + std::to_string(year) + ".csv"},
                  {"url", url},
                  {"retrieved_at", utc_timestamp()}});
  std::sort(keep.begin(), keep.end(), [](const nlohmann::json& a, const nlohmann::json& b) {
    return std::make_pair(a.value("source", ""), a.value("year", 0)) <
           std::make_pair(b.value("source", ""), b.value("year", 0));
  });
  m["entries"] = keep;
  csv::write_text_file(cache_dir / "manifest.json", m.dump(2) + "\n");
}

/// GET with retries: transport failures, 5xx and 429 are retried with
/// exponential backoff (429 honours Retry-After, in seconds); any other
/// non-200 status fails immediately.
inline HttpResponse get_with_retry(Transport& t, const std::string& url, const std::map<std::string, std::string>& hdr,
                                   const FetchOptions& opt, FetchResult& res) {
  HttpResponse last;
  for (int attempt = 0; attempt <= opt.max_retries; ++attempt) {
    if (attempt > 0) {
      std::chrono::milliseconds delay = opt.base_delay * (1LL << (attempt - 1));
      if (last.status == 429) {
        auto it = last.headers.find("Retry-After");
        if (it != last.headers.end()) {
          if (auto secs = csv::parse_int(it->second)) delay = std::chrono::milliseconds(*secs * 1000);
        }
      }
      opt.sleep(std::min(delay, opt.max_delay));
    }
    ++res.network_calls;
    last = t.get(url, hdr);
    if (last.status == 200) return last;
    res.log.push_back("GET " + url + " attempt " + std::to_string(attempt + 1) + ": " +
                      (last.status == 0 ? "transport error: " + last.error : "HTTP " + std::to_string(last.status)));
    const bool retryable = last.status == 0 || last.status == 429 || last.status >= 500;
    if (!retryable) break;
  }
  throw FetchError("download failed for " + url + " (" +
                   (last.status == 0 ? last.error : "HTTP " + std::to_string(last.status)) +
                   "); file inputs can be used instead: place a CSV at <cache>/<source>/<year>.csv or point the "
                   "config at local flows/gdp files");
}

/// Downloads and caches one CSV per (source, year). Cached years are never
/// fetched again.
inline FetchResult fetch_remote(Source src, int first_year, int last_year, const std::filesystem::path& cache_dir,
                                Transport& transport, const FetchOptions& opt = {}) {
  if (first_year > last_year) throw ConfigError("empty year range");
  FetchResult res;
  for (int year = first_year; year <= last_year; ++year) {
    const auto path = cache_dir / to_string(src) / (std::to_string(year) + ".csv");
    if (std::filesystem::exists(path)) {
      ++res.cache_hits;
      res.log.push_back("cache hit: " + path.string());
      res.files.push_back(path);
      continue;
    }
    const std::string url = expand_url(src == Source::TradeApi ? opt.trade_url : opt.gdp_url, year);
    std::map<std::string, std::string> hdr;
    if (src == Source::TradeApi && !opt.api_key.empty()) hdr["Ocp-Apim-Subscription-Key"] = opt.api_key;
    const auto resp = get_with_retry(transport, url, hdr, opt, res);
    const std::string csv_text =
        src == Source::TradeApi ? comtrade_to_flows_csv(resp.body, year) : worldbank_to_gdp_csv(resp.body);
    csv::write_text_file(path, csv_text);
    record_manifest(cache_dir, src, year, url);
    res.log.push_back("downloaded: " + path.string());
    res.files.push_back(path);
  }
  return res;
}

}  // namespace tradenet::fetch
