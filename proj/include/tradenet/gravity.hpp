#pragma once

// Symmetric pairwise trade resistance from the extended gravity model, with
// a lognormal error term fitted by pseudo maximum likelihood so that zero
// flows still produce a finite resistance.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "tradenet/common.hpp"
#include "tradenet/corpus.hpp"
#include "tradenet/csv.hpp"

namespace tradenet::gravity {

/// E(eps) of a lognormal with ln eps ~ N(mu, sigma^2), i.e. exp(mu + sigma^2 / 2).
inline double expected_error_mean(double mu, double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
  if (!std::isfinite(mu)) throw ConfigError("mu must be finite");
  return std::exp(mu + 0.5 * sigma * sigma);
}

struct ErrorModel {
  double mu = 0.0;
  double sigma = 1e-6;

  double expected_eps() const { return expected_error_mean(mu, sigma); }
};

struct GravityParams {
  double alpha = 1.0;  // exponent on m_i * m_j
  double scale = 1.0;  // G

  void validate() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be positive");
    if (!(scale > 0.0) || !std::isfinite(scale)) throw ConfigError("scale must be positive");
  }
};

/// ln r* = ln(2 G) + alpha ln(m_i m_j) - ln(F_ij + F_ji + 2 E(eps)).
/// Evaluated in log space so large GDP products cannot overflow.
inline double log_resistance(double f_ij, double f_ji, double m_i, double m_j, const GravityParams& params,
                             double expected_eps) {
  if (!(m_i > 0.0) || !(m_j > 0.0)) throw DataError("GDP must be positive");
  if (!(f_ij >= 0.0) || !(f_ji >= 0.0)) throw DataError("flows must be non-negative");
  const double denom = f_ij + f_ji + 2.0 * expected_eps;
  return std::log(2.0 * params.scale) + params.alpha * (std::log(m_i) + std::log(m_j)) - std::log(denom);
}

/// r* = 2 G (m_i m_j)^alpha / (F_ij + F_ji + 2 E(eps)); symmetric in (i, j).
inline double resistance(double f_ij, double f_ji, double m_i, double m_j, const GravityParams& params,
                         const ErrorModel& error) {
  return std::exp(log_resistance(f_ij, f_ji, m_i, m_j, params, error.expected_eps()));
}

// ---------------------------------------------------------------------------
// PML error fit

struct PmlOptions {
  double mu_lo = -2.0;
  double mu_hi = 2.0;
  double sigma_lo = 1e-6;
  double sigma_hi = 1.0;
  double tol = 1e-8;  // on the pattern-search step, per coordinate
  std::size_t max_evaluations = 200000;
  std::size_t grid_mu = 41;     // coarse start grid
  std::size_t grid_sigma = 13;  // log-spaced
};

struct PmlFit {
  ErrorModel error;
  double log_likelihood = -std::numeric_limits<double>::infinity();
  std::size_t used_terms = 0;
  std::size_t excluded_pair_count = 0;  // ordered pairs with density argument <= 0
  std::size_t evaluations = 0;
  std::size_t accepted_steps = 0;
  bool converged = false;
  std::vector<double> trace;  // objective after each accepted step
};

struct PmlObjective {
  double value = -std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  std::size_t excluded = 0;
};

/// Sum over ordered pairs i != j of ln f_X(r*_ij - F_ij; mu, sigma), with
/// r*_ij evaluated at E(eps) = exp(mu + sigma^2 / 2) and f_X the lognormal
/// density. Pairs whose argument is not positive are skipped and counted.
inline PmlObjective pml_objective(const corpus::CountryPanel& panel, const GravityParams& params, double mu,
                                  double sigma) {
  const double e_eps = expected_error_mean(mu, sigma);
  const std::size_t n = panel.size();
  const double log_sigma = std::log(sigma);
  const double inv_two_var = 1.0 / (2.0 * sigma * sigma);
  CompensatedSum sum;
  PmlObjective out;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double f_ij = panel.flow(i, j);
      const double r = std::exp(log_resistance(f_ij, panel.flow(j, i), panel.gdp[i], panel.gdp[j], params, e_eps));
      const double x = r - f_ij;
      if (!(x > 0.0) || !std::isfinite(x)) {
        ++out.excluded;
        continue;
      }
      const double lx = std::log(x);
      const double dz = lx - mu;
      sum.add(-lx - log_sigma - stats::kLogSqrt2Pi - dz * dz * inv_two_var);
      ++out.used;
    }
  }
  if (out.used > 0) out.value = sum.value();
  return out;
}

/// Histogram of density arguments (r* - F_ij) by decade, for diagnostics.
inline std::map<std::string, std::size_t> pml_argument_histogram(const corpus::CountryPanel& panel,
                                                                 const GravityParams& params, double e_eps) {
  std::map<std::string, std::size_t> h;
  const std::size_t n = panel.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double x = std::exp(log_resistance(panel.flow(i, j), panel.flow(j, i), panel.gdp[i], panel.gdp[j],
                                               params, e_eps)) -
                       panel.flow(i, j);
      if (!(x > 0.0) || !std::isfinite(x)) {
        ++h["<=0"];
      } else {
        ++h["1e" + std::to_string(static_cast<int>(std::floor(std::log10(x))))];
      }
    }
  }
  return h;
}

/// Maximizes pml_objective over mu in [mu_lo, mu_hi] and sigma in
/// [sigma_lo, sigma_hi]. E(eps) is recomputed from (mu, sigma) at every
/// evaluation, so the returned pair is a fixed point of the E(eps) update.
/// Search: coarse grid in (mu, ln sigma), then compass search from the best
/// grid point with step halving until both steps fall below `tol`.
inline PmlFit fit_error_params(const corpus::CountryPanel& panel, const GravityParams& params,
                               const PmlOptions& opt = {}) {
  params.validate();
  if (!(opt.mu_lo < opt.mu_hi) || !(0.0 < opt.sigma_lo && opt.sigma_lo < opt.sigma_hi))
    throw ConfigError("empty PML search box");
  if (!(opt.tol > 0.0)) throw ConfigError("pml tolerance must be positive");
  if (opt.grid_mu < 2 || opt.grid_sigma < 2) throw ConfigError("PML start grid needs at least 2 points per axis");

  const double s_lo = std::log(opt.sigma_lo);
  const double s_hi = std::log(opt.sigma_hi);
  PmlFit fit;

  auto eval = [&](double mu, double s) {
    ++fit.evaluations;
    return pml_objective(panel, params, mu, std::exp(s));
  };

  double best_mu = 0.0;
  double best_s = 0.0;
  PmlObjective best;
  for (std::size_t a = 0; a < opt.grid_mu; ++a) {
    const double mu = opt.mu_lo + (opt.mu_hi - opt.mu_lo) * static_cast<double>(a) / (opt.grid_mu - 1);
    for (std::size_t b = 0; b < opt.grid_sigma; ++b) {
      const double s = s_lo + (s_hi - s_lo) * static_cast<double>(b) / (opt.grid_sigma - 1);
      const auto v = eval(mu, s);
      if (v.used > 0 && v.value > best.value) {
        best = v;
        best_mu = mu;
        best_s = s;
      }
    }
  }
  if (best.used == 0 || !std::isfinite(best.value)) {
    std::string msg = "PML fit failed: no (mu, sigma) in the search box gives a positive likelihood; "
                      "density arguments at E(eps)=1:";
    for (const auto& [bucket, count] : pml_argument_histogram(panel, params, 1.0))
      msg += " " + bucket + ":" + std::to_string(count);
    throw FitError(msg);
  }
  fit.trace.push_back(best.value);

  double step_mu = (opt.mu_hi - opt.mu_lo) / static_cast<double>(opt.grid_mu - 1);
  double step_s = (s_hi - s_lo) / static_cast<double>(opt.grid_sigma - 1);
  while (fit.evaluations < opt.max_evaluations) {
    if (step_mu < opt.tol && step_s < opt.tol) {
      fit.converged = true;
      break;
    }
    const std::array<std::array<double, 2>, 4> polls{{{step_mu, 0.0}, {-step_mu, 0.0}, {0.0, step_s}, {0.0, -step_s}}};
    PmlObjective poll_best = best;
    double poll_mu = best_mu;
    double poll_s = best_s;
    for (const auto& d : polls) {
      const double mu = std::clamp(best_mu + d[0], opt.mu_lo, opt.mu_hi);
      const double s = std::clamp(best_s + d[1], s_lo, s_hi);
      if (mu == best_mu && s == best_s) continue;
      const auto v = eval(mu, s);
      if (v.used > 0 && v.value > poll_best.value) {
        poll_best = v;
        poll_mu = mu;
        poll_s = s;
      }
    }
    if (poll_best.value > best.value) {
      best = poll_best;
      best_mu = poll_mu;
      best_s = poll_s;
      ++fit.accepted_steps;
      fit.trace.push_back(best.value);
    } else {
      step_mu *= 0.5;
      step_s *= 0.5;
    }
  }

  fit.error = {best_mu, std::clamp(std::exp(best_s), opt.sigma_lo, opt.sigma_hi)};
  fit.log_likelihood = best.value;
  fit.used_terms = best.used;
  fit.excluded_pair_count = best.excluded;
  return fit;
}

// ---------------------------------------------------------------------------
// Resistance matrix

struct ResistanceMatrix {
  int year = 0;
  std::vector<std::string> countries;  // sorted iso codes
  SquareMatrix ln_r;                   // symmetric, NaN diagonal
  GravityParams params;
  ErrorModel error;
  std::size_t excluded_pair_count = 0;

  std::size_t size() const { return countries.size(); }

  /// ln r over unordered pairs in PairIndex order.
  std::vector<double> pair_values() const {
    std::vector<double> out;
    out.reserve(PairIndex(size()).size());
    for (std::size_t i = 0; i < size(); ++i)
      for (std::size_t j = i + 1; j < size(); ++j) out.push_back(ln_r(i, j));
    return out;
  }
};

inline ResistanceMatrix resistance_matrix(const corpus::CountryPanel& panel, const GravityParams& params,
                                          const ErrorModel& error, std::size_t excluded_pair_count = 0) {
  params.validate();
  const double e_eps = error.expected_eps();
  const std::size_t n = panel.size();
  ResistanceMatrix R;
  R.year = panel.year;
  R.countries = panel.iso_codes();
  R.params = params;
  R.error = error;
  R.excluded_pair_count = excluded_pair_count;
  R.ln_r = SquareMatrix(n, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = log_resistance(panel.flow(i, j), panel.flow(j, i), panel.gdp[i], panel.gdp[j], params, e_eps);
      if (!std::isfinite(v)) throw FitError("non-finite resistance for " + R.countries[i] + "-" + R.countries[j]);
      R.ln_r(i, j) = v;
      R.ln_r(j, i) = v;
    }
  }
  return R;
}

/// ln d over unordered pairs in PairIndex order.
inline std::vector<double> log_distance_pairs(const corpus::CountryPanel& panel) {
  std::vector<double> out;
  out.reserve(PairIndex(panel.size()).size());
  for (std::size_t i = 0; i < panel.size(); ++i)
    for (std::size_t j = i + 1; j < panel.size(); ++j) out.push_back(std::log(panel.distance(i, j)));
  return out;
}

// ---------------------------------------------------------------------------
// Serialization: `iso_a,iso_b,ln_r` plus a JSON sidecar.

inline std::string resistance_csv(const ResistanceMatrix& R) {
  csv::Writer w({"iso_a", "iso_b", "ln_r"});
  for (std::size_t i = 0; i < R.size(); ++i)
    for (std::size_t j = i + 1; j < R.size(); ++j) w.row({R.countries[i], R.countries[j], format_exact(R.ln_r(i, j))});
  return w.str();
}

inline nlohmann::json resistance_sidecar(const ResistanceMatrix& R) {
  return {{"year", R.year},
          {"alpha", R.params.alpha},
          {"scale", R.params.scale},
          {"mu", R.error.mu},
          {"sigma", R.error.sigma},
          {"expected_eps", R.error.expected_eps()},
          {"excluded_pair_count", R.excluded_pair_count}};
}

inline void save_resistance(const ResistanceMatrix& R, const std::filesystem::path& csv_path,
                            const std::filesystem::path& json_path) {
  csv::write_text_file(csv_path, resistance_csv(R));
  csv::write_text_file(json_path, resistance_sidecar(R).dump(2) + "\n");
}

inline ResistanceMatrix load_resistance(const std::filesystem::path& csv_path, const std::filesystem::path& json_path) {
  const auto side = nlohmann::json::parse(csv::read_text_file(json_path));
  ResistanceMatrix R;
  R.year = side.at("year").get<int>();
  R.params = {side.at("alpha").get<double>(), side.at("scale").get<double>()};
  R.error = {side.at("mu").get<double>(), side.at("sigma").get<double>()};
  R.excluded_pair_count = side.at("excluded_pair_count").get<std::size_t>();

  const auto rows = csv::read(csv_path, {"iso_a", "iso_b", "ln_r"});
  std::set<std::string> isos;
  for (const auto& r : rows) {
    isos.insert(r.fields[0]);
    isos.insert(r.fields[1]);
  }
  R.countries.assign(isos.begin(), isos.end());
  std::map<std::string, std::size_t> idx;
  for (std::size_t i = 0; i < R.countries.size(); ++i) idx[R.countries[i]] = i;
  R.ln_r = SquareMatrix(R.countries.size(), std::numeric_limits<double>::quiet_NaN());
  std::size_t filled = 0;
  for (const auto& r : rows) {
    const auto v = csv::parse_double(r.fields[2]);
    if (!v || !std::isfinite(*v))
      throw DataError(csv_path.string() + ":" + std::to_string(r.line) + ": invalid ln_r");
    const auto i = idx.at(r.fields[0]);
    const auto j = idx.at(r.fields[1]);
    if (i == j) throw DataError(csv_path.string() + ":" + std::to_string(r.line) + ": self-pair");
    R.ln_r(i, j) = *v;
    R.ln_r(j, i) = *v;
    ++filled;
  }
  if (filled != PairIndex(R.countries.size()).size())
    throw DataError(csv_path.string() + ": resistance matrix is incomplete");
  return R;
}

}  // namespace tradenet::gravity
