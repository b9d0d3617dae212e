#pragma once

// Two-category decomposition of ln r by EM with equal fixed priors:
//   category I : ln r = a + b ln d + eta,  eta ~ N(0, sigma1^2)
//   category II: ln r = xi,                xi  ~ N(mu, sigma2^2)
// tau is the posterior probability of category I for each pair.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tradenet/common.hpp"
#include "tradenet/corpus.hpp"
#include "tradenet/csv.hpp"
#include "tradenet/gravity.hpp"

namespace tradenet::mixture {

struct MixtureParams {
  double a = 0.0;
  double b = 0.0;
  double sigma1 = 1.0;
  double mu = 0.0;
  double sigma2 = 1.0;

  void validate() const {
    if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(mu)) throw FitError("non-finite mixture parameter");
    if (!(sigma1 > 0.0) || !(sigma2 > 0.0) || !std::isfinite(sigma1) || !std::isfinite(sigma2))
      throw FitError("mixture standard deviations must be positive");
  }

  double max_abs_diff(const MixtureParams& o) const {
    return std::max({std::abs(a - o.a), std::abs(b - o.b), std::abs(sigma1 - o.sigma1), std::abs(mu - o.mu),
                     std::abs(sigma2 - o.sigma2)});
  }
};

struct MixtureOptions {
  double tol = 1e-6;
  std::size_t max_iter = 500;
  double sigma_floor = 1e-4;
  double min_weight = 1e-9;
  double loglik_slack = 1e-9;
};

struct MixtureFit {
  MixtureParams params;
  std::vector<double> tau;  // per pair, PairIndex order
  std::vector<double> loglik_trace;
  std::size_t iterations = 0;
  bool converged = false;

  double loglik_final() const {
    return loglik_trace.empty() ? std::numeric_limits<double>::quiet_NaN() : loglik_trace.back();
  }
};

/// Posterior probability of category I: p1 / (p1 + p2), evaluated from log
/// densities so it stays defined when both densities underflow.
inline double responsibility(const MixtureParams& p, double ln_r, double ln_d) {
  const double l1 = stats::normal_log_pdf(ln_r, p.a + p.b * ln_d, p.sigma1);
  const double l2 = stats::normal_log_pdf(ln_r, p.mu, p.sigma2);
  // 1 / (1 + exp(l2 - l1)), written to avoid overflow in either direction
  const double t = l2 - l1;
  if (t > 0.0) {
    const double e = std::exp(-t);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(t));
}

inline void check_aligned(std::span<const double> ln_r, std::span<const double> ln_d) {
  if (ln_r.size() != ln_d.size()) throw ConfigError("ln_r and ln_d are not aligned");
}

inline std::vector<double> e_step(const MixtureParams& params, std::span<const double> ln_r,
                                  std::span<const double> ln_d) {
  check_aligned(ln_r, ln_d);
  std::vector<double> tau(ln_r.size());
  for (std::size_t k = 0; k < ln_r.size(); ++k) tau[k] = responsibility(params, ln_r[k], ln_d[k]);
  return tau;
}

/// Closed-form maximizer of sum[tau ln p1 + (1 - tau) ln p2]: weighted
/// least squares for (a, b), weighted moments for the rest. Standard
/// deviations are floored at `sigma_floor`.
inline MixtureParams m_step(std::span<const double> tau, std::span<const double> ln_r, std::span<const double> ln_d,
                            const MixtureOptions& opt = {}) {
  check_aligned(ln_r, ln_d);
  if (tau.size() != ln_r.size()) throw ConfigError("tau and ln_r are not aligned");

  CompensatedSum w1, w1x, w1y, w2, w2y;
  for (std::size_t k = 0; k < tau.size(); ++k) {
    w1 += tau[k];
    w1x += tau[k] * ln_d[k];
    w1y += tau[k] * ln_r[k];
    w2 += 1.0 - tau[k];
    w2y += (1.0 - tau[k]) * ln_r[k];
  }
  if (w1.value() < opt.min_weight)
    throw FitError("degenerate mixture: category I total weight " + format_exact(w1.value()) + " < " +
                   format_exact(opt.min_weight));
  if (w2.value() < opt.min_weight)
    throw FitError("degenerate mixture: category II total weight " + format_exact(w2.value()) + " < " +
                   format_exact(opt.min_weight));

  MixtureParams p;
  // centred sums for numerical stability
  const double xbar = w1x.value() / w1.value();
  const double ybar = w1y.value() / w1.value();
  CompensatedSum sxx, sxy;
  for (std::size_t k = 0; k < tau.size(); ++k) {
    const double dx = ln_d[k] - xbar;
    sxx += tau[k] * dx * dx;
    sxy += tau[k] * dx * (ln_r[k] - ybar);
  }
  if (!(sxx.value() > 0.0)) throw FitError("degenerate mixture: no spread in ln d among category I pairs");
  p.b = sxy.value() / sxx.value();
  p.a = ybar - p.b * xbar;

  p.mu = w2y.value() / w2.value();
  CompensatedSum r1, r2;
  for (std::size_t k = 0; k < tau.size(); ++k) {
    const double e1 = ln_r[k] - p.a - p.b * ln_d[k];
    const double e2 = ln_r[k] - p.mu;
    r1 += tau[k] * e1 * e1;
    r2 += (1.0 - tau[k]) * e2 * e2;
  }
  p.sigma1 = std::max(opt.sigma_floor, std::sqrt(std::max(0.0, r1.value() / w1.value())));
  p.sigma2 = std::max(opt.sigma_floor, std::sqrt(std::max(0.0, r2.value() / w2.value())));
  return p;
}

/// Observed-data log-likelihood sum ln(p1/2 + p2/2).
inline double log_likelihood(const MixtureParams& p, std::span<const double> ln_r, std::span<const double> ln_d) {
  check_aligned(ln_r, ln_d);
  CompensatedSum s;
  for (std::size_t k = 0; k < ln_r.size(); ++k) {
    const double l1 = stats::normal_log_pdf(ln_r[k], p.a + p.b * ln_d[k], p.sigma1);
    const double l2 = stats::normal_log_pdf(ln_r[k], p.mu, p.sigma2);
    s += stats::log_add_exp(l1, l2) - std::numbers::ln2;
  }
  return s.value();
}

/// Deterministic start: OLS of ln r on ln d for category I; the pairs in
/// the top quartile of OLS residuals seed category II.
inline MixtureParams initial_params(std::span<const double> ln_r, std::span<const double> ln_d,
                                    const MixtureOptions& opt = {}) {
  check_aligned(ln_r, ln_d);
  const std::size_t n = ln_r.size();
  if (n < 2) throw FitError("need at least 2 pairs to initialise the mixture");
  const double xbar = stats::mean(ln_d);
  const double ybar = stats::mean(ln_r);
  CompensatedSum sxx, sxy;
  for (std::size_t k = 0; k < n; ++k) {
    sxx += (ln_d[k] - xbar) * (ln_d[k] - xbar);
    sxy += (ln_d[k] - xbar) * (ln_r[k] - ybar);
  }
  MixtureParams p;
  p.b = sxx.value() > 0.0 ? sxy.value() / sxx.value() : 0.0;
  p.a = ybar - p.b * xbar;

  std::vector<double> resid(n);
  for (std::size_t k = 0; k < n; ++k) resid[k] = ln_r[k] - p.a - p.b * ln_d[k];
  p.sigma1 = std::max(opt.sigma_floor, stats::stddev(resid));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return resid[x] > resid[y]; });
  const std::size_t top = std::max<std::size_t>(1, n / 4);
  std::vector<double> high;
  high.reserve(top);
  for (std::size_t k = 0; k < top; ++k) high.push_back(ln_r[order[k]]);
  p.mu = stats::mean(high);
  p.sigma2 = std::max(opt.sigma_floor, stats::stddev(high));
  return p;
}

/// Alternates e_step / m_step until the largest parameter change is below
/// `opt.tol` or `opt.max_iter` iterations ran. loglik_trace[0] is the
/// likelihood at `init`; entry t is the likelihood after iteration t.
inline MixtureFit fit_em(std::span<const double> ln_r, std::span<const double> ln_d, const MixtureParams& init,
                         const MixtureOptions& opt = {}) {
  check_aligned(ln_r, ln_d);
  if (ln_r.size() < 10) throw FitError("EM needs at least 10 pairs, got " + std::to_string(ln_r.size()));
  if (!(opt.tol > 0.0)) throw ConfigError("EM tolerance must be positive");
  init.validate();

  MixtureFit fit;
  fit.params = init;
  double ll = log_likelihood(fit.params, ln_r, ln_d);
  if (!std::isfinite(ll)) throw FitError("non-finite mixture log-likelihood at the initial parameters");
  fit.loglik_trace.push_back(ll);

  for (std::size_t it = 0; it < opt.max_iter; ++it) {
    const auto tau = e_step(fit.params, ln_r, ln_d);
    const MixtureParams next = m_step(tau, ln_r, ln_d, opt);
    next.validate();
    const double step = next.max_abs_diff(fit.params);
    fit.params = next;
    ++fit.iterations;
    ll = log_likelihood(fit.params, ln_r, ln_d);
    if (!std::isfinite(ll)) throw FitError("non-finite mixture log-likelihood at iteration " + std::to_string(it + 1));
    if (ll < fit.loglik_trace.back() - opt.loglik_slack * std::max(1.0, std::abs(fit.loglik_trace.back())))
      throw FitError("EM log-likelihood decreased at iteration " + std::to_string(it + 1));
    fit.loglik_trace.push_back(ll);
    if (step < opt.tol) {
      fit.converged = true;
      break;
    }
  }
  fit.tau = e_step(fit.params, ln_r, ln_d);
  return fit;
}

inline MixtureFit fit_em(std::span<const double> ln_r, std::span<const double> ln_d, const MixtureOptions& opt = {}) {
  return fit_em(ln_r, ln_d, initial_params(ln_r, ln_d, opt), opt);
}

/// Expands per-pair tau into a symmetric N x N matrix with NaN diagonal.
inline SquareMatrix tau_matrix(std::size_t n, std::span<const double> tau) {
  PairIndex idx(n);
  if (tau.size() != idx.size()) throw ConfigError("tau does not match the country count");
  SquareMatrix m(n, std::numeric_limits<double>::quiet_NaN());
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j, ++k) {
      m(i, j) = tau[k];
      m(j, i) = tau[k];
    }
  return m;
}

// ---------------------------------------------------------------------------
// Trade purity indicator

struct TpiVector {
  int year = 0;
  std::map<std::string, double> tpi;
  std::vector<std::string> excluded;  // no partner with a defined tau
};

/// TPI_i = mean of tau_ij over partners j with a defined (non-NaN) tau.
/// Dividing by the partner count rather than N keeps all-ones at exactly 1.
inline TpiVector tpi(const SquareMatrix& tau, const std::vector<std::string>& countries, int year = 0) {
  if (tau.size() != countries.size()) throw ConfigError("tau matrix does not match the country list");
  TpiVector out;
  out.year = year;
  for (std::size_t i = 0; i < countries.size(); ++i) {
    CompensatedSum s;
    std::size_t partners = 0;
    for (std::size_t j = 0; j < countries.size(); ++j) {
      if (i == j || std::isnan(tau(i, j))) continue;
      s += tau(i, j);
      ++partners;
    }
    if (partners == 0) {
      out.excluded.push_back(countries[i]);
      continue;
    }
    out.tpi[countries[i]] = std::clamp(s.value() / static_cast<double>(partners), 0.0, 1.0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov goodness of fit

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t sample_size = 0;
};

/// Asymptotic P(D_n > d) from the Kolmogorov series with Stephens'
/// small-sample correction of the argument.
inline double kolmogorov_pvalue(std::size_t n, double d) {
  if (n == 0) return 1.0;
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  if (lambda < 1e-3) return 1.0;
  if (lambda < 1.18) {
    // small-lambda form: 1 - sqrt(2 pi)/lambda * sum exp(-(2k-1)^2 pi^2 / (8 lambda^2))
    const double c = -std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
    double s = 0.0;
    for (int k = 1; k <= 50; ++k) {
      const double t = std::exp(c * (2 * k - 1) * (2 * k - 1));
      s += t;
      if (t < 1e-17) break;
    }
    return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * s, 0.0, 1.0);
  }
  double s = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double t = std::exp(-2.0 * k * k * lambda * lambda);
    s += sign * t;
    sign = -sign;
    if (t < 1e-17) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

/// One-sample KS test of `u` against Uniform(0, 1).
inline KsResult ks_uniform(std::vector<double> u) {
  if (u.size() < 10) throw ConfigError("KS test needs at least 10 samples, got " + std::to_string(u.size()));
  std::sort(u.begin(), u.end());
  const double n = static_cast<double>(u.size());
  double d = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double x = std::clamp(u[k], 0.0, 1.0);
    d = std::max({d, (static_cast<double>(k) + 1.0) / n - x, x - static_cast<double>(k) / n});
  }
  d = std::clamp(d, 0.0, 1.0);
  return {d, kolmogorov_pvalue(u.size(), d), u.size()};
}

/// Probability integral transform under the equal-weight mixture, then a KS
/// test of the transformed values against Uniform(0, 1).
inline KsResult ks_test(const MixtureParams& p, std::span<const double> ln_r, std::span<const double> ln_d) {
  check_aligned(ln_r, ln_d);
  std::vector<double> u(ln_r.size());
  for (std::size_t k = 0; k < ln_r.size(); ++k) {
    u[k] = 0.5 * stats::normal_cdf((ln_r[k] - p.a - p.b * ln_d[k]) / p.sigma1) +
           0.5 * stats::normal_cdf((ln_r[k] - p.mu) / p.sigma2);
  }
  return ks_uniform(std::move(u));
}

// ---------------------------------------------------------------------------
// Outer search over the GDP exponent

struct AlphaSearch {
  double lo = 0.1;
  double hi = 1.5;
  std::size_t grid_points = 5;
  double tol = 1e-3;           // golden-section bracket width
  double flat_tolerance = 1e-7;  // relative spread below which the objective counts as flat
};

struct AlphaEstimate {
  double alpha = 1.0;
  double objective = -std::numeric_limits<double>::infinity();
  gravity::PmlFit pml;
  MixtureFit fit;
  std::vector<std::pair<double, double>> evaluations;  // (alpha, converged log-likelihood)
  bool identifiable = true;
  std::string note;
};

/// Converged mixture log-likelihood for one alpha: PML error refit,
/// resistance matrix, then EM from the data-driven start.
inline double alpha_objective(const corpus::CountryPanel& panel, double alpha, const gravity::PmlOptions& pml_opt,
                              const MixtureOptions& mix_opt, gravity::PmlFit* pml_out = nullptr,
                              MixtureFit* fit_out = nullptr) {
  const gravity::GravityParams gp{alpha, 1.0};
  auto pml = gravity::fit_error_params(panel, gp, pml_opt);
  const auto R = gravity::resistance_matrix(panel, gp, pml.error, pml.excluded_pair_count);
  const auto ln_r = R.pair_values();
  const auto ln_d = gravity::log_distance_pairs(panel);
  auto fit = fit_em(ln_r, ln_d, mix_opt);
  const double ll = fit.loglik_final();
  if (pml_out) *pml_out = std::move(pml);
  if (fit_out) *fit_out = std::move(fit);
  return ll;
}

/// Grid of `grid_points` alphas over [lo, hi], then golden-section search in
/// the bracket around the best grid point. The result is never worse than
/// the best grid value.
inline AlphaEstimate estimate_alpha(const corpus::CountryPanel& panel, const AlphaSearch& search = {},
                                    const gravity::PmlOptions& pml_opt = {}, const MixtureOptions& mix_opt = {}) {
  if (!(search.lo > 0.0) || !(search.lo < search.hi)) throw ConfigError("alpha search range is empty");
  if (search.grid_points < 3) throw ConfigError("alpha search needs at least 3 grid points");

  AlphaEstimate out;
  auto f = [&](double alpha) {
    double v = -std::numeric_limits<double>::infinity();
    try {
      v = alpha_objective(panel, alpha, pml_opt, mix_opt);
    } catch (const FitError&) {
    }
    out.evaluations.emplace_back(alpha, v);
    return v;
  };

  const std::size_t g = search.grid_points;
  std::vector<double> xs(g), fs(g);
  for (std::size_t k = 0; k < g; ++k) {
    xs[k] = search.lo + (search.hi - search.lo) * static_cast<double>(k) / static_cast<double>(g - 1);
    fs[k] = f(xs[k]);
  }
  const auto best_it = std::max_element(fs.begin(), fs.end());
  if (!std::isfinite(*best_it)) throw FitError("alpha objective is non-finite over the whole search range");
  const std::size_t kb = static_cast<std::size_t>(best_it - fs.begin());

  double fmin = std::numeric_limits<double>::infinity();
  for (double v : fs) fmin = std::min(fmin, v);
  if (std::isfinite(fmin) && (*best_it - fmin) <= search.flat_tolerance * std::max(1.0, std::abs(*best_it))) {
    out.identifiable = false;
    out.note = "alpha is not identifiable: the objective is flat over the search grid";
  }

  double best_x = xs[kb];
  double best_f = fs[kb];
  if (out.identifiable) {
    double lo = xs[kb == 0 ? 0 : kb - 1];
    double hi = xs[kb + 1 == g ? g - 1 : kb + 1];
    constexpr double inv_phi = 0.6180339887498949;
    double x1 = hi - inv_phi * (hi - lo);
    double x2 = lo + inv_phi * (hi - lo);
    double f1 = f(x1);
    double f2 = f(x2);
    while (hi - lo > search.tol) {
      if (f1 >= f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - inv_phi * (hi - lo);
        f1 = f(x1);
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + inv_phi * (hi - lo);
        f2 = f(x2);
      }
    }
    for (const auto& [x, v] : out.evaluations) {
      if (v > best_f) {
        best_f = v;
        best_x = x;
      }
    }
  }
  out.alpha = best_x;
  out.objective = alpha_objective(panel, best_x, pml_opt, mix_opt, &out.pml, &out.fit);
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json to_json(const MixtureFit& fit, int year, const std::optional<KsResult>& ks) {
  nlohmann::json j = {{"year", year},
                      {"a", fit.params.a},
                      {"b", fit.params.b},
                      {"sigma1", fit.params.sigma1},
                      {"mu", fit.params.mu},
                      {"sigma2", fit.params.sigma2},
                      {"iterations", fit.iterations},
                      {"converged", fit.converged},
                      {"loglik_final", fit.loglik_final()},
                      {"ks_statistic", nullptr},
                      {"ks_pvalue", nullptr},
                      {"tpi_denominator", "defined_partners"}};
  if (ks) {
    j["ks_statistic"] = ks->statistic;
    j["ks_pvalue"] = ks->p_value;
  }
  return j;
}

inline MixtureParams params_from_json(const nlohmann::json& j) {
  MixtureParams p{j.at("a").get<double>(), j.at("b").get<double>(), j.at("sigma1").get<double>(),
                  j.at("mu").get<double>(), j.at("sigma2").get<double>()};
  p.validate();
  return p;
}

inline std::string tau_csv(const std::vector<std::string>& countries, std::span<const double> tau) {
  csv::Writer w({"iso_a", "iso_b", "tau"});
  std::size_t k = 0;
  for (std::size_t i = 0; i < countries.size(); ++i)
    for (std::size_t j = i + 1; j < countries.size(); ++j, ++k)
      w.row({countries[i], countries[j], format_exact(tau[k])});
  return w.str();
}

inline std::vector<double> load_tau(const std::filesystem::path& path, const std::vector<std::string>& countries) {
  const auto rows = csv::read(path, {"iso_a", "iso_b", "tau"});
  std::map<std::string, std::size_t> idx;
  for (std::size_t i = 0; i < countries.size(); ++i) idx[countries[i]] = i;
  PairIndex pi(countries.size());
  std::vector<double> tau(pi.size(), std::numeric_limits<double>::quiet_NaN());
  for (const auto& r : rows) {
    auto a = idx.find(r.fields[0]);
    auto b = idx.find(r.fields[1]);
    const auto v = csv::parse_double(r.fields[2]);
    if (a == idx.end() || b == idx.end() || a->second == b->second || !v || *v < 0.0 || *v > 1.0)
      throw DataError(path.string() + ":" + std::to_string(r.line) + ": invalid tau row");
    tau[pi.index(a->second, b->second)] = *v;
  }
  for (double t : tau)
    if (std::isnan(t)) throw DataError(path.string() + ": tau is missing pairs");
  return tau;
}

inline std::string tpi_csv(const TpiVector& t) {
  csv::Writer w({"iso", "tpi"});
  for (const auto& [iso, v] : t.tpi) w.row({iso, format_exact(v)});
  return w.str();
}

}  // namespace tradenet::mixture
