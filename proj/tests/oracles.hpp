#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance runner. Nothing here calls into the library's numerics.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

namespace oracles {

/// alpha = 1 - (k - 1) * integral_0^p (1 - x)^(k - 2) dx by adaptive
/// Gauss-Kronrod quadrature.
inline double disparity_quadrature(std::size_t k, double p) {
  const double km2 = static_cast<double>(k) - 2.0;
  auto f = [km2](double x) { return std::pow(1.0 - x, km2); };
  const double integral = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, p, 6, 1e-14);
  return 1.0 - (static_cast<double>(k) - 1.0) * integral;
}

struct DenseGraph {
  std::size_t n = 0;
  std::vector<std::vector<double>> w;  // symmetric, zero diagonal
};

/// Modularity summed literally over all ordered node pairs.
inline double modularity(const DenseGraph& g, const std::vector<int>& c) {
  std::vector<double> A(g.n, 0.0);
  double two_m = 0.0;
  for (std::size_t i = 0; i < g.n; ++i)
    for (std::size_t j = 0; j < g.n; ++j) {
      A[i] += g.w[i][j];
      two_m += g.w[i][j];
    }
  double q = 0.0;
  for (std::size_t i = 0; i < g.n; ++i)
    for (std::size_t j = 0; j < g.n; ++j)
      if (c[i] == c[j]) q += g.w[i][j] - A[i] * A[j] / two_m;
  return q / two_m;
}

/// Maximum modularity over every set partition (restricted growth strings).
inline double brute_force_max_q(const DenseGraph& g, std::vector<int>* best_assignment = nullptr) {
  std::vector<int> c(g.n, 0), maxc(g.n, 0);
  double best = -1.0;
  while (true) {
    const double q = modularity(g, c);
    if (q > best) {
      best = q;
      if (best_assignment) *best_assignment = c;
    }
    // next restricted growth string
    std::size_t i = g.n;
    while (i-- > 1) {
      if (c[i] <= maxc[i - 1]) {
        ++c[i];
        maxc[i] = std::max(maxc[i - 1], c[i]);
        for (std::size_t j = i + 1; j < g.n; ++j) {
          c[j] = 0;
          maxc[j] = maxc[i];
        }
        break;
      }
    }
    if (i == 0) break;
  }
  return best;
}

/// Seeded random graph on n nodes with edge probability `p_edge` and
/// weights uniform on [0.1, 2]; at least one edge.
inline DenseGraph random_graph(std::size_t n, double p_edge, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  DenseGraph g{n, std::vector<std::vector<double>>(n, std::vector<double>(n, 0.0))};
  bool any = false;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (u01(rng) < p_edge) {
        g.w[i][j] = g.w[j][i] = 0.1 + 1.9 * u01(rng);
        any = true;
      }
  if (!any) g.w[0][1] = g.w[1][0] = 1.0;
  return g;
}

}  // namespace oracles
