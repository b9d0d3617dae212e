// Generates a small synthetic corpus in memory and runs every analysis step
// on it without touching the filesystem.

#include <cstdio>

#include "tradenet/tradenet.hpp"

int main() {
  using namespace tradenet;

  const auto corpus = synthetic::generate({});
  const auto panel = synthetic::to_panel(corpus, 2007).panel;
  std::printf("panel: %zu countries\n", panel.size());

  const gravity::GravityParams gp{1.0, 1.0};
  const auto pml = gravity::fit_error_params(panel, gp);
  std::printf("error model: mu=%.5f sigma=%.5f E(eps)=%.5f\n", pml.error.mu, pml.error.sigma, pml.error.expected_eps());

  const auto R = gravity::resistance_matrix(panel, gp, pml.error, pml.excluded_pair_count);
  const auto ln_r = R.pair_values();
  const auto ln_d = gravity::log_distance_pairs(panel);
  const auto fit = mixture::fit_em(ln_r, ln_d);
  std::printf("mixture: a=%.3f b=%.3f sigma1=%.3f mu=%.3f sigma2=%.3f (%zu iterations)\n", fit.params.a, fit.params.b,
              fit.params.sigma1, fit.params.mu, fit.params.sigma2, fit.iterations);

  const auto t = mixture::tpi(mixture::tau_matrix(panel.size(), fit.tau), R.countries);
  for (const auto& [iso, v] : t.tpi) std::printf("  TPI %s %.3f\n", iso.c_str(), v);

  const auto g = net::build_graph(R);
  const auto bb = net::disparity_backbone(g, 0.05);
  const auto part = net::louvain(bb.base);
  std::printf("backbone: %zu of %zu edges, %d communities, Q=%.4f\n", bb.base.edges().size(), g.edges().size(),
              part.communities, part.q);

  const auto table = report::union_resistance_table(R, panel.unions);
  for (const auto& row : table.rows)
    std::printf("%s: members %.3f, others %.3f, world %.3f\n", row.union_name.c_str(), row.mean_ln_r_member,
                row.mean_ln_r_others, row.world_mean);
  return 0;
}
