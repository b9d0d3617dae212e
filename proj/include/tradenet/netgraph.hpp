#pragma once

// Resistance network: complete graph with w = 1/r, disparity-filter
// backbone, Louvain communities and partition statistics.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "tradenet/common.hpp"
#include "tradenet/corpus.hpp"
#include "tradenet/csv.hpp"
#include "tradenet/gravity.hpp"

namespace tradenet::net {

struct Edge {
  std::size_t u = 0;  // u < v
  std::size_t v = 0;
  double weight = 0.0;

  bool operator==(const Edge&) const = default;
};

struct Neighbor {
  std::size_t node = 0;
  double weight = 0.0;
};

/// Undirected weighted graph. Edges are stored once with u < v, sorted.
class WeightedGraph {
 public:
  WeightedGraph() = default;

  WeightedGraph(std::vector<std::string> nodes, std::vector<Edge> edges) : nodes_(std::move(nodes)) {
    for (auto& e : edges) {
      if (e.u == e.v) throw ConfigError("self-loop on " + nodes_.at(e.u));
      if (e.u > e.v) std::swap(e.u, e.v);
      if (e.v >= nodes_.size()) throw ConfigError("edge endpoint out of range");
      if (!(e.weight > 0.0) || !std::isfinite(e.weight))
        throw ConfigError("edge weight must be positive and finite: " + nodes_[e.u] + "-" + nodes_[e.v]);
    }
    std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) {
      return std::tie(x.u, x.v) < std::tie(y.u, y.v);
    });
    for (std::size_t k = 1; k < edges.size(); ++k)
      if (edges[k].u == edges[k - 1].u && edges[k].v == edges[k - 1].v)
        throw ConfigError("duplicate edge " + nodes_[edges[k].u] + "-" + nodes_[edges[k].v]);
    edges_ = std::move(edges);
    adj_.assign(nodes_.size(), {});
    for (const auto& e : edges_) {
      adj_[e.u].push_back({e.v, e.weight});
      adj_[e.v].push_back({e.u, e.weight});
    }
    for (auto& a : adj_)
      std::sort(a.begin(), a.end(), [](const Neighbor& x, const Neighbor& y) { return x.node < y.node; });
  }

  const std::vector<std::string>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<Neighbor>& neighbors(std::size_t i) const { return adj_[i]; }
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t degree(std::size_t i) const { return adj_[i].size(); }

  double strength(std::size_t i) const {
    CompensatedSum s;
    for (const auto& nb : adj_[i]) s += nb.weight;
    return s.value();
  }

  bool has_edge(std::size_t i, std::size_t j) const {
    const auto& a = adj_[i];
    return std::binary_search(a.begin(), a.end(), Neighbor{j, 0.0},
                              [](const Neighbor& x, const Neighbor& y) { return x.node < y.node; });
  }

  /// Same topology with every weight multiplied by `c`.
  WeightedGraph scaled(double c) const {
    auto e = edges_;
    for (auto& x : e) x.weight *= c;
    return {nodes_, std::move(e)};
  }

 private:
  std::vector<std::string> nodes_;
  std::vector<Edge> edges_;
  std::vector<std::vector<Neighbor>> adj_;
};

/// Complete graph over R's countries with w_ij = 1 / r_ij = exp(-ln r_ij).
inline WeightedGraph build_graph(const gravity::ResistanceMatrix& R) {
  std::vector<Edge> edges;
  edges.reserve(PairIndex(R.size()).size());
  for (std::size_t i = 0; i < R.size(); ++i)
    for (std::size_t j = i + 1; j < R.size(); ++j) edges.push_back({i, j, std::exp(-R.ln_r(i, j))});
  return {R.countries, std::move(edges)};
}

// ---------------------------------------------------------------------------
// Clustering coefficient (topological)

/// C_i = 2 e_i / (k_i (k_i - 1)), e_i = edges among i's neighbours.
/// Nodes with fewer than two neighbours get 0.
inline double clustering_coefficient(const WeightedGraph& g, std::size_t node) {
  const auto& nb = g.neighbors(node);
  const std::size_t k = nb.size();
  if (k < 2) return 0.0;
  std::size_t links = 0;
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a + 1; b < k; ++b)
      if (g.has_edge(nb[a].node, nb[b].node)) ++links;
  return 2.0 * static_cast<double>(links) / (static_cast<double>(k) * static_cast<double>(k - 1));
}

/// Mean C_i over nodes with degree >= 2; 0 when there are none.
inline double mean_clustering(const WeightedGraph& g) {
  CompensatedSum s;
  std::size_t counted = 0;
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    if (g.degree(i) < 2) continue;
    s += clustering_coefficient(g, i);
    ++counted;
  }
  return counted ? s.value() / static_cast<double>(counted) : 0.0;
}

// ---------------------------------------------------------------------------
// Disparity filter

/// alpha_ij = 1 - (k - 1) * integral_0^p (1 - x)^(k - 2) dx = (1 - p)^(k - 1).
inline double disparity_significance(std::size_t k, double p) {
  if (k < 2) return 1.0;
  return std::pow(1.0 - std::clamp(p, 0.0, 1.0), static_cast<double>(k - 1));
}

struct EdgeSignificance {
  Edge edge;
  double alpha_u = 1.0;  // significance seen from edge.u
  double alpha_v = 1.0;  // significance seen from edge.v
  bool survived = false;

  double alpha_ij() const { return std::min(alpha_u, alpha_v); }
};

struct BackboneGraph {
  WeightedGraph base;  // same node set, surviving edges only
  double alpha_s = 0.05;
  std::vector<EdgeSignificance> significance;  // one per input edge
};

/// Keeps an edge when alpha_ij < alpha_s from at least one endpoint; a
/// degree-1 endpoint always keeps its only edge.
inline BackboneGraph disparity_backbone(const WeightedGraph& g, double alpha_s) {
  if (!(alpha_s > 0.0 && alpha_s < 1.0)) throw ConfigError("alpha_s must lie in (0, 1)");
  const std::size_t n = g.node_count();
  std::vector<double> strength(n);
  for (std::size_t i = 0; i < n; ++i) strength[i] = g.strength(i);

  BackboneGraph bb;
  bb.alpha_s = alpha_s;
  std::vector<Edge> kept;
  for (const auto& e : g.edges()) {
    EdgeSignificance s{e};
    s.alpha_u = disparity_significance(g.degree(e.u), e.weight / strength[e.u]);
    s.alpha_v = disparity_significance(g.degree(e.v), e.weight / strength[e.v]);
    s.survived = s.alpha_u < alpha_s || s.alpha_v < alpha_s || g.degree(e.u) == 1 || g.degree(e.v) == 1;
    if (s.survived) kept.push_back(e);
    bb.significance.push_back(s);
  }
  bb.base = WeightedGraph(g.nodes(), std::move(kept));
  return bb;
}

// ---------------------------------------------------------------------------
// Modularity and Louvain

/// Q = 1/(2m) sum_ij [w_ij - A_i A_j / (2m)] delta(c_i, c_j), summed per
/// community as in_c / 2m - (tot_c / 2m)^2.
inline double modularity(const WeightedGraph& g, const std::vector<int>& assignment) {
  if (assignment.size() != g.node_count()) throw ConfigError("assignment does not cover all nodes");
  CompensatedSum two_m;
  for (const auto& e : g.edges()) two_m += 2.0 * e.weight;
  if (!(two_m.value() > 0.0)) return 0.0;
  std::map<int, CompensatedSum> in, tot;
  for (const auto& e : g.edges()) {
    tot[assignment[e.u]] += e.weight;
    tot[assignment[e.v]] += e.weight;
    if (assignment[e.u] == assignment[e.v]) in[assignment[e.u]] += 2.0 * e.weight;
  }
  const double m2 = two_m.value();
  CompensatedSum q;
  for (auto& [c, t] : tot) {
    const double frac = t.value() / m2;
    q += (in.contains(c) ? in[c].value() : 0.0) / m2 - frac * frac;
  }
  return q.value();
}

struct CommunityPartition {
  std::vector<int> assignment;  // node index -> community id
  double q = 0.0;
  std::uint64_t seed = 0;
  int communities = 0;

  std::map<std::string, int> by_iso(const WeightedGraph& g) const {
    std::map<std::string, int> out;
    for (std::size_t i = 0; i < assignment.size(); ++i) out[g.nodes()[i]] = assignment[i];
    return out;
  }
};

/// Relabels communities 0..k-1 by descending size, ties by the smallest
/// member iso (node order is sorted by iso).
inline std::vector<int> canonicalize(const std::vector<int>& assignment) {
  std::map<int, std::pair<std::size_t, std::size_t>> info;  // id -> (size, first node)
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    auto [it, inserted] = info.try_emplace(assignment[i], 0, i);
    ++it->second.first;
  }
  std::vector<std::pair<int, std::pair<std::size_t, std::size_t>>> order(info.begin(), info.end());
  std::sort(order.begin(), order.end(), [](const auto& x, const auto& y) {
    if (x.second.first != y.second.first) return x.second.first > y.second.first;
    return x.second.second < y.second.second;
  });
  std::map<int, int> relabel;
  for (std::size_t k = 0; k < order.size(); ++k) relabel[order[k].first] = static_cast<int>(k);
  std::vector<int> out(assignment.size());
  for (std::size_t i = 0; i < assignment.size(); ++i) out[i] = relabel[assignment[i]];
  return out;
}

namespace detail {

// Level graph for Louvain. self_[i] is the ordered-pair weight inside
// aggregated node i (twice the internal edge weight).
struct LevelGraph {
  std::vector<std::vector<Neighbor>> adj;
  std::vector<double> self;
  std::vector<double> degree;  // sum of adj weights + self
};

inline LevelGraph level_from(const WeightedGraph& g) {
  LevelGraph lg;
  const std::size_t n = g.node_count();
  lg.adj.resize(n);
  lg.self.assign(n, 0.0);
  lg.degree.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    lg.adj[i] = g.neighbors(i);
    lg.degree[i] = g.strength(i);
  }
  return lg;
}

}  // namespace detail

struct LouvainTrace {
  std::vector<double> q_after_move;  // running Q after each accepted move
};

/// Two-phase Louvain (local moving, then aggregation) maximizing weighted
/// modularity. Sweep order is a seeded shuffle of the node order; equal
/// gains go to the lowest community id; a level ends when a full sweep
/// makes no move with positive gain.
inline CommunityPartition louvain(const WeightedGraph& g, std::uint64_t seed = 42, LouvainTrace* trace = nullptr) {
  const std::size_t n0 = g.node_count();
  CommunityPartition part;
  part.seed = seed;
  part.assignment.resize(n0);
  std::iota(part.assignment.begin(), part.assignment.end(), 0);
  if (g.edges().empty()) {
    part.assignment = canonicalize(part.assignment);
    part.communities = static_cast<int>(n0);
    part.q = modularity(g, part.assignment);
    return part;
  }

  CompensatedSum two_m_sum;
  for (const auto& e : g.edges()) two_m_sum += 2.0 * e.weight;
  const double m2 = two_m_sum.value();
  constexpr double kMinGain = 1e-12;  // in units of Q

  std::mt19937_64 rng(seed);
  detail::LevelGraph lg = detail::level_from(g);
  std::vector<int> node_to_top(n0);  // original node -> current level node
  std::iota(node_to_top.begin(), node_to_top.end(), 0);
  double running_q = modularity(g, part.assignment);
  if (trace) trace->q_after_move.push_back(running_q);

  while (true) {
    const std::size_t n = lg.adj.size();
    std::vector<int> comm(n);
    std::iota(comm.begin(), comm.end(), 0);
    std::vector<double> tot(lg.degree);  // per community total degree

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);

    bool any_move = false;
    std::vector<double> link(n, 0.0);
    std::vector<int> touched;
    while (true) {
      bool moved = false;
      for (std::size_t i : order) {
        const int own = comm[i];
        const double ki = lg.degree[i];
        // weights from i into each neighbouring community
        touched.clear();
        for (const auto& nb : lg.adj[i]) {
          const int c = comm[nb.node];
          if (link[c] == 0.0) touched.push_back(c);
          link[c] += nb.weight;
        }
        const double k_own = link[own];
        const double tot_own = tot[own] - ki;  // own community without i
        // gain of moving i from (own \ i) into c, relative to staying:
        // [2 k_i,c - 2 k_i,own] / 2m - 2 k_i (tot_c - tot_own) / (2m)^2
        int best = own;
        double best_gain = 0.0;
        std::sort(touched.begin(), touched.end());
        for (int c : touched) {
          if (c == own) continue;
          const double gain = 2.0 * (link[c] - k_own) / m2 - 2.0 * ki * (tot[c] - tot_own) / (m2 * m2);
          // ascending ids: a later candidate must beat the best by more than
          // the tolerance, so ties stay with the lower id (or with `own`)
          if (gain > best_gain + kMinGain) {
            best = c;
            best_gain = gain;
          }
        }
        for (int c : touched) link[c] = 0.0;
        if (best != own) {
          tot[own] -= ki;
          tot[best] += ki;
          comm[i] = best;
          moved = true;
          any_move = true;
          running_q += best_gain;
          if (trace) trace->q_after_move.push_back(running_q);
        }
      }
      if (!moved) break;
    }
    if (!any_move) break;

    // aggregate
    std::map<int, int> renum;
    for (std::size_t i = 0; i < n; ++i) renum.try_emplace(comm[i], static_cast<int>(renum.size()));
    const std::size_t nc = renum.size();
    std::vector<std::map<std::size_t, double>> agg(nc);
    detail::LevelGraph next;
    next.self.assign(nc, 0.0);
    next.degree.assign(nc, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto ci = static_cast<std::size_t>(renum[comm[i]]);
      next.self[ci] += lg.self[i];
      next.degree[ci] += lg.degree[i];
      for (const auto& nb : lg.adj[i]) {
        const auto cj = static_cast<std::size_t>(renum[comm[nb.node]]);
        if (ci == cj)
          next.self[ci] += nb.weight;
        else
          agg[ci][cj] += nb.weight;
      }
    }
    next.adj.resize(nc);
    for (std::size_t c = 0; c < nc; ++c)
      for (const auto& [d, w] : agg[c]) next.adj[c].push_back({d, w});
    for (auto& t : node_to_top) t = renum[comm[static_cast<std::size_t>(t)]];
    lg = std::move(next);
    if (nc == 1) break;
  }

  for (std::size_t i = 0; i < n0; ++i) part.assignment[i] = node_to_top[i];
  part.assignment = canonicalize(part.assignment);
  part.communities = part.assignment.empty() ? 0 : *std::max_element(part.assignment.begin(), part.assignment.end()) + 1;
  part.q = modularity(g, part.assignment);
  return part;
}

struct SeedSweep {
  std::vector<double> q;
  double q_min = 0.0;
  double q_max = 0.0;
  double q_mean = 0.0;
};

inline SeedSweep louvain_seed_sweep(const WeightedGraph& g, const std::vector<std::uint64_t>& seeds) {
  SeedSweep s;
  for (auto seed : seeds) s.q.push_back(louvain(g, seed).q);
  if (!s.q.empty()) {
    s.q_min = *std::min_element(s.q.begin(), s.q.end());
    s.q_max = *std::max_element(s.q.begin(), s.q.end());
    s.q_mean = stats::mean(s.q);
  }
  return s;
}

// ---------------------------------------------------------------------------
// External-internal index

struct EiIndices {
  double degree_index = 0.0;  // -(EK - IK) / (EK + IK)
  double weight_index = 0.0;  // -(EW - IW) / (EW + IW)
};

inline EiIndices ei_indices(const WeightedGraph& g, const std::vector<int>& assignment) {
  if (assignment.size() != g.node_count()) throw ConfigError("assignment does not cover all nodes");
  if (g.edges().empty()) throw DataError("E-I index is undefined on a graph with no edges");
  double ek = 0.0, ik = 0.0;
  CompensatedSum ew, iw;
  for (const auto& e : g.edges()) {
    // each edge contributes one degree unit (and its weight) at both endpoints
    if (assignment[e.u] == assignment[e.v]) {
      ik += 2.0;
      iw += 2.0 * e.weight;
    } else {
      ek += 2.0;
      ew += 2.0 * e.weight;
    }
  }
  return {-(ek - ik) / (ek + ik), -(ew.value() - iw.value()) / (ew.value() + iw.value())};
}

// ---------------------------------------------------------------------------
// Union vs community similarity

struct SimilarityMatrix {
  std::vector<std::string> rows;  // union names, then "Others"
  std::vector<int> cols;          // community ids
  std::vector<std::vector<double>> values;
  std::vector<std::size_t> row_counts;
  std::vector<std::size_t> col_counts;
};

inline double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t inter = 0;
  for (const auto& x : a) inter += b.contains(x) ? 1 : 0;
  return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

/// Jaccard coefficient of every union (restricted to graph nodes) against
/// every community, plus an "Others" row for nodes in no union.
inline SimilarityMatrix jaccard_matrix(const corpus::UnionRegistry& unions, const WeightedGraph& g,
                                       const CommunityPartition& partition) {
  const std::set<std::string> nodes(g.nodes().begin(), g.nodes().end());
  std::map<int, std::set<std::string>> comm;
  for (std::size_t i = 0; i < partition.assignment.size(); ++i) comm[partition.assignment[i]].insert(g.nodes()[i]);

  SimilarityMatrix S;
  std::vector<std::set<std::string>> row_sets;
  std::set<std::string> in_any;
  for (const auto& [name, members] : unions.unions) {
    std::set<std::string> m;
    for (const auto& iso : members)
      if (nodes.contains(iso)) m.insert(iso);
    in_any.insert(m.begin(), m.end());
    S.rows.push_back(name);
    row_sets.push_back(std::move(m));
  }
  std::set<std::string> others;
  for (const auto& iso : nodes)
    if (!in_any.contains(iso)) others.insert(iso);
  S.rows.push_back("Others");
  row_sets.push_back(std::move(others));

  for (const auto& [id, members] : comm) {
    S.cols.push_back(id);
    S.col_counts.push_back(members.size());
  }
  for (const auto& r : row_sets) {
    S.row_counts.push_back(r.size());
    std::vector<double> vals;
    for (const auto& [id, members] : comm) vals.push_back(jaccard(r, members));
    S.values.push_back(std::move(vals));
  }
  return S;
}

// ---------------------------------------------------------------------------
// Export

inline std::string edges_csv(const BackboneGraph& bb, const WeightedGraph& full) {
  csv::Writer w({"iso_a", "iso_b", "weight", "alpha_ij", "survived"});
  for (const auto& s : bb.significance) {
    w.row({full.nodes()[s.edge.u], full.nodes()[s.edge.v], format_exact(s.edge.weight), format_exact(s.alpha_ij()),
           s.survived ? "1" : "0"});
  }
  return w.str();
}

inline std::string partition_csv(const WeightedGraph& g, const CommunityPartition& p) {
  csv::Writer w({"iso", "community_id"});
  for (std::size_t i = 0; i < g.node_count(); ++i) w.row({g.nodes()[i], std::to_string(p.assignment[i])});
  return w.str();
}

inline std::string similarity_csv(const SimilarityMatrix& S) {
  std::vector<std::string> header{"union", "Num"};
  for (int c : S.cols) header.push_back("C" + std::to_string(c));
  csv::Writer w(header);
  std::vector<std::string> counts{"Num", ""};
  for (auto c : S.col_counts) counts.push_back(std::to_string(c));
  w.row(counts);
  for (std::size_t r = 0; r < S.rows.size(); ++r) {
    std::vector<std::string> row{S.rows[r], std::to_string(S.row_counts[r])};
    for (double v : S.values[r]) row.push_back(format_double(v, 4));
    w.row(row);
  }
  return w.str();
}

}  // namespace tradenet::net
