#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "vrjp/errors.hpp"
#include "vrjp/gw_tree.hpp"
#include "vrjp/tree_potential.hpp"

namespace vrjp {

struct GreenReport {
  double psi_root = 0.0;
  double g_hat_root = 0.0;
  double g_tilde_root = 0.0;
  std::vector<double> psi;  // psi_n(x) for x in V_n, indexed by node
  int depth_n = 0;
};

namespace detail {

// Per-node elimination coefficients on V_n: psi(x) = gain(x) psi(parent) + offset(x).
struct Elimination {
  std::vector<double> gain;
  std::vector<double> offset;
  double root_pivot = 0.0;    // 2 beta_o - W sum gain(children), includes the root shift
  double root_reduced = 0.0;  // the same without the root shift
  double root_rhs = 0.0;      // right-hand side left at the root after elimination
};

// Leaf-to-root elimination of H_beta on V_n with boundary data eta_x = W * (#children of x)
// at depth n. With the IG construction 2 beta_tilde_x = W (1/A_x + sum_c A_c), the pivot
// 2 beta_x - W sum_c gain_c equals W (1/A_x + excess_x), where excess_x = sum_c A_c - gain_c
// is accumulated directly so that no cancellation occurs.
inline Elimination eliminate_coefficients(const TreeArena& tree, const TreePotential& pot, int n) {
  if (n < 0 || n + 1 > tree.max_depth())
    throw DomainError("eliminate: tree must extend one generation beyond n");
  const std::size_t size_n = tree.generation_end(n);
  const double w = pot.w();
  Elimination e;
  e.gain.assign(size_n, 0.0);
  e.offset.assign(size_n, 0.0);
  std::vector<double> excess(size_n, 0.0);
  std::vector<double> offset_sum(size_n, 0.0);

  for (std::size_t x = size_n; x-- > 0;) {
    const int dx = tree.depth[x];
    double rhs;
    if (dx == n) {
      double sum_a = 0.0;
      for (auto c = tree.child_begin[x]; c < tree.child_end[x]; ++c) sum_a += pot.a(static_cast<std::size_t>(c));
      excess[x] = sum_a;
      rhs = w * tree.num_children(x);
    } else {
      rhs = w * offset_sum[x];
    }
    if (x == 0) {
      e.root_reduced = w * excess[0];
      e.root_pivot = e.root_reduced + 2.0 * pot.gamma();
      e.root_rhs = rhs;
      if (!(e.root_pivot > 0.0) || !(e.root_reduced > 0.0))
        throw InvariantError("eliminate: nonpositive pivot at the root");
      break;
    }
    const double inv_a = 1.0 / pot.a(x);
    const double scaled_pivot = inv_a + excess[x];  // pivot / W
    if (!(scaled_pivot > 0.0) || !std::isfinite(scaled_pivot))
      throw InvariantError("eliminate: nonpositive pivot");
    e.gain[x] = 1.0 / scaled_pivot;
    e.offset[x] = rhs / (w * scaled_pivot);
    const auto p = static_cast<std::size_t>(tree.parent[x]);
    const double ax = pot.a(x);
    // A_x - gain_x = A_x^2 excess_x / (1 + A_x excess_x)
    excess[p] += ax * ax * excess[x] / (1.0 + ax * excess[x]);
    offset_sum[p] += e.offset[x];
  }
  return e;
}

}  // namespace detail

/// psi_n, Ghat_n(o,o) and Gtilde_n(o,o) on V_n by exact elimination in decreasing depth.
inline GreenReport eliminate(const TreeArena& tree, const TreePotential& pot, int n) {
  const auto e = detail::eliminate_coefficients(tree, pot, n);
  GreenReport r;
  r.depth_n = n;
  r.g_hat_root = 1.0 / e.root_pivot;
  r.g_tilde_root = 1.0 / e.root_reduced;
  r.psi_root = e.root_rhs / e.root_pivot;
  r.psi.assign(e.gain.size(), 0.0);
  r.psi[0] = r.psi_root;
  for (std::size_t x = 1; x < r.psi.size(); ++x)
    r.psi[x] = e.gain[x] * r.psi[static_cast<std::size_t>(tree.parent[x])] + e.offset[x];
  return r;
}

using Adjacency = std::vector<std::vector<std::int32_t>>;

/// Adjacency of the subtree V_n.
inline Adjacency tree_adjacency(const TreeArena& tree, int n) {
  const std::size_t size_n = tree.generation_end(n);
  Adjacency adj(size_n);
  for (std::size_t x = 1; x < size_n; ++x) {
    const auto p = tree.parent[x];
    adj[x].push_back(p);
    adj[static_cast<std::size_t>(p)].push_back(static_cast<std::int32_t>(x));
  }
  return adj;
}

/// Sum over paths from i to j with at most max_len steps of W^len / prod over visited
/// vertices of 2 beta. Nondecreasing in max_len; converges to (H_beta)^{-1}(i, j).
inline double path_expansion(const Adjacency& adj, std::span<const double> beta, double w, std::size_t i,
                             std::size_t j, int max_len) {
  if (beta.size() != adj.size() || i >= adj.size() || j >= adj.size())
    throw DomainError("path_expansion: inconsistent sizes");
  std::vector<double> cur(adj.size(), 0.0), next(adj.size());
  cur[i] = 1.0 / (2.0 * beta[i]);
  double total = i == j ? cur[j] : 0.0;
  for (int len = 1; len <= max_len; ++len) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t x = 0; x < adj.size(); ++x) {
      if (cur[x] == 0.0) continue;
      for (auto y : adj[x]) next[static_cast<std::size_t>(y)] += w * cur[x];
    }
    for (std::size_t y = 0; y < adj.size(); ++y) next[y] /= 2.0 * beta[y];
    total += next[j];
    cur.swap(next);
  }
  return total;
}

/// G(i,j) = Ghat(i,j) + psi(i) psi(j) / (2 gamma).
inline Eigen::MatrixXd environment_matrix(const Eigen::MatrixXd& g_hat, const Eigen::VectorXd& psi, double gamma) {
  if (g_hat.rows() != g_hat.cols() || g_hat.rows() != psi.size())
    throw DomainError("environment_matrix: inconsistent dimensions");
  if (!(gamma > 0.0)) throw DomainError("environment_matrix: gamma must be positive");
  return g_hat + psi * psi.transpose() / (2.0 * gamma);
}

struct RatioReport {
  double ratio;  // Ghat_n(o,i) / Ghat_n(o,o)
  double e_u;    // exp(U_i)
};

/// The root row of Ghat_n decays along the ancestry by the elimination gains.
inline RatioReport ratio_vs_u(const TreeArena& tree, const TreePotential& pot, int n, std::size_t i) {
  const auto e = detail::eliminate_coefficients(tree, pot, n);
  if (i >= e.gain.size()) throw DomainError("ratio_vs_u: node outside V_n");
  double log_ratio = 0.0;
  for (std::size_t x = i; x != 0; x = static_cast<std::size_t>(tree.parent[x])) log_ratio += std::log(e.gain[x]);
  return {std::exp(log_ratio), std::exp(pot.u_log(i))};
}

}  // namespace vrjp
