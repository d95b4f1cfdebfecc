#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vrjp/errors.hpp"
#include "vrjp/random.hpp"
#include "vrjp/special_math.hpp"
#include "vrjp/tree_green.hpp"

namespace vrjp {

/// Finite graph with constant edge weight W and boundary weights eta.
struct WeightedGraph {
  Adjacency adjacency;
  double w = 1.0;
  std::vector<double> eta;

  std::size_t size() const { return adjacency.size(); }
};

/// Induced subgraph on `subset` (in the given order); edges to removed vertices are
/// folded into eta.
inline WeightedGraph restrict_graph(const WeightedGraph& g, std::span<const std::int32_t> subset) {
  std::vector<std::int32_t> local(g.size(), -1);
  for (std::size_t k = 0; k < subset.size(); ++k) local[static_cast<std::size_t>(subset[k])] = static_cast<std::int32_t>(k);
  WeightedGraph out;
  out.w = g.w;
  out.adjacency.resize(subset.size());
  out.eta.assign(subset.size(), 0.0);
  for (std::size_t k = 0; k < subset.size(); ++k) {
    const auto v = static_cast<std::size_t>(subset[k]);
    out.eta[k] = g.eta[v];
    for (auto u : g.adjacency[v]) {
      const auto lu = local[static_cast<std::size_t>(u)];
      if (lu >= 0) out.adjacency[k].push_back(lu);
      else out.eta[k] += g.w;
    }
  }
  return out;
}

/// log E[exp(-<lambda, beta>)] for beta with law nu-tilde(W, eta) on the graph.
inline double log_laplace_closed_form(const WeightedGraph& g, std::span<const double> lambda) {
  if (lambda.size() != g.size()) throw DomainError("laplace transform: dimension mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(lambda[i] > -1.0)) throw DomainError("laplace transform: lambda must exceed -1");
    const double r = std::sqrt(1.0 + lambda[i]);
    acc -= g.eta[i] * (r - 1.0) + 0.5 * std::log1p(lambda[i]);
    for (auto j : g.adjacency[i])
      if (static_cast<std::size_t>(j) > i)
        acc -= g.w * (std::sqrt((1.0 + lambda[i]) * (1.0 + lambda[static_cast<std::size_t>(j)])) - 1.0);
  }
  return acc;
}

inline constexpr std::size_t kLatticeVertexCap = 2000;

/// Graph-distance ball of radius n around the origin of Z^d. Vertices are ordered by
/// distance from the origin, then lexicographically by coordinates.
struct LatticeBox {
  int d = 1;
  int n = 0;
  std::vector<std::vector<int>> coords;
  WeightedGraph graph;

  std::size_t size() const { return coords.size(); }
  const Adjacency& adjacency() const { return graph.adjacency; }
  const std::vector<double>& eta() const { return graph.eta; }
};

inline LatticeBox build_box(int d, int n, double w, std::size_t cap = kLatticeVertexCap) {
  if (d < 1 || n < 0) throw ConfigError("build_box: need d >= 1 and n >= 0");
  detail::require_positive(w, "build_box");
  LatticeBox box;
  box.d = d;
  box.n = n;
  // Enumerate the cube [-n, n]^d and keep the l1 ball.
  std::vector<int> x(static_cast<std::size_t>(d), -n);
  while (true) {
    int norm = 0;
    for (int v : x) norm += std::abs(v);
    if (norm <= n) {
      if (box.coords.size() >= cap) throw ResourceError("build_box: vertex cap of " + std::to_string(cap) + " exceeded");
      box.coords.push_back(x);
    }
    std::size_t k = 0;
    while (k < x.size() && x[k] == n) x[k++] = -n;
    if (k == x.size()) break;
    ++x[k];
  }
  auto l1 = [](const std::vector<int>& v) {
    int s = 0;
    for (int c : v) s += std::abs(c);
    return s;
  };
  std::stable_sort(box.coords.begin(), box.coords.end(), [&](const auto& a, const auto& b) {
    const int la = l1(a), lb = l1(b);
    return la != lb ? la < lb : a < b;
  });
  std::map<std::vector<int>, std::int32_t> index;
  for (std::size_t i = 0; i < box.coords.size(); ++i) index[box.coords[i]] = static_cast<std::int32_t>(i);
  box.graph.w = w;
  box.graph.adjacency.resize(box.size());
  box.graph.eta.assign(box.size(), 0.0);
  for (std::size_t i = 0; i < box.size(); ++i) {
    auto y = box.coords[i];
    for (int axis = 0; axis < d; ++axis) {
      for (int step : {-1, 1}) {
        y[static_cast<std::size_t>(axis)] += step;
        const auto it = index.find(y);
        if (it != index.end()) box.graph.adjacency[i].push_back(it->second);
        else box.graph.eta[i] += w;
        y[static_cast<std::size_t>(axis)] -= step;
      }
    }
  }
  return box;
}

/// Exact sequential sampler for beta with law nu-tilde(W, eta) on a weighted graph.
/// Vertices are drawn in index order, each from its conditional law given the earlier ones.
class SequentialSampler {
 public:
  static constexpr std::size_t kRefactorEvery = 64;
  static constexpr double kDriftTolerance = 1e-8;

  explicit SequentialSampler(const WeightedGraph& g) : g_(g) {}

  std::size_t sampled() const { return beta_.size(); }
  const std::vector<double>& beta() const { return beta_; }

  /// Fixes the first beta_prefix.size() vertices to the given values.
  void condition_on(std::span<const double> beta_prefix) {
    if (beta_prefix.size() > g_.size()) throw DomainError("condition_on: too many values");
    beta_.assign(beta_prefix.begin(), beta_prefix.end());
    refactor();
  }

  void sample_remaining(RandomStream& rng) {
    const double w = g_.w;
    while (beta_.size() < g_.size()) {
      const std::size_t i = beta_.size();
      const auto k = static_cast<Eigen::Index>(i);
      Eigen::VectorXd wi = Eigen::VectorXd::Zero(k);
      double direct_rest = 0.0;  // sum of W_ij over unsampled j != i
      for (auto j : g_.adjacency[i]) {
        if (static_cast<std::size_t>(j) < i) wi[j] = w;
        else if (static_cast<std::size_t>(j) > i) direct_rest += w;
      }
      Eigen::VectorXd out = Eigen::VectorXd::Zero(k);  // weight from each sampled vertex into the rest
      Eigen::VectorXd eta_u(k);
      for (Eigen::Index l = 0; l < k; ++l) {
        eta_u[l] = g_.eta[static_cast<std::size_t>(l)];
        for (auto j : g_.adjacency[static_cast<std::size_t>(l)])
          if (static_cast<std::size_t>(j) > i) out[l] += w;
      }
      const Eigen::VectorXd v = k > 0 ? Eigen::VectorXd(inv_ * wi) : Eigen::VectorXd();
      const double w_check = k > 0 ? wi.dot(v) : 0.0;
      const double eta_check = g_.eta[i] + (k > 0 ? v.dot(eta_u) : 0.0);
      const double rest = direct_rest + (k > 0 ? v.dot(out) : 0.0);
      const double eta_eff = eta_check + rest;
      double x;
      if (eta_eff > 0.0) x = eta_eff / ig_sample(IgParams(1.0, eta_eff), rng);
      else x = 2.0 * gamma_half_sample(rng);
      if (!(x > 0.0) || !std::isfinite(x)) throw InvariantError("sequential sampler: nonpositive pivot");
      beta_.push_back(0.5 * (w_check + x));

      // Grow the inverse of H_UU by one vertex; the Schur pivot is x.
      Eigen::MatrixXd next(k + 1, k + 1);
      if (k > 0) {
        next.topLeftCorner(k, k) = inv_ + v * v.transpose() / x;
        next.topRightCorner(k, 1) = v / x;
        next.bottomLeftCorner(1, k) = v.transpose() / x;
      }
      next(k, k) = 1.0 / x;
      inv_ = std::move(next);
      if (beta_.size() % kRefactorEvery == 0) refactor();
    }
    drift_ = inverse_drift();
    if (drift_ > kDriftTolerance) throw InvariantError("sequential sampler: inverse drift above tolerance");
  }

  /// |inv H_UU - I| relative to |inv| |H_UU| (infinity norms), so that a tiny last
  /// pivot, which is legitimate when eta vanishes, does not register as drift.
  double inverse_drift() const {
    const auto h = operator_on_sampled();
    if (h.rows() == 0) return 0.0;
    const double residual = (inv_ * h - Eigen::MatrixXd::Identity(h.rows(), h.cols())).rowwise().lpNorm<1>().maxCoeff();
    const double scale = inv_.rowwise().lpNorm<1>().maxCoeff() * h.rowwise().lpNorm<1>().maxCoeff();
    return residual / scale;
  }

  double last_drift() const { return drift_; }

 private:
  Eigen::MatrixXd operator_on_sampled() const {
    const auto k = static_cast<Eigen::Index>(beta_.size());
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
      h(i, i) = 2.0 * beta_[static_cast<std::size_t>(i)];
      for (auto j : g_.adjacency[static_cast<std::size_t>(i)])
        if (j < k) h(i, j) = -g_.w;
    }
    return h;
  }

  void refactor() {
    const auto h = operator_on_sampled();
    if (h.rows() == 0) {
      inv_.resize(0, 0);
      return;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(h);
    if (llt.info() != Eigen::Success) throw InvariantError("sequential sampler: operator not positive definite");
    inv_ = llt.solve(Eigen::MatrixXd::Identity(h.rows(), h.cols()));
  }

  const WeightedGraph& g_;
  std::vector<double> beta_;
  Eigen::MatrixXd inv_;
  double drift_ = 0.0;
};

inline std::vector<double> sample_beta_sequential(const WeightedGraph& g, RandomStream& rng) {
  SequentialSampler s(g);
  s.sample_remaining(rng);
  return s.beta();
}

inline std::vector<double> sample_beta_sequential(const LatticeBox& box, RandomStream& rng) {
  return sample_beta_sequential(box.graph, rng);
}

/// Extends beta from the ball of radius n to the ball of radius n+1 (or any larger ball
/// whose first vertices are those of the smaller one).
inline std::vector<double> extend_potential(const LatticeBox& small, std::span<const double> beta_small,
                                            const LatticeBox& large, RandomStream& rng) {
  if (small.d != large.d || small.n > large.n || beta_small.size() != small.size())
    throw DomainError("extend_potential: boxes are not nested");
  for (std::size_t i = 0; i < small.size(); ++i)
    if (small.coords[i] != large.coords[i]) throw DomainError("extend_potential: vertex orders differ");
  SequentialSampler s(large.graph);
  s.condition_on(beta_small);
  s.sample_remaining(rng);
  return s.beta();
}

struct BoxPsi {
  std::vector<double> psi;
  double g_hat_oo;
};

/// Solves (H_beta) psi = eta on the box; vertex 0 is the origin.
inline BoxPsi psi_on_box(const WeightedGraph& g, std::span<const double> beta) {
  if (beta.size() != g.size()) throw DomainError("psi_on_box: dimension mismatch");
  const auto n = static_cast<Eigen::Index>(g.size());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    h(i, i) = 2.0 * beta[static_cast<std::size_t>(i)];
    rhs[i] = g.eta[static_cast<std::size_t>(i)];
    for (auto j : g.adjacency[static_cast<std::size_t>(i)]) h(i, j) = -g.w;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(h);
  if (llt.info() != Eigen::Success) throw InvariantError("psi_on_box: operator not positive definite");
  const Eigen::VectorXd psi = llt.solve(rhs);
  const Eigen::VectorXd e0 = llt.solve(Eigen::VectorXd::Unit(n, 0));
  return {std::vector<double>(psi.data(), psi.data() + n), e0[0]};
}

inline BoxPsi psi_on_box(const LatticeBox& box, std::span<const double> beta) { return psi_on_box(box.graph, beta); }

}  // namespace vrjp
