#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "vrjp/errors.hpp"
#include "vrjp/gw_tree.hpp"
#include "vrjp/random.hpp"
#include "vrjp/special_math.hpp"

namespace vrjp {

/// beta-potential built from independent IG(1, w) weights on the non-root nodes and a
/// Gamma(1/2, 1) shift at the root.
class TreePotential {
 public:
  TreePotential(const TreeArena& tree, double w, std::vector<double> a_nonroot, double gamma)
      : w_(w), gamma_(gamma), a_(std::move(a_nonroot)) {
    detail::require_positive(w, "TreePotential");
    if (a_.size() + 1 != tree.size()) throw DomainError("TreePotential: weight count mismatch");
    for (double a : a_)
      if (!(a > 0.0) || !std::isfinite(a)) throw DomainError("TreePotential: weights must be positive");
    if (!(gamma > 0.0)) throw DomainError("TreePotential: root shift must be positive");
    const std::size_t n = tree.size();
    u_log_.assign(n, 0.0);
    beta_tilde_.assign(n, 0.0);
    for (std::size_t x = 1; x < n; ++x)
      u_log_[x] = u_log_[static_cast<std::size_t>(tree.parent[x])] + std::log(a_[x - 1]);
    for (std::size_t x = 0; x < n; ++x) {
      double sum = x == 0 ? 0.0 : 1.0 / a_[x - 1];
      for (auto c = tree.child_begin[x]; c < tree.child_end[x]; ++c) sum += a_[static_cast<std::size_t>(c) - 1];
      beta_tilde_[x] = 0.5 * w * sum;
    }
  }

  double w() const { return w_; }
  double gamma() const { return gamma_; }
  std::size_t size() const { return beta_tilde_.size(); }
  /// IG weight of node x >= 1.
  double a(std::size_t x) const { return a_[x - 1]; }
  std::span<const double> a_nonroot() const { return a_; }
  double u_log(std::size_t x) const { return u_log_[x]; }
  double beta_tilde(std::size_t x) const { return beta_tilde_[x]; }
  double beta(std::size_t x) const { return x == 0 ? beta_tilde_[0] + gamma_ : beta_tilde_[x]; }

 private:
  double w_;
  double gamma_;
  std::vector<double> a_;
  std::vector<double> u_log_;
  std::vector<double> beta_tilde_;
};

/// IG(1, w) on every non-root node in index order, then the root shift.
inline TreePotential attach_potential(const TreeArena& tree, double w, RandomStream& rng) {
  detail::require_positive(w, "attach_potential");
  const IgParams p(1.0, w);
  std::vector<double> a(tree.size() - 1);
  for (double& v : a) v = ig_sample(p, rng);
  const double gamma = gamma_half_sample(rng);
  return TreePotential(tree, w, std::move(a), gamma);
}

struct Conductances {
  std::vector<double> log_c;  // log c(x, parent(x)) for x >= 1; entry 0 unused
  std::vector<double> log_pi;  // log of the total conductance at each node

  double c(std::size_t x) const { return std::exp(log_c[x]); }
  double pi(std::size_t x) const { return std::exp(log_pi[x]); }
};

/// c(x, parent) = w exp(U_x + U_parent); pi_x = exp(2 U_x) 2 beta_tilde_x.
inline Conductances conductances(const TreeArena& tree, const TreePotential& pot) {
  const std::size_t n = tree.size();
  Conductances out;
  out.log_c.assign(n, -INFINITY);
  out.log_pi.assign(n, -INFINITY);
  const double log_w = std::log(pot.w());
  for (std::size_t x = 1; x < n; ++x)
    out.log_c[x] = log_w + pot.u_log(x) + pot.u_log(static_cast<std::size_t>(tree.parent[x]));
  for (std::size_t x = 0; x < n; ++x) {
    // Sum of incident conductances, scaled by exp(-2 U_x) before summing.
    double sum = x == 0 ? 0.0 : std::exp(out.log_c[x] - 2.0 * pot.u_log(x));
    for (auto c = tree.child_begin[x]; c < tree.child_end[x]; ++c)
      sum += std::exp(out.log_c[static_cast<std::size_t>(c)] - 2.0 * pot.u_log(x));
    out.log_pi[x] = std::log(sum) + 2.0 * pot.u_log(x);
  }
  return out;
}

}  // namespace vrjp
