#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "vrjp/errors.hpp"
#include "vrjp/gw_tree.hpp"
#include "vrjp/random.hpp"
#include "vrjp/tree_potential.hpp"

namespace vrjp {

namespace detail {

inline double log_add(double x, double y) {
  if (x == -INFINITY) return y;
  if (y == -INFINITY) return x;
  const double hi = std::max(x, y), lo = std::min(x, y);
  return hi + std::log1p(std::exp(lo - hi));
}

}  // namespace detail

/// Tree network on V_n with every edge leaving V_n glued into one wired vertex.
/// Conductances are held as logarithms.
struct WiredNetwork {
  std::vector<std::int32_t> parent;
  std::vector<std::int32_t> child_begin;
  std::vector<std::int32_t> child_end;
  std::vector<double> log_c;         // edge to the parent; entry 0 unused
  std::vector<double> log_boundary;  // edge to the wired vertex, -inf if none
  int depth_n = 0;

  std::size_t size() const { return parent.size(); }
};

inline WiredNetwork make_wired_network(const TreeArena& tree, const TreePotential& pot, int n) {
  if (n < 0 || n + 1 > tree.max_depth())
    throw DomainError("wired network: tree must extend one generation beyond n");
  const std::size_t size_n = tree.generation_end(n);
  const double log_w = std::log(pot.w());
  WiredNetwork net;
  net.depth_n = n;
  net.parent.assign(tree.parent.begin(), tree.parent.begin() + static_cast<std::ptrdiff_t>(size_n));
  net.child_begin.resize(size_n);
  net.child_end.resize(size_n);
  net.log_c.assign(size_n, -INFINITY);
  net.log_boundary.assign(size_n, -INFINITY);
  for (std::size_t x = 1; x < size_n; ++x)
    net.log_c[x] = log_w + pot.u_log(x) + pot.u_log(static_cast<std::size_t>(tree.parent[x]));
  for (std::size_t x = 0; x < size_n; ++x) {
    if (tree.depth[x] < n) {
      net.child_begin[x] = tree.child_begin[x];
      net.child_end[x] = tree.child_end[x];
      continue;
    }
    net.child_begin[x] = net.child_end[x] = static_cast<std::int32_t>(size_n);
    double sum_a = 0.0;
    for (auto c = tree.child_begin[x]; c < tree.child_end[x]; ++c) sum_a += pot.a(static_cast<std::size_t>(c));
    if (sum_a > 0.0) net.log_boundary[x] = log_w + 2.0 * pot.u_log(x) + std::log(sum_a);
  }
  return net;
}

/// log C(o <-> wired vertex) by the series/parallel recursion from the leaves.
inline double log_effective_conductance(const WiredNetwork& net) {
  std::vector<double> log_cx(net.log_boundary);
  for (std::size_t x = net.size(); x-- > 1;) {
    // series combination of the parent edge with the subtree below x
    const double series = -detail::log_add(-net.log_c[x], -log_cx[x]);
    auto& up = log_cx[static_cast<std::size_t>(net.parent[x])];
    up = detail::log_add(up, series);
  }
  return log_cx[0];
}

inline double effective_conductance(const WiredNetwork& net) { return std::exp(log_effective_conductance(net)); }

inline double effective_resistance(const WiredNetwork& net) { return std::exp(-log_effective_conductance(net)); }

/// Total conductance at the root.
inline double log_root_conductance(const WiredNetwork& net) {
  double total = net.log_boundary[0];
  for (auto c = net.child_begin[0]; c < net.child_end[0]; ++c) total = detail::log_add(total, net.log_c[static_cast<std::size_t>(c)]);
  return total;
}

/// Probability that the walk from o reaches the wired vertex before returning to o.
inline double escape_probability(const WiredNetwork& net) {
  return std::exp(log_effective_conductance(net) - log_root_conductance(net));
}

/// log of Lambda_n = sum over generation n of c(x, parent(x)).
inline double log_generation_conductance(const TreeArena& tree, const TreePotential& pot, int n) {
  if (n < 1 || n > tree.max_depth() || tree.generation_size(n) == 0)
    throw DomainError("generation_conductance: generation must exist and be >= 1");
  const double log_w = std::log(pot.w());
  double total = -INFINITY;
  for (std::size_t x = tree.generation_begin(n); x < tree.generation_end(n); ++x)
    total = detail::log_add(total, log_w + pot.u_log(x) + pot.u_log(static_cast<std::size_t>(tree.parent[x])));
  return total;
}

inline double generation_conductance(const TreeArena& tree, const TreePotential& pot, int n) {
  return std::exp(log_generation_conductance(tree, pot, n));
}

/// Cutset bound 1 / Lambda_n on the resistance between o and the wired vertex.
inline double nash_williams_lower_bound(const TreeArena& tree, const TreePotential& pot, int n) {
  return std::exp(-log_generation_conductance(tree, pot, n));
}

enum class WalkOutcome { ReturnedToRoot, HitLevelN, Censored };

/// Discrete random walk on a wired network, with transition tables built once.
class NetworkWalk {
 public:
  static constexpr std::int32_t kWired = -1;

  explicit NetworkWalk(const WiredNetwork& net) : offsets_(net.size() + 1, 0) {
    for (std::size_t x = 0; x < net.size(); ++x) {
      std::vector<std::pair<std::int32_t, double>> nb;
      if (x != 0) nb.emplace_back(net.parent[x], net.log_c[x]);
      for (auto c = net.child_begin[x]; c < net.child_end[x]; ++c) nb.emplace_back(c, net.log_c[static_cast<std::size_t>(c)]);
      if (net.log_boundary[x] > -INFINITY) nb.emplace_back(kWired, net.log_boundary[x]);
      double peak = -INFINITY;
      for (const auto& [_, lc] : nb) peak = std::max(peak, lc);
      double total = 0.0;
      for (const auto& [_, lc] : nb) total += std::exp(lc - peak);
      double acc = 0.0;
      for (const auto& [y, lc] : nb) {
        acc += std::exp(lc - peak) / total;
        targets_.push_back(y);
        cumulative_.push_back(acc);
      }
      if (!nb.empty()) cumulative_.back() = 1.0;
      offsets_[x + 1] = targets_.size();
    }
  }

  WalkOutcome run(RandomStream& rng, std::uint64_t max_steps) const {
    std::size_t x = 0;
    for (std::uint64_t step = 0; step < max_steps; ++step) {
      const auto begin = cumulative_.begin() + static_cast<std::ptrdiff_t>(offsets_[x]);
      const auto end = cumulative_.begin() + static_cast<std::ptrdiff_t>(offsets_[x + 1]);
      if (begin == end) throw InvariantError("walk reached an isolated vertex");
      const double u = rng.uniform();
      auto it = std::lower_bound(begin, end, u);
      if (it == end) --it;
      const auto y = targets_[static_cast<std::size_t>(it - cumulative_.begin())];
      if (y == kWired) return WalkOutcome::HitLevelN;
      if (y == 0) return WalkOutcome::ReturnedToRoot;
      x = static_cast<std::size_t>(y);
    }
    return WalkOutcome::Censored;
  }

 private:
  std::vector<std::size_t> offsets_;
  std::vector<std::int32_t> targets_;
  std::vector<double> cumulative_;
};

inline WalkOutcome walk_simulate(const WiredNetwork& net, RandomStream& rng, std::uint64_t max_steps) {
  return NetworkWalk(net).run(rng, max_steps);
}

}  // namespace vrjp
