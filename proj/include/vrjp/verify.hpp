#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vrjp/experiments.hpp"

namespace vrjp::verify {

struct Check {
  std::string name;
  double value;
  double stderr_;
  double threshold;
  bool pass;
};

struct CriterionResult {
  int id = 0;
  std::string title;
  std::vector<Check> checks;
  std::string error;

  bool pass() const {
    if (!error.empty() || checks.empty()) return false;
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

struct Options {
  int threads = 1;
  std::ostream* progress = nullptr;  // diagnostics only
};

namespace detail {

inline std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

inline void add_summary(CriterionResult& c, const RunOutput& out, const std::string& tag) {
  const auto s = summarize(out);
  if (s.failed_replicas > 0)
    c.checks.push_back({tag + "failed_replicas", static_cast<double>(s.failed_replicas), 0.0, 0.0, false});
  for (const auto& a : s.assertions) c.checks.push_back({tag + a.name, a.value, a.stderr_, a.threshold, a.pass});
}

inline ExperimentSpec tree_spec(const std::string& name, const json& law, const json& w, std::vector<int> depths,
                                int replicas, std::uint64_t seed, json assertions, json options = json::object()) {
  return ExperimentSpec::from_json({{"name", name},
                                    {"law", law},
                                    {"w", w},
                                    {"depths", depths},
                                    {"replicas", replicas},
                                    {"seed", seed},
                                    {"options", options},
                                    {"assertions", assertions}});
}

inline const json kBinary = {{"pmf", {{"2", 1.0}}}};

/// Small irregular tree: child counts in {0,..,3}, at most `max_nodes` nodes, depth >= 2.
inline TreeArena corpus_tree(RandomStream& rng, std::size_t max_nodes) {
  while (true) {
    const int depth_cap = 2 + static_cast<int>(rng.below(6));
    std::vector<int> counts;
    std::vector<int> depth = {0};
    std::size_t total = 1;
    bool overflow = false;
    for (std::size_t x = 0; x < depth.size(); ++x) {
      int k = 0;
      if (depth[x] < depth_cap) k = x == 0 ? 1 + static_cast<int>(rng.below(3)) : static_cast<int>(rng.below(4));
      counts.push_back(k);
      total += static_cast<std::size_t>(k);
      if (total > max_nodes) {
        overflow = true;
        break;
      }
      for (int c = 0; c < k; ++c) depth.push_back(depth[x] + 1);
    }
    if (overflow) continue;
    auto t = tree_from_child_counts(counts);
    if (t.max_depth() >= 2) return t;
  }
}

/// Dense oracle: solves (H_beta) on V_n with the boundary vector.
struct DenseSolution {
  Eigen::VectorXd psi;
  double g_hat_oo;
};

inline DenseSolution dense_solve(const TreeArena& tree, const TreePotential& pot, int n) {
  const auto size_n = static_cast<Eigen::Index>(tree.generation_end(n));
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(size_n, size_n);
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(size_n);
  for (Eigen::Index x = 0; x < size_n; ++x) {
    h(x, x) = 2.0 * pot.beta(static_cast<std::size_t>(x));
    if (x > 0) {
      const auto p = tree.parent[static_cast<std::size_t>(x)];
      h(x, p) = h(p, x) = -pot.w();
    }
    if (tree.depth[static_cast<std::size_t>(x)] == n) eta[x] = pot.w() * tree.num_children(static_cast<std::size_t>(x));
  }
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(h);
  return {lu.solve(eta), lu.solve(Eigen::VectorXd::Unit(size_n, 0))[0]};
}

inline double mc_laplace(const std::vector<std::vector<double>>& samples, const std::vector<double>& lambda,
                         double* stderr_out) {
  stats::MeanAccumulator acc;
  for (const auto& b : samples) {
    double s = 0.0;
    for (std::size_t i = 0; i < lambda.size(); ++i) s += lambda[i] * b[i];
    acc.add(std::exp(-s));
  }
  *stderr_out = acc.stderr_of_mean();
  return acc.mean();
}

inline TreeArena star_tree(int leaves) {
  std::vector<int> counts(static_cast<std::size_t>(leaves) + 1, 0);
  counts[0] = leaves;
  return tree_from_child_counts(counts);
}

inline WeightedGraph star_graph(int leaves, double w) {
  WeightedGraph g;
  g.w = w;
  g.adjacency.resize(static_cast<std::size_t>(leaves) + 1);
  for (int k = 1; k <= leaves; ++k) {
    g.adjacency[0].push_back(k);
    g.adjacency[static_cast<std::size_t>(k)].push_back(0);
  }
  g.eta.assign(g.adjacency.size(), 0.0);
  return g;
}

}  // namespace detail

// 1. Per-sample exact identities.
inline CriterionResult criterion_identities(const Options& opt) {
  CriterionResult c{1, "exact per-sample identities", {}, {}};
  for (double rel : {0.5, 1.0, 2.0}) {
    const auto spec = detail::tree_spec("identities", detail::kBinary, {{"rel", rel}}, {10}, 10000, 101,
                                        json::array({{{"kind", "cramer_identity"}},
                                                     {{"kind", "resistance_identity"}},
                                                     {{"kind", "nash_williams"}}}),
                                        {{"record_brw", 0}});
    detail::add_summary(c, run(spec, opt.threads), "w=" + detail::fmt(rel) + "Wc:");
  }
  // Elimination against a dense solve on a corpus of small trees.
  double worst = 0.0;
  int trees = 0;
  for (std::uint64_t k = 0; k < 200; ++k) {
    RandomStream rng(202, k);
    const auto tree = detail::corpus_tree(rng, 200);
    const double w = std::array<double, 4>{0.05, 0.3, 1.0, 3.0}[k % 4];
    const auto pot = attach_potential(tree, w, rng);
    for (int n = 0; n + 1 <= tree.max_depth(); ++n) {
      const auto g = eliminate(tree, pot, n);
      const auto d = detail::dense_solve(tree, pot, n);
      worst = std::max(worst, std::abs(g.g_hat_root - d.g_hat_oo) / d.g_hat_oo);
      for (Eigen::Index x = 0; x < d.psi.size(); ++x) {
        const double ref = d.psi[x];
        if (ref != 0.0) worst = std::max(worst, std::abs(g.psi[static_cast<std::size_t>(x)] - ref) / std::abs(ref));
        else worst = std::max(worst, std::abs(g.psi[static_cast<std::size_t>(x)]));
      }
    }
    ++trees;
  }
  c.checks.push_back({"elimination_vs_dense[" + std::to_string(trees) + " trees]", worst, 0.0, 1e-9, worst <= 1e-9});
  // Truncated path expansions increase toward the solver value. The tail decays like
  // rho^len with rho the spectral radius of W (2 beta)^{-1/2} A (2 beta)^{-1/2}.
  double gap = 0.0;
  bool monotone = true, below = true;
  for (std::uint64_t k = 0; k < 40; ++k) {
    RandomStream rng(203, k);
    const auto tree = detail::corpus_tree(rng, 40);
    const auto pot = attach_potential(tree, 1.0, rng);
    const int n = tree.max_depth() - 1;
    const auto g = eliminate(tree, pot, n);
    const auto adj = tree_adjacency(tree, n);
    std::vector<double> beta(adj.size());
    for (std::size_t x = 0; x < beta.size(); ++x) beta[x] = pot.beta(x);
    const auto size = static_cast<Eigen::Index>(adj.size());
    Eigen::MatrixXd walk = Eigen::MatrixXd::Zero(size, size);
    for (Eigen::Index x = 0; x < size; ++x)
      for (auto y : adj[static_cast<std::size_t>(x)])
        walk(x, y) = pot.w() / std::sqrt(4.0 * beta[static_cast<std::size_t>(x)] * beta[static_cast<std::size_t>(y)]);
    const double rho = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(walk, Eigen::EigenvaluesOnly)
                           .eigenvalues()
                           .cwiseAbs()
                           .maxCoeff();
    const int full = static_cast<int>(std::min(5e6, std::ceil(std::log(1e-12) / std::log(rho))));
    std::vector<int> lengths = {0, 1, 2, 5, 10, full / 4, full / 2, full};
    std::sort(lengths.begin(), lengths.end());
    double prev = 0.0;
    for (int len : lengths) {
      const double v = path_expansion(adj, beta, pot.w(), 0, 0, len);
      if (v < prev) monotone = false;
      if (v > g.g_hat_root * (1.0 + 1e-12)) below = false;
      prev = v;
    }
    gap = std::max(gap, (g.g_hat_root - prev) / g.g_hat_root);
  }
  c.checks.push_back({"path_expansion_monotone", monotone ? 1.0 : 0.0, 0.0, 1.0, monotone});
  c.checks.push_back({"path_expansion_below_solver", below ? 1.0 : 0.0, 0.0, 1.0, below});
  c.checks.push_back({"path_expansion_gap", gap, 0.0, 1e-6, gap <= 1e-6});
  return c;
}

// 2. Distributional laws at finite depth.
inline CriterionResult criterion_distributions(const Options& opt) {
  CriterionResult c{2, "finite-depth distribution laws", {}, {}};
  for (double rel : {0.5, 1.0, 2.0}) {
    const auto spec = detail::tree_spec("laws", detail::kBinary, {{"rel", rel}}, {10}, 100000, 303,
                                        json::array({{{"kind", "coupling_ks"}},
                                                     {{"kind", "coupling_ks_control"}},
                                                     {{"kind", "pit_ks"}},
                                                     {{"kind", "pit_ks_control"}}}),
                                        {{"record_brw", 0}});
    detail::add_summary(c, run(spec, opt.threads), "w=" + detail::fmt(rel) + "Wc:");
  }
  return c;
}

// 3. Sampler laws against the closed-form Laplace transform.
inline CriterionResult criterion_samplers(const Options&) {
  CriterionResult c{3, "potential samplers vs closed-form Laplace transforms", {}, {}};
  constexpr int kDraws = 1000000;
  const double w = 0.7;
  auto compare = [&](const std::string& name, const std::vector<std::vector<double>>& samples, const WeightedGraph& g,
                     const std::vector<double>& lambda) {
    double se = 0.0;
    const double mc = detail::mc_laplace(samples, lambda, &se);
    const double exact = std::exp(log_laplace_closed_form(g, lambda));
    c.checks.push_back({name, mc - exact, se, 4.0, std::abs(mc - exact) <= 4.0 * se});
  };
  // (a) two-child star from the IG construction; laws of (beta_root, beta_child).
  {
    const auto tree = detail::star_tree(2);
    std::vector<std::vector<double>> samples(kDraws);
    RandomStream rng(404, 0);
    for (auto& s : samples) {
      const auto pot = attach_potential(tree, w, rng);
      s = {pot.beta(0), pot.beta(1), pot.beta(2)};
    }
    const auto g = detail::star_graph(2, w);
    compare("tree_star2[l=(0.5,0.5)]", samples, g, {0.5, 0.5, 0.0});
    compare("tree_star2[l=(1,0)]", samples, g, {1.0, 0.0, 0.0});
  }
  // (b) radius-1 box in Z^2 by the sequential sampler.
  {
    const auto box = build_box(2, 1, w);
    std::vector<std::vector<double>> samples(kDraws);
    RandomStream rng(404, 1);
    for (auto& s : samples) s = sample_beta_sequential(box, rng);
    compare("z2_box[l=0.5]", samples, box.graph, {0.5, 0.5, 0.5, 0.5, 0.5});
    compare("z2_box[l=origin 1]", samples, box.graph, {1.0, 0.0, 0.0, 0.0, 0.0});
    compare("z2_box[l=ramp]", samples, box.graph, {0.2, 0.4, 0.6, 0.8, 1.0});
  }
  // (c) four-vertex star sampled both ways.
  {
    const auto g = detail::star_graph(3, w);
    const auto tree = detail::star_tree(3);
    std::vector<std::vector<double>> by_tree(kDraws), by_sequence(kDraws);
    RandomStream rng_t(404, 2), rng_s(404, 3);
    for (auto& s : by_tree) {
      const auto pot = attach_potential(tree, w, rng_t);
      s = {pot.beta(0), pot.beta(1), pot.beta(2), pot.beta(3)};
    }
    for (auto& s : by_sequence) s = sample_beta_sequential(g, rng_s);
    const std::vector<std::vector<double>> grid = {
        {0.5, 0.5, 0.5, 0.5}, {1.0, 0.0, 0.0, 0.0}, {0.0, 1.0, 0.0, 0.0}, {0.3, 0.6, 0.0, 1.2}, {2.0, 0.1, 0.1, 0.1}};
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const std::string tag = "[l" + std::to_string(k) + "]";
      compare("star4_tree" + tag, by_tree, g, grid[k]);
      compare("star4_sequential" + tag, by_sequence, g, grid[k]);
      double se_t = 0.0, se_s = 0.0;
      const double mt = detail::mc_laplace(by_tree, grid[k], &se_t);
      const double ms = detail::mc_laplace(by_sequence, grid[k], &se_s);
      const double se = std::hypot(se_t, se_s);
      c.checks.push_back({"star4_agreement" + tag, mt - ms, se, 4.0, std::abs(mt - ms) <= 4.0 * se});
    }
  }
  return c;
}

// 4. Martingale and bracket on trees and Z^2 boxes.
inline CriterionResult criterion_martingale(const Options& opt) {
  CriterionResult c{4, "martingale, bracket and moment symmetry", {}, {}};
  const auto tree = detail::tree_spec("martingale", detail::kBinary, {{"abs", 1.0}}, {0, 2, 4, 6, 8, 10, 12}, 10000,
                                      505,
                                      json::array({{{"kind", "psi_mean"}},
                                                   {{"kind", "bracket_constant"}},
                                                   {{"kind", "moment_symmetry"}, {"p", 2.0}, {"depths", {8, 12}}}}),
                                      {{"record_brw", 0}});
  detail::add_summary(c, run(tree, opt.threads), "tree:");
  const auto lattice = ExperimentSpec::from_json({{"name", "martingale_z2"},
                                                  {"kind", "lattice"},
                                                  {"w", {{"abs", 1.0}}},
                                                  {"box", {{"d", 2}}},
                                                  {"depths", {0, 1, 2, 3}},
                                                  {"replicas", 20000},
                                                  {"seed", 506},
                                                  {"assertions", json::array({{{"kind", "psi_mean"}},
                                                                              {{"kind", "bracket_constant"}}})}});
  detail::add_summary(c, run(lattice, opt.threads), "z2:");
  return c;
}

// 5. Phase-diagram numerics.
inline CriterionResult criterion_phase(const Options&) {
  CriterionResult c{5, "phase diagram numerics", {}, {}};
  auto add = [&](std::string name, double value, double threshold, bool pass) {
    c.checks.push_back({std::move(name), value, 0.0, threshold, pass});
  };
  for (double m : {2.0, 3.0, 5.0}) {
    const std::string tag = "[m=" + detail::fmt(m) + "]";
    const double wc = critical_w(m);
    const double res = std::abs(m * q_moment(wc, 0.5) - 1.0);
    add("critical_w_residual" + tag, res, 1e-10, res <= 1e-10);
    const double ts = t_star(m, wc);
    add("t_star_at_critical" + tag, std::abs(ts - 0.5), 1e-8, std::abs(ts - 0.5) <= 1e-8);
    const LaplaceTransformFn f(m, wc);
    for (double rel : {0.25, 0.5, 0.75, 0.9}) {
      const std::string tg = "[m=" + detail::fmt(m) + ",w=" + detail::fmt(rel) + "Wc]";
      const double w = rel * wc;
      const LaplaceTransformFn fw(m, w);
      const double t = t_star(m, w);
      const auto v = fw(t);
      const double phi = std::abs(t * v.df - v.f);
      add("t_star_residual" + tg, phi, 1e-10, phi <= 1e-10);
      add("t_star_in_open_interval" + tg, t, 0.5, t > 0.0 && t < 0.5);
      const double tau1 = -v.df, tau2 = -v.f / t;
      add("tau_positive" + tg, tau1, 0.0, tau1 > 0.0);
      add("tau_two_routes" + tg, std::abs(tau1 - tau2), 1e-9, std::abs(tau1 - tau2) <= 1e-9);
    }
    const double a = alpha(m);
    add("alpha_positive" + tag, a, 0.0, a > 0.0);
    const double h = 1e-3 * wc;
    const double slope = tau(m, wc - h) / h;
    const double rel_err = std::abs(slope - a) / a;
    add("alpha_vs_tau_slope" + tag, rel_err, 0.02, rel_err <= 0.02);
    const auto ce = critical_exponents(m);
    const double e = ig_log_power_moment(wc, 0.5, 2);
    const double s2_alt = 16.0 * m * e;
    add("sigma2_two_routes" + tag, std::abs(ce.sigma2 - s2_alt) / s2_alt, 1e-8, std::abs(ce.sigma2 - s2_alt) / s2_alt <= 1e-8);
    const double rho_alt = 0.5 * std::cbrt(24.0 * std::numbers::pi * std::numbers::pi * m * e);
    add("rho_c_two_routes" + tag, std::abs(ce.rho_c - rho_alt) / rho_alt, 1e-8, std::abs(ce.rho_c - rho_alt) / rho_alt <= 1e-8);
  }
  double worst_margin = INFINITY;
  for (int k = 0; k <= 100; ++k) {
    const double w = 0.1 * std::pow(100.0, k / 100.0);
    worst_margin = std::min(worst_margin, 1.0 + 1.0 / (2.0 * w) - bessel_k(1.0, w) / bessel_k(0.0, w));
  }
  add("bessel_ratio_inequality_margin", worst_margin, 0.0, worst_margin > 0.0);
  return c;
}

// 6. Recurrent-phase decay.
inline CriterionResult criterion_decay(const Options& opt) {
  CriterionResult c{6, "recurrent-phase decay rate", {}, {}};
  const auto spec = detail::tree_spec("decay", detail::kBinary, {{"rel", 0.5}}, {8, 16}, 200, 606,
                                      json::array({{{"kind", "decay_rate"}, {"rel_tol", 0.2}},
                                                   {{"kind", "nash_williams"}}}),
                                      {{"record_brw", 0}});
  detail::add_summary(c, run(spec, opt.threads), "");
  const auto nw = detail::tree_spec("nash_williams", detail::kBinary, {{"rel", 0.5}}, {1, 4, 8, 12}, 1000, 607,
                                    json::array({{{"kind", "nash_williams"}}}), {{"record_brw", 0}});
  detail::add_summary(c, run(nw, opt.threads), "extra:");
  return c;
}

// 7. Escape-probability band and walk oracle.
inline CriterionResult criterion_escape(const Options& opt) {
  CriterionResult c{7, "escape probability band and walk oracle", {}, {}};
  const auto spec = detail::tree_spec("escape", detail::kBinary, {{"rel", 0.6}}, {6, 7, 8, 9, 10, 11, 12, 13, 14}, 10000,
                                      707, json::array({{{"kind", "escape_band"}, {"eps_rel", 0.15}}}),
                                      {{"record_brw", 0}});
  detail::add_summary(c, run(spec, opt.threads), "");
  // Walk oracle at weights where escape is not negligible.
  const double w_c = critical_w(2.0);
  for (double w : {4.0 * w_c, 0.3, 1.0}) {
    RandomStream rng(708, 0);
    const auto tree = sample_tree(OffspringLaw::deterministic(2), 7, rng);
    const auto pot = attach_potential(tree, w, rng);
    const auto net = make_wired_network(tree, pot, 6);
    const double exact = escape_probability(net);
    const NetworkWalk walk(net);
    constexpr int kWalks = 100000;
    int hits = 0, censored = 0;
    for (int k = 0; k < kWalks; ++k) {
      const auto outcome = walk.run(rng, 1000000);
      if (outcome == WalkOutcome::HitLevelN) ++hits;
      else if (outcome == WalkOutcome::Censored) ++censored;
    }
    const double freq = static_cast<double>(hits) / kWalks;
    const double se = std::sqrt(exact * (1.0 - exact) / kWalks);
    const std::string tag = "[w=" + detail::fmt(w) + ",p=" + detail::fmt(exact) + "]";
    c.checks.push_back({"walk_oracle" + tag, freq - exact, se, 4.0, std::abs(freq - exact) <= 4.0 * se});
    c.checks.push_back({"walk_censoring_rate" + tag, static_cast<double>(censored) / kWalks, 0.0, 0.01,
                        censored < kWalks / 100});
  }
  return c;
}

// 8. Criticality.
inline CriterionResult criterion_critical(const Options& opt) {
  CriterionResult c{8, "critical scaling, generation conductance, small moments", {}, {}};
  std::vector<int> depths;
  for (int n = 1; n <= 16; ++n) depths.push_back(n);
  const auto spec = detail::tree_spec("critical", detail::kBinary, {{"rel", 1.0}}, depths, 1000, 808,
                                      json::array({{{"kind", "critical_scaling"}, {"factor", 3.0}},
                                                   {{"kind", "lambda_slope"},
                                                    {"r", 0.24},
                                                    {"lo", -2.5},
                                                    {"hi", -0.4},
                                                    {"depths", {6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16}}}}),
                                      {{"record_brw", 0}});
  detail::add_summary(c, run(spec, opt.threads), "");
  std::vector<int> hd;
  for (int n = 8; n <= 18; ++n) hd.push_back(n);
  auto additive_moment = ExperimentSpec::from_json({{"name", "additive_moment"},
                                          {"law", detail::kBinary},
                                          {"w", {{"rel", 1.0}}},
                                          {"depths", hd},
                                          {"replicas", 1000},
                                          {"seed", 809},
                                          {"options", {{"beta", 2.0}}},
                                          {"assertions", json::array({{{"kind", "additive_moment_slope"}, {"r", 0.3}, {"rel_tol", 0.4}}})}});
  detail::add_summary(c, run(additive_moment, opt.threads), "");
  return c;
}

inline std::vector<std::function<CriterionResult(const Options&)>> fast_battery() {
  return {criterion_identities, criterion_phase};
}

inline std::vector<std::function<CriterionResult(const Options&)>> full_battery() {
  return {criterion_identities, criterion_distributions, criterion_samplers, criterion_martingale,
          criterion_phase,      criterion_decay,         criterion_escape,   criterion_critical};
}

inline CriterionResult run_guarded(const std::function<CriterionResult(const Options&)>& f, const Options& opt) {
  try {
    return f(opt);
  } catch (const std::exception& e) {
    CriterionResult c;
    c.error = e.what();
    return c;
  }
}

/// Deterministic report: no timings.
inline void print(std::ostream& os, const CriterionResult& c) {
  os << "criterion " << c.id << ": " << (c.pass() ? "PASS" : "FAIL") << " - " << c.title << '\n';
  if (!c.error.empty()) os << "    error: " << c.error << '\n';
  for (const auto& k : c.checks)
    os << "    " << (k.pass ? "ok  " : "FAIL") << ' ' << k.name << " value=" << detail::fmt(k.value)
       << " stderr=" << detail::fmt(k.stderr_) << " threshold=" << detail::fmt(k.threshold) << '\n';
}

}  // namespace vrjp::verify
