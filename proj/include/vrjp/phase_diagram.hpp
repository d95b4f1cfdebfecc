#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string_view>
#include <vector>

#include "vrjp/errors.hpp"
#include "vrjp/quadrature.hpp"
#include "vrjp/special_math.hpp"

namespace vrjp {

enum class Regime { Recurrent, Critical, Transient };

inline std::string_view to_string(Regime r) {
  switch (r) {
    case Regime::Recurrent: return "Recurrent";
    case Regime::Critical: return "Critical";
    case Regime::Transient: return "Transient";
  }
  return "?";
}

/// |m Q(w, 1/2) - 1| at or below this counts as critical.
inline constexpr double kCriticalTolerance = 1e-9;

namespace detail {

inline void require_branching(double m) {
  if (!(m > 1.0) || !std::isfinite(m)) throw DomainError("offspring mean must exceed 1");
}

inline double half_moment(double w) { return q_moment(w, 0.5); }

}  // namespace detail

/// The unique W with m Q(W, 1/2) = 1.
inline double critical_w(double m) {
  detail::require_branching(m);
  auto g = [m](double w) { return m * detail::half_moment(w) - 1.0; };
  double lo = 1.0, hi = 1.0;
  int guard = 0;
  while (g(lo) > 0.0) {
    lo *= 0.5;
    if (++guard > 200) throw SolverError("critical_w: lower bracket not found");
  }
  while (g(hi) < 0.0) {
    hi *= 2.0;
    if (++guard > 400) throw SolverError("critical_w: upper bracket not found");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double v = g(mid);
    if (v == 0.0) return mid;
    (v < 0.0 ? lo : hi) = mid;
  }
  const double w = std::abs(g(lo)) < std::abs(g(hi)) ? lo : hi;
  if (std::abs(g(w)) > 1e-10) throw SolverError("critical_w: residual above tolerance");
  return w;
}

/// Phi(t) = t f'(t) - f(t); its positive root defines t*.
inline double tstar_residual(const LaplaceTransformFn& f, double t) {
  const auto v = f(t);
  return t * v.df - v.f;
}

inline double t_star(double m, double w) {
  const LaplaceTransformFn f(m, w);
  double lo = 0.0, hi = 0.5;
  int guard = 0;
  while (tstar_residual(f, hi) < 0.0) {
    lo = hi;
    hi *= 2.0;
    if (++guard > 60) throw SolverError("t_star: bracket expansion failed");
  }
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (tstar_residual(f, mid) < 0.0 ? lo : hi) = mid;
  }
  const double t = 0.5 * (lo + hi);
  if (std::abs(tstar_residual(f, t)) > 1e-10) throw SolverError("t_star: residual above tolerance");
  return t;
}

/// tau = -f'(t*). Signed: negative when w exceeds the critical weight.
inline double tau(double m, double w) {
  const double t = t_star(m, w);
  return -LaplaceTransformFn(m, w)(t).df;
}

inline double alpha(double m) {
  const double wc = critical_w(m);
  const double k1_over_khalf = bessel_k_scaled(1.0, wc) / bessel_k_scaled(0.5, wc);
  return 2.0 + 1.0 / wc - 2.0 * m * k1_over_khalf;
}

struct CriticalExponents {
  double sigma2;
  double rho_c;
};

/// 16 m times the integral over x > 0 of sqrt(w) ln(x)^2 / (sqrt(2 pi) x) exp(-w/2 (x + 1/x - 2)).
inline double sigma2_integral(double m, double w) {
  const double c = std::sqrt(w) / std::sqrt(2.0 * std::numbers::pi);
  auto g = [c, w](double x) {
    const double l = std::log(x);
    return c * l * l / x * std::exp(-0.5 * w * (x + 1.0 / x - 2.0));
  };
  auto log_g = [&](double x) { return std::log(g(x)); };
  // The measure dx / x and ln(x)^2 are invariant under x -> 1/x; integrate over x >= 1 and double.
  const double upper = quad::upper_cutoff(log_g, 2.0, 1.0, 45.0, 100000);
  std::vector<double> pts = {1.0};
  for (double b = 2.0; b < upper; b *= 2.0) pts.push_back(b);
  pts.push_back(upper);
  const auto r = quad::integrate(g, std::span<const double>(pts));
  return 16.0 * m * 2.0 * r.value;
}

inline double rho_from_sigma2(double sigma2) {
  return 0.5 * std::cbrt(1.5 * std::numbers::pi * std::numbers::pi * sigma2);
}

/// sigma^2 and rho_c; defined at the critical weight only.
inline CriticalExponents critical_exponents(double m) {
  const double wc = critical_w(m);
  const double s2 = sigma2_integral(m, wc);
  return {s2, rho_from_sigma2(s2)};
}

struct PhaseQuantities {
  double m;
  double w;
  double w_c;
  double t_star;
  double tau;
  double alpha;
  std::optional<double> sigma2;
  std::optional<double> rho_c;
  Regime regime;
};

inline Regime regime_of(double m, double w) {
  const double excess = m * detail::half_moment(w) - 1.0;
  if (std::abs(excess) <= kCriticalTolerance) return Regime::Critical;
  return excess < 0.0 ? Regime::Recurrent : Regime::Transient;
}

inline PhaseQuantities classify(double m, double w) {
  detail::require_branching(m);
  detail::require_positive(w, "classify");
  PhaseQuantities q{};
  q.m = m;
  q.w = w;
  q.w_c = critical_w(m);
  q.regime = regime_of(m, w);
  q.alpha = alpha(m);
  q.t_star = t_star(m, w);
  q.tau = -LaplaceTransformFn(m, w)(q.t_star).df;
  if (q.regime == Regime::Critical) {
    const auto ce = critical_exponents(m);
    q.sigma2 = ce.sigma2;
    q.rho_c = ce.rho_c;
  }
  return q;
}

}  // namespace vrjp
