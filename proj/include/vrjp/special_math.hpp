#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "vrjp/errors.hpp"
#include "vrjp/quadrature.hpp"
#include "vrjp/random.hpp"

namespace vrjp {

/// Parameters (mean, shape) of an Inverse Gaussian law IG(mean, shape).
struct IgParams {
  double mean;
  double shape;

  IgParams(double mean_, double shape_) : mean(mean_), shape(shape_) {
    if (!(mean > 0.0) || !(shape > 0.0) || !std::isfinite(mean) || !std::isfinite(shape))
      throw DomainError("IgParams: mean and shape must be positive and finite");
  }
};

namespace detail {

inline constexpr double kSqrt2 = std::numbers::sqrt2;
inline constexpr double kInvSqrtPi = std::numbers::inv_sqrtpi;

// Scaled complementary error function exp(y^2) erfc(y) for y >= 0.
inline double erfcx(double y) {
  if (y < 26.0) return std::exp(y * y) * std::erfc(y);
  // Asymptotic series; six terms are below double resolution for y >= 26.
  const double inv2y2 = 1.0 / (2.0 * y * y);
  double term = 1.0, sum = 1.0;
  for (int k = 1; k <= 6; ++k) {
    term *= -(2.0 * k - 1.0) * inv2y2;
    sum += term;
  }
  return kInvSqrtPi / y * sum;
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / kSqrt2); }

inline void require_positive(double w, const char* what) {
  if (!(w > 0.0) || !std::isfinite(w))
    throw DomainError(std::string(what) + ": argument must be positive and finite");
}

}  // namespace detail

inline double ig_density(double x, const IgParams& p) {
  if (!(x > 0.0)) return 0.0;
  const double a = p.mean, lambda = p.shape;
  const double d = x - a;
  return std::sqrt(lambda / (2.0 * std::numbers::pi * x * x * x)) *
         std::exp(-lambda * d * d / (2.0 * a * a * x));
}

inline double ig_cdf(double x, const IgParams& p) {
  if (!(x > 0.0)) return 0.0;
  if (std::isinf(x)) return 1.0;
  const double a = p.mean, lambda = p.shape;
  const double r = std::sqrt(lambda / x);
  const double z1 = r * (x / a - 1.0);
  const double z2 = r * (x / a + 1.0);
  // exp(2 lambda / a) Phi(-z2) == 0.5 exp(-z1^2 / 2) erfcx(z2 / sqrt 2).
  const double second = 0.5 * std::exp(-0.5 * z1 * z1) * detail::erfcx(z2 / detail::kSqrt2);
  const double value = detail::normal_cdf(z1) + second;
  return std::min(1.0, std::max(0.0, value));
}

/// Draw from IG(mean, shape) by the transformation-with-rejection method of
/// Michael, Schucany and Haas.
inline double ig_sample(const IgParams& p, RandomStream& rng) {
  const double a = p.mean;
  const double nu = rng.normal();
  const double z = a * nu * nu / (2.0 * p.shape);
  // Smaller root of the quadratic, written without cancellation.
  const double x = a / (1.0 + z + std::sqrt(z * (z + 2.0)));
  if (rng.uniform() * (a + x) <= a) return x;
  return a * a / x;
}

/// Draw from Gamma(1/2, 1) as half the square of a standard normal.
inline double gamma_half_sample(RandomStream& rng) {
  const double n = rng.normal();
  return 0.5 * n * n;
}

/// CDF of Gamma(1/2, 1): the regularized lower incomplete gamma P(1/2, x) = erf(sqrt x).
inline double gamma_half_cdf(double x) { return x > 0.0 ? std::erf(std::sqrt(x)) : 0.0; }

/// exp(w) K_nu(w) from the integral of exp(-w (cosh u - 1)) cosh(nu u) over u >= 0.
inline double bessel_k_scaled(double nu, double w) {
  detail::require_positive(w, "bessel_k");
  nu = std::abs(nu);
  auto log_g = [nu, w](double u) {
    // log cosh(nu u) computed without overflow.
    const double t = nu * u;
    return -w * (std::cosh(u) - 1.0) + t + std::log1p(std::exp(-2.0 * t)) - std::numbers::ln2;
  };
  const double peak = nu > 0.0 ? std::asinh(nu / w) : 0.0;
  const double log_peak = log_g(peak);
  const double upper = quad::upper_cutoff(log_g, peak, 0.25, 45.0);
  auto g = [&](double u) { return std::exp(log_g(u) - log_peak); };
  std::array<double, 3> pts = {0.0, peak, upper};
  const auto r = quad::integrate(g, std::span<const double>(pts));
  return std::exp(log_peak) * r.value;
}

/// Modified Bessel function of the second kind K_nu(w), real order.
inline double bessel_k(double nu, double w) { return std::exp(-w) * bessel_k_scaled(nu, w); }

namespace detail {

struct LogMagnitude {
  double log_abs;  // log |value|; -inf when value == 0
  int sign;
};

// J_k(s) = integral over the real line of u^k exp(s u) exp(-w (cosh u - 1)) du,
// folded onto u >= 0. For A ~ IG(1, w): E[(ln A)^k A^t] = sqrt(w / 2 pi) J_k(t - 1/2).
inline LogMagnitude log_moment_integral(double w, double s, int k) {
  const double as = std::abs(s);
  const bool odd = (k % 2) != 0;
  if (odd && as == 0.0) return {-INFINITY, 0};
  const int sign = odd ? (s > 0.0 ? 1 : -1) : 1;

  auto log_g = [w, as, k, odd](double u) {
    const double t = as * u;
    const double fold = odd ? std::log(-std::expm1(-2.0 * t)) : std::log1p(std::exp(-2.0 * t));
    const double poly = k == 0 ? 0.0 : k * std::log(u);
    return poly + t + fold - w * (std::cosh(u) - 1.0);
  };
  // Peak solves w sinh u = |s| + k / u; the left side increases and the right decreases.
  double peak = 0.0;
  if (k > 0 || as > 0.0) {
    double lo = 0.0, hi = 1.0;
    auto excess = [&](double u) { return w * std::sinh(u) - as - (k > 0 ? k / u : 0.0); };
    while (excess(hi) < 0.0) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (excess(mid) < 0.0 ? lo : hi) = mid;
    }
    peak = 0.5 * (lo + hi);
  }
  const double log_peak = log_g(peak);
  const double upper = quad::upper_cutoff(log_g, peak, 0.25, 45.0);
  auto g = [&](double u) {
    if (u <= 0.0) return (k == 0) ? std::exp(log_g(0.0) - log_peak) : 0.0;
    return std::exp(log_g(u) - log_peak);
  };
  std::array<double, 4> pts = {0.0, 0.5 * peak, peak, upper};
  const auto r = quad::integrate(g, std::span<const double>(pts));
  return {log_peak + std::log(r.value), sign};
}

}  // namespace detail

/// E[(ln A)^k A^t] for A ~ IG(1, w), k in {0, 1, 2, ...}.
inline double ig_log_power_moment(double w, double t, int k) {
  detail::require_positive(w, "ig_log_power_moment");
  const auto j = detail::log_moment_integral(w, t - 0.5, k);
  if (j.sign == 0) return 0.0;
  return j.sign * std::exp(0.5 * std::log(w / (2.0 * std::numbers::pi)) + j.log_abs);
}

/// Q(w, t) = E[A^t] for A ~ IG(1, w), through the Bessel identity K_{t-1/2}(w) / K_{1/2}(w).
inline double q_moment(double w, double t) {
  detail::require_positive(w, "q_moment");
  // K_{1/2}(w) = sqrt(pi / (2 w)) exp(-w); the exp(-w) factors cancel.
  return bessel_k_scaled(t - 0.5, w) * std::sqrt(2.0 * w / std::numbers::pi);
}

/// Q(w, t) by direct quadrature of x^t times the IG(1, w) density (x = e^u).
inline double q_moment_direct(double w, double t) {
  detail::require_positive(w, "q_moment_direct");
  const IgParams p(1.0, w);
  auto h = [&](double u) {
    const double x = std::exp(u);
    return std::exp((t + 1.0) * u) * ig_density(x, p);
  };
  auto log_h = [&](double u) { return std::log(h(u)); };
  const double peak = std::asinh((t - 0.5) / w);
  const double upper = quad::upper_cutoff(log_h, peak, 0.25, 45.0);
  const double lower = quad::upper_cutoff(log_h, peak, -0.25, 45.0);
  std::array<double, 3> pts = {lower, peak, upper};
  return quad::integrate(h, std::span<const double>(pts)).value;
}

/// The branching-random-walk log-Laplace transform t -> ln(m Q(w, t)) with its
/// first two derivatives. Derivatives come from ln(A)- and ln(A)^2-weighted IG
/// integrals rather than finite differences.
class LaplaceTransformFn {
 public:
  struct Value {
    double f;
    double df;
    double d2f;
  };

  LaplaceTransformFn(double m, double w) : m_(m), w_(w) {
    if (!(m > 1.0) || !std::isfinite(m)) throw DomainError("LaplaceTransformFn: m must exceed 1");
    detail::require_positive(w, "LaplaceTransformFn");
  }

  double m() const { return m_; }
  double w() const { return w_; }

  double f(double t) const {
    const auto j0 = detail::log_moment_integral(w_, t - 0.5, 0);
    return std::log(m_) + log_prefactor() + j0.log_abs;
  }

  Value operator()(double t) const {
    const double s = t - 0.5;
    const auto j0 = detail::log_moment_integral(w_, s, 0);
    const auto j1 = detail::log_moment_integral(w_, s, 1);
    const auto j2 = detail::log_moment_integral(w_, s, 2);
    const double mean = j1.sign == 0 ? 0.0 : j1.sign * std::exp(j1.log_abs - j0.log_abs);
    const double second = std::exp(j2.log_abs - j0.log_abs);
    return {std::log(m_) + log_prefactor() + j0.log_abs, mean, second - mean * mean};
  }

 private:
  double log_prefactor() const { return 0.5 * std::log(w_ / (2.0 * std::numbers::pi)); }

  double m_;
  double w_;
};

/// (f, f', f'') of t -> ln(m Q(w, t)).
inline LaplaceTransformFn::Value f_eval(double m, double w, double t) {
  return LaplaceTransformFn(m, w)(t);
}

}  // namespace vrjp
