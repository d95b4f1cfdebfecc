#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <queue>
#include <span>
#include <vector>

namespace vrjp::quad {

struct Options {
  double abs_tol = 0.0;
  double rel_tol = 1e-13;
  std::size_t max_intervals = 4000;
};

struct Result {
  double value = 0.0;
  double error = 0.0;
  std::size_t intervals = 0;
  bool converged = false;
};

namespace detail {

// 21-point Kronrod extension of the 10-point Gauss rule (QUADPACK qk21).
inline constexpr std::array<double, 11> kKronrodNodes = {
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.0};
inline constexpr std::array<double, 11> kKronrodWeights = {
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077208067074266, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821};
// Gauss weights for the odd Kronrod nodes 1, 3, 5, 7, 9.
inline constexpr std::array<double, 5> kGaussWeights = {
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338};

struct Panel {
  double a, b, value, error;
  bool operator<(const Panel& o) const { return error < o.error; }
};

template <class F>
Panel kronrod21(F& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double kronrod = fc * kKronrodWeights[10];
  double gauss = 0.0;
  double abs_sum = std::abs(kronrod);
  std::array<double, 10> f1{}, f2{};
  for (std::size_t j = 0; j < 10; ++j) {
    const double dx = half * kKronrodNodes[j];
    f1[j] = f(center - dx);
    f2[j] = f(center + dx);
    const double pair = f1[j] + f2[j];
    kronrod += kKronrodWeights[j] * pair;
    abs_sum += kKronrodWeights[j] * (std::abs(f1[j]) + std::abs(f2[j]));
    if (j % 2 == 1) gauss += kGaussWeights[j / 2] * pair;
  }
  const double mean = 0.5 * kronrod;
  double asc = kKronrodWeights[10] * std::abs(fc - mean);
  for (std::size_t j = 0; j < 10; ++j)
    asc += kKronrodWeights[j] * (std::abs(f1[j] - mean) + std::abs(f2[j] - mean));

  const double value = kronrod * half;
  asc *= std::abs(half);
  abs_sum *= std::abs(half);
  double err = std::abs((kronrod - gauss) * half);
  if (asc != 0.0 && err != 0.0) err = asc * std::min(1.0, std::pow(200.0 * err / asc, 1.5));
  constexpr double eps = 2.220446049250313e-16;
  if (abs_sum > std::numeric_limits<double>::min() / (50.0 * eps))
    err = std::max(50.0 * eps * abs_sum, err);
  return {a, b, value, err};
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod quadrature over the panels delimited by
/// consecutive breakpoints. Always returns the best estimate; `converged`
/// reports whether the requested tolerance was reached.
template <class F>
Result integrate(F&& f, std::span<const double> breakpoints, Options opts = {}) {
  std::priority_queue<detail::Panel> heap;
  double total = 0.0, total_err = 0.0;
  for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
    if (breakpoints[i + 1] == breakpoints[i]) continue;
    auto p = detail::kronrod21(f, breakpoints[i], breakpoints[i + 1]);
    total += p.value;
    total_err += p.error;
    heap.push(p);
  }
  auto tolerance = [&] { return std::max(opts.abs_tol, opts.rel_tol * std::abs(total)); };
  while (total_err > tolerance() && heap.size() < opts.max_intervals) {
    const auto worst = heap.top();
    const double mid = 0.5 * (worst.a + worst.b);
    if (mid <= worst.a || mid >= worst.b) break;  // interval cannot be split further
    heap.pop();
    const auto left = detail::kronrod21(f, worst.a, mid);
    const auto right = detail::kronrod21(f, mid, worst.b);
    total += left.value + right.value - worst.value;
    total_err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
  }
  // Re-sum from the panels to shed the drift of the running updates.
  Result r;
  r.intervals = heap.size();
  std::vector<double> values;
  values.reserve(heap.size());
  double err = 0.0;
  while (!heap.empty()) {
    values.push_back(heap.top().value);
    err += heap.top().error;
    heap.pop();
  }
  std::sort(values.begin(), values.end(), [](double x, double y) { return std::abs(x) < std::abs(y); });
  double sum = 0.0, comp = 0.0;
  for (double v : values) {  // Kahan
    const double y = v - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  r.value = sum;
  r.error = err;
  r.converged = err <= std::max(opts.abs_tol, opts.rel_tol * std::abs(sum));
  return r;
}

template <class F>
Result integrate(F&& f, double a, double b, Options opts = {}) {
  const std::array<double, 2> pts = {a, b};
  return integrate(std::forward<F>(f), std::span<const double>(pts), opts);
}

/// Smallest point x = start + k*step (k >= 1) past the maximum of a log-concave-ish
/// log-integrand where it has dropped `drop` below the running maximum.
template <class LogF>
double upper_cutoff(LogF&& log_f, double start, double step, double drop = 60.0,
                    std::size_t max_steps = 100000) {
  double best = log_f(start);
  double x = start;
  for (std::size_t k = 0; k < max_steps; ++k) {
    x += step;
    const double v = log_f(x);
    if (v > best) best = v;
    else if (v < best - drop) return x;
  }
  return x;
}

}  // namespace vrjp::quad
