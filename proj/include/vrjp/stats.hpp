#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "vrjp/errors.hpp"

namespace vrjp::stats {

/// Running mean and variance (Welford). Merging is order-dependent only through rounding,
/// so callers aggregate in a fixed order.
class MeanAccumulator {
 public:
  void add(double x) {
    ++n_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (x - mean_);
  }

  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double stderr_of_mean() const {
    return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
  }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct MeanEstimate {
  double mean;
  double stderr_;
  std::size_t n;
};

inline MeanEstimate mean_of(std::span<const double> xs) {
  MeanAccumulator acc;
  for (double x : xs) acc.add(x);
  return {acc.mean(), acc.stderr_of_mean(), acc.count()};
}

inline double median(std::vector<double> xs) {
  if (xs.empty()) throw DomainError("median of empty sample");
  const auto mid = xs.begin() + static_cast<std::ptrdiff_t>(xs.size() / 2);
  std::nth_element(xs.begin(), mid, xs.end());
  if (xs.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(xs.begin(), mid);
  return 0.5 * (lower + upper);
}

/// Median absolute deviation, unscaled.
inline double mad(const std::vector<double>& xs) {
  const double c = median(xs);
  std::vector<double> dev(xs.size());
  std::transform(xs.begin(), xs.end(), dev.begin(), [c](double x) { return std::abs(x - c); });
  return median(std::move(dev));
}

/// Standard error of the median from the MAD under a normal-shape approximation.
inline double median_stderr(const std::vector<double>& xs) {
  const double sigma = 1.4826 * mad(xs);
  return 1.2533 * sigma / std::sqrt(static_cast<double>(xs.size()));
}

struct LinearFit {
  double slope;
  double intercept;
  double slope_stderr;
};

/// Ordinary least squares y = intercept + slope x.
inline LinearFit least_squares(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("least_squares: need >= 2 paired points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw DomainError("least_squares: degenerate abscissae");
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double rss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - intercept - slope * x[i];
    rss += r * r;
  }
  const double se = x.size() > 2 ? std::sqrt(rss / (n - 2.0) / sxx) : 0.0;
  return {slope, intercept, se};
}

/// Survival function of the Kolmogorov distribution, P(K > lambda).
inline double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 1.18) {
    // Theta-function form converges fast for small lambda.
    const double c = std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
    double sum = 0.0;
    for (int k = 1; k <= 20; ++k) {
      const double odd = 2.0 * k - 1.0;
      sum += std::exp(-odd * odd * c);
    }
    return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * sum, 0.0, 1.0);
  }
  double sum = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-300) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
  double statistic;
  double p_value;
  std::size_t n;
};

/// One-sample Kolmogorov-Smirnov test against a continuous CDF.
template <class Cdf>
KsResult ks_test(std::vector<double> sample, Cdf&& cdf) {
  if (sample.empty()) throw DomainError("ks_test: empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max(d, std::max(f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f));
  }
  const double sn = std::sqrt(n);
  const double p = kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d);
  return {d, p, sample.size()};
}

}  // namespace vrjp::stats
