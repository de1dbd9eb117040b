#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace dynbool {

inline constexpr double kZ95 = 1.959963984540054;

/// Point estimate with a 95% confidence half-width.
struct Estimate {
  double value = 0.0;
  double half_width = 0.0;
  std::size_t n = 0;

  double lo() const { return value - half_width; }
  double hi() const { return value + half_width; }
  /// Standard error implied by the half-width.
  double stderr_() const { return half_width / kZ95; }
};

/// Sum in a fixed pairwise tree; the result depends only on the input order.
double pairwise_sum(std::span<const double> xs);

Estimate mean_ci(std::span<const double> xs);

double sample_variance(std::span<const double> xs);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool overlaps(const Interval& o) const { return lo <= o.hi && o.lo <= hi; }
  bool contains(double x) const { return lo <= x && x <= hi; }
};

/// 95% Wilson score interval for a binomial proportion.
Interval wilson_interval(std::size_t successes, std::size_t n);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double r2 = 0.0;
};

/// Ordinary least squares of y on x. Requires at least two distinct x.
LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

/// Two-sample Kolmogorov–Smirnov statistic sup|F_a - F_b|.
double ks_statistic(std::vector<double> a, std::vector<double> b);

/// Asymptotic critical value of the two-sample KS statistic at `level`.
double ks_critical(std::size_t n, std::size_t m, double level);

/// Two-sided normal-approximation binomial test of p = 1/2; true if not
/// rejected at `level`.
bool fair_coin_consistent(std::size_t heads, std::size_t n, double level);

/// Pearson chi-square goodness of fit of integer counts against a Poisson law
/// with the given mean; counts are pooled into bins with expected frequency
/// >= 5. Returns the p-value.
double poisson_gof_pvalue(std::span<const std::int64_t> counts, double mean);

/// P(Poisson(mean) >= k).
double poisson_tail(double mean, std::int64_t k);

/// Empirical quantile (type 7) of a sample.
double quantile(std::vector<double> xs, double q);

}  // namespace dynbool
