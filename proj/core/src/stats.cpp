#include "dynbool/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/poisson.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "dynbool/errors.hpp"

namespace dynbool {

double pairwise_sum(std::span<const double> xs) {
  if (xs.size() <= 8) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
  }
  const std::size_t half = xs.size() / 2;
  return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

double sample_variance(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = pairwise_sum(xs) / static_cast<double>(xs.size());
  std::vector<double> sq(xs.size());
  std::transform(xs.begin(), xs.end(), sq.begin(),
                 [m](double x) { return (x - m) * (x - m); });
  return pairwise_sum(sq) / static_cast<double>(xs.size() - 1);
}

Estimate mean_ci(std::span<const double> xs) {
  Estimate e;
  e.n = xs.size();
  if (xs.empty()) return e;
  e.value = pairwise_sum(xs) / static_cast<double>(xs.size());
  e.half_width = kZ95 * std::sqrt(sample_variance(xs) / static_cast<double>(xs.size()));
  return e;
}

Interval wilson_interval(std::size_t successes, std::size_t n) {
  if (n == 0) return {0.0, 1.0};
  const double z = kZ95;
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(successes) / nn;
  const double denom = 1.0 + z * z / nn;
  const double centre = (p + z * z / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z * z / (4.0 * nn * nn)) / denom;
  // Endpoints are exact at the extremes; the closed form leaves ~1e-19 residue.
  const double lo = successes == 0 ? 0.0 : std::max(0.0, centre - half);
  const double hi = successes == n ? 1.0 : std::min(1.0, centre + half);
  return {lo, hi};
}

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2)
    throw InvalidArgument("linear_fit: need at least two paired points");
  const double n = static_cast<double>(x.size());
  const double mx = pairwise_sum(x) / n;
  const double my = pairwise_sum(y) / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx <= 0.0) throw InvalidArgument("linear_fit: abscissae are all equal");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    sse += r * r;
  }
  f.slope_stderr = x.size() > 2 ? std::sqrt(sse / (n - 2.0) / sxx) : 0.0;
  f.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  return f;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double ks_critical(std::size_t n, std::size_t m, double level) {
  const double c = std::sqrt(-0.5 * std::log(level / 2.0));
  const double nn = static_cast<double>(n), mm = static_cast<double>(m);
  return c * std::sqrt((nn + mm) / (nn * mm));
}

bool fair_coin_consistent(std::size_t heads, std::size_t n, double level) {
  const double nn = static_cast<double>(n);
  const double z = (static_cast<double>(heads) - 0.5 * nn) / std::sqrt(0.25 * nn);
  const boost::math::normal_distribution<> nd;
  const double crit = boost::math::quantile(boost::math::complement(nd, level / 2.0));
  return std::abs(z) <= crit;
}

double poisson_gof_pvalue(std::span<const std::int64_t> counts, double mean) {
  if (counts.empty() || mean <= 0.0) throw InvalidArgument("poisson_gof: empty sample");
  const double n = static_cast<double>(counts.size());
  const boost::math::poisson_distribution<> pois(mean);
  std::map<std::int64_t, double> observed;
  for (auto c : counts) observed[c] += 1.0;

  // Bins [k_lo, k_hi] are grown until each expects >= 5 counts; the first and
  // last bins absorb the tails.
  std::vector<std::pair<double, double>> bins;  // (observed, expected)
  const auto kmax = static_cast<std::int64_t>(mean + 12.0 * std::sqrt(mean) + 20.0);
  double obs = 0.0, expct = 0.0;
  for (std::int64_t k = 0; k <= kmax; ++k) {
    expct += n * boost::math::pdf(pois, static_cast<double>(k));
    if (auto it = observed.find(k); it != observed.end()) obs += it->second;
    if (expct >= 5.0) {
      bins.emplace_back(obs, expct);
      obs = expct = 0.0;
    }
  }
  for (const auto& [k, c] : observed)
    if (k > kmax) obs += c;
  expct += n * boost::math::cdf(boost::math::complement(pois, static_cast<double>(kmax)));
  if (!bins.empty()) {
    bins.back().first += obs;
    bins.back().second += expct;
  } else {
    bins.emplace_back(obs, expct);
  }
  if (bins.size() < 2) return 1.0;
  double chi2 = 0.0;
  for (const auto& [o, e] : bins) chi2 += (o - e) * (o - e) / e;
  const boost::math::chi_squared_distribution<> dist(static_cast<double>(bins.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, chi2));
}

double poisson_tail(double mean, std::int64_t k) {
  if (k <= 0) return 1.0;
  if (mean <= 0.0) return 0.0;
  return boost::math::gamma_p(static_cast<double>(k), mean);
}

double quantile(std::vector<double> xs, double q) {
  if (xs.empty()) throw InvalidArgument("quantile: empty sample");
  std::sort(xs.begin(), xs.end());
  const double pos = q * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

}  // namespace dynbool
