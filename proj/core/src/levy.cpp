#include "dynbool/levy.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/minima.hpp>

#include "dynbool/errors.hpp"
#include "dynbool/parallel.hpp"

namespace dynbool {

namespace {

constexpr double kPi = std::numbers::pi;

double norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

// z^{-nu} J_nu(z), continuous at z = 0.
double bessel_lambda(double nu, double z) {
  if (z < 1e-4) {
    const double q = -0.25 * z * z;
    const double g0 = boost::math::tgamma(nu + 1.0);
    return std::pow(2.0, -nu) * (1.0 / g0 + q / (g0 * (nu + 1.0)) +
                                 q * q / (2.0 * g0 * (nu + 1.0) * (nu + 2.0)));
  }
  return std::pow(z, -nu) * boost::math::cyl_bessel_j(nu, z);
}

// Upper limit Xi with integrand tail below ~1e-13.
double fourier_cutoff(double alpha, int dim, double t) {
  auto tail = [&](double xi) {
    const double decay = std::exp(-t * std::pow(xi, alpha));
    return decay * std::pow(xi, dim) * std::max(1.0, 1.0 / (alpha * t * std::pow(xi, alpha)));
  };
  double xi = std::pow(1.0 / t, 1.0 / alpha);
  while (tail(xi) > 1e-13) xi *= 1.25;
  return xi;
}

std::vector<std::vector<double>> unit_directions(int dim, int count) {
  std::vector<std::vector<double>> dirs;
  dirs.reserve(static_cast<std::size_t>(count));
  if (dim == 1) {
    for (int i = 0; i < count; ++i) dirs.push_back({i % 2 == 0 ? 1.0 : -1.0});
  } else if (dim == 2) {
    for (int i = 0; i < count; ++i) {
      const double a = 2.0 * kPi * i / count;
      dirs.push_back({std::cos(a), std::sin(a)});
    }
  } else if (dim == 3) {
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < count; ++i) {
      const double z = 1.0 - (2.0 * i + 1.0) / count;
      const double rad = std::sqrt(1.0 - z * z);
      dirs.push_back({rad * std::cos(golden * i), rad * std::sin(golden * i), z});
    }
  } else {
    Rng fixed(0x5eed);
    std::normal_distribution<double> g;
    for (int i = 0; i < count; ++i) {
      std::vector<double> v(static_cast<std::size_t>(dim));
      for (auto& c : v) c = g(fixed);
      const double l = norm(v);
      for (auto& c : v) c /= l;
      dirs.push_back(std::move(v));
    }
  }
  return dirs;
}

}  // namespace

void StableParams::validate() const {
  if (!(alpha > 0.0 && alpha <= 2.0))
    throw InvalidArgument("alpha must lie in (0, 2], got " + std::to_string(alpha));
  if (dim < 1) throw InvalidArgument("dim must be >= 1, got " + std::to_string(dim));
}

void StableParams::require_transient() const {
  validate();
  if (!(static_cast<double>(dim) > alpha))
    throw DomainError("transience requires dim > alpha (alpha=" + std::to_string(alpha) +
                      ", dim=" + std::to_string(dim) + ")");
}

std::vector<double> time_grid(double horizon, double step) {
  if (!(horizon > 0.0)) throw InvalidArgument("horizon must be positive");
  if (!(step > 0.0 && step <= horizon)) throw InvalidArgument("step must lie in (0, horizon]");
  std::vector<double> t{0.0};
  const auto k = static_cast<std::size_t>(std::floor(horizon / step + 1e-9));
  for (std::size_t i = 1; i <= k; ++i) t.push_back(std::min(horizon, static_cast<double>(i) * step));
  if (horizon - t.back() > 1e-12 * horizon) t.push_back(horizon);
  t.back() = horizon;
  return t;
}

double sample_subordinator_increment(double beta, double dt, Rng& rng) {
  if (!(beta > 0.0 && beta < 1.0)) throw InvalidArgument("subordinator index must lie in (0, 1)");
  if (dt < 0.0) throw InvalidArgument("dt must be nonnegative");
  if (dt == 0.0) return 0.0;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::exponential_distribution<double> expo(1.0);
  double u = unif(rng);
  while (u <= 0.0) u = unif(rng);
  const double w = expo(rng);
  // Zolotarev/Kanter function A(u), in logs.
  const double log_a = beta / (1.0 - beta) * std::log(std::sin(beta * kPi * u)) +
                       std::log(std::sin((1.0 - beta) * kPi * u)) -
                       std::log(std::sin(kPi * u)) / (1.0 - beta);
  const double log_s = (1.0 - beta) / beta * (log_a - std::log(w));
  return std::exp(log_s + std::log(dt) / beta);
}

void sample_increment(const StableParams& params, double dt, Rng& rng, std::span<double> out) {
  if (dt < 0.0) throw InvalidArgument("dt must be nonnegative");
  if (dt == 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  double scale = 0.0;
  if (params.alpha == 2.0) {
    scale = std::sqrt(2.0 * dt);
  } else {
    scale = std::sqrt(2.0 * sample_subordinator_increment(0.5 * params.alpha, dt, rng));
  }
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (auto& c : out) c = scale * gauss(rng);
}

std::vector<double> sample_increment(const StableParams& params, double dt, Rng& rng) {
  std::vector<double> out(static_cast<std::size_t>(params.dim));
  sample_increment(params, dt, rng, out);
  return out;
}

PathSkeleton sample_path(const StableParams& params, std::span<const double> start,
                         std::span<const double> times, Rng& rng) {
  params.validate();
  if (times.empty() || times.front() != 0.0) throw InvalidArgument("time grid must start at 0");
  if (start.size() != static_cast<std::size_t>(params.dim))
    throw InvalidArgument("start point has wrong dimension");
  PathSkeleton p;
  p.params = params;
  p.times.assign(times.begin(), times.end());
  p.coords.resize(times.size() * static_cast<std::size_t>(params.dim));
  std::copy(start.begin(), start.end(), p.coords.begin());
  std::vector<double> inc(static_cast<std::size_t>(params.dim));
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double dt = times[i] - times[i - 1];
    if (!(dt > 0.0)) throw InvalidArgument("time grid must be strictly increasing");
    sample_increment(params, dt, rng, inc);
    auto prev = p.position(i - 1);
    auto cur = p.position(i);
    for (std::size_t k = 0; k < inc.size(); ++k) cur[k] = prev[k] + inc[k];
  }
  return p;
}

PathSkeleton sample_skeleton(const StableParams& params, std::span<const double> start,
                             double horizon, double step, Rng& rng) {
  const auto times = time_grid(horizon, step);
  return sample_path(params, start, times, rng);
}

double stable_density(const StableParams& params, double t, double r) {
  params.validate();
  if (!(t > 0.0)) throw InvalidArgument("stable_density: t must be positive");
  if (r < 0.0) throw InvalidArgument("stable_density: r must be nonnegative");
  const int d = params.dim;
  const double alpha = params.alpha;
  const double nu = 0.5 * d - 1.0;
  const double xi_max = fourier_cutoff(alpha, d, t);

  auto integrand = [&](double rho) {
    if (rho <= 0.0) return d == 1 ? bessel_lambda(nu, 0.0) : 0.0;
    return std::exp(-t * std::pow(rho, alpha)) * std::pow(rho, d - 1) * bessel_lambda(nu, r * rho);
  };

  // Panels of half an oscillation period keep each piece smooth. A plain
  // 31-point pass sizes an absolute error budget; only panels over their share
  // are bisected. (Per-panel relative tolerances recurse forever on the
  // negligible panels near the cutoff.)
  const double panel = r > 0.0 ? std::min(kPi / r, xi_max / 16.0) : xi_max / 16.0;
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  double l1 = 0.0;
  for (double a = 0.0; a < xi_max; a += panel) {
    const double b = std::min(xi_max, a + panel);
    l1 += std::abs(GK::integrate(integrand, a, b, 0, 0.0));
  }
  const double budget = 1e-13 * std::max(l1, 1e-300);
  double total = 0.0;
  double err_total = 0.0;
  std::function<double(double, double, double, int)> refine = [&](double a, double b, double tol,
                                                                   int depth) {
    double err = 0.0, panel_l1 = 0.0;
    const double v = GK::integrate(integrand, a, b, 0, 0.0, &err, &panel_l1);
    // The estimate never drops much below rounding of the panel itself.
    if (err <= std::max(tol, 50.0 * std::numeric_limits<double>::epsilon() * panel_l1) || depth == 0) {
      err_total += err;
      return v;
    }
    const double m = 0.5 * (a + b);
    return refine(a, m, 0.5 * tol, depth - 1) + refine(m, b, 0.5 * tol, depth - 1);
  };
  for (double a = 0.0; a < xi_max; a += panel) {
    const double b = std::min(xi_max, a + panel);
    total += refine(a, b, budget * (b - a) / xi_max, 12);
  }
  const double norm_c = std::pow(2.0 * kPi, -0.5 * d);
  const double value = norm_c * total;
  const double err = norm_c * err_total;
  if (!std::isfinite(value) || err > 1e-9 + 1e-7 * std::abs(value))
    throw NumericFailure("stable_density: quadrature error " + std::to_string(err) +
                         " at t=" + std::to_string(t) + ", r=" + std::to_string(r) +
                         ", alpha=" + std::to_string(alpha) + ", dim=" + std::to_string(d));
  return std::max(0.0, value);
}

double stable_tail_constant(const StableParams& params) {
  params.validate();
  const double a = params.alpha;
  const double d = params.dim;
  if (a == 2.0) return 0.0;
  return std::pow(2.0, a) * std::pow(kPi, -0.5 * d - 1.0) * boost::math::tgamma(0.5 * (d + a)) *
         boost::math::tgamma(0.5 * a + 1.0) * std::sin(0.5 * kPi * a);
}

HalvingCheck make_halving_check(const Estimate& at_h, const Estimate& at_half_h) {
  HalvingCheck c{at_h, at_half_h, false};
  const double joint = std::hypot(at_h.half_width, at_half_h.half_width);
  c.flagged = std::abs(at_h.value - at_half_h.value) > joint;
  return c;
}

Estimate escape_probability(const StableParams& params, double r, double t, std::size_t n,
                            double h, const ReplicaStreams& streams) {
  params.validate();
  if (!(r > 0.0)) throw InvalidArgument("escape_probability: r must be positive");
  if (t < 0.0) throw InvalidArgument("escape_probability: t must be nonnegative");
  if (t == 0.0 || n == 0) return {0.0, 0.0, n};
  const auto times = time_grid(t, std::min(h, t));
  const auto hits = map_replicas(n, streams.threads, [&](std::size_t i) {
    Rng rng = streams.stream(i);
    std::vector<double> x(static_cast<std::size_t>(params.dim), 0.0);
    std::vector<double> inc(x.size());
    for (std::size_t k = 1; k < times.size(); ++k) {
      sample_increment(params, times[k] - times[k - 1], rng, inc);
      for (std::size_t c = 0; c < x.size(); ++c) x[c] += inc[c];
      if (norm(x) >= r) return 1.0;
    }
    return 0.0;
  });
  return mean_ci(hits);
}

HalvingCheck escape_probability_halving(const StableParams& params, double r, double t,
                                        std::size_t n, double h, const ReplicaStreams& streams) {
  return make_halving_check(escape_probability(params, r, t, n, h, streams.child("h")),
                            escape_probability(params, r, t, n, h / 2, streams.child("h/2")));
}

Estimate hitting_probability(const StableParams& params, double distance, double r, double t,
                             std::size_t n, double h, const ReplicaStreams& streams,
                             int directions) {
  params.validate();
  if (!(distance > 0.0) || r < 0.0 || t < 0.0 || directions < 1)
    throw InvalidArgument("hitting_probability: bad arguments");
  const auto dirs = unit_directions(params.dim, directions);
  const std::size_t dim = static_cast<std::size_t>(params.dim);
  auto hit_at = [&](const std::vector<double>& x, std::vector<char>& hit) {
    for (std::size_t j = 0; j < dirs.size(); ++j) {
      if (hit[j]) continue;
      double s = 0.0;
      for (std::size_t c = 0; c < dim; ++c) {
        const double diff = x[c] - distance * dirs[j][c];
        s += diff * diff;
      }
      if (s <= r * r) hit[j] = 1;
    }
  };
  const auto times = t > 0.0 ? time_grid(t, std::min(h, t)) : std::vector<double>{0.0};
  const auto fractions = map_replicas(n, streams.threads, [&](std::size_t i) {
    Rng rng = streams.stream(i);
    std::vector<double> x(dim, 0.0), inc(dim);
    std::vector<char> hit(dirs.size(), 0);
    hit_at(x, hit);
    for (std::size_t k = 1; k < times.size(); ++k) {
      sample_increment(params, times[k] - times[k - 1], rng, inc);
      for (std::size_t c = 0; c < dim; ++c) x[c] += inc[c];
      hit_at(x, hit);
    }
    return static_cast<double>(std::count(hit.begin(), hit.end(), 1)) /
           static_cast<double>(dirs.size());
  });
  return mean_ci(fractions);
}

HittingBound hitting_bound(const StableParams& params, double distance, double r, double t,
                           const CalibratedBoundConstants& constants,
                           std::optional<double> window_l) {
  params.validate();
  if (!(distance > 0.0) || r < 0.0 || t < 0.0)
    throw InvalidArgument("hitting_bound: bad arguments");
  const double l = window_l.value_or(t * std::log(distance));
  if (l < 0.0 || r + l > distance / 6.0)
    throw DomainError("hitting_bound: requires r + L <= |x|/6 (r=" + std::to_string(r) +
                      ", L=" + std::to_string(l) + ", |x|=" + std::to_string(distance) + ")");
  const double d = params.dim;
  HittingBound b;
  b.window_l = l;
  b.polynomial = constants.hit_c * std::pow(distance, -(d + params.alpha)) * t * t * std::pow(r + l, d);
  b.exponential = constants.hit_c * std::exp(-constants.hit_kappa * (0.5 * l - constants.hit_c_prime * t));
  b.total = b.polynomial + b.exponential;
  return b;
}

double hitting_bound_optimised(const StableParams& params, double distance, double r, double t,
                               const CalibratedBoundConstants& constants) {
  const double l_max = distance / 6.0 - r;
  if (!(l_max > 0.0)) return 1.0;
  auto f = [&](double l) { return hitting_bound(params, distance, r, t, constants, l).total; };
  const auto [l_best, v_best] = boost::math::tools::brent_find_minima(f, 0.0, l_max, 40);
  (void)l_best;
  return std::min(1.0, std::min(v_best, f(l_max)));
}

}  // namespace dynbool
