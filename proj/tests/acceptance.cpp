// Acceptance suite: one PASS/FAIL line per criterion, numbers alongside.
//
// Exit status is 0 when the failures are exactly the ones named with
// --known-failures, 1 otherwise (an unexpected failure, or a listed one that
// now passes).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "dynbool/calibration.hpp"
#include "dynbool/coverage.hpp"
#include "dynbool/detection.hpp"
#include "dynbool/errors.hpp"
#include "dynbool/field.hpp"
#include "dynbool/format.hpp"
#include "dynbool/levy.hpp"
#include "dynbool/parallel.hpp"
#include "dynbool/percolation.hpp"
#include "dynbool/runner.hpp"
#include "dynbool/sausage.hpp"
#include "dynbool/stats.hpp"

namespace fs = std::filesystem;
using namespace dynbool;
using std::numbers::pi;

namespace {

std::string fmt(const char* f, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Suite {
  std::uint64_t seed = 7;
  unsigned threads = 1;
  fs::path constants_dir;
  fs::path scratch;
  std::map<std::string, CalibratedBoundConstants> cache;

  ReplicaStreams streams(const std::string& lab) const { return {seed, lab, threads}; }

  // Calibrated once per (alpha, d) and kept on disk between runs.
  const CalibratedBoundConstants& constants(const StableParams& p) {
    const std::string key = fmt("a%s_d%d", format_double(p.alpha).c_str(), p.dim);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    const fs::path file = constants_dir / (key + ".json");
    CalibratedBoundConstants c;
    bool loaded = false;
    if (std::ifstream in(file); in) {
      try {
        c = read_constants_json(in);
        loaded = c.matches(p);
      } catch (const SchemaError&) {
      }
    }
    if (!loaded) {
      std::cerr << "  calibrating bound constants for " << key << " ...\n";
      c = calibrate(p, CalibrationOptions{}, streams("calibrate/" + key)).constants;
      fs::create_directories(constants_dir);
      std::ofstream out(file);
      write_constants_json(out, c);
    }
    return cache[key] = c;
  }
};

std::string label(const StableParams& p) { return fmt("(%g,%d)", p.alpha, p.dim); }

// ---------------------------------------------------------------------------

Verdict ac1(Suite& s) {
  const std::size_t n = 100000;
  const double tol = 4.0 / std::sqrt(static_cast<double>(n));
  const double radii[] = {0.5, 1.0, 2.0};
  double worst = 0.0;
  std::string where;
  for (const StableParams p : {StableParams{0.8, 1}, StableParams{1.0, 2}, StableParams{1.5, 2},
                               StableParams{2.0, 3}}) {
    Rng rng = make_stream(s.seed, "ac1/" + label(p), 0);
    const double u = 1.0 / std::sqrt(static_cast<double>(p.dim));  // direction (1,..,1)/sqrt(d)
    std::vector<std::vector<double>> terms(3, std::vector<double>(n));
    std::vector<double> x(static_cast<std::size_t>(p.dim));
    for (std::size_t i = 0; i < n; ++i) {
      sample_increment(p, 1.0, rng, x);
      double proj = 0.0;
      for (double v : x) proj += u * v;
      for (int j = 0; j < 3; ++j) terms[j][i] = std::cos(radii[j] * proj);
    }
    for (int j = 0; j < 3; ++j) {
      const double emp = pairwise_sum(terms[j]) / static_cast<double>(n);
      const double err = std::abs(emp - std::exp(-std::pow(radii[j], p.alpha)));
      if (err > worst) {
        worst = err;
        where = label(p) + fmt(" |xi|=%g", radii[j]);
      }
    }
  }
  return {worst <= tol, fmt("max |E cos - exp(-|xi|^a)| = %.2e at %s (limit %.2e, N=%zu)", worst,
                            where.c_str(), tol, n)};
}

// Large-r expansion of p(1, r): sum_k a_k r^{-d-k alpha}.
double series_coefficient(const StableParams& p, int k) {
  const double a = p.alpha, d = p.dim;
  return (k % 2 ? 1.0 : -1.0) / std::tgamma(k + 1.0) * std::pow(2.0, k * a) *
         std::pow(pi, -0.5 * d - 1.0) * std::tgamma(0.5 * (d + k * a)) * std::tgamma(0.5 * k * a + 1.0) *
         std::sin(0.5 * pi * k * a);
}

double sphere_area(int d) { return 2.0 * std::pow(pi, 0.5 * d) / std::tgamma(0.5 * d); }

// Radial mass of the density: quadrature on [0, cut] plus the series tail.
double radial_mass(const StableParams& p, double cut) {
  const double area = sphere_area(p.dim);
  auto f = [&](double r) { return area * std::pow(r, p.dim - 1) * stable_density(p, 1.0, r); };
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  double mass = 0.0;
  for (double a = 0.0, b = 0.5; a < cut; a = b, b *= 2.0)
    mass += GK::integrate(f, a, std::min(b, cut), 6, 1e-11);
  if (p.alpha < 2.0) {
    // Terms can vanish exactly (sin at multiples of pi), so no early stop.
    for (int k = 1; k <= 30; ++k)
      mass += area * series_coefficient(p, k) * std::pow(cut, -k * p.alpha) / (k * p.alpha);
  }
  return mass;
}

Verdict ac2(Suite&) {
  double worst_rel = 0.0;
  std::string where;
  for (double r : {0.0, 0.5, 1.0, 2.0, 5.0}) {
    const double gauss = std::exp(-r * r / 4.0) / std::sqrt(4.0 * pi);
    const double cauchy = 1.0 / (2.0 * pi * std::pow(1.0 + r * r, 1.5));
    const double eg = std::abs(stable_density({2.0, 1}, 1.0, r) / gauss - 1.0);
    const double ec = std::abs(stable_density({1.0, 2}, 1.0, r) / cauchy - 1.0);
    if (eg > worst_rel) worst_rel = eg, where = fmt("Gaussian r=%g", r);
    if (ec > worst_rel) worst_rel = ec, where = fmt("Cauchy r=%g", r);
  }
  double worst_mass = 0.0;
  std::string masses;
  for (const StableParams p : {StableParams{2.0, 1}, StableParams{1.0, 2}, StableParams{1.5, 2}}) {
    const double m = radial_mass(p, 20.0);
    worst_mass = std::max(worst_mass, std::abs(m - 1.0));
    masses += fmt(" %s:%.9f", label(p).c_str(), m);
  }
  const bool ok = worst_rel <= 1e-6 && worst_mass <= 1e-6;
  return {ok, fmt("max rel err %.1e (%s); radial mass%s", worst_rel, where.c_str(), masses.c_str())};
}

Verdict ac3(Suite&) {
  const double c12 = capacity_constant(1.0, 2), c23 = capacity_constant(2.0, 3);
  const double e12 = std::abs(c12 - 2.0 * pi), e23 = std::abs(c23 - 4.0 * pi);
  return {e12 <= 1e-12 * 2.0 * pi && e23 <= 1e-12 * 4.0 * pi,
          fmt("Cap(1,2)-2pi = %.1e, Cap(2,3)-4pi = %.1e", c12 - 2.0 * pi, c23 - 4.0 * pi)};
}

Verdict ac4(Suite& s) {
  const double hs[] = {10.0, 25.0, 50.0};
  const auto rates =
      sausage_rate_ladder({1.0, 2}, RadiusLaw::constant(1.0), hs, 0.01, 200, s.streams("ac4"));
  const double target = 2.0 * pi;
  bool above = true;
  std::string vals;
  for (const auto& r : rates) {
    above = above && r.rate.value >= target - r.rate.half_width;
    vals += fmt(" T=%g:%.3f+-%.3f", r.horizon, r.rate.value, r.rate.half_width);
  }
  const bool decreasing = rates[0].rate.value > rates[1].rate.value && rates[1].rate.value > rates[2].rate.value;
  const double rel = std::abs(rates[2].rate.value / target - 1.0);
  return {above && decreasing && rel <= 0.15,
          fmt("rates%s; target 2pi=%.4f; >=target-CI %s, decreasing %s, T=50 off by %.1f%% (Riesz capacity %.4f)",
              vals.c_str(), target, above ? "yes" : "no", decreasing ? "yes" : "no", 100.0 * rel,
              riesz_capacity(1.0, 2))};
}

Verdict ac5(Suite& s) {
  DetectionSetup d;
  d.lambda = 0.5;
  d.params = {1.5, 2};
  d.law = RadiusLaw::constant(1.0);
  d.horizon = 10.0;
  d.step = 0.01;
  d.replicas = 20000;
  d.report_times = {1.0, 2.0, 5.0, 10.0};
  const auto& c = s.constants(d.params);
  const auto schedule = plan_window_schedule(d.params, d.lambda, d.law, d.horizon, 0.01, c);
  const auto direct = simulate_detection(d, schedule, s.streams("ac5/direct"));
  auto v = d;
  v.replicas = 2000;
  const auto vf = void_survival(v, CompactSet::origin(2), s.streams("ac5/void"));
  bool ok = true;
  std::string rows;
  for (std::size_t i = 0; i < direct.times.size(); ++i) {
    const bool overlap = direct.band(i).overlaps(vf.band(i));
    ok = ok && overlap;
    rows += fmt(" t=%g direct %.3g [%.3g,%.3g] void %.3g [%.3g,%.3g]%s;", direct.times[i], direct.survival[i],
                direct.lo[i], direct.hi[i], vf.survival[i], vf.lo[i], vf.hi[i], overlap ? "" : " NO OVERLAP");
  }
  return {ok, "W_max=" + format_double(schedule.back().halfwidth) + rows};
}

Verdict ac6(Suite& s) {
  bool ok = true;
  std::string rows;
  struct Case {
    const char* name;
    RadiusLaw law;
  };
  for (const auto& [name, law] : {Case{"R=1", RadiusLaw::constant(1.0)},
                                  Case{"R~U{1,2}", RadiusLaw::discrete({1.0, 2.0}, {0.5, 0.5})}}) {
    DetectionSetup d;
    d.lambda = 1.0;
    d.params = {1.0, 2};
    d.law = law;
    d.horizon = 20.0;
    d.step = 0.01;
    d.replicas = 400;
    for (int t = 0; t <= 20; ++t) d.report_times.push_back(t);
    const auto curve = void_survival(d, CompactSet::origin(2), s.streams(std::string("ac6/") + name));
    const auto fit = decay_rate(curve);
    const double m = law.moment(1.0);
    const double target = d.lambda * capacity_constant(1.0, 2) * m;
    const double rel = std::abs(fit.rate / target - 1.0);
    ok = ok && rel <= 0.15;
    rows += fmt(" %s: rate %.3f on [%g,%g] vs %.3f (%.1f%% off; Riesz reference %.3f);", name, fit.rate,
                fit.t_lo, fit.t_hi, target, 100.0 * rel, d.lambda * riesz_capacity(1.0, 2) * m);
  }
  return {ok, "void formula, alpha=1 d=2 lambda=1:" + rows};
}

DetectionSetup drift_setup(const TargetMotion& g) {
  DetectionSetup d;
  d.lambda = 0.5;
  d.params = {1.5, 2};
  d.law = RadiusLaw::constant(1.0);
  d.target = g;
  d.horizon = 10.0;
  d.step = 0.01;
  d.replicas = 400;
  for (int t = 0; t <= 10; ++t) d.report_times.push_back(t);
  return d;
}

Verdict ac7(Suite& s) {
  std::vector<RateFit> fits;
  for (const char* g : {"static", "linear:2", "linear:8"}) {
    const auto d = drift_setup(TargetMotion::parse(g, 2));
    fits.push_back(decay_rate(void_survival(d, CompactSet::origin(2), s.streams(std::string("ac7/") + g))));
  }
  const double joint = kZ95 * std::hypot(fits[1].stderr_, fits[0].stderr_);
  const bool order = fits[2].rate > fits[1].rate && fits[1].rate >= fits[0].rate - joint;

  auto vd = drift_setup(TargetMotion::linear(2.0, {1.0, 0.0}));
  auto vs = drift_setup(TargetMotion::stationary());
  vd.report_times = vs.report_times = {5.0};
  vd.replicas = vs.replicas = 1000;
  const auto drift_vol = mean_void_volume(vd, CompactSet::origin(2), s.streams("ac7/vol-drift"))[0];
  const auto static_vol = mean_void_volume(vs, CompactSet::origin(2), s.streams("ac7/vol-static"))[0];
  const bool vol = drift_vol.value >= static_vol.value - std::hypot(drift_vol.half_width, static_vol.half_width);
  return {order && vol,
          fmt("rates static %.3f, beta=2 %.3f, beta=8 %.3f (joint CI %.3f); |sausage| at t=5: drift %.2f+-%.2f, "
              "static %.2f+-%.2f",
              fits[0].rate, fits[1].rate, fits[2].rate, joint, drift_vol.value, drift_vol.half_width,
              static_vol.value, static_vol.half_width)};
}

Verdict ac8(Suite& s) {
  DetectionSetup d;
  d.lambda = 0.1;
  d.params = {1.5, 2};
  d.law = RadiusLaw::constant(1.0);
  d.target = TargetMotion::levy();
  d.horizon = 4.0;
  d.step = 0.01;
  d.replicas = 5000;
  d.report_times = {0.0, 1.0, 2.0, 3.0, 4.0};
  const auto& c = s.constants(d.params);
  PlanOptions o;
  o.target_displacement = d.target.displacement_allowance(d.params, d.horizon, c.escape_c);
  const auto schedule = plan_window_schedule(d.params, d.lambda, d.law, d.horizon, 0.01, c, o);
  const auto curve = simulate_detection(d, schedule, s.streams("ac8"));
  const std::vector<std::pair<double, double>> pairs{{1, 1}, {2, 1}, {2, 2}};
  bool ok = true;
  std::string rows;
  for (const auto& r : supermultiplicativity_check(curve, pairs, 3.0)) {
    ok = ok && r.holds;
    rows += fmt(" S(%g+%g)=%.4f vs %.4f (sigma %.4f)%s;", r.t, r.t_prime, r.joint, r.product, r.sigma,
                r.holds ? "" : " VIOLATED");
  }
  return {ok, fmt("Levy target, lambda=0.1, n=%zu:", d.replicas) + rows};
}

Verdict ac9(Suite& s) {
  const double cs[] = {0.0, 0.3, 0.7, 1.0};
  const double rs[] = {0.5, 1.0, 2.0};
  std::size_t checks = 0, fail_shrink = 0;
  std::map<double, std::size_t> fail_scale, fail_reverse;
  double worst = -1e300;
  for (std::size_t set = 0; set < 200; ++set) {
    Rng rng = make_stream(s.seed, "ac9", set);
    const int dim = set < 150 ? 2 : 3;
    const double cell = dim == 2 ? 0.05 : 0.0625;
    std::uniform_int_distribution<int> count(1, dim == 2 ? 30 : 12);
    std::uniform_real_distribution<double> coord(-4.0, 4.0);
    PathSkeleton a;
    a.params = {1.5, dim};
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
      a.times.push_back(i);
      for (int k = 0; k < dim; ++k) a.coords.push_back(coord(rng));
    }
    std::map<double, VolumeEstimate> base;
    for (double r : rs) base[r] = sausage_volume(a, r, cell);
    for (double c : cs) {
      PathSkeleton ca = a;
      for (double& v : ca.coords) v *= c;
      for (double r : rs) {
        const auto v = sausage_volume(ca, r, cell);
        const double slack = v.value - base[r].value - 2.0 * (v.half_width + base[r].half_width);
        worst = std::max(worst, slack);
        fail_shrink += slack > 0.0;
        ++checks;
      }
    }
    for (double r : rs) {
      const double scale = std::pow(r, dim);
      const double tol = base[r].half_width + scale * base[1.0].half_width;
      fail_scale[r] += base[r].value - scale * base[1.0].value > tol;
      // For r < 1 the scaling argument runs the other way.
      fail_reverse[r] += scale * base[1.0].value - base[r].value > tol;
      ++checks;
    }
  }
  std::size_t scale_total = 0;
  for (const auto& [r, k] : fail_scale) scale_total += k;
  return {fail_shrink == 0 && scale_total == 0,
          fmt("%zu checks on 200 sets (150 in d=2, 50 in d=3): shrink violations %zu (worst slack %.3g); "
              "|B_r(A)| <= r^d|B_1(A)| violations r=0.5:%zu r=1:%zu r=2:%zu; reverse inequality violations "
              "r=0.5:%zu",
              checks, fail_shrink, worst, fail_scale[0.5], fail_scale[1.0], fail_scale[2.0], fail_reverse[0.5])};
}

Verdict ac10(Suite& s) {
  CoverageSetup c;
  c.lambda = 1.0;
  c.params = {1.0, 2};
  c.law = RadiusLaw::constant(1.0);
  c.set = TargetSet::cube(2);
  c.eps = default_coverage_eps(c.law);
  c.step = 0.05;
  c.replicas = 100;
  const double ks[] = {4.0, 8.0, 16.0, 32.0};
  const double margin = 60.0;
  const auto results = coverage_ladder(c, ks, margin, s.streams("ac10"));
  const double target = 2.0 / (c.lambda * capacity_constant(1.0, 2));
  const auto slope = coverage_slope(results, target);
  const double last = slope.ratio_upper.back().value;
  const double rel = std::abs(last / target - 1.0);
  std::string rows;
  for (std::size_t i = 0; i < results.size(); ++i)
    rows += fmt(" k=%g:%.3f+-%.3f", slope.ks[i], slope.ratio_upper[i].value, slope.ratio_upper[i].half_width);
  return {slope.ratio_decreasing && rel <= 0.40,
          fmt("upper-proxy ratio E T/log k%s; decreasing %s; k=32 vs 1/pi=%.4f off by %.1f%% (Riesz reference %.3f; "
              "window margin %g)",
              rows.c_str(), slope.ratio_decreasing ? "yes" : "no", target, 100.0 * rel,
              2.0 / riesz_capacity(1.0, 2), margin)};
}

Verdict ac11(Suite& s) {
  // Components on snapshots of moving clouds.
  std::size_t snapshots = 0, mismatches = 0;
  for (std::size_t rep = 0; rep < 20; ++rep) {
    Rng rng = make_stream(s.seed, "ac11/snap", rep);
    const int dim = rep < 15 ? 2 : 3;
    const auto cloud = sample_cloud(dim == 2 ? 1.0 : 0.3, 8.0, RadiusLaw::uniform(0.5, 1.5), dim, rng);
    const std::vector<double> times{0.0, 0.5, 1.0, 1.5, 2.0};
    const auto paths = evolve(cloud, {1.5, dim}, times, rng);
    for (std::size_t j = 0; j < times.size(); ++j) {
      std::vector<double> pos;
      for (const auto& p : paths) pos.insert(pos.end(), p.position(j).begin(), p.position(j).end());
      mismatches += !(components(pos, cloud.radii, dim) == components_brute_force(pos, cloud.radii, dim));
      ++snapshots;
    }
  }

  const std::vector<double> lambdas{0.5, 1.0, 1.5, 2.0, 3.0};
  const auto theta =
      giant_fraction_ladder(lambdas, RadiusLaw::constant(1.0), 2, 10.0, 50, s.streams("ac11/theta"));
  bool monotone = true;
  std::string th;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    if (i > 0) monotone = monotone && theta[i].value >= theta[i - 1].value;
    th += fmt("%s%.3f", i ? "," : "", theta[i].value);
  }

  PercolationSetup p;
  p.lambda = 2.0;
  p.params = {1.5, 2};
  p.law = RadiusLaw::constant(1.0);
  p.horizon = 1;
  p.step = 0.05;
  p.sub_integer = true;
  p.replicas = 200000;
  p.window = 6.0;
  p.lambda_c = estimate_lambda_c(p.law, 2, 10.0, 0.01, 100, s.streams("ac11/lambda-c"));
  const auto res = simulate_percolation_time(p, s.streams("ac11/perc"));
  bool dominated = true;
  for (std::size_t i = 0; i < res.first_det.size(); ++i) dominated = dominated && res.first_perc[i] >= res.first_det[i];
  for (std::size_t i = 0; i < res.percolation.times.size(); ++i)
    dominated = dominated && res.percolation.survival[i] >= res.detection.survival[i];
  // Early window where the tail is observable (>= 25 survivors).
  double t_hi = 0.0;
  for (std::size_t i = 0; i < res.percolation.times.size(); ++i)
    if (res.percolation.survival[i] * static_cast<double>(p.replicas) >= 25.0) t_hi = res.percolation.times[i];
  const auto fit = decay_rate(res.percolation, std::pair{0.0, t_hi});
  const bool tail = fit.points >= 3 && fit.rate - 2.0 * fit.stderr_ > 0.0 && fit.r2 >= 0.9;

  return {mismatches == 0 && monotone && dominated && tail,
          fmt("components == brute force on %zu/%zu snapshots; theta(%s) = %s monotone %s; T_perc >= T_det on all "
              "%zu replicas %s; lambda_c in [%.3f,%.3f]; tail rate %.2f+-%.2f on [0,%g] (%zu pts, r2 %.3f), S(0)=%.2e",
              snapshots - mismatches, snapshots, "0.5..3", th.c_str(), monotone ? "yes" : "no", p.replicas,
              dominated ? "yes" : "no", p.lambda_c->lo, p.lambda_c->hi, fit.rate, fit.stderr_, t_hi, fit.points,
              fit.r2, res.percolation.survival[0])};
}

Verdict ac12(Suite& s) {
  const std::size_t n = 30;
  const auto big = good_box_fraction(1.0, 4, 0.2, 2000.0, 100, {1.5, 2}, n, s.streams("ac12"));
  const std::size_t good0 = static_cast<std::size_t>(std::llround(big.per_time[0] * n));
  const bool big_ok = big.good_fraction.value >= 0.9 && wilson_interval(good0, n).contains(big.predicted_single);
  // At V = 2000 the prediction is ~1; a small box makes the same check bite.
  const std::size_t m = 1500;
  const auto small = good_box_fraction(1.0, 4, 0.2, 80.0, 2, {1.5, 2}, m, s.streams("ac12/small"));
  const auto band = wilson_interval(static_cast<std::size_t>(std::llround(small.per_time[0] * m)), m);
  const bool small_ok = band.contains(small.predicted_single);
  return {big_ok && small_ok,
          fmt("V=2000: good fraction %.4f over %zu replicas x 100 times, single-time %.3f vs Poisson tail %.6f; "
              "V=80: single-time %.4f [%.4f,%.4f] vs %.4f",
              big.good_fraction.value, n, big.per_time[0], big.predicted_single, small.per_time[0], band.lo, band.hi,
              small.predicted_single)};
}

std::map<std::string, std::string> slurp_csvs(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() != ".csv") continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    out[e.path().filename().string()] = ss.str();
  }
  return out;
}

Verdict ac13(Suite& s) {
  using Overrides = std::map<std::string, std::string>;
  const std::vector<std::pair<std::string, Overrides>> runs{
      {"sample-path", {{"T", "2"}}},
      {"sausage", {{"T", "2,4"}, {"n", "16"}, {"radius", "uniform:1:2"}}},
      {"detect", {{"method", "both"}, {"T", "2"}, {"n", "300"}, {"report", "0,1,2"}, {"window", "10"}}},
      {"cover", {{"k", "2,3,4,5"}, {"n", "8"}, {"window", "10"}, {"h", "0.1"}}},
      {"percolate", {{"T", "2"}, {"n", "100"}, {"window", "6"}, {"lambda_c_n", "30"}}},
      {"goodbox", {{"V", "80"}, {"t", "5"}, {"n", "20"}}},
      {"lambda-c", {{"n", "40"}, {"window", "6"}}},
  };
  std::size_t files = 0;
  std::vector<std::string> diffs;
  for (const auto& [lab, base] : runs) {
    std::map<std::string, std::string> seen[2];
    int k = 0;
    for (const char* t : {"1", "8"}) {
      auto o = base;
      o["threads"] = t;
      o["seed"] = std::to_string(s.seed);
      const auto dir = s.scratch / "ac13" / (lab + "-t" + t);
      fs::remove_all(dir);
      std::ostringstream log;
      const auto outcome = run(lab, std::nullopt, o, dir, log);
      if (outcome.exit_code != 0) return {false, lab + " failed: " + outcome.message};
      seen[k++] = slurp_csvs(dir);
    }
    if (seen[0].empty()) diffs.push_back(lab + " (no CSV)");
    for (const auto& [name, bytes] : seen[0]) {
      ++files;
      auto it = seen[1].find(name);
      if (it == seen[1].end() || it->second != bytes) diffs.push_back(lab + "/" + name);
    }
  }
  std::string bad;
  for (const auto& d : diffs) bad += " " + d;
  return {diffs.empty(), fmt("%zu CSV files across %zu labs compared at threads 1 vs 8; differing:%s", files,
                             runs.size(), diffs.empty() ? " none" : bad.c_str())};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks for the dynamic Boolean model toolkit"};
  app.set_help_flag("--help", "Print this help message and exit");
  Suite suite;
  suite.threads = std::max(1u, std::thread::hardware_concurrency());
  std::string constants = "acceptance_constants", scratch = "acceptance_runs", only, known;
  app.add_option("--constants", constants, "directory caching calibrated bound constants");
  app.add_option("--scratch", scratch, "directory for runner outputs");
  app.add_option("--seed", suite.seed, "master seed");
  app.add_option("--threads", suite.threads, "worker threads (results do not depend on it)");
  app.add_option("--only", only, "comma-separated subset, e.g. AC1,AC5");
  app.add_option("--known-failures", known, "comma-separated criteria expected to fail");
  CLI11_PARSE(app, argc, argv);
  suite.constants_dir = constants;
  suite.scratch = scratch;

  auto split = [](const std::string& text) {
    std::set<std::string> out;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');)
      if (!item.empty()) out.insert(item);
    return out;
  };
  const auto selected = split(only);
  const auto expected = split(known);

  const std::vector<std::pair<std::string, std::function<Verdict(Suite&)>>> checks{
      {"AC1", ac1}, {"AC2", ac2},   {"AC3", ac3},   {"AC4", ac4},   {"AC5", ac5},
      {"AC6", ac6}, {"AC7", ac7},   {"AC8", ac8},   {"AC9", ac9},   {"AC10", ac10},
      {"AC11", ac11}, {"AC12", ac12}, {"AC13", ac13},
  };
  int unexpected = 0;
  for (const auto& [name, fn] : checks) {
    if (!selected.empty() && !selected.count(name)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = fn(suite);
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool listed = expected.count(name) > 0;
    std::string tag = v.pass ? "PASS" : "FAIL";
    if (!v.pass && listed) tag += " (known)";
    if (v.pass && listed) tag += " (listed as known failure)";
    if (v.pass == listed) ++unexpected;
    std::cout << name << ' ' << tag << "  " << v.detail << fmt("  [%.1fs]", secs) << std::endl;
  }
  return unexpected == 0 ? 0 : 1;
}
