#include "dynbool/detection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "dynbool/errors.hpp"
#include "dynbool/parallel.hpp"

namespace dynbool {

const char* to_string(SurvivalMethod m) {
  return m == SurvivalMethod::Direct ? "direct" : "void-formula";
}

std::size_t SurvivalCurve::index_of(double t) const {
  for (std::size_t i = 0; i < times.size(); ++i)
    if (std::abs(times[i] - t) <= 1e-9 * std::max(1.0, std::abs(t))) return i;
  throw InvalidArgument("survival curve has no point at t=" + std::to_string(t));
}

ReportGrid make_report_grid(double horizon, double step, std::span<const double> report_times) {
  ReportGrid g;
  g.times = time_grid(horizon, step);
  if (report_times.empty()) {
    g.report_index.resize(g.times.size());
    for (std::size_t i = 0; i < g.times.size(); ++i) g.report_index[i] = i;
    return g;
  }
  for (double t : report_times) {
    if (t < 0.0 || t > horizon * (1.0 + 1e-12))
      throw InvalidArgument("report time " + std::to_string(t) + " outside [0, horizon]");
    const auto i = nearest_index(g.times, t);
    if (std::abs(g.times[i] - t) > 1e-9 * std::max(1.0, t)) {
      g.times.insert(std::lower_bound(g.times.begin(), g.times.end(), t), t);
    }
  }
  for (double t : report_times) g.report_index.push_back(nearest_index(g.times, t));
  return g;
}

SurvivalCurve survival_from_first_hits(std::span<const std::size_t> first_hit,
                                       std::span<const double> grid_times,
                                       std::span<const std::size_t> report_index) {
  SurvivalCurve c;
  c.method = SurvivalMethod::Direct;
  c.n = first_hit.size();
  const double n = static_cast<double>(c.n);
  for (auto idx : report_index) {
    const auto alive = static_cast<std::size_t>(
        std::count_if(first_hit.begin(), first_hit.end(), [idx](auto h) { return h > idx; }));
    const double s = c.n ? static_cast<double>(alive) / n : 1.0;
    const auto band = wilson_interval(alive, c.n);
    c.times.push_back(grid_times[idx]);
    c.survival.push_back(s);
    c.log_survival.push_back(s > 0.0 ? std::log(s) : -std::numeric_limits<double>::infinity());
    c.lo.push_back(band.lo);
    c.hi.push_back(band.hi);
    c.stderr_.push_back(c.n ? std::sqrt(s * (1.0 - s) / n) : 0.0);
  }
  return c;
}

std::vector<std::size_t> detection_first_hits(const DetectionSetup& setup,
                                              std::span<const WindowPlan> schedule,
                                              const ReplicaStreams& streams) {
  setup.params.validate();
  setup.law.validate(setup.params.dim);
  if (schedule.empty() || !(schedule.back().horizon >= setup.horizon))
    throw InvalidArgument("simulate_detection: window plan does not cover the horizon " +
                          std::to_string(setup.horizon));
  for (std::size_t j = 0; j < schedule.size(); ++j) {
    if (!(schedule[j].halfwidth > 0.0))
      throw InvalidArgument("simulate_detection: window plan has no halfwidth");
    if (j > 0 && (schedule[j].horizon <= schedule[j - 1].horizon ||
                  schedule[j].halfwidth < schedule[j - 1].halfwidth))
      throw InvalidArgument("simulate_detection: window schedule must grow with the horizon");
  }
  const auto grid = make_report_grid(setup.horizon, setup.step, setup.report_times);
  const auto& times = grid.times;
  const int d = setup.params.dim;
  const auto dim = static_cast<std::size_t>(d);

  return map_replicas(setup.replicas, streams.threads, [&](std::size_t rep) -> std::size_t {
    Rng rng = streams.stream(rep);
    const auto cloud = sample_cloud(setup.lambda, schedule.front().halfwidth, setup.law, d, rng);
    const auto g = setup.target.realise(times, setup.params, rng);
    std::vector<double> x = cloud.x0;
    std::vector<double> r2(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) r2[i] = cloud.radii[i] * cloud.radii[i];
    auto near = [&](const double* p, double rr, std::size_t k) {
      double s = 0.0;
      for (std::size_t a = 0; a < dim; ++a) {
        const double diff = p[a] - g[k * dim + a];
        s += diff * diff;
      }
      return s <= rr;
    };
    auto detected = [&](std::size_t k) {
      for (std::size_t i = 0; i < r2.size(); ++i)
        if (near(&x[i * dim], r2[i], k)) return true;
      return false;
    };
    std::vector<double> inc(dim);
    std::size_t stage = 0;
    // Adds the Poisson points between windows stage-1 and stage, simulated on
    // grid indices 0..upto; returns their earliest detection index.
    auto add_shell = [&](std::size_t upto) {
      const double inner = schedule[stage - 1].halfwidth, outer = schedule[stage].halfwidth;
      std::size_t best = times.size();
      if (outer <= inner || setup.lambda == 0.0) return best;
      std::poisson_distribution<std::size_t> count(
          setup.lambda * (std::pow(2.0 * outer, d) - std::pow(2.0 * inner, d)));
      const std::size_t n = count(rng);
      std::uniform_real_distribution<double> pos(-outer, outer);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      std::vector<double> p(dim);
      for (std::size_t i = 0; i < n; ++i) {
        bool inside = true;
        do {
          inside = true;
          for (auto& c : p) {
            c = pos(rng);
            inside = inside && std::abs(c) <= inner;
          }
        } while (inside);
        const double r = setup.law.tail_inverse(1.0 - unit(rng));
        for (std::size_t k = 0; k <= upto; ++k) {
          if (k > 0) {
            sample_increment(setup.params, times[k] - times[k - 1], rng, inc);
            for (std::size_t a = 0; a < dim; ++a) p[a] += inc[a];
          }
          if (k < best && near(p.data(), r * r, k)) best = k;
        }
        x.insert(x.end(), p.begin(), p.end());
        r2.push_back(r * r);
      }
      return best;
    };
    if (detected(0)) return 0;
    for (std::size_t k = 1; k < times.size(); ++k) {
      while (times[k] > schedule[stage].horizon * (1.0 + 1e-12) && stage + 1 < schedule.size()) {
        ++stage;
        const std::size_t early = add_shell(k - 1);
        if (early < times.size()) return early;
      }
      const double dt = times[k] - times[k - 1];
      for (std::size_t i = 0; i < r2.size(); ++i) {
        sample_increment(setup.params, dt, rng, inc);
        for (std::size_t a = 0; a < dim; ++a) x[i * dim + a] += inc[a];
      }
      if (detected(k)) return k;
    }
    return times.size();
  });
}

SurvivalCurve simulate_detection(const DetectionSetup& setup, std::span<const WindowPlan> schedule,
                                 const ReplicaStreams& streams) {
  const auto first = detection_first_hits(setup, schedule, streams);
  const auto grid = make_report_grid(setup.horizon, setup.step, setup.report_times);
  return survival_from_first_hits(first, grid.times, grid.report_index);
}

SurvivalCurve simulate_detection(const DetectionSetup& setup, const WindowPlan& plan,
                                 const ReplicaStreams& streams) {
  return simulate_detection(setup, std::span<const WindowPlan>(&plan, 1), streams);
}

namespace {

double void_cell(const RadiusLaw& law, const CompactSet& k) {
  double scale = law.min_radius();
  if (k.kind() == CompactSet::Kind::Ball) scale += k.radius();
  if (k.kind() == CompactSet::Kind::Box) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < k.lo().size(); ++i) m = std::min(m, k.hi()[i] - k.lo()[i]);
    scale = std::max(scale, m);
  }
  return scale > 0.0 ? default_cell(scale) : 0.0;
}

// Volumes of B_R(g - X) + K at the report indices for one node path.
std::vector<double> one_void_profile(const DetectionSetup& setup, const CompactSet& k,
                                     const ReportGrid& grid, std::span<const double> g, double cell,
                                     Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double radius = setup.law.tail_inverse(1.0 - unit(rng));
  const std::vector<double> origin(static_cast<std::size_t>(setup.params.dim), 0.0);
  auto path = sample_path(setup.params, origin, grid.times, rng);
  for (std::size_t i = 0; i < path.coords.size(); ++i) path.coords[i] = g[i] - path.coords[i];
  if (cell == 0.0) return std::vector<double>(grid.report_index.size(), 0.0);
  jitter_to_grid(path, cell, rng);
  return sausage_volume_profile(path, radius, k, cell, grid.report_index);
}

}  // namespace

std::vector<Estimate> mean_void_volume(const DetectionSetup& setup, const CompactSet& k,
                                       const ReplicaStreams& streams) {
  setup.params.validate();
  const auto grid = make_report_grid(setup.horizon, setup.step, setup.report_times);
  const double cell = void_cell(setup.law, k);
  const auto vols = map_replicas(setup.replicas, streams.threads, [&](std::size_t rep) {
    Rng rng = streams.stream(rep);
    const auto g = setup.target.realise(grid.times, setup.params, rng);
    return one_void_profile(setup, k, grid, g, cell, rng);
  });
  std::vector<Estimate> out;
  for (std::size_t j = 0; j < grid.report_index.size(); ++j) {
    std::vector<double> col(vols.size());
    for (std::size_t i = 0; i < vols.size(); ++i) col[i] = vols[i][j];
    out.push_back(mean_ci(col));
  }
  return out;
}

SurvivalCurve void_survival(const DetectionSetup& setup, const CompactSet& k,
                            const ReplicaStreams& streams, std::size_t inner) {
  setup.params.validate();
  if (k.dim() != setup.params.dim) throw InvalidArgument("void_survival: K has wrong dimension");
  const auto grid = make_report_grid(setup.horizon, setup.step, setup.report_times);
  SurvivalCurve c;
  c.method = SurvivalMethod::VoidFormula;
  c.n = setup.replicas;
  for (auto idx : grid.report_index) c.times.push_back(grid.times[idx]);
  const std::size_t m = c.times.size();
  const double lambda = setup.lambda;

  if (!setup.target.is_random()) {
    const auto vols = mean_void_volume(setup, k, streams);
    for (std::size_t j = 0; j < m; ++j) {
      const double log_s = -lambda * vols[j].value;
      const double se = lambda * vols[j].stderr_();
      const double s = std::exp(log_s);
      c.survival.push_back(s);
      c.log_survival.push_back(log_s);
      c.stderr_.push_back(s * se);
      c.lo.push_back(std::exp(log_s - kZ95 * se));
      c.hi.push_back(std::min(1.0, std::exp(log_s + kZ95 * se)));
    }
    return c;
  }

  if (inner == 0) throw InvalidArgument("void_survival: inner sample count must be positive");
  const double cell = void_cell(setup.law, k);
  const auto logs = map_replicas(setup.replicas, streams.threads, [&](std::size_t rep) {
    Rng rng = streams.stream(rep);
    const auto g = setup.target.realise(grid.times, setup.params, rng);
    std::vector<double> acc(m, 0.0);
    for (std::size_t j = 0; j < inner; ++j) {
      const auto v = one_void_profile(setup, k, grid, g, cell, rng);
      for (std::size_t q = 0; q < m; ++q) acc[q] += v[q];
    }
    for (auto& a : acc) a = -lambda * a / static_cast<double>(inner);
    return acc;
  });
  for (std::size_t q = 0; q < m; ++q) {
    double top = -std::numeric_limits<double>::infinity();
    for (const auto& l : logs) top = std::max(top, l[q]);
    std::vector<double> scaled(logs.size());
    for (std::size_t i = 0; i < logs.size(); ++i) scaled[i] = std::exp(logs[i][q] - top);
    const auto e = mean_ci(scaled);
    const double s = std::exp(top) * e.value;
    c.survival.push_back(s);
    c.log_survival.push_back(top + std::log(e.value));
    c.stderr_.push_back(std::exp(top) * e.stderr_());
    c.lo.push_back(std::max(0.0, std::exp(top) * e.lo()));
    c.hi.push_back(std::min(1.0, std::exp(top) * e.hi()));
  }
  return c;
}

RateFit decay_rate(const SurvivalCurve& curve, std::optional<std::pair<double, double>> window) {
  RateFit fit;
  if (curve.times.size() < 2) throw NumericFailure("decay_rate: curve has fewer than two points");
  if (window) {
    fit.t_lo = window->first;
    fit.t_hi = window->second;
  } else {
    fit.t_hi = curve.times.back();
    fit.t_lo = curve.times.front() + 0.6 * (curve.times.back() - curve.times.front());
  }
  const double floor = curve.method == SurvivalMethod::Direct && !window
                           ? 25.0 / static_cast<double>(std::max<std::size_t>(curve.n, 1))
                           : 0.0;
  auto collect = [&](double lo, double hi, std::vector<double>& x, std::vector<double>& y) {
    bool dropped = false;
    for (std::size_t i = 0; i < curve.times.size(); ++i) {
      const double t = curve.times[i];
      if (t < lo - 1e-12 || t > hi + 1e-12) continue;
      if (!(curve.survival[i] > floor) && !(curve.method == SurvivalMethod::VoidFormula &&
                                             std::isfinite(curve.log_survival[i]))) {
        dropped = true;
        continue;
      }
      x.push_back(t);
      y.push_back(-curve.log_survival[i]);
    }
    return dropped;
  };
  std::vector<double> x, y;
  if (collect(fit.t_lo, fit.t_hi, x, y)) fit.warning = "window shrunk: starved or zero-survival points dropped";
  if (x.size() < 2) {
    // Fall back to every usable point of the curve.
    x.clear();
    y.clear();
    collect(curve.times.front(), curve.times.back(), x, y);
    fit.warning = "window replaced by all usable points";
  }
  if (x.size() < 2) throw NumericFailure("decay_rate: fewer than two usable survival points");
  const auto lf = linear_fit(x, y);
  fit.rate = lf.slope;
  fit.stderr_ = lf.slope_stderr;
  fit.t_lo = x.front();
  fit.t_hi = x.back();
  fit.points = x.size();
  fit.r2 = lf.r2;
  return fit;
}

std::vector<SupermultiplicativityRow> supermultiplicativity_check(
    const SurvivalCurve& curve, std::span<const std::pair<double, double>> pairs, double sigmas) {
  std::vector<SupermultiplicativityRow> rows;
  for (const auto& [t, tp] : pairs) {
    const auto i = curve.index_of(t), j = curve.index_of(tp), ij = curve.index_of(t + tp);
    SupermultiplicativityRow r;
    r.t = t;
    r.t_prime = tp;
    r.joint = curve.survival[ij];
    r.product = curve.survival[i] * curve.survival[j];
    const double a = curve.stderr_[ij];
    const double b = curve.survival[j] * curve.stderr_[i];
    const double c = curve.survival[i] * curve.stderr_[j];
    r.sigma = std::sqrt(a * a + b * b + c * c);
    r.holds = r.joint >= r.product * (1.0 - 1e-12) - sigmas * r.sigma;
    rows.push_back(r);
  }
  return rows;
}

HalvingCheck detection_halving(const DetectionSetup& setup, std::span<const WindowPlan> schedule,
                               const ReplicaStreams& streams, double at_time) {
  auto run = [&](double h, const ReplicaStreams& s) {
    DetectionSetup local = setup;
    local.step = h;
    local.report_times = {at_time};
    const auto c = simulate_detection(local, schedule, s);
    return Estimate{c.survival[0], c.ci(0), c.n};
  };
  return make_halving_check(run(setup.step, streams.child("h")),
                            run(setup.step / 2, streams.child("h/2")));
}

}  // namespace dynbool
