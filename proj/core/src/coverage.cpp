#include "dynbool/coverage.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "dynbool/errors.hpp"
#include "dynbool/format.hpp"
#include "dynbool/parallel.hpp"
#include "dynbool/sausage.hpp"

namespace dynbool {

TargetSet TargetSet::segment(int dim) {
  if (dim < 1) throw InvalidArgument("segment needs dim >= 1");
  TargetSet s;
  s.kind_ = Kind::Segment;
  s.dim_ = dim;
  return s;
}

TargetSet TargetSet::cube(int dim) {
  if (dim < 1) throw InvalidArgument("cube needs dim >= 1");
  TargetSet s;
  s.kind_ = Kind::Cube;
  s.dim_ = dim;
  return s;
}

TargetSet TargetSet::cantor_dust(int levels, int dim) {
  if (levels < 0 || levels > 24) throw InvalidArgument("cantor levels must lie in [0, 24]");
  if (dim < 1) throw InvalidArgument("cantor dust needs dim >= 1");
  TargetSet s;
  s.kind_ = Kind::CantorDust;
  s.dim_ = dim;
  s.levels_ = levels;
  return s;
}

TargetSet TargetSet::parse(std::string_view text, int dim) {
  if (text == "segment") return segment(dim);
  if (text == "square" || text == "cube") return cube(dim);
  if (text == "cantor") return cantor_dust(8, dim);
  if (text.starts_with("cantor:")) return cantor_dust(static_cast<int>(parse_int(text.substr(7))), dim);
  throw InvalidArgument("unrecognised target set '" + std::string(text) + "'");
}

std::string TargetSet::to_string() const {
  switch (kind_) {
    case Kind::Segment: return "segment";
    case Kind::Cube: return "cube";
    case Kind::CantorDust: return "cantor:" + std::to_string(levels_);
  }
  return "cube";
}

double TargetSet::nominal_dimension() const {
  switch (kind_) {
    case Kind::Segment: return 1.0;
    case Kind::Cube: return static_cast<double>(dim_);
    case Kind::CantorDust: return std::log(2.0) / std::log(3.0);
  }
  return 0.0;
}

double TargetSet::half_extent(double k) const { return 0.5 * k; }

std::vector<std::pair<double, double>> TargetSet::cantor_intervals(int level) const {
  std::vector<std::pair<double, double>> iv{{0.0, 1.0}};
  for (int l = 0; l < level; ++l) {
    std::vector<std::pair<double, double>> next;
    next.reserve(iv.size() * 2);
    for (const auto& [a, b] : iv) {
      const double third = (b - a) / 3.0;
      next.emplace_back(a, a + third);
      next.emplace_back(b - third, b);
    }
    iv = std::move(next);
  }
  return iv;
}

namespace {

// Segment [a, b] on the first axis covered by eps-balls.
void cover_interval(double a, double b, double eps, int dim, std::vector<double>& out) {
  const auto n = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil((b - a) / (2.0 * eps) - 1e-12)));
  const double step = (b - a) / static_cast<double>(n);
  for (std::int64_t i = 0; i < n; ++i) {
    out.push_back(a + (static_cast<double>(i) + 0.5) * step);
    for (int k = 1; k < dim; ++k) out.push_back(0.0);
  }
}

}  // namespace

std::vector<double> TargetSet::epsilon_net(double k, double eps) const {
  if (!(eps > 0.0)) throw InvalidArgument("epsilon_net: eps must be positive");
  if (!(k > 0.0)) throw InvalidArgument("epsilon_net: k must be positive");
  std::vector<double> out;
  switch (kind_) {
    case Kind::Segment: cover_interval(-0.5 * k, 0.5 * k, eps, dim_, out); break;
    case Kind::Cube: {
      const double d = static_cast<double>(dim_);
      const auto n = std::max<std::int64_t>(
          1, static_cast<std::int64_t>(std::ceil(k * std::sqrt(d) / (2.0 * eps) - 1e-12)));
      const double side = k / static_cast<double>(n);
      std::int64_t total = 1;
      for (int a = 0; a < dim_; ++a) total *= n;
      out.reserve(static_cast<std::size_t>(total * dim_));
      for (std::int64_t idx = 0; idx < total; ++idx) {
        std::int64_t q = idx;
        for (int a = 0; a < dim_; ++a) {
          out.push_back(-0.5 * k + (static_cast<double>(q % n) + 0.5) * side);
          q /= n;
        }
      }
      break;
    }
    case Kind::CantorDust: {
      int level = 0;
      while (level < levels_ && k * std::pow(3.0, -level) > 2.0 * eps) ++level;
      for (const auto& [a, b] : cantor_intervals(level))
        cover_interval(k * (a - 0.5), k * (b - 0.5), eps, dim_, out);
      break;
    }
  }
  return out;
}

std::vector<double> epsilon_net(const TargetSet& set, double k, double eps) {
  return set.epsilon_net(k, eps);
}

std::int64_t TargetSet::box_count(double eps) const {
  if (!(eps > 0.0)) throw InvalidArgument("box_count: eps must be positive");
  const auto per_axis = static_cast<std::int64_t>(std::ceil(1.0 / eps - 1e-9));
  switch (kind_) {
    case Kind::Segment: return per_axis;
    case Kind::Cube: {
      std::int64_t c = 1;
      for (int a = 0; a < dim_; ++a) c *= per_axis;
      return c;
    }
    case Kind::CantorDust: {
      std::int64_t count = 0;
      std::int64_t last = std::numeric_limits<std::int64_t>::min();
      for (const auto& [a, b] : cantor_intervals(levels_)) {
        auto first = static_cast<std::int64_t>(std::floor(a / eps + 1e-9));
        const auto end = static_cast<std::int64_t>(std::ceil(b / eps - 1e-9));  // exclusive
        first = std::max(first, last + 1);
        if (end > first) {
          count += end - first;
          last = end - 1;
        }
      }
      return count;
    }
  }
  return 0;
}

DimensionEstimate minkowski_dimension_estimate(const TargetSet& set,
                                               std::span<const double> eps_ladder) {
  if (eps_ladder.size() < 2) throw InvalidArgument("dimension estimate needs at least two scales");
  const auto [mn, mx] = std::minmax_element(eps_ladder.begin(), eps_ladder.end());
  if (std::log10(*mx / *mn) < 2.0 - 1e-9)
    throw InvalidArgument("eps ladder must span at least two decades");
  std::vector<double> x, y;
  for (double e : eps_ladder) {
    x.push_back(std::log(1.0 / e));
    y.push_back(std::log(static_cast<double>(set.box_count(e))));
  }
  const auto fit = linear_fit(x, y);
  DimensionEstimate d{fit.slope, fit.slope_stderr, {}};
  if (fit.r2 < 0.99) d.warning = "box-count regression is not linear (r2 < 0.99)";
  return d;
}

double default_coverage_eps(const RadiusLaw& law) { return 0.1 * law.quantile(0.1); }

double predicted_coverage_time(const CoverageSetup& s) {
  const double d = s.params.dim;
  const double rate = s.lambda * capacity_constant(s.params.alpha, s.params.dim) *
                      s.law.moment(d - s.params.alpha);
  return s.set.nominal_dimension() * std::log(s.k) / rate;
}

namespace {

// Dense bucket index of the net centres over their bounding box.
class CentreIndex {
 public:
  CentreIndex(std::span<const double> centres, int dim, double eps) : dim_(dim) {
    const auto d = static_cast<std::size_t>(dim);
    n_ = centres.size() / d;
    lo_.assign(d, std::numeric_limits<double>::infinity());
    hi_.assign(d, -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t a = 0; a < d; ++a) {
        lo_[a] = std::min(lo_[a], centres[i * d + a]);
        hi_[a] = std::max(hi_[a], centres[i * d + a]);
      }
    double side = 0.0;
    for (std::size_t a = 0; a < d; ++a) side = std::max(side, hi_[a] - lo_[a]);
    cell_ = std::max(eps, side / std::pow(4.0e6, 1.0 / dim));
    cells_.resize(d);
    stride_.resize(d);
    std::size_t total = 1;
    for (std::size_t a = 0; a < d; ++a) {
      cells_[a] = static_cast<std::int64_t>(std::floor((hi_[a] - lo_[a]) / cell_)) + 1;
      stride_[a] = total;
      total *= static_cast<std::size_t>(cells_[a]);
    }
    start_.assign(total + 1, 0);
    std::vector<std::size_t> bucket(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      std::size_t b = 0;
      for (std::size_t a = 0; a < d; ++a)
        b += stride_[a] * static_cast<std::size_t>(std::floor((centres[i * d + a] - lo_[a]) / cell_));
      bucket[i] = b;
      ++start_[b + 1];
    }
    for (std::size_t b = 0; b < total; ++b) start_[b + 1] += start_[b];
    items_.resize(n_);
    coords_.resize(n_ * d);
    std::vector<std::size_t> fill(start_.begin(), start_.end() - 1);
    for (std::size_t i = 0; i < n_; ++i) {
      const std::size_t slot = fill[bucket[i]]++;
      items_[slot] = i;
      for (std::size_t a = 0; a < d; ++a) coords_[slot * d + a] = centres[i * d + a];
    }
  }

  std::size_t size() const { return n_; }
  const std::vector<double>& lo() const { return lo_; }
  const std::vector<double>& hi() const { return hi_; }

  // Calls f(centre index, squared distance) for centres within r of x.
  template <class F>
  void query(std::span<const double> x, double r, F&& f) const {
    const auto d = static_cast<std::size_t>(dim_);
    std::array<std::int64_t, 8> from{}, to{}, cur{};
    for (std::size_t a = 0; a < d; ++a) {
      if (x[a] + r < lo_[a] || x[a] - r > hi_[a]) return;
      from[a] = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor((x[a] - r - lo_[a]) / cell_)));
      to[a] = std::min<std::int64_t>(cells_[a] - 1, static_cast<std::int64_t>(std::floor((x[a] + r - lo_[a]) / cell_)));
      if (from[a] > to[a]) return;
      cur[a] = from[a];
    }
    const double r2 = r * r;
    while (true) {
      std::size_t b = 0;
      for (std::size_t a = 0; a < d; ++a) b += stride_[a] * static_cast<std::size_t>(cur[a]);
      for (std::size_t s = start_[b]; s < start_[b + 1]; ++s) {
        double s2 = 0.0;
        for (std::size_t a = 0; a < d; ++a) {
          const double diff = x[a] - coords_[s * d + a];
          s2 += diff * diff;
        }
        if (s2 <= r2) f(items_[s], s2);
      }
      std::size_t a = 0;
      for (; a < d; ++a) {
        if (++cur[a] <= to[a]) break;
        cur[a] = from[a];
      }
      if (a == d) break;
    }
  }

 private:
  int dim_;
  std::size_t n_ = 0;
  double cell_ = 1.0;
  std::vector<double> lo_, hi_;
  std::vector<std::int64_t> cells_;
  std::vector<std::size_t> stride_;
  std::vector<std::size_t> start_;
  std::vector<std::size_t> items_;
  std::vector<double> coords_;
};

}  // namespace

CoverageResult simulate_coverage(const CoverageSetup& setup, const WindowPlan& plan,
                                 const ReplicaStreams& streams) {
  setup.params.validate();
  if (setup.set.dim() != setup.params.dim) throw InvalidArgument("target set has wrong dimension");
  if (setup.params.dim > 8) throw InvalidArgument("simulate_coverage supports dim <= 8");
  if (!(setup.eps > 0.0)) throw InvalidArgument("simulate_coverage: eps must be positive");
  if (setup.law.tail(setup.eps) <= 0.0)
    throw InvalidArgument("simulate_coverage: needs P(R > eps) > 0");
  if (!(plan.halfwidth > setup.set.half_extent(setup.k)) || plan.horizon < setup.t_max)
    throw InvalidArgument("simulate_coverage: window plan does not cover kA and T_max");

  const auto centres = setup.set.epsilon_net(setup.k, setup.eps);
  const CentreIndex index(centres, setup.params.dim, setup.eps);
  const auto times = time_grid(setup.t_max, std::min(setup.step, setup.t_max));
  const auto dim = static_cast<std::size_t>(setup.params.dim);
  const std::size_t n_centres = index.size();

  struct Pair {
    double upper, lower;
  };
  const auto per = map_replicas(setup.replicas, streams.threads, [&](std::size_t rep) -> Pair {
    Rng rng = streams.stream(rep);
    const auto cloud = sample_cloud(setup.lambda, plan.halfwidth, setup.law, setup.params.dim, rng);
    std::vector<double> x = cloud.x0;
    std::vector<char> up(n_centres, 0), low(n_centres, 0);
    std::size_t left_up = n_centres, left_low = n_centres;
    double t_up = std::numeric_limits<double>::infinity(), t_low = t_up;
    auto scan = [&](double t) {
      for (std::size_t i = 0; i < cloud.size(); ++i) {
        const double r = cloud.radii[i];
        const double r_up = std::max(r - setup.eps, 0.0);
        const double r_up2 = r_up * r_up;
        index.query(std::span<const double>(x.data() + i * dim, dim), r,
                    [&](std::size_t c, double s2) {
                      if (!low[c]) {
                        low[c] = 1;
                        --left_low;
                      }
                      if (!up[c] && s2 <= r_up2 && r_up > 0.0) {
                        up[c] = 1;
                        --left_up;
                      }
                    });
      }
      if (left_low == 0 && !std::isfinite(t_low)) t_low = t;
      if (left_up == 0 && !std::isfinite(t_up)) t_up = t;
    };
    scan(0.0);
    std::vector<double> inc(dim);
    for (std::size_t k = 1; k < times.size() && left_up > 0; ++k) {
      const double dt = times[k] - times[k - 1];
      for (std::size_t i = 0; i < cloud.size(); ++i) {
        sample_increment(setup.params, dt, rng, inc);
        for (std::size_t a = 0; a < dim; ++a) x[i * dim + a] += inc[a];
      }
      scan(times[k]);
    }
    return {t_up, t_low};
  });

  CoverageResult res;
  res.k = setup.k;
  res.centres = n_centres;
  res.t_max = setup.t_max;
  std::size_t cens_up = 0, cens_low = 0, zero_up = 0, zero_low = 0;
  for (const auto& p : per) {
    const bool cu = !std::isfinite(p.upper), cl = !std::isfinite(p.lower);
    cens_up += cu;
    cens_low += cl;
    zero_up += (p.upper == 0.0);
    zero_low += (p.lower == 0.0);
    res.upper.push_back(cu ? setup.t_max : p.upper);
    res.lower.push_back(cl ? setup.t_max : p.lower);
  }
  const double n = static_cast<double>(std::max<std::size_t>(per.size(), 1));
  res.mean_upper = mean_ci(res.upper);
  res.mean_lower = mean_ci(res.lower);
  res.censor_upper = static_cast<double>(cens_up) / n;
  res.censor_lower = static_cast<double>(cens_low) / n;
  res.zero_upper = static_cast<double>(zero_up) / n;
  res.zero_lower = static_cast<double>(zero_low) / n;
  res.usable = res.censor_upper <= 0.10;
  return res;
}

namespace {

template <class Plan>
std::vector<CoverageResult> run_ladder(const CoverageSetup& base, std::span<const double> ks,
                                       const ReplicaStreams& streams, Plan&& plan_for) {
  std::vector<CoverageResult> out;
  for (double k : ks) {
    CoverageSetup s = base;
    s.k = k;
    s.t_max = std::max(3.0 * predicted_coverage_time(s), 4.0 * s.step);
    CoverageResult r;
    for (int attempt = 0; attempt < 4; ++attempt) {
      r = simulate_coverage(s, plan_for(s), streams.child("k=" + format_double(k)));
      if (r.usable) break;
      s.t_max *= 2.0;
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

std::vector<CoverageResult> coverage_ladder(const CoverageSetup& base, std::span<const double> ks,
                                            const CalibratedBoundConstants& constants,
                                            double eps_trunc, const ReplicaStreams& streams) {
  return run_ladder(base, ks, streams, [&](const CoverageSetup& s) {
    PlanOptions opts;
    opts.target_displacement = s.set.half_extent(s.k);
    return plan_window(s.params, s.lambda, s.law, s.t_max, eps_trunc, constants, opts);
  });
}

std::vector<CoverageResult> coverage_ladder(const CoverageSetup& base, std::span<const double> ks,
                                            double margin, const ReplicaStreams& streams) {
  if (!(margin > 0.0)) throw InvalidArgument("coverage_ladder: margin must be positive");
  return run_ladder(base, ks, streams, [&](const CoverageSetup& s) {
    WindowPlan plan;
    plan.horizon = s.t_max;
    plan.margin = s.set.half_extent(s.k);
    plan.halfwidth = plan.margin + margin;
    return plan;
  });
}

CoverageSlope coverage_slope(std::span<const CoverageResult> results, double target) {
  if (results.size() < 4) throw InvalidArgument("coverage_slope needs at least four ladder points");
  CoverageSlope s;
  s.target = target;
  std::vector<double> logk, mean;
  for (const auto& r : results) {
    const double lk = std::log(r.k);
    if (!(lk > 0.0)) throw InvalidArgument("coverage_slope needs k > 1");
    s.ks.push_back(r.k);
    s.ratio_upper.push_back({r.mean_upper.value / lk, r.mean_upper.half_width / lk, r.mean_upper.n});
    s.ratio_lower.push_back({r.mean_lower.value / lk, r.mean_lower.half_width / lk, r.mean_lower.n});
    logk.push_back(lk);
    mean.push_back(r.mean_upper.value);
  }
  const auto fit = linear_fit(logk, mean);
  s.slope = fit.slope;
  s.slope_stderr = fit.slope_stderr;
  s.ratio_decreasing = true;
  for (std::size_t i = 1; i < s.ratio_upper.size(); ++i)
    if (!(s.ratio_upper[i].value < s.ratio_upper[i - 1].value)) s.ratio_decreasing = false;
  return s;
}

}  // namespace dynbool
