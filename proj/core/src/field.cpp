#include "dynbool/field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>

#include <boost/math/special_functions/gamma.hpp>

#include "dynbool/errors.hpp"
#include "dynbool/format.hpp"

namespace dynbool {

namespace {

std::vector<double> parse_list(std::string_view s) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto comma = s.find(',', pos);
    const auto token = s.substr(pos, comma == std::string_view::npos ? s.npos : comma - pos);
    out.push_back(parse_double(token));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto i = s.find(sep, pos);
    out.push_back(s.substr(pos, i == std::string_view::npos ? s.npos : i - pos));
    if (i == std::string_view::npos) break;
    pos = i + 1;
  }
  return out;
}

double sphere_area(int dim) {
  return 2.0 * std::pow(std::numbers::pi, 0.5 * dim) / boost::math::tgamma(0.5 * dim);
}

}  // namespace

RadiusLaw RadiusLaw::constant(double r) {
  if (!(r >= 0.0)) throw InvalidArgument("constant radius must be >= 0");
  RadiusLaw l;
  l.kind_ = Kind::Constant;
  l.values_ = {r};
  return l;
}

RadiusLaw RadiusLaw::uniform(double a, double b) {
  if (!(a >= 0.0 && b > a)) throw InvalidArgument("uniform radius law needs 0 <= a < b");
  RadiusLaw l;
  l.kind_ = Kind::Uniform;
  l.values_ = {a, b};
  return l;
}

RadiusLaw RadiusLaw::pareto(double scale, double exponent) {
  if (!(scale > 0.0 && exponent > 0.0))
    throw InvalidArgument("pareto radius law needs positive scale and exponent");
  RadiusLaw l;
  l.kind_ = Kind::Pareto;
  l.values_ = {scale, exponent};
  return l;
}

RadiusLaw RadiusLaw::discrete(std::vector<double> values, std::vector<double> probabilities) {
  if (values.empty() || values.size() != probabilities.size())
    throw InvalidArgument("discrete radius law needs matching values and probabilities");
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] >= 0.0) || !(probabilities[i] >= 0.0))
      throw InvalidArgument("discrete radius law entries must be nonnegative");
    total += probabilities[i];
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument("discrete probabilities must sum to 1");
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
  RadiusLaw l;
  l.kind_ = Kind::Discrete;
  for (auto i : order) {
    l.values_.push_back(values[i]);
    l.probs_.push_back(probabilities[i]);
  }
  return l;
}

RadiusLaw RadiusLaw::parse(std::string_view text) {
  const auto parts = split(text, ':');
  const auto kind = parts.front();
  try {
    if ((kind == "const" || kind == "constant") && parts.size() == 2)
      return constant(parse_double(parts[1]));
    if (kind == "uniform" && parts.size() == 3)
      return uniform(parse_double(parts[1]), parse_double(parts[2]));
    if (kind == "pareto" && parts.size() == 3)
      return pareto(parse_double(parts[1]), parse_double(parts[2]));
    if (kind == "discrete" && parts.size() == 3)
      return discrete(parse_list(parts[1]), parse_list(parts[2]));
  } catch (const InvalidArgument& e) {
    throw InvalidArgument("radius law '" + std::string(text) + "': " + e.what());
  }
  throw InvalidArgument("unrecognised radius law '" + std::string(text) + "'");
}

std::string RadiusLaw::to_string() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::Constant: os << "const:" << format_double(values_[0]); break;
    case Kind::Uniform:
      os << "uniform:" << format_double(values_[0]) << ':' << format_double(values_[1]);
      break;
    case Kind::Pareto:
      os << "pareto:" << format_double(values_[0]) << ':' << format_double(values_[1]);
      break;
    case Kind::Discrete: {
      os << "discrete:";
      for (std::size_t i = 0; i < values_.size(); ++i)
        os << (i ? "," : "") << format_double(values_[i]);
      os << ':';
      for (std::size_t i = 0; i < probs_.size(); ++i)
        os << (i ? "," : "") << format_double(probs_[i]);
      break;
    }
  }
  return os.str();
}

void RadiusLaw::validate(int dim) const {
  const double m = moment(static_cast<double>(dim));
  if (!(m > 0.0)) throw DomainError("radius law must satisfy E R^d > 0");
}

double RadiusLaw::moment(double p) const {
  switch (kind_) {
    case Kind::Constant: return p == 0.0 ? 1.0 : std::pow(values_[0], p);
    case Kind::Uniform: {
      const double a = values_[0], b = values_[1];
      if (p <= -1.0 && a == 0.0) throw DomainError("uniform moment of order <= -1 is infinite");
      if (p == -1.0) return std::log(b / a) / (b - a);
      return (std::pow(b, p + 1.0) - std::pow(a, p + 1.0)) / ((p + 1.0) * (b - a));
    }
    case Kind::Pareto: {
      const double s = values_[0], e = values_[1];
      if (p >= e)
        throw DomainError("pareto moment E R^p is infinite for p >= exponent (p=" +
                          std::to_string(p) + ", exponent=" + std::to_string(e) + ")");
      return std::pow(s, p) * e / (e - p);
    }
    case Kind::Discrete: {
      double m = 0.0;
      for (std::size_t i = 0; i < values_.size(); ++i) {
        if (probs_[i] == 0.0) continue;
        if (values_[i] == 0.0 && p < 0.0) throw DomainError("negative moment of an atom at 0");
        m += probs_[i] * (p == 0.0 ? 1.0 : std::pow(values_[i], p));
      }
      return m;
    }
  }
  return 0.0;
}

double RadiusLaw::tail(double r) const {
  switch (kind_) {
    case Kind::Constant: return r < values_[0] ? 1.0 : 0.0;
    case Kind::Uniform: {
      const double a = values_[0], b = values_[1];
      if (r < a) return 1.0;
      if (r >= b) return 0.0;
      return (b - r) / (b - a);
    }
    case Kind::Pareto: {
      const double s = values_[0], e = values_[1];
      return r < s ? 1.0 : std::pow(s / r, e);
    }
    case Kind::Discrete: {
      double t = 0.0;
      for (std::size_t i = 0; i < values_.size(); ++i)
        if (values_[i] > r) t += probs_[i];
      return t;
    }
  }
  return 0.0;
}

double RadiusLaw::tail_inverse(double u) const {
  if (!(u > 0.0 && u <= 1.0)) throw InvalidArgument("tail_inverse: u must lie in (0, 1]");
  switch (kind_) {
    case Kind::Constant: return values_[0];
    case Kind::Uniform: return values_[1] - u * (values_[1] - values_[0]);
    case Kind::Pareto: return values_[0] * std::pow(u, -1.0 / values_[1]);
    case Kind::Discrete: {
      // inf{r : P(R > r) < u}; tail is a step function, so scan the atoms.
      double above = 1.0;
      for (std::size_t i = 0; i < values_.size(); ++i) {
        above -= probs_[i];
        if (above < u - 1e-15) return values_[i];
      }
      return values_.back();
    }
  }
  return 0.0;
}

double RadiusLaw::min_radius() const {
  switch (kind_) {
    case Kind::Constant: return values_[0];
    case Kind::Uniform: return values_[0] > 0.0 ? values_[0] : values_[1] / 8.0;
    case Kind::Pareto: return values_[0];
    case Kind::Discrete:
      for (std::size_t i = 0; i < values_.size(); ++i)
        if (values_[i] > 0.0 && probs_[i] > 0.0) return values_[i];
      return 0.0;
  }
  return 0.0;
}

double RadiusLaw::max_radius() const {
  switch (kind_) {
    case Kind::Constant: return values_[0];
    case Kind::Uniform: return values_[1];
    case Kind::Pareto: return std::numeric_limits<double>::infinity();
    case Kind::Discrete: {
      for (std::size_t i = values_.size(); i-- > 0;)
        if (probs_[i] > 0.0) return values_[i];
      return 0.0;
    }
  }
  return 0.0;
}

double radius_moment(const RadiusLaw& law, double p) { return law.moment(p); }

MarkedCloud sample_cloud(double lambda, double window_halfwidth, const RadiusLaw& law, int dim,
                         Rng& rng) {
  if (!(lambda >= 0.0)) throw InvalidArgument("sample_cloud: lambda must be >= 0");
  if (!(window_halfwidth > 0.0)) throw InvalidArgument("sample_cloud: window must be positive");
  if (dim < 1) throw InvalidArgument("sample_cloud: dim must be >= 1");
  law.validate(dim);
  MarkedCloud c;
  c.dim = dim;
  c.lambda = lambda;
  c.window_halfwidth = window_halfwidth;
  const double volume = std::pow(2.0 * window_halfwidth, dim);
  std::size_t n = 0;
  if (lambda > 0.0) {
    std::poisson_distribution<std::size_t> count(lambda * volume);
    n = count(rng);
  }
  std::uniform_real_distribution<double> pos(-window_halfwidth, window_halfwidth);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  c.ids.resize(n);
  c.x0.resize(n * static_cast<std::size_t>(dim));
  c.radii.resize(n);
  c.marks.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    c.ids[i] = i;
    for (int k = 0; k < dim; ++k) c.x0[i * static_cast<std::size_t>(dim) + static_cast<std::size_t>(k)] = pos(rng);
    double u = 1.0 - unit(rng);  // (0, 1]
    c.marks[i] = u;
    c.radii[i] = law.tail_inverse(u);
  }
  return c;
}

std::vector<PathSkeleton> evolve(const MarkedCloud& cloud, const StableParams& params,
                                 std::span<const double> times, Rng& rng) {
  if (params.dim != cloud.dim) throw InvalidArgument("evolve: dimension mismatch");
  std::vector<PathSkeleton> paths;
  paths.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i)
    paths.push_back(sample_path(params, cloud.position(i), times, rng));
  return paths;
}

void write_cloud_csv(std::ostream& out, const MarkedCloud& cloud) {
  out << "id";
  for (int k = 0; k < cloud.dim; ++k) out << ",x" << k;
  out << ",radius\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    out << cloud.ids[i];
    for (double v : cloud.position(i)) out << ',' << format_double(v);
    out << ',' << format_double(cloud.radii[i]) << '\n';
  }
}

double omitted_detectors(const StableParams& params, double lambda, double r, double t,
                         double inner, const CalibratedBoundConstants& constants) {
  if (lambda == 0.0) return 0.0;
  const double t_eff = std::max(t, 1.0);
  const double area = sphere_area(params.dim);
  auto integrand = [&](double u) {  // rho = e^u, d rho = e^u du
    const double rho = std::exp(u);
    return area * std::pow(rho, params.dim) *
           hitting_bound_optimised(params, rho, r, t_eff, constants);
  };
  // Trapezoid on a logarithmic grid; the integrand decays like rho^{-alpha}
  // up to logarithms, so the tail beyond the last node is bounded by
  // integrand / alpha.
  const double u0 = std::log(std::max(inner, 1e-12));
  const double du = 0.03;
  double sum = 0.5 * integrand(u0);
  double u = u0;
  double last = 0.0;
  for (int i = 1; i <= 2700; ++i) {
    u = u0 + du * i;
    last = integrand(u);
    sum += last;
  }
  sum -= 0.5 * last;
  double value = sum * du;
  // Remaining mass beyond e^u, valid once the integrand is in its power-law regime.
  const double slope = (std::log(integrand(u)) - std::log(integrand(u - 1.0)));
  if (!(slope < -1e-3)) throw PlannerFailure("far-hitting integral does not converge");
  value += last / (-slope);
  return lambda * value;
}

WindowPlan plan_window(const StableParams& params, double lambda, const RadiusLaw& law,
                       double horizon, double eps_trunc, const CalibratedBoundConstants& constants,
                       const PlanOptions& options) {
  params.require_transient();
  if (horizon < 0.0) throw InvalidArgument("plan_window: horizon must be >= 0");
  if (!(eps_trunc > 0.0)) throw InvalidArgument("plan_window: eps_trunc must be positive");
  if (!constants.matches(params))
    throw PlannerFailure("plan_window: calibrated constants are for a different (alpha, dim)");
  WindowPlan plan;
  plan.horizon = horizon;
  plan.eps_trunc = eps_trunc;
  plan.radius_quantile = law.quantile(options.radius_quantile);
  plan.margin = options.target_displacement;
  const double floor_w = plan.radius_quantile + plan.margin;
  if (horizon == 0.0 || lambda == 0.0) {
    plan.halfwidth = std::max(floor_w, 1e-9);
    return plan;
  }
  auto omitted = [&](double inner) {
    return omitted_detectors(params, lambda, plan.radius_quantile, horizon, inner, constants);
  };
  double lo = std::max(plan.radius_quantile, 1e-3);
  double hi = 2.0 * lo;
  while (omitted(hi) > eps_trunc) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e9) throw PlannerFailure("plan_window: window exceeds 1e9 without meeting eps_trunc");
  }
  for (int it = 0; it < 60 && hi - lo > 1e-4 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (omitted(mid) > eps_trunc ? lo : hi) = mid;
  }
  plan.achieved = omitted(hi);
  plan.halfwidth = std::max(floor_w, hi + plan.margin);
  return plan;
}

std::vector<WindowPlan> plan_window_schedule(const StableParams& params, double lambda,
                                             const RadiusLaw& law, double horizon, double eps_trunc,
                                             const CalibratedBoundConstants& constants,
                                             const PlanOptions& options, double first_horizon) {
  if (!(first_horizon > 0.0)) throw InvalidArgument("plan_window_schedule: first horizon must be positive");
  std::vector<WindowPlan> plans;
  double t = std::min(horizon, first_horizon);
  while (true) {
    auto plan = plan_window(params, lambda, law, t, eps_trunc, constants, options);
    if (!plans.empty()) plan.halfwidth = std::max(plan.halfwidth, plans.back().halfwidth);
    plans.push_back(plan);
    if (t >= horizon) break;
    t = std::min(horizon, 2.0 * t);
  }
  return plans;
}

}  // namespace dynbool
