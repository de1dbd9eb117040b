#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "dynbool/levy.hpp"
#include "dynbool/rng.hpp"

namespace dynbool {

/// Law of the i.i.d. communication radii.
class RadiusLaw {
 public:
  enum class Kind { Constant, Uniform, Pareto, Discrete };

  static RadiusLaw constant(double r);
  static RadiusLaw uniform(double a, double b);
  static RadiusLaw pareto(double scale, double exponent);
  static RadiusLaw discrete(std::vector<double> values, std::vector<double> probabilities);

  /// Parses `const:R`, `uniform:A:B`, `pareto:SCALE:EXPONENT` or
  /// `discrete:V1,V2,...:P1,P2,...`.
  static RadiusLaw parse(std::string_view text);
  std::string to_string() const;

  Kind kind() const { return kind_; }

  /// Throws DomainError unless 0 < E R^dim < infinity.
  void validate(int dim) const;

  /// Closed-form E R^p; DomainError when infinite.
  double moment(double p) const;
  /// P(R > r).
  double tail(double r) const;
  /// Generalised inverse of the tail function on (0, 1]: R = tail_inverse(U)
  /// has this law when U is uniform on (0, 1).
  double tail_inverse(double u) const;
  double quantile(double q) const { return tail_inverse(1.0 - q); }
  /// Smallest positive radius in the support.
  double min_radius() const;
  double max_radius() const;  // +infinity for unbounded support

 private:
  Kind kind_ = Kind::Constant;
  std::vector<double> values_;  // parameters, or support for Discrete
  std::vector<double> probs_;
};

double radius_moment(const RadiusLaw& law, double p);

/// Poisson cloud in [-W, W]^d with i.i.d. radii. Marks are the uniform
/// variables the radii are built from (radius = law.tail_inverse(mark)).
struct MarkedCloud {
  int dim = 2;
  std::vector<std::size_t> ids;
  std::vector<double> x0;  // row-major positions
  std::vector<double> radii;
  std::vector<double> marks;
  double lambda = 0.0;
  double window_halfwidth = 0.0;

  std::size_t size() const { return radii.size(); }
  std::span<const double> position(std::size_t i) const {
    return {x0.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }
};

MarkedCloud sample_cloud(double lambda, double window_halfwidth, const RadiusLaw& law, int dim,
                         Rng& rng);

/// One independent skeleton per particle on `times`, started at x0.
std::vector<PathSkeleton> evolve(const MarkedCloud& cloud, const StableParams& params,
                                 std::span<const double> times, Rng& rng);

void write_cloud_csv(std::ostream& out, const MarkedCloud& cloud);

struct WindowPlan {
  double halfwidth = 0.0;
  double horizon = 0.0;
  double eps_trunc = 0.0;    // requested bound on omitted detectors
  double achieved = 0.0;     // integral value at the chosen W
  double radius_quantile = 0.0;
  double margin = 0.0;       // target displacement allowance
};

struct PlanOptions {
  double radius_quantile = 0.999;
  double target_displacement = 0.0;
};

/// Smallest window half-width W for which lambda times the integral of the
/// calibrated far-hitting bound over |x| > W - margin is at most eps_trunc.
WindowPlan plan_window(const StableParams& params, double lambda, const RadiusLaw& law,
                       double horizon, double eps_trunc, const CalibratedBoundConstants& constants,
                       const PlanOptions& options = {});

/// Plans for the horizons min(T, t0 2^j), j = 0, 1, ..., ending at T. The
/// halfwidths are nondecreasing, so a simulation can start in the first window
/// and add the outer shells only once it passes the earlier horizons.
std::vector<WindowPlan> plan_window_schedule(const StableParams& params, double lambda,
                                             const RadiusLaw& law, double horizon, double eps_trunc,
                                             const CalibratedBoundConstants& constants,
                                             const PlanOptions& options = {},
                                             double first_horizon = 1.0);

/// Expected number of particles started outside |x| > inner that come within
/// r of the origin by time t, according to the bound.
double omitted_detectors(const StableParams& params, double lambda, double r, double t,
                         double inner, const CalibratedBoundConstants& constants);

}  // namespace dynbool
