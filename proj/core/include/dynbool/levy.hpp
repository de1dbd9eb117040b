#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "dynbool/rng.hpp"
#include "dynbool/stats.hpp"

namespace dynbool {

/// Stability index and dimension of the isotropic stable motion.
struct StableParams {
  double alpha = 2.0;
  int dim = 2;

  /// Throws InvalidArgument unless 0 < alpha <= 2 and dim >= 1.
  void validate() const;
  /// Throws DomainError unless dim > alpha.
  void require_transient() const;
};

/// Time-gridded trajectory of one particle. Positions are stored row-major,
/// `dim` coordinates per time.
struct PathSkeleton {
  std::vector<double> times;
  std::vector<double> coords;
  StableParams params;

  std::size_t size() const { return times.size(); }
  int dim() const { return params.dim; }
  std::span<const double> position(std::size_t i) const {
    return {coords.data() + i * static_cast<std::size_t>(params.dim),
            static_cast<std::size_t>(params.dim)};
  }
  std::span<double> position(std::size_t i) {
    return {coords.data() + i * static_cast<std::size_t>(params.dim),
            static_cast<std::size_t>(params.dim)};
  }
};

/// Times {0, h, 2h, ..., T}; the last point is exactly T.
std::vector<double> time_grid(double horizon, double step);

/// Positive (beta)-stable increment with Laplace transform exp(-dt u^beta),
/// drawn by Kanter's representation.
double sample_subordinator_increment(double beta, double dt, Rng& rng);

/// Writes an increment over `dt` with characteristic function
/// exp(-dt |xi|^alpha) into `out` (size params.dim).
void sample_increment(const StableParams& params, double dt, Rng& rng, std::span<double> out);
std::vector<double> sample_increment(const StableParams& params, double dt, Rng& rng);

/// Path on an explicit increasing time grid starting at 0.
PathSkeleton sample_path(const StableParams& params, std::span<const double> start,
                         std::span<const double> times, Rng& rng);

PathSkeleton sample_skeleton(const StableParams& params, std::span<const double> start,
                             double horizon, double step, Rng& rng);

/// Transition density p(t, o, x) at |x| = r, by radial Fourier inversion of
/// exp(-t|xi|^alpha). Throws NumericFailure if the quadrature stalls.
double stable_density(const StableParams& params, double t, double r);

/// Tail constant c with p(t, o, x) ~ c t |x|^{-d-alpha} as |x| -> infinity.
double stable_tail_constant(const StableParams& params);

/// Estimates at step h and h/2 of the same path functional.
struct HalvingCheck {
  Estimate at_h;
  Estimate at_half_h;
  bool flagged = false;  // |difference| exceeds the joint CI
};

HalvingCheck make_halving_check(const Estimate& at_h, const Estimate& at_half_h);

/// Monte Carlo estimate of P(sup_{s<=t} |X_s| >= r) from skeleton maxima at
/// step h; biased low by the discretisation.
Estimate escape_probability(const StableParams& params, double r, double t, std::size_t n,
                            double h, const ReplicaStreams& streams);

HalvingCheck escape_probability_halving(const StableParams& params, double r, double t,
                                        std::size_t n, double h, const ReplicaStreams& streams);

/// Monte Carlo estimate of P(exists s <= t : X_s in B_r(x)) for |x| = distance.
/// Each path is tested against `directions` targets on the sphere of radius
/// `distance`, which keeps the estimator unbiased and lowers its variance.
Estimate hitting_probability(const StableParams& params, double distance, double r, double t,
                             std::size_t n, double h, const ReplicaStreams& streams,
                             int directions = 16);

/// Constants of the escape and far-hitting bounds, produced by calibration.
struct CalibratedBoundConstants {
  double alpha = 0.0;
  int dim = 0;
  double escape_c = 0.0;  // P(tau_r <= t) <= escape_c r^{-alpha} t
  double hit_c = 0.0;
  double hit_c_prime = 0.0;
  double hit_kappa = 0.0;
  std::size_t replicas = 0;
  double step = 0.0;

  bool matches(const StableParams& p) const { return p.alpha == alpha && p.dim == dim; }
};

struct HittingBound {
  double polynomial = 0.0;
  double exponential = 0.0;
  double total = 0.0;
  double window_l = 0.0;  // the L used
};

/// C(|x|^{-(d+alpha)} t^2 (r+L)^d + exp(-kappa(L/2 - C' t))). L defaults to
/// t log|x|. Throws DomainError unless r + L <= |x|/6.
HittingBound hitting_bound(const StableParams& params, double distance, double r, double t,
                           const CalibratedBoundConstants& constants,
                           std::optional<double> window_l = std::nullopt);

/// Smallest admissible-L bound value at |x| (L ranges over (0, |x|/6 - r]).
/// Returns 1 when no admissible L exists.
double hitting_bound_optimised(const StableParams& params, double distance, double r, double t,
                               const CalibratedBoundConstants& constants);

}  // namespace dynbool
