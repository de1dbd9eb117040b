#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "dynbool/levy.hpp"
#include "dynbool/rng.hpp"

namespace dynbool {

struct CalibrationOptions {
  std::size_t replicas = 20000;
  double step = 0.01;
  std::vector<double> escape_radii{1.0, 2.0, 4.0};
  std::vector<double> escape_times{0.5, 1.0, 2.0};
  std::vector<double> hit_distances{8.0, 12.0, 16.0};
  std::vector<double> hit_times{1.0, 2.0};
  double hit_radius = 1.0;
  std::vector<double> kappas{0.5, 1.0, 2.0, 4.0, 8.0};
  std::vector<double> c_primes{0.05, 0.1, 0.25, 0.5, 1.0};
  /// Largest accepted relative CI half-width at the grid point that fixes a
  /// constant.
  double tolerance = 0.25;
};

/// One calibration grid point: Monte Carlo estimate against the fitted bound.
struct CalibrationRow {
  std::string kind;  // "escape" or "hit"
  double r = 0.0;    // radius (escape) or target distance (hit)
  double t = 0.0;
  Estimate estimate;
  double bound = 0.0;
  double ratio() const { return bound > 0.0 ? estimate.value / bound : 0.0; }
};

struct CalibrationReport {
  CalibratedBoundConstants constants;
  std::vector<CalibrationRow> rows;
};

/// Fits the escape constant as the smallest C with estimate + CI <= C r^-alpha t
/// on the grid, and the hitting constants (C, C', kappa) by a grid search over
/// (kappa, C') with C the envelope at L = |x|/6 - r; the pair with the
/// smallest total log slack wins. Refuses alpha = 2 and non-transient
/// dimensions; throws NumericFailure with the residual table when the
/// defining estimates are too noisy.
CalibrationReport calibrate(const StableParams& params, const CalibrationOptions& options,
                            const ReplicaStreams& streams);

void write_constants_json(std::ostream& out, const CalibratedBoundConstants& c);
CalibratedBoundConstants read_constants_json(std::istream& in);

}  // namespace dynbool
