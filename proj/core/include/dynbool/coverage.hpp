#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dynbool/field.hpp"
#include "dynbool/levy.hpp"
#include "dynbool/stats.hpp"

namespace dynbool {

/// Bounded set A in [0,1]^d with a known Minkowski dimension. Scaled copies
/// kA are taken about the centroid of A.
class TargetSet {
 public:
  enum class Kind { Segment, Cube, CantorDust };

  /// Unit segment along the first axis.
  static TargetSet segment(int dim);
  /// Unit cube [0,1]^dim.
  static TargetSet cube(int dim);
  /// Level-`levels` middle-thirds Cantor set along the first axis.
  static TargetSet cantor_dust(int levels, int dim);
  /// `segment`, `square`/`cube`, `cantor` or `cantor:LEVELS`.
  static TargetSet parse(std::string_view text, int dim);
  std::string to_string() const;

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  double nominal_dimension() const;
  /// max over kA of the sup-norm distance to the centroid.
  double half_extent(double k) const;

  /// Centres whose eps-balls cover kA.
  std::vector<double> epsilon_net(double k, double eps) const;
  /// Number of grid boxes of side eps (aligned at 0) meeting A.
  std::int64_t box_count(double eps) const;

 private:
  std::vector<std::pair<double, double>> cantor_intervals(int level) const;

  Kind kind_ = Kind::Cube;
  int dim_ = 2;
  int levels_ = 0;
};

std::vector<double> epsilon_net(const TargetSet& set, double k, double eps);

struct DimensionEstimate {
  double beta = 0.0;
  double stderr_ = 0.0;
  std::string warning;
};

/// Regression slope of log box-count against log(1/eps). The ladder must span
/// at least two decades.
DimensionEstimate minkowski_dimension_estimate(const TargetSet& set,
                                               std::span<const double> eps_ladder);

struct CoverageSetup {
  double lambda = 1.0;
  RadiusLaw law = RadiusLaw::constant(1.0);
  StableParams params;
  TargetSet set = TargetSet::cube(2);
  double k = 4.0;
  double eps = 0.1;
  double t_max = 10.0;
  double step = 0.01;
  std::size_t replicas = 100;
};

struct CoverageResult {
  double k = 0.0;
  std::vector<double> upper;  // per replica, censored values equal t_max
  std::vector<double> lower;
  Estimate mean_upper;
  Estimate mean_lower;
  double censor_upper = 0.0;  // fraction of censored replicas
  double censor_lower = 0.0;
  double zero_upper = 0.0;  // fraction with coverage at t = 0
  double zero_lower = 0.0;
  std::size_t centres = 0;
  double t_max = 0.0;
  bool usable = true;  // censoring <= 10%
};

/// Coverage-time proxies of kA: the upper proxy detects every net centre with
/// radii max(R - eps, 0), the lower proxy with the true radii.
CoverageResult simulate_coverage(const CoverageSetup& setup, const WindowPlan& plan,
                                 const ReplicaStreams& streams);

/// Default net resolution: 0.1 times the 10% radius quantile.
double default_coverage_eps(const RadiusLaw& law);

/// Predicted mean beta log k / (lambda Cap E R^{d-alpha}).
double predicted_coverage_time(const CoverageSetup& setup);

/// Runs the k-ladder, planning a window per k and doubling T_max (at most
/// three times) while censoring exceeds 10%.
std::vector<CoverageResult> coverage_ladder(const CoverageSetup& base, std::span<const double> ks,
                                            const CalibratedBoundConstants& constants,
                                            double eps_trunc, const ReplicaStreams& streams);
/// Same ladder with the window fixed at `margin` beyond the half-extent of kA.
/// Heavy-tailed bounds can make planned windows impractically wide; far
/// particles rarely matter for the last covered point.
std::vector<CoverageResult> coverage_ladder(const CoverageSetup& base, std::span<const double> ks,
                                            double margin, const ReplicaStreams& streams);

struct CoverageSlope {
  std::vector<double> ks;
  std::vector<Estimate> ratio_upper;  // mean T_cov / log k
  std::vector<Estimate> ratio_lower;
  double slope = 0.0;  // regression of mean upper T_cov on log k
  double slope_stderr = 0.0;
  double target = 0.0;
  bool ratio_decreasing = false;
};

/// Needs at least four ladder points. `target` is beta/(lambda Cap E R^{d-alpha}).
CoverageSlope coverage_slope(std::span<const CoverageResult> results, double target);

}  // namespace dynbool
