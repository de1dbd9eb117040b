#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dynbool/field.hpp"
#include "dynbool/levy.hpp"
#include "dynbool/sausage.hpp"
#include "dynbool/stats.hpp"
#include "dynbool/target.hpp"

namespace dynbool {

enum class SurvivalMethod { Direct, VoidFormula };

const char* to_string(SurvivalMethod m);

/// Survival estimates P(T > t) on a time grid.
struct SurvivalCurve {
  std::vector<double> times;
  std::vector<double> survival;
  std::vector<double> log_survival;  // exact log for the void formula, log(survival) otherwise
  std::vector<double> lo;            // 95% band
  std::vector<double> hi;
  std::vector<double> stderr_;       // standard error of survival
  std::size_t n = 0;
  SurvivalMethod method = SurvivalMethod::Direct;

  double ci(std::size_t i) const { return 0.5 * (hi[i] - lo[i]); }
  /// Index of `t` in `times`; throws InvalidArgument when absent.
  std::size_t index_of(double t) const;
  Interval band(std::size_t i) const { return {lo[i], hi[i]}; }
};

/// Survival curve of first-hit grid indices: entry j counts replicas whose
/// first hit index exceeds report_index[j]. Index values >= grid size mean
/// "never hit". Wilson bands.
SurvivalCurve survival_from_first_hits(std::span<const std::size_t> first_hit,
                                       std::span<const double> grid_times,
                                       std::span<const std::size_t> report_index);

struct DetectionSetup {
  double lambda = 1.0;
  RadiusLaw law = RadiusLaw::constant(1.0);
  StableParams params;
  TargetMotion target;
  double horizon = 1.0;
  double step = 0.01;
  std::size_t replicas = 1000;
  /// Times at which survival is reported; empty means every grid time.
  std::vector<double> report_times;
};

/// Grid times and the indices of the report times on that grid.
struct ReportGrid {
  std::vector<double> times;
  std::vector<std::size_t> report_index;
};
ReportGrid make_report_grid(double horizon, double step, std::span<const double> report_times);

/// Direct simulation: a Poisson cloud in the planned window moves along
/// skeletons and the target is detected at the first grid time with
/// |X_i - g| <= R_i. Throws InvalidArgument when the plan does not cover the
/// horizon.
SurvivalCurve simulate_detection(const DetectionSetup& setup, const WindowPlan& plan,
                                 const ReplicaStreams& streams);

/// Same with a window schedule (see plan_window_schedule). A replica starts
/// with the first window; when it is still undetected past a plan's horizon,
/// the Poisson points of the next shell are drawn and simulated from time 0,
/// and an earlier detection by one of them replaces the running result. Each
/// reported time t is thus simulated in a window planned for a horizon >= t.
SurvivalCurve simulate_detection(const DetectionSetup& setup,
                                 std::span<const WindowPlan> schedule,
                                 const ReplicaStreams& streams);

/// Per-replica first detection grid index (grid size means undetected).
std::vector<std::size_t> detection_first_hits(const DetectionSetup& setup,
                                              std::span<const WindowPlan> schedule,
                                              const ReplicaStreams& streams);

/// Void-probability oracle exp(-lambda E|B_R(Gamma^g_t) + K|) over replicas of
/// the sign-flipped node path g - X. For random (Levy) targets each replica
/// draws one target path and `inner` node paths, and the annealed survival is
/// the mean of exp(-lambda * inner average).
SurvivalCurve void_survival(const DetectionSetup& setup, const CompactSet& k,
                            const ReplicaStreams& streams, std::size_t inner = 32);

/// Mean volume E|B_R(Gamma^g_t) + K| at the report times, with 95% CI.
std::vector<Estimate> mean_void_volume(const DetectionSetup& setup, const CompactSet& k,
                                       const ReplicaStreams& streams);

struct RateFit {
  double rate = 0.0;
  double stderr_ = 0.0;
  double t_lo = 0.0;
  double t_hi = 0.0;
  std::size_t points = 0;
  double r2 = 0.0;  // of the log-linear fit
  std::string warning;
};

/// Least-squares slope of -log survival against t over [t_lo, t_hi]. Without
/// a window: the last 40% of the grid, restricted for direct curves to points
/// with survival > 25/n.
RateFit decay_rate(const SurvivalCurve& curve,
                   std::optional<std::pair<double, double>> window = std::nullopt);

struct SupermultiplicativityRow {
  double t = 0.0;
  double t_prime = 0.0;
  double joint = 0.0;    // S(t + t')
  double product = 0.0;  // S(t) S(t')
  double sigma = 0.0;    // joint standard error of joint - product
  bool holds = false;    // joint >= product - sigmas * sigma
};

std::vector<SupermultiplicativityRow> supermultiplicativity_check(
    const SurvivalCurve& curve, std::span<const std::pair<double, double>> pairs,
    double sigmas = 3.0);

/// Survival at `at_time` from step h and h/2.
HalvingCheck detection_halving(const DetectionSetup& setup, std::span<const WindowPlan> schedule,
                               const ReplicaStreams& streams, double at_time);

}  // namespace dynbool
