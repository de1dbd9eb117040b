#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dynbool/levy.hpp"
#include "dynbool/rng.hpp"

namespace dynbool {

/// Motion g of the target with g(0) = o.
class TargetMotion {
 public:
  enum class Kind { Static, Linear, Levy, Table };

  static TargetMotion stationary();
  /// g(t) = beta t psi; psi is normalised.
  static TargetMotion linear(double beta, std::vector<double> psi);
  /// Independent copy of the node motion, resampled per realisation.
  static TargetMotion levy();
  /// Piecewise-constant (cadlag) interpolation of a user skeleton starting at o.
  static TargetMotion table(PathSkeleton path);

  /// Parses `static`, `linear:BETA` (psi = e_1), `linear:BETA:P1,P2,...`, `levy`.
  static TargetMotion parse(std::string_view text, int dim);
  std::string to_string() const;

  Kind kind() const { return kind_; }
  bool is_random() const { return kind_ == Kind::Levy; }
  double beta() const { return beta_; }

  /// Positions g(times[i]) row-major. Only Levy consumes `rng`.
  std::vector<double> realise(std::span<const double> times, const StableParams& params,
                              Rng& rng) const;

  /// Radius that contains the target path on [0, horizon] with probability at
  /// least 1 - level (deterministically for non-random motions). For Levy
  /// targets it uses the calibrated escape constant.
  double displacement_allowance(const StableParams& params, double horizon, double escape_c,
                                double level = 0.01) const;

 private:
  Kind kind_ = Kind::Static;
  double beta_ = 0.0;
  std::vector<double> psi_;
  std::optional<PathSkeleton> table_;
};

}  // namespace dynbool
