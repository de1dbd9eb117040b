#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <absl/container/flat_hash_map.h>

#include "dynbool/field.hpp"
#include "dynbool/levy.hpp"
#include "dynbool/rng.hpp"
#include "dynbool/stats.hpp"
#include "dynbool/target.hpp"

namespace dynbool {

/// Cap(alpha, d) = 2^alpha pi^{d/2} Gamma(alpha/2) / Gamma((d - alpha)/2).
/// Throws DomainError unless d > alpha.
double capacity_constant(double alpha, int dim);

/// Capacity of the unit ball for the process with characteristic function
/// exp(-t|xi|^alpha): 2^alpha pi^{d/2} Gamma(d/2) / (Gamma((d-alpha)/2) Gamma(1+(d-alpha)/2)).
/// This is the long-run slope of E|B_1(Gamma_t)| observed in simulation; it
/// equals capacity_constant only at alpha = 2.
double riesz_capacity(double alpha, int dim);
/// Volume of the d-dimensional ball of radius r.
double ball_volume(int dim, double r);

/// Compact obstacle K used in Minkowski sums.
class CompactSet {
 public:
  enum class Kind { Points, Ball, Box };

  static CompactSet origin(int dim);
  static CompactSet points(int dim, std::vector<double> coords);
  static CompactSet ball(std::vector<double> center, double radius);
  static CompactSet box(std::vector<double> lo, std::vector<double> hi);

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  /// Largest extent from the origin; used to pick grid resolution.
  double extent() const;

  const std::vector<double>& coords() const { return coords_; }
  const std::vector<double>& lo() const { return lo_; }
  const std::vector<double>& hi() const { return hi_; }
  double radius() const { return radius_; }

 private:
  Kind kind_ = Kind::Points;
  int dim_ = 0;
  std::vector<double> coords_;  // Points, or the Ball centre
  std::vector<double> lo_, hi_;
  double radius_ = 0.0;
};

enum class VolumeMethod { GridOccupancy, HitOrMiss };

struct VolumeEstimate {
  double value = 0.0;
  double half_width = 0.0;  // grid: surface-cell tolerance; hit-or-miss: 95% CI
  VolumeMethod method = VolumeMethod::GridOccupancy;
  double resolution = 0.0;  // cell size or sample count
};

/// Sparse occupancy grid over cells of side `cell`. Cells are packed 64 to a
/// word along the first axis and the words are kept in a hash map keyed by
/// (strip, remaining cell indices). A cell is occupied when its centre lies in
/// one of the marked closed sets.
class OccupancyGrid {
 public:
  static constexpr int kMaxDim = 4;

  OccupancyGrid(int dim, double cell);

  /// Marks cells whose centres are within r of the box [lo, hi]. A ball is the
  /// case lo == hi. Returns the number of newly occupied cells.
  std::int64_t mark_rounded_box(std::span<const double> lo, std::span<const double> hi, double r);
  std::int64_t mark_ball(std::span<const double> centre, double r) {
    return mark_rounded_box(centre, centre, r);
  }

  int dim() const { return dim_; }
  double cell() const { return cell_; }
  double cell_volume() const { return cell_volume_; }
  std::int64_t occupied() const { return occupied_; }
  double volume() const { return static_cast<double>(occupied_) * cell_volume_; }
  /// Occupied cells with at least one unoccupied axis neighbour.
  std::int64_t surface_cells() const;
  double tolerance() const { return static_cast<double>(surface_cells()) * cell_volume_; }
  bool is_occupied(std::span<const double> point) const;

 private:
  using Key = std::array<std::int64_t, kMaxDim>;

  void mark_axis(int axis, double rem2, std::span<const double> lo, std::span<const double> hi,
                 Key& key, std::int64_t& added);
  void set_range(Key& key, std::int64_t i0, std::int64_t i1, std::int64_t& added);
  std::uint64_t word(const Key& key) const;

  int dim_;
  double cell_;
  double cell_volume_;
  std::int64_t occupied_ = 0;
  absl::flat_hash_map<Key, std::uint64_t> strips_;
};

/// Default grid resolution: smallest radius in play divided by 8.
double default_cell(double r_min);

/// Volume of B_r(skeleton) by grid occupancy (cell <= r/8 unless overridden).
VolumeEstimate sausage_volume(const PathSkeleton& skeleton, double r, double cell = 0.0);

/// Volume of B_r(skeleton) by hit-or-miss sampling in the dilated bounding box,
/// sized for a 1% relative CI (capped at `max_samples`).
VolumeEstimate sausage_volume_hit_or_miss(const PathSkeleton& skeleton, double r, Rng& rng,
                                          double target_rel_ci = 0.01,
                                          std::size_t max_samples = 4'000'000);

/// Volume of B_r(skeleton) + K by grid occupancy.
VolumeEstimate minkowski_sum_volume(const PathSkeleton& skeleton, double r, const CompactSet& k,
                                    double cell = 0.0);

/// Volumes of B_r(skeleton[0..c]) + K for every checkpoint index c
/// (nondecreasing), reusing one grid.
std::vector<double> sausage_volume_profile(const PathSkeleton& skeleton, double r,
                                           const CompactSet& k, double cell,
                                           std::span<const std::size_t> checkpoints);

/// Translates the skeleton by a uniform offset within one grid cell. Volumes
/// are translation invariant while the cell-centre count of a randomly
/// shifted set is unbiased, so Monte Carlo volume averages lose the lattice
/// bias of sets centred on the grid.
void jitter_to_grid(PathSkeleton& skeleton, double cell, Rng& rng);

/// positions[i] + offsets[i]; times unchanged.
PathSkeleton drift_shift(const PathSkeleton& skeleton, std::span<const double> offsets);
/// positions[i] + g(times[i]); `rng` only drives random (Levy) targets.
PathSkeleton drift_shift(const PathSkeleton& skeleton, const TargetMotion& g, Rng& rng);

struct SausageRate {
  double horizon = 0.0;
  Estimate rate;  // E|B_R(Gamma_T)| / T
};

/// Mean of |B_R(Gamma_T)|/T over replicas, R drawn per replica, evaluated at
/// every horizon in `horizons` from the same paths.
std::vector<SausageRate> sausage_rate_ladder(const StableParams& params, const RadiusLaw& law,
                                             std::span<const double> horizons, double h,
                                             std::size_t n, const ReplicaStreams& streams);

SausageRate expected_sausage_rate(const StableParams& params, const RadiusLaw& law, double horizon,
                                  double h, std::size_t n, const ReplicaStreams& streams);

HalvingCheck expected_sausage_rate_halving(const StableParams& params, const RadiusLaw& law,
                                           double horizon, double h, std::size_t n,
                                           const ReplicaStreams& streams);

/// Index of the grid time closest to t.
std::size_t nearest_index(std::span<const double> times, double t);

}  // namespace dynbool
