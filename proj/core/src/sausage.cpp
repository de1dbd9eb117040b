#include "dynbool/sausage.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <boost/math/special_functions/gamma.hpp>

#include "dynbool/errors.hpp"
#include "dynbool/parallel.hpp"

namespace dynbool {

namespace {

std::int64_t floor_div64(std::int64_t i) { return i >= 0 ? i / 64 : -((-i + 63) / 64); }

}  // namespace

double capacity_constant(double alpha, int dim) {
  if (!(alpha > 0.0 && alpha <= 2.0)) throw InvalidArgument("capacity: alpha must lie in (0, 2]");
  if (!(static_cast<double>(dim) > alpha))
    throw DomainError("capacity: requires d > alpha (alpha=" + std::to_string(alpha) +
                      ", d=" + std::to_string(dim) + ")");
  return std::pow(2.0, alpha) * std::pow(std::numbers::pi, 0.5 * dim) *
         boost::math::tgamma(0.5 * alpha) / boost::math::tgamma(0.5 * (dim - alpha));
}

double riesz_capacity(double alpha, int dim) {
  // Green kernel A |x|^{alpha-d} with A = Gamma((d-alpha)/2) / (2^alpha pi^{d/2} Gamma(alpha/2));
  // the unit ball has Riesz capacity Gamma(d/2) / (Gamma(alpha/2) Gamma(1 + (d-alpha)/2)).
  const double c = capacity_constant(alpha, dim);  // validates
  const double s = 0.5 * (dim - alpha);
  return c * boost::math::tgamma(0.5 * dim) /
         (boost::math::tgamma(0.5 * alpha) * boost::math::tgamma(1.0 + s));
}

double ball_volume(int dim, double r) {
  return std::pow(std::numbers::pi, 0.5 * dim) / boost::math::tgamma(0.5 * dim + 1.0) *
         std::pow(r, dim);
}

// ---------------------------------------------------------------------------
// CompactSet

CompactSet CompactSet::origin(int dim) { return points(dim, std::vector<double>(static_cast<std::size_t>(dim), 0.0)); }

CompactSet CompactSet::points(int dim, std::vector<double> coords) {
  if (dim < 1 || coords.empty() || coords.size() % static_cast<std::size_t>(dim) != 0)
    throw InvalidArgument("CompactSet::points needs a nonempty multiple of dim coordinates");
  CompactSet k;
  k.kind_ = Kind::Points;
  k.dim_ = dim;
  k.coords_ = std::move(coords);
  return k;
}

CompactSet CompactSet::ball(std::vector<double> center, double radius) {
  if (center.empty() || !(radius >= 0.0)) throw InvalidArgument("CompactSet::ball: bad arguments");
  CompactSet k;
  k.kind_ = Kind::Ball;
  k.dim_ = static_cast<int>(center.size());
  k.coords_ = std::move(center);
  k.radius_ = radius;
  return k;
}

CompactSet CompactSet::box(std::vector<double> lo, std::vector<double> hi) {
  if (lo.empty() || lo.size() != hi.size()) throw InvalidArgument("CompactSet::box: bad corners");
  for (std::size_t i = 0; i < lo.size(); ++i)
    if (!(lo[i] <= hi[i])) throw InvalidArgument("CompactSet::box: lo must not exceed hi");
  CompactSet k;
  k.kind_ = Kind::Box;
  k.dim_ = static_cast<int>(lo.size());
  k.lo_ = std::move(lo);
  k.hi_ = std::move(hi);
  return k;
}

double CompactSet::extent() const {
  switch (kind_) {
    case Kind::Points: {
      double m = 0.0;
      for (double v : coords_) m = std::max(m, std::abs(v));
      return m;
    }
    case Kind::Ball: return radius_;
    case Kind::Box: {
      double m = 0.0;
      for (std::size_t i = 0; i < lo_.size(); ++i) m = std::max(m, hi_[i] - lo_[i]);
      return m;
    }
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// OccupancyGrid

OccupancyGrid::OccupancyGrid(int dim, double cell)
    : dim_(dim), cell_(cell), cell_volume_(std::pow(cell, dim)) {
  if (dim < 1 || dim > kMaxDim)
    throw InvalidArgument("OccupancyGrid supports 1 <= dim <= " + std::to_string(kMaxDim));
  if (!(cell > 0.0)) throw InvalidArgument("OccupancyGrid: cell must be positive");
}

std::int64_t OccupancyGrid::mark_rounded_box(std::span<const double> lo, std::span<const double> hi,
                                             double r) {
  Key key{};
  std::int64_t added = 0;
  mark_axis(dim_ - 1, r * r, lo, hi, key, added);
  occupied_ += added;
  return added;
}

void OccupancyGrid::mark_axis(int axis, double rem2, std::span<const double> lo,
                              std::span<const double> hi, Key& key, std::int64_t& added) {
  const auto a = static_cast<std::size_t>(axis);
  const double w = std::sqrt(rem2);
  const auto i0 = static_cast<std::int64_t>(std::ceil((lo[a] - w) / cell_ - 0.5));
  const auto i1 = static_cast<std::int64_t>(std::floor((hi[a] + w) / cell_ - 0.5));
  if (axis == 0) {
    set_range(key, i0, i1, added);
    return;
  }
  for (std::int64_t j = i0; j <= i1; ++j) {
    const double y = (static_cast<double>(j) + 0.5) * cell_;
    const double dist = std::max({0.0, lo[a] - y, y - hi[a]});
    const double rem = rem2 - dist * dist;
    if (rem < 0.0) continue;
    key[a] = j;
    mark_axis(axis - 1, rem, lo, hi, key, added);
  }
}

void OccupancyGrid::set_range(Key& key, std::int64_t i0, std::int64_t i1, std::int64_t& added) {
  if (i0 > i1) return;
  const std::int64_t s0 = floor_div64(i0), s1 = floor_div64(i1);
  for (std::int64_t s = s0; s <= s1; ++s) {
    const std::int64_t b0 = s == s0 ? i0 - 64 * s : 0;
    const std::int64_t b1 = s == s1 ? i1 - 64 * s : 63;
    const std::uint64_t hi_mask = b1 == 63 ? ~0ULL : ((1ULL << (b1 + 1)) - 1);
    const std::uint64_t mask = hi_mask & ~((1ULL << b0) - 1);
    key[0] = s;
    auto& w = strips_[key];
    added += std::popcount(mask & ~w);
    w |= mask;
  }
}

std::uint64_t OccupancyGrid::word(const Key& key) const {
  const auto it = strips_.find(key);
  return it == strips_.end() ? 0ULL : it->second;
}

std::int64_t OccupancyGrid::surface_cells() const {
  std::int64_t surface = 0;
  for (const auto& [key, w] : strips_) {
    if (w == 0) continue;
    Key k = key;
    k[0] = key[0] - 1;
    const std::uint64_t left = word(k);
    k[0] = key[0] + 1;
    const std::uint64_t right = word(k);
    std::uint64_t interior = w & ((w << 1) | (left >> 63)) & ((w >> 1) | (right << 63));
    for (int axis = 1; axis < dim_ && interior; ++axis) {
      const auto a = static_cast<std::size_t>(axis);
      k = key;
      k[a] = key[a] - 1;
      interior &= word(k);
      k[a] = key[a] + 1;
      interior &= word(k);
    }
    surface += std::popcount(w & ~interior);
  }
  return surface;
}

bool OccupancyGrid::is_occupied(std::span<const double> point) const {
  Key key{};
  const auto i0 = static_cast<std::int64_t>(std::floor(point[0] / cell_));
  for (int a = 1; a < dim_; ++a)
    key[static_cast<std::size_t>(a)] =
        static_cast<std::int64_t>(std::floor(point[static_cast<std::size_t>(a)] / cell_));
  key[0] = floor_div64(i0);
  return (word(key) >> (i0 - 64 * key[0])) & 1ULL;
}

double default_cell(double r_min) { return r_min / 8.0; }

// ---------------------------------------------------------------------------
// Volumes

namespace {

double pick_cell(double r, const CompactSet& k, double cell) {
  if (cell > 0.0) return cell;
  double scale = r;
  if (k.kind() == CompactSet::Kind::Ball) scale = r + k.radius();
  if (k.kind() == CompactSet::Kind::Box) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < k.lo().size(); ++i) m = std::min(m, k.hi()[i] - k.lo()[i]);
    scale = std::max(r, m);
  }
  return scale > 0.0 ? default_cell(scale) : 0.0;
}

// Marks B_r(p) + K for one skeleton point p.
void mark_point(OccupancyGrid& grid, std::span<const double> p, double r, const CompactSet& k,
                std::vector<double>& lo, std::vector<double>& hi) {
  const std::size_t dim = p.size();
  switch (k.kind()) {
    case CompactSet::Kind::Points: {
      const auto& c = k.coords();
      for (std::size_t j = 0; j < c.size(); j += dim) {
        for (std::size_t a = 0; a < dim; ++a) lo[a] = p[a] + c[j + a];
        grid.mark_rounded_box(lo, lo, r);
      }
      break;
    }
    case CompactSet::Kind::Ball:
      for (std::size_t a = 0; a < dim; ++a) lo[a] = p[a] + k.coords()[a];
      grid.mark_rounded_box(lo, lo, r + k.radius());
      break;
    case CompactSet::Kind::Box:
      for (std::size_t a = 0; a < dim; ++a) {
        lo[a] = p[a] + k.lo()[a];
        hi[a] = p[a] + k.hi()[a];
      }
      grid.mark_rounded_box(lo, hi, r);
      break;
  }
}

}  // namespace

std::vector<double> sausage_volume_profile(const PathSkeleton& skeleton, double r,
                                           const CompactSet& k, double cell,
                                           std::span<const std::size_t> checkpoints) {
  if (r < 0.0) throw InvalidArgument("sausage radius must be >= 0");
  if (k.dim() != skeleton.dim()) throw InvalidArgument("compact set has wrong dimension");
  std::vector<double> out(checkpoints.size(), 0.0);
  cell = pick_cell(r, k, cell);
  if (cell == 0.0) return out;  // a finite set of points has volume 0
  OccupancyGrid grid(skeleton.dim(), cell);
  std::vector<double> lo(static_cast<std::size_t>(skeleton.dim())), hi(lo.size());
  std::size_t next = 0;
  for (std::size_t c = 0; c < checkpoints.size(); ++c) {
    if (checkpoints[c] >= skeleton.size()) throw InvalidArgument("checkpoint beyond skeleton");
    for (; next <= checkpoints[c]; ++next) mark_point(grid, skeleton.position(next), r, k, lo, hi);
    out[c] = grid.volume();
  }
  return out;
}

VolumeEstimate minkowski_sum_volume(const PathSkeleton& skeleton, double r, const CompactSet& k,
                                    double cell) {
  if (r < 0.0) throw InvalidArgument("sausage radius must be >= 0");
  if (k.dim() != skeleton.dim()) throw InvalidArgument("compact set has wrong dimension");
  VolumeEstimate v;
  v.method = VolumeMethod::GridOccupancy;
  cell = pick_cell(r, k, cell);
  v.resolution = cell;
  if (cell == 0.0 || skeleton.size() == 0) return v;
  OccupancyGrid grid(skeleton.dim(), cell);
  std::vector<double> lo(static_cast<std::size_t>(skeleton.dim())), hi(lo.size());
  for (std::size_t i = 0; i < skeleton.size(); ++i) mark_point(grid, skeleton.position(i), r, k, lo, hi);
  v.value = grid.volume();
  v.half_width = grid.tolerance();
  return v;
}

VolumeEstimate sausage_volume(const PathSkeleton& skeleton, double r, double cell) {
  return minkowski_sum_volume(skeleton, r, CompactSet::origin(skeleton.dim()), cell);
}

VolumeEstimate sausage_volume_hit_or_miss(const PathSkeleton& skeleton, double r, Rng& rng,
                                          double target_rel_ci, std::size_t max_samples) {
  if (r < 0.0) throw InvalidArgument("sausage radius must be >= 0");
  VolumeEstimate v;
  v.method = VolumeMethod::HitOrMiss;
  const auto dim = static_cast<std::size_t>(skeleton.dim());
  if (r == 0.0 || skeleton.size() == 0) return v;
  std::vector<double> lo(dim, std::numeric_limits<double>::infinity());
  std::vector<double> hi(dim, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < skeleton.size(); ++i)
    for (std::size_t a = 0; a < dim; ++a) {
      lo[a] = std::min(lo[a], skeleton.position(i)[a] - r);
      hi[a] = std::max(hi[a], skeleton.position(i)[a] + r);
    }
  double box = 1.0;
  for (std::size_t a = 0; a < dim; ++a) box *= hi[a] - lo[a];

  // Bucket the skeleton points by cells of side r for near-point queries.
  using Key = std::array<std::int64_t, OccupancyGrid::kMaxDim>;
  if (dim > static_cast<std::size_t>(OccupancyGrid::kMaxDim))
    throw InvalidArgument("hit-or-miss supports dim <= 4");
  absl::flat_hash_map<Key, std::vector<std::size_t>> buckets;
  auto key_of = [&](std::span<const double> x) {
    Key k{};
    for (std::size_t a = 0; a < dim; ++a) k[a] = static_cast<std::int64_t>(std::floor(x[a] / r));
    return k;
  };
  for (std::size_t i = 0; i < skeleton.size(); ++i) buckets[key_of(skeleton.position(i))].push_back(i);

  std::vector<std::int64_t> offsets;  // 3^dim neighbour offsets, flattened
  const std::size_t n_off = static_cast<std::size_t>(std::pow(3, dim));
  for (std::size_t o = 0; o < n_off; ++o) {
    std::size_t q = o;
    for (std::size_t a = 0; a < dim; ++a) {
      offsets.push_back(static_cast<std::int64_t>(q % 3) - 1);
      q /= 3;
    }
  }
  std::vector<double> x(dim);
  auto covered = [&]() {
    const Key base = key_of(x);
    for (std::size_t o = 0; o < n_off; ++o) {
      Key k = base;
      for (std::size_t a = 0; a < dim; ++a) k[a] += offsets[o * dim + a];
      const auto it = buckets.find(k);
      if (it == buckets.end()) continue;
      for (auto idx : it->second) {
        const auto p = skeleton.position(idx);
        double s = 0.0;
        for (std::size_t a = 0; a < dim; ++a) s += (x[a] - p[a]) * (x[a] - p[a]);
        if (s <= r * r) return true;
      }
    }
    return false;
  };
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t hits = 0, samples = 0;
  auto draw = [&](std::size_t count) {
    for (std::size_t s = 0; s < count; ++s) {
      for (std::size_t a = 0; a < dim; ++a) x[a] = lo[a] + (hi[a] - lo[a]) * unit(rng);
      hits += covered() ? 1 : 0;
    }
    samples += count;
  };
  draw(10'000);
  const double p = std::max(static_cast<double>(hits) / static_cast<double>(samples), 1e-6);
  const double needed = std::pow(kZ95 / target_rel_ci, 2) * (1.0 - p) / p;
  const auto total = std::min<std::size_t>(max_samples, static_cast<std::size_t>(std::ceil(needed)));
  if (total > samples) draw(total - samples);
  const double frac = static_cast<double>(hits) / static_cast<double>(samples);
  v.value = box * frac;
  v.half_width = box * kZ95 * std::sqrt(frac * (1.0 - frac) / static_cast<double>(samples));
  v.resolution = static_cast<double>(samples);
  return v;
}

PathSkeleton drift_shift(const PathSkeleton& skeleton, std::span<const double> offsets) {
  if (offsets.size() != skeleton.coords.size()) throw InvalidArgument("drift_shift: size mismatch");
  PathSkeleton out = skeleton;
  for (std::size_t i = 0; i < out.coords.size(); ++i) out.coords[i] += offsets[i];
  return out;
}

PathSkeleton drift_shift(const PathSkeleton& skeleton, const TargetMotion& g, Rng& rng) {
  const auto offsets = g.realise(skeleton.times, skeleton.params, rng);
  return drift_shift(skeleton, offsets);
}

std::size_t nearest_index(std::span<const double> times, double t) {
  const auto it = std::lower_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 0;
  if (it == times.end()) return times.size() - 1;
  const auto i = static_cast<std::size_t>(it - times.begin());
  return (t - times[i - 1] <= times[i] - t) ? i - 1 : i;
}

void jitter_to_grid(PathSkeleton& skeleton, double cell, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto d = static_cast<std::size_t>(skeleton.dim());
  std::vector<double> shift(d);
  for (auto& v : shift) v = cell * unit(rng);
  for (std::size_t i = 0; i < skeleton.coords.size(); ++i) skeleton.coords[i] += shift[i % d];
}

std::vector<SausageRate> sausage_rate_ladder(const StableParams& params, const RadiusLaw& law,
                                             std::span<const double> horizons, double h,
                                             std::size_t n, const ReplicaStreams& streams) {
  params.require_transient();
  if (horizons.empty()) return {};
  const double t_max = *std::max_element(horizons.begin(), horizons.end());
  const auto times = time_grid(t_max, h);
  std::vector<std::size_t> checkpoints;
  for (double t : horizons) checkpoints.push_back(nearest_index(times, t));
  std::vector<std::size_t> order(checkpoints.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return checkpoints[a] < checkpoints[b]; });
  std::vector<std::size_t> sorted;
  for (auto i : order) sorted.push_back(checkpoints[i]);

  const double cell = default_cell(law.min_radius());
  const auto origin = CompactSet::origin(params.dim);
  const auto per_replica = map_replicas(n, streams.threads, [&](std::size_t i) {
    Rng rng = streams.stream(i);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double radius = law.tail_inverse(1.0 - unit(rng));
    const std::vector<double> start(static_cast<std::size_t>(params.dim), 0.0);
    auto path = sample_path(params, start, times, rng);
    jitter_to_grid(path, cell, rng);
    return sausage_volume_profile(path, radius, origin, cell, sorted);
  });
  std::vector<SausageRate> out(horizons.size());
  for (std::size_t c = 0; c < order.size(); ++c) {
    const std::size_t which = order[c];
    const double t = times[sorted[c]];
    std::vector<double> rates(n);
    for (std::size_t i = 0; i < n; ++i) rates[i] = per_replica[i][c] / t;
    out[which] = {t, mean_ci(rates)};
  }
  return out;
}

SausageRate expected_sausage_rate(const StableParams& params, const RadiusLaw& law, double horizon,
                                  double h, std::size_t n, const ReplicaStreams& streams) {
  const double hs[] = {horizon};
  return sausage_rate_ladder(params, law, hs, h, n, streams).front();
}

HalvingCheck expected_sausage_rate_halving(const StableParams& params, const RadiusLaw& law,
                                           double horizon, double h, std::size_t n,
                                           const ReplicaStreams& streams) {
  return make_halving_check(
      expected_sausage_rate(params, law, horizon, h, n, streams.child("h")).rate,
      expected_sausage_rate(params, law, horizon, h / 2, n, streams.child("h/2")).rate);
}

}  // namespace dynbool
