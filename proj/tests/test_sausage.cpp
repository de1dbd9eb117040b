#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "dynbool/errors.hpp"
#include "dynbool/sausage.hpp"

using namespace dynbool;
using std::numbers::pi;

namespace {

PathSkeleton fixed_path(int dim, std::vector<double> coords) {
  PathSkeleton p;
  p.params = {1.5, dim};
  p.coords = std::move(coords);
  for (std::size_t i = 0; i < p.coords.size() / static_cast<std::size_t>(dim); ++i)
    p.times.push_back(static_cast<double>(i));
  return p;
}

}  // namespace

TEST_CASE("capacity constant") {
  CHECK(std::abs(capacity_constant(1.0, 2) - 2.0 * pi) < 1e-12);
  CHECK(std::abs(capacity_constant(2.0, 3) - 4.0 * pi) < 1e-12);
  CHECK(capacity_constant(1.0, 3) == doctest::Approx(2.0 * pi * pi));
  CHECK_THROWS_AS(capacity_constant(2.0, 2), DomainError);
  CHECK_THROWS_AS(capacity_constant(1.0, 1), DomainError);
  CHECK_THROWS_AS(capacity_constant(0.0, 3), InvalidArgument);
}

TEST_CASE("ball volume") {
  CHECK(ball_volume(1, 1.5) == doctest::Approx(3.0));
  CHECK(ball_volume(2, 1.0) == doctest::Approx(pi));
  CHECK(ball_volume(3, 2.0) == doctest::Approx(32.0 * pi / 3.0));
  CHECK(ball_volume(4, 1.0) == doctest::Approx(pi * pi / 2.0));
}

TEST_CASE("occupancy grid: single ball and idempotence") {
  OccupancyGrid g(2, 1.0 / 64.0);
  const std::vector<double> c{0.3, -0.2};
  const auto added = g.mark_ball(c, 1.0);
  CHECK(added == g.occupied());
  CHECK(std::abs(g.volume() - pi) <= g.tolerance());
  CHECK(g.mark_ball(c, 1.0) == 0);
  CHECK(g.is_occupied(c));
  CHECK_FALSE(g.is_occupied(std::vector<double>{2.0, 2.0}));
  CHECK(g.surface_cells() > 0);
  CHECK_THROWS_AS(OccupancyGrid(5, 0.1), InvalidArgument);
  CHECK_THROWS_AS(OccupancyGrid(2, 0.0), InvalidArgument);
}

TEST_CASE("occupancy grid: rounded box") {
  // [0,2]x[0,1] dilated by 0.5: 2 + 0.5*perimeter + pi/4.
  OccupancyGrid g(2, 1.0 / 128.0);
  g.mark_rounded_box(std::vector<double>{0.0, 0.0}, std::vector<double>{2.0, 1.0}, 0.5);
  CHECK(std::abs(g.volume() - (2.0 + 3.0 + pi / 4.0)) <= g.tolerance());
  // 3-d unit ball and a 1-d interval.
  OccupancyGrid g3(3, 1.0 / 32.0);
  g3.mark_ball(std::vector<double>{0.0, 0.0, 0.0}, 1.0);
  CHECK(std::abs(g3.volume() - 4.0 * pi / 3.0) <= g3.tolerance());
  OccupancyGrid g1(1, 0.01);
  g1.mark_rounded_box(std::vector<double>{-1.0}, std::vector<double>{1.0}, 0.5);
  CHECK(g1.volume() == doctest::Approx(3.0).epsilon(0.01));
}

TEST_CASE("union of two disks") {
  // Disjoint: 2 pi; centres one apart: 4 pi/3 + sqrt(3)/2.
  const auto far = sausage_volume(fixed_path(2, {0, 0, 10, 0}), 1.0, 1.0 / 64.0);
  CHECK(std::abs(far.value - 2.0 * pi) <= far.half_width);
  const auto lens = sausage_volume(fixed_path(2, {0, 0, 1, 0}), 1.0, 1.0 / 64.0);
  CHECK(std::abs(lens.value - (4.0 * pi / 3.0 + std::sqrt(3.0) / 2.0)) <= lens.half_width);
  CHECK(far.method == VolumeMethod::GridOccupancy);
  CHECK(far.resolution == 1.0 / 64.0);
  CHECK(sausage_volume(fixed_path(2, {0, 0}), 0.0).value == 0.0);
  CHECK_THROWS_AS(sausage_volume(fixed_path(2, {0, 0}), -1.0), InvalidArgument);
}

TEST_CASE("hit-or-miss agrees with the grid") {
  auto rng = make_stream(5, "hom", 0);
  const auto path = fixed_path(2, {0, 0, 1, 0, 1.5, 0.8, 3, 1});
  const auto grid = sausage_volume(path, 1.0, 1.0 / 64.0);
  const auto hom = sausage_volume_hit_or_miss(path, 1.0, rng);
  CHECK(hom.method == VolumeMethod::HitOrMiss);
  CHECK(std::abs(hom.value - grid.value) <= hom.half_width + grid.half_width);
  CHECK(hom.half_width <= 0.012 * hom.value);
}

TEST_CASE("Minkowski sums with compact sets") {
  const auto path = fixed_path(2, {0, 0, 2, 0});
  // A ball K just inflates the radius.
  const auto with_ball = minkowski_sum_volume(path, 0.5, CompactSet::ball({0.0, 0.0}, 0.5), 1.0 / 64.0);
  const auto plain = sausage_volume(path, 1.0, 1.0 / 64.0);
  CHECK(with_ball.value == plain.value);
  // Two-point K {0, (0,5)} doubles a disjoint union.
  const auto two = minkowski_sum_volume(path, 1.0, CompactSet::points(2, {0, 0, 0, 5}), 1.0 / 64.0);
  CHECK(two.value == doctest::Approx(2.0 * plain.value).epsilon(1e-9));
  // Box K of side 1 at one point: 1 + 4 r + pi r^2.
  const auto box = minkowski_sum_volume(fixed_path(2, {0, 0}), 1.0,
                                        CompactSet::box({0.0, 0.0}, {1.0, 1.0}), 1.0 / 64.0);
  CHECK(std::abs(box.value - (5.0 + pi)) <= box.half_width);
  CHECK_THROWS_AS(minkowski_sum_volume(path, 1.0, CompactSet::origin(3)), InvalidArgument);
  CHECK_THROWS_AS(CompactSet::box({1.0}, {0.0}), InvalidArgument);
  CHECK_THROWS_AS(CompactSet::points(2, {1.0}), InvalidArgument);
  CHECK(CompactSet::box({0.0, -1.0}, {1.0, 2.0}).extent() == 3.0);
}

TEST_CASE("volume profile is nondecreasing and ends at the full volume") {
  auto rng = make_stream(8, "profile", 0);
  const std::vector<double> start{0.0, 0.0};
  const auto path = sample_skeleton({1.5, 2}, start, 2.0, 0.05, rng);
  const std::vector<std::size_t> cps{0, 5, 20, path.size() - 1};
  const auto prof = sausage_volume_profile(path, 1.0, CompactSet::origin(2), 1.0 / 8.0, cps);
  for (std::size_t i = 1; i < prof.size(); ++i) CHECK(prof[i] >= prof[i - 1]);
  CHECK(prof.back() == sausage_volume(path, 1.0, 1.0 / 8.0).value);
  const std::vector<std::size_t> beyond{path.size()};
  CHECK_THROWS_AS(sausage_volume_profile(path, 1.0, CompactSet::origin(2), 0.125, beyond),
                  InvalidArgument);
}

TEST_CASE("grid jitter removes the lattice bias") {
  // A unit disk centred on the lattice at cell 1/8 overcounts by a few percent;
  // averaged over random offsets the count is unbiased.
  const double cell = 0.125;
  const auto centred = sausage_volume(fixed_path(2, {0, 0}), 1.0, cell).value;
  CHECK(std::abs(centred - pi) > 0.02 * pi);
  double sum = 0.0;
  const int n = 4000;
  auto rng = make_stream(2, "jitter", 0);
  for (int i = 0; i < n; ++i) {
    auto p = fixed_path(2, {0, 0});
    jitter_to_grid(p, cell, rng);
    sum += sausage_volume(p, 1.0, cell).value;
  }
  CHECK(sum / n == doctest::Approx(pi).epsilon(0.004));
}

TEST_CASE("drift shift and nearest index") {
  const auto path = fixed_path(2, {0, 0, 1, 1, 2, 2});
  const auto g = TargetMotion::linear(2.0, {1.0, 0.0});
  auto rng = make_stream(1, "drift", 0);
  const auto shifted = drift_shift(path, g, rng);
  CHECK(shifted.position(2)[0] == doctest::Approx(2.0 + 4.0));
  CHECK(shifted.position(2)[1] == 2.0);
  CHECK_THROWS_AS(drift_shift(path, std::vector<double>{1.0}), InvalidArgument);
  const std::vector<double> t{0.0, 0.5, 1.0};
  CHECK(nearest_index(t, -1.0) == 0);
  CHECK(nearest_index(t, 0.7) == 1);
  CHECK(nearest_index(t, 0.8) == 2);
  CHECK(nearest_index(t, 9.0) == 2);
}

TEST_CASE("Brownian sausage mean volume") {
  // Generator Laplacian in d = 3: E|W_a(t)| = 4 pi a t + 8 a^2 sqrt(pi t) + 4 pi a^3 / 3.
  // A skeleton with step h behaves like the continuous sausage with the
  // radius shrunk by the Gaussian overshoot constant times sqrt(2h).
  const double t = 2.0, h = 0.005;
  auto vol = [&](double a) {
    return 4.0 * pi * a * t + 8.0 * a * a * std::sqrt(pi * t) + 4.0 * pi * a * a * a / 3.0;
  };
  const double exact = vol(1.0);
  const double shifted = vol(1.0 - 0.5825971579 * std::sqrt(2.0 * h));
  const auto r = expected_sausage_rate({2.0, 3}, RadiusLaw::constant(1.0), t, h, 150,
                                       ReplicaStreams{3, "wiener", 1});
  const double mean = r.rate.value * t;
  const double hw = r.rate.half_width * t;
  CAPTURE(hw);
  CHECK(mean < exact);
  CHECK(std::abs(mean - shifted) <= hw + 0.02 * shifted);
}

TEST_CASE("sausage rate ladder is thread-count invariant") {
  const std::vector<double> hs{2.0, 1.0};
  const auto law = RadiusLaw::uniform(1.0, 2.0);
  const auto a = sausage_rate_ladder({1.5, 2}, law, hs, 0.02, 40, ReplicaStreams{4, "lad", 1});
  const auto b = sausage_rate_ladder({1.5, 2}, law, hs, 0.02, 40, ReplicaStreams{4, "lad", 3});
  REQUIRE(a.size() == 2);
  CHECK(a[0].horizon == 2.0);
  CHECK(a[1].horizon == 1.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].rate.value == b[i].rate.value);
    CHECK(a[i].rate.half_width == b[i].rate.half_width);
  }
  CHECK_THROWS_AS(sausage_rate_ladder({2.0, 2}, law, hs, 0.02, 4, ReplicaStreams{}), DomainError);
}

TEST_CASE("Riesz capacity of the unit ball") {
  CHECK(riesz_capacity(1.0, 2) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(riesz_capacity(1.0, 3) == doctest::Approx(pi * pi).epsilon(1e-12));
  CHECK(riesz_capacity(2.0, 3) == doctest::Approx(capacity_constant(2.0, 3)).epsilon(1e-12));
  CHECK_THROWS_AS(riesz_capacity(2.0, 2), DomainError);
  // Cauchy motion in d = 3: the sausage slope settles quickly (d / alpha > 2).
  const double hs[] = {40.0};
  const auto r = sausage_rate_ladder({1.0, 3}, RadiusLaw::constant(1.0), hs, 0.01, 30,
                                     ReplicaStreams{6, "riesz", 1});
  CAPTURE(r[0].rate.half_width);
  CHECK(std::abs(r[0].rate.value - pi * pi) <= r[0].rate.half_width + 0.05 * pi * pi);
}
