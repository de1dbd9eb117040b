#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "dynbool/errors.hpp"
#include "dynbool/format.hpp"
#include "dynbool/parallel.hpp"
#include "dynbool/rng.hpp"
#include "dynbool/stats.hpp"

using namespace dynbool;

TEST_CASE("splitmix and FNV reference values") {
  // splitmix64 from state 0 and the FNV-1a offset basis / "a".
  CHECK(mix64(0) == 0xe220a8397b1dcdafULL);
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("derived seeds separate labs and replicas") {
  CHECK(derive_seed(7, "detect", 3) == derive_seed(7, "detect", 3));
  CHECK(derive_seed(7, "detect", 3) != derive_seed(7, "detect", 4));
  CHECK(derive_seed(7, "detect", 3) != derive_seed(7, "cover", 3));
  CHECK(derive_seed(7, "detect", 3) != derive_seed(8, "detect", 3));

  ReplicaStreams s{42, "lab", 4};
  auto a = s.stream(5), b = s.stream(5);
  CHECK(a() == b());
  CHECK(s.child("x").lab == "lab/x");
  CHECK(s.child("x").stream(0)() != s.stream(0)());
}

TEST_CASE("map_replicas keeps index order for any worker count") {
  auto f = [](std::size_t i) {
    auto rng = make_stream(1, "t", i);
    return static_cast<double>(rng() % 1000) + static_cast<double>(i);
  };
  const auto serial = map_replicas(257, 1, f);
  for (unsigned w : {2u, 3u, 8u}) CHECK(map_replicas(257, w, f) == serial);
  CHECK(map_replicas(0, 4, f).empty());
}

TEST_CASE("map_replicas propagates the first exception") {
  auto f = [](std::size_t i) -> int {
    if (i == 13) throw NumericFailure("boom");
    return 0;
  };
  CHECK_THROWS_AS(map_replicas(50, 4, f), NumericFailure);
  CHECK_THROWS_AS(map_replicas(50, 1, f), NumericFailure);
}

TEST_CASE("pairwise sum and sample moments") {
  std::vector<double> xs(100);
  std::iota(xs.begin(), xs.end(), 1.0);
  CHECK(pairwise_sum(xs) == 5050.0);

  const std::vector<double> v{1, 2, 3, 4};
  CHECK(sample_variance(v) == doctest::Approx(5.0 / 3.0));
  const auto e = mean_ci(v);
  CHECK(e.value == 2.5);
  CHECK(e.half_width == doctest::Approx(kZ95 * std::sqrt(5.0 / 12.0)));
  CHECK(e.n == 4);
  CHECK(mean_ci(std::vector<double>{}).n == 0);
}

TEST_CASE("Wilson interval") {
  // 5 of 10: textbook [0.2366, 0.7634].
  const auto w = wilson_interval(5, 10);
  CHECK(w.lo == doctest::Approx(0.2366).epsilon(1e-3));
  CHECK(w.hi == doctest::Approx(0.7634).epsilon(1e-3));
  CHECK(wilson_interval(0, 100).lo == 0.0);
  CHECK(wilson_interval(100, 100).hi == 1.0);
  CHECK(wilson_interval(0, 100).hi == doctest::Approx(0.0370).epsilon(1e-2));
  const auto empty = wilson_interval(0, 0);
  CHECK(empty.lo == 0.0);
  CHECK(empty.hi == 1.0);
}

TEST_CASE("linear fit") {
  const std::vector<double> x{0, 1, 2, 3, 4};
  std::vector<double> y;
  for (double t : x) y.push_back(1.0 + 3.0 * t);
  const auto f = linear_fit(x, y);
  CHECK(f.slope == doctest::Approx(3.0));
  CHECK(f.intercept == doctest::Approx(1.0));
  CHECK(f.r2 == doctest::Approx(1.0));
  CHECK(f.slope_stderr == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(linear_fit(std::vector<double>{1, 1}, std::vector<double>{0, 1}),
                  InvalidArgument);
  CHECK_THROWS_AS(linear_fit(std::vector<double>{1}, std::vector<double>{0}), InvalidArgument);
}

TEST_CASE("two-sample KS") {
  CHECK(ks_statistic({1, 2, 3}, {1, 2, 3}) == 0.0);
  CHECK(ks_statistic({1, 2, 3}, {4, 5, 6}) == 1.0);
  CHECK(ks_statistic({1, 2, 3, 4}, {3, 4, 5, 6}) == doctest::Approx(0.5));
  // c(0.05) = 1.358.
  CHECK(ks_critical(100, 100, 0.05) == doctest::Approx(1.358 * std::sqrt(0.02)).epsilon(1e-3));
}

TEST_CASE("binomial and Poisson helpers") {
  CHECK(fair_coin_consistent(500, 1000, 0.01));
  CHECK_FALSE(fair_coin_consistent(600, 1000, 0.01));
  CHECK(poisson_tail(2.0, 0) == 1.0);
  CHECK(poisson_tail(2.0, 1) == doctest::Approx(1.0 - std::exp(-2.0)));
  CHECK(poisson_tail(2.0, 2) == doctest::Approx(1.0 - 3.0 * std::exp(-2.0)));
  CHECK(poisson_tail(0.0, 1) == 0.0);

  // Counts drawn from the exact law pass; a shifted law fails.
  std::vector<std::int64_t> counts;
  auto rng = make_stream(3, "pois", 0);
  std::poisson_distribution<std::int64_t> pd(6.0);
  for (int i = 0; i < 4000; ++i) counts.push_back(pd(rng));
  CHECK(poisson_gof_pvalue(counts, 6.0) > 1e-3);
  CHECK(poisson_gof_pvalue(counts, 7.0) < 1e-6);
}

TEST_CASE("type-7 quantile") {
  CHECK(quantile({5, 1, 3, 2, 4}, 0.5) == 3.0);
  CHECK(quantile({1, 2, 3, 4, 5}, 0.1) == doctest::Approx(1.4));
  CHECK(quantile({1, 2, 3, 4, 5}, 1.0) == 5.0);
  CHECK_THROWS_AS(quantile({}, 0.5), InvalidArgument);
}

TEST_CASE("round-trip formatting") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(-0.0) == "0");
  CHECK(format_double(1e300) == "1e+300");
  CHECK(format_double(std::nan("")) == "nan");
  for (double v : {0.1, 1.0 / 3.0, 2.5e-17, 6.283185307179586})
    CHECK(parse_double(format_double(v)) == v);
  CHECK(parse_double(" +2.5 ") == 2.5);
  CHECK_THROWS_AS(parse_double("1.5x"), InvalidArgument);
  CHECK_THROWS_AS(parse_double(""), InvalidArgument);
  CHECK(parse_int("42") == 42);
  CHECK_THROWS_AS(parse_int("4.2"), InvalidArgument);
}
