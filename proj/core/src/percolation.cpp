#include "dynbool/percolation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include <absl/container/flat_hash_map.h>

#include "dynbool/errors.hpp"
#include "dynbool/parallel.hpp"
#include "dynbool/sausage.hpp"

namespace dynbool {

namespace {

constexpr int kMaxDim = 4;
using CellKey = std::array<std::int64_t, kMaxDim>;

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), rank_(n, 0) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    if (rank_[a] == rank_[b]) ++rank_[a];
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<unsigned char> rank_;
};

ComponentLabeling canonical_labels(UnionFind& uf, std::size_t n) {
  ComponentLabeling out;
  out.labels.resize(n);
  std::vector<std::size_t> id_of_root(n, std::numeric_limits<std::size_t>::max());
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t r = uf.find(i);
    if (id_of_root[r] == std::numeric_limits<std::size_t>::max()) {
      id_of_root[r] = out.sizes.size();
      out.sizes.push_back(0);
    }
    out.labels[i] = id_of_root[r];
    ++out.sizes[id_of_root[r]];
  }
  for (std::size_t c = 1; c < out.sizes.size(); ++c)
    if (out.sizes[c] > out.sizes[out.largest]) out.largest = c;
  return out;
}

bool adjacent(std::span<const double> pos, std::span<const double> radii, std::size_t d,
              std::size_t i, std::size_t j) {
  double s2 = 0.0;
  for (std::size_t a = 0; a < d; ++a) {
    const double diff = pos[i * d + a] - pos[j * d + a];
    s2 += diff * diff;
  }
  const double reach = radii[i] + radii[j];
  return s2 <= reach * reach;
}

void check_snapshot(std::span<const double> positions, std::span<const double> radii, int dim) {
  if (dim < 1) throw InvalidArgument("components: dim must be >= 1");
  if (positions.size() != radii.size() * static_cast<std::size_t>(dim))
    throw InvalidArgument("components: positions and radii disagree in length");
}

}  // namespace

ComponentLabeling components(std::span<const double> positions, std::span<const double> radii,
                             int dim) {
  check_snapshot(positions, radii, dim);
  if (dim > kMaxDim) throw InvalidArgument("components supports dim <= 4");
  const std::size_t n = radii.size();
  const auto d = static_cast<std::size_t>(dim);
  UnionFind uf(n);
  if (n > 1) {
    double rmax = *std::max_element(radii.begin(), radii.end());
    const double cell = rmax > 0.0 ? 2.0 * rmax : 1.0;
    std::vector<CellKey> key(n);
    absl::flat_hash_map<CellKey, std::vector<std::size_t>> grid;
    grid.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      CellKey k{};
      for (std::size_t a = 0; a < d; ++a)
        k[a] = static_cast<std::int64_t>(std::floor(positions[i * d + a] / cell));
      key[i] = k;
      grid[k].push_back(i);
    }
    std::size_t offsets = 1;
    for (std::size_t a = 0; a < d; ++a) offsets *= 3;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t o = 0; o < offsets; ++o) {
        CellKey k = key[i];
        std::size_t q = o;
        for (std::size_t a = 0; a < d; ++a) {
          k[a] += static_cast<std::int64_t>(q % 3) - 1;
          q /= 3;
        }
        const auto it = grid.find(k);
        if (it == grid.end()) continue;
        for (std::size_t j : it->second)
          if (j > i && adjacent(positions, radii, d, i, j)) uf.unite(i, j);
      }
    }
  }
  return canonical_labels(uf, n);
}

ComponentLabeling components_brute_force(std::span<const double> positions,
                                         std::span<const double> radii, int dim) {
  check_snapshot(positions, radii, dim);
  const std::size_t n = radii.size();
  const auto d = static_cast<std::size_t>(dim);
  UnionFind uf(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (adjacent(positions, radii, d, i, j)) uf.unite(i, j);
  return canonical_labels(uf, n);
}

namespace {

// One replica of nested clouds: a cloud at lambda_max plus thinning marks.
struct NestedCloud {
  MarkedCloud cloud;
  std::vector<double> thin;
};

NestedCloud nested_cloud(double lambda_max, const RadiusLaw& law, int dim, double window,
                         Rng& rng) {
  NestedCloud nc{sample_cloud(lambda_max, window, law, dim, rng), {}};
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  nc.thin.resize(nc.cloud.size());
  for (auto& v : nc.thin) v = unit(rng);
  return nc;
}

// Positions and radii of the particles kept at intensity lambda.
void thinned(const NestedCloud& nc, double keep, std::vector<double>& pos,
             std::vector<double>& radii) {
  const auto d = static_cast<std::size_t>(nc.cloud.dim);
  pos.clear();
  radii.clear();
  for (std::size_t i = 0; i < nc.cloud.size(); ++i) {
    if (!(nc.thin[i] < keep)) continue;
    radii.push_back(nc.cloud.radii[i]);
    for (std::size_t a = 0; a < d; ++a) pos.push_back(nc.cloud.x0[i * d + a]);
  }
}

double largest_fraction(std::span<const double> pos, std::span<const double> radii, int dim) {
  if (radii.empty()) return 0.0;
  const auto lab = components(pos, radii, dim);
  return static_cast<double>(lab.largest_size()) / static_cast<double>(radii.size());
}

bool crosses(std::span<const double> pos, std::span<const double> radii, int dim, double window) {
  if (radii.empty()) return false;
  const auto d = static_cast<std::size_t>(dim);
  const auto lab = components(pos, radii, dim);
  std::vector<unsigned char> touch(lab.count(), 0);
  for (std::size_t i = 0; i < radii.size(); ++i) {
    const double x = pos[i * d];
    if (x - radii[i] <= -window) touch[lab.labels[i]] |= 1;
    if (x + radii[i] >= window) touch[lab.labels[i]] |= 2;
  }
  return std::any_of(touch.begin(), touch.end(), [](unsigned char t) { return t == 3; });
}

void check_ladder(std::span<const double> lambdas) {
  if (lambdas.empty()) throw InvalidArgument("lambda ladder is empty");
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    if (!(lambdas[i] >= 0.0)) throw InvalidArgument("lambda ladder must be nonnegative");
    if (i > 0 && lambdas[i] < lambdas[i - 1])
      throw InvalidArgument("lambda ladder must be nondecreasing");
  }
}

template <class Stat>
std::vector<Estimate> ladder(std::span<const double> lambdas, const RadiusLaw& law, int dim,
                             double window, std::size_t n, const ReplicaStreams& streams,
                             Stat stat) {
  check_ladder(lambdas);
  law.validate(dim);
  const double lmax = lambdas.back();
  const auto rows = map_replicas(n, streams.threads, [&](std::size_t rep) {
    Rng rng = streams.stream(rep);
    std::vector<double> out(lambdas.size(), 0.0);
    if (lmax <= 0.0) return out;
    const auto nc = nested_cloud(lmax, law, dim, window, rng);
    std::vector<double> pos, radii;
    for (std::size_t k = 0; k < lambdas.size(); ++k) {
      thinned(nc, lambdas[k] / lmax, pos, radii);
      out[k] = stat(pos, radii);
    }
    return out;
  });
  std::vector<Estimate> est;
  std::vector<double> col(n);
  for (std::size_t k = 0; k < lambdas.size(); ++k) {
    for (std::size_t r = 0; r < n; ++r) col[r] = rows[r][k];
    est.push_back(mean_ci(col));
  }
  return est;
}

}  // namespace

std::vector<Estimate> giant_fraction_ladder(std::span<const double> lambdas, const RadiusLaw& law,
                                            int dim, double window, std::size_t n,
                                            const ReplicaStreams& streams) {
  return ladder(lambdas, law, dim, window, n, streams,
                [dim](const std::vector<double>& p, const std::vector<double>& r) {
                  return largest_fraction(p, r, dim);
                });
}

Estimate giant_fraction(double lambda, const RadiusLaw& law, int dim, double window,
                        std::size_t n, const ReplicaStreams& streams) {
  const double l[] = {lambda};
  return giant_fraction_ladder(l, law, dim, window, n, streams).front();
}

std::vector<Estimate> crossing_ladder(std::span<const double> lambdas, const RadiusLaw& law,
                                      int dim, double window, std::size_t n,
                                      const ReplicaStreams& streams) {
  return ladder(lambdas, law, dim, window, n, streams,
                [dim, window](const std::vector<double>& p, const std::vector<double>& r) {
                  return crosses(p, r, dim, window) ? 1.0 : 0.0;
                });
}

Estimate crossing_probability(double lambda, const RadiusLaw& law, int dim, double window,
                              std::size_t n, const ReplicaStreams& streams) {
  const double l[] = {lambda};
  return crossing_ladder(l, law, dim, window, n, streams).front();
}

LambdaCInterval estimate_lambda_c(const RadiusLaw& law, int dim, double window, double tolerance,
                                  std::size_t n, const ReplicaStreams& streams) {
  if (dim < 2) throw DomainError("estimate_lambda_c needs dim >= 2");
  if (!(tolerance > 0.0)) throw InvalidArgument("estimate_lambda_c: tolerance must be positive");
  if (n < 10) throw InvalidArgument("estimate_lambda_c: needs at least 10 replicas");
  law.validate(dim);

  LambdaCInterval out;
  out.window = window;
  out.replicas = n;
  // Twice the ball-filling density is supercritical in every dimension >= 2.
  double lmax = 2.0 / ball_volume(dim, 1.0) / law.moment(dim);
  std::vector<NestedCloud> clouds;
  auto count = [&](double lambda) {
    ++out.evaluations;
    std::vector<double> pos, radii;
    std::size_t c = 0;
    for (const auto& nc : clouds) {
      thinned(nc, lambda / lmax, pos, radii);
      c += crosses(pos, radii, dim, window);
    }
    return c;
  };
  for (int attempt = 0;; ++attempt) {
    clouds = map_replicas(n, streams.threads, [&](std::size_t rep) {
      Rng rng = streams.child("lmax" + std::to_string(attempt)).stream(rep);
      return nested_cloud(lmax, law, dim, window, rng);
    });
    if (wilson_interval(count(lmax), n).lo > 0.5) break;
    if (attempt == 6) throw NumericFailure("estimate_lambda_c: no supercritical bracket found");
    lmax *= 2.0;
  }

  auto bisect = [&](double lo, double hi, auto above) {
    while (hi - lo > tolerance) {
      const double mid = 0.5 * (lo + hi);
      (above(count(mid)) ? hi : lo) = mid;
    }
    return std::pair{lo, hi};
  };
  const auto half = bisect(0.0, lmax, [&](std::size_t c) { return 2 * c >= n; });
  out.midpoint = 0.5 * (half.first + half.second);
  out.lo = bisect(0.0, out.midpoint,
                  [&](std::size_t c) { return !(wilson_interval(c, n).hi < 0.5); })
               .first;
  out.hi = bisect(out.midpoint, lmax,
                  [&](std::size_t c) { return wilson_interval(c, n).lo > 0.5; })
               .second;
  return out;
}

DiscretisationSpec discretisation_spec(const RadiusLaw& law, double n_cut, double delta) {
  if (!(n_cut > 0.0)) throw InvalidArgument("discretisation: N must be positive");
  if (!(delta > 0.0 && delta <= 1.0)) throw InvalidArgument("discretisation: delta must lie in (0, 1]");
  const double f_n = law.tail(n_cut);
  const double span = 1.0 - f_n;
  if (!(span > 0.0)) throw InvalidArgument("discretisation: every radius exceeds N");
  DiscretisationSpec s;
  s.n_cut = n_cut;
  s.requested_delta = delta;
  const double k = span / delta;
  const double nearest = std::max(1.0, std::round(k));
  if (std::abs(k - nearest) > 1e-9 * std::max(1.0, k)) s.delta_adjusted = true;
  s.marks = static_cast<std::size_t>(nearest);
  s.delta = span / nearest;
  for (std::size_t m = 0; m < s.marks; ++m) {
    const double p = m + 1 == s.marks ? 1.0 : f_n + static_cast<double>(m + 1) * s.delta;
    s.levels.push_back(law.tail_inverse(p));
  }
  return s;
}

DiscretisedCloud discretize_radii(const MarkedCloud& cloud, const RadiusLaw& law, double n_cut,
                                  double delta) {
  DiscretisedCloud out;
  out.spec = discretisation_spec(law, n_cut, delta);
  const auto& s = out.spec;
  const double f_n = law.tail(n_cut);
  const auto d = static_cast<std::size_t>(cloud.dim);
  out.cloud.dim = cloud.dim;
  out.cloud.lambda = cloud.lambda;
  out.cloud.window_halfwidth = cloud.window_halfwidth;
  auto point = [&](std::size_t m) {
    return m >= s.marks ? 1.0 : f_n + static_cast<double>(m) * s.delta;
  };
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const double u = cloud.marks[i];
    if (u <= f_n) continue;
    auto m = static_cast<std::size_t>(
        std::clamp(std::ceil((u - f_n) / s.delta) - 1.0, 0.0, static_cast<double>(s.marks - 1)));
    while (m > 0 && u <= point(m)) --m;
    while (m + 1 < s.marks && u > point(m + 1)) ++m;
    out.cloud.ids.push_back(cloud.ids[i]);
    for (std::size_t a = 0; a < d; ++a) out.cloud.x0.push_back(cloud.x0[i * d + a]);
    out.cloud.radii.push_back(std::min(s.levels[m], cloud.radii[i]));
    out.cloud.marks.push_back(u);
    out.mark.push_back(m);
    out.source.push_back(i);
  }
  return out;
}

PercolationResult simulate_percolation_time(const PercolationSetup& setup,
                                            const ReplicaStreams& streams) {
  const auto& p = setup.params;
  p.validate();
  setup.law.validate(p.dim);
  if (!(setup.lambda > 0.0)) throw InvalidArgument("percolation: lambda must be positive");
  if (setup.horizon < 1) throw InvalidArgument("percolation: horizon must be an integer >= 1");
  if (!(setup.step > 0.0 && setup.step <= 1.0)) throw InvalidArgument("percolation: step must lie in (0, 1]");
  const auto sub = static_cast<std::size_t>(std::llround(1.0 / setup.step));
  if (std::abs(static_cast<double>(sub) * setup.step - 1.0) > 1e-9)
    throw InvalidArgument("percolation: 1/step must be an integer");

  PercolationResult res;
  res.lambda_c_hi = setup.lambda_c
                        ? setup.lambda_c->hi
                        : estimate_lambda_c(setup.law, p.dim, std::min(setup.window, 10.0),
                                            0.01, 100, streams.child("lambda_c"))
                              .hi;
  if (!(setup.lambda > res.lambda_c_hi))
    throw DomainError("percolation: lambda " + std::to_string(setup.lambda) +
                      " is not above the critical interval (upper end " +
                      std::to_string(res.lambda_c_hi) + ")");
  res.theta = giant_fraction(setup.lambda, setup.law, p.dim, setup.window, 50,
                             streams.child("theta"))
                  .value;
  res.rho = setup.rho.value_or(0.5 * res.theta);

  const std::size_t steps = sub * static_cast<std::size_t>(setup.horizon);
  std::vector<double> grid(steps + 1);
  for (std::size_t k = 0; k <= steps; ++k)
    grid[k] = static_cast<double>(k) / static_cast<double>(sub);
  std::vector<std::size_t> check_grid;
  for (std::size_t k = 0; k <= steps; ++k)
    if (setup.sub_integer || k % sub == 0) check_grid.push_back(k);
  std::vector<double> check_times;
  for (auto k : check_grid) check_times.push_back(grid[k]);
  const std::size_t never = check_grid.size();
  const auto d = static_cast<std::size_t>(p.dim);

  struct Firsts {
    std::size_t det, perc;
  };
  const auto per = map_replicas(setup.replicas, streams.threads, [&](std::size_t rep) -> Firsts {
    Rng rng = streams.stream(rep);
    const auto cloud = sample_cloud(setup.lambda, setup.window, setup.law, p.dim, rng);
    const auto g = setup.target.realise(grid, p, rng);
    std::vector<double> x = cloud.x0;
    std::vector<double> inc(d);
    Firsts f{never, never};
    std::vector<std::size_t> detectors;
    std::size_t c = 0;
    for (std::size_t k = 0; k <= steps && f.perc == never; ++k) {
      if (k > 0) {
        const double dt = grid[k] - grid[k - 1];
        for (std::size_t i = 0; i < cloud.size(); ++i) {
          sample_increment(p, dt, rng, inc);
          for (std::size_t a = 0; a < d; ++a) x[i * d + a] += inc[a];
        }
      }
      if (c == check_grid.size() || check_grid[c] != k) continue;
      const std::size_t idx = c++;
      detectors.clear();
      for (std::size_t i = 0; i < cloud.size(); ++i) {
        double s2 = 0.0;
        for (std::size_t a = 0; a < d; ++a) {
          const double diff = x[i * d + a] - g[k * d + a];
          s2 += diff * diff;
        }
        if (s2 <= cloud.radii[i] * cloud.radii[i]) detectors.push_back(i);
      }
      if (detectors.empty()) continue;
      if (f.det == never) f.det = idx;
      const auto lab = components(x, cloud.radii, p.dim);
      const double frac =
          static_cast<double>(lab.largest_size()) / static_cast<double>(cloud.size());
      if (frac < res.rho) continue;
      for (auto i : detectors)
        if (lab.labels[i] == lab.largest) {
          f.perc = idx;
          break;
        }
    }
    return f;
  });

  std::vector<std::size_t> all(check_grid.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  for (const auto& f : per) {
    res.first_det.push_back(f.det);
    res.first_perc.push_back(f.perc);
  }
  res.percolation = survival_from_first_hits(res.first_perc, check_times, all);
  res.detection = survival_from_first_hits(res.first_det, check_times, all);
  return res;
}

GoodBoxReport good_box_fraction(double lambda, std::size_t marks, double xi, double volume,
                                std::size_t t, const StableParams& params, std::size_t replicas,
                                const ReplicaStreams& streams, double torus_factor) {
  params.validate();
  if (!(lambda > 0.0)) throw InvalidArgument("good_box_fraction: lambda must be positive");
  if (marks < 1) throw InvalidArgument("good_box_fraction: M must be >= 1");
  if (!(xi > 0.0 && xi < 1.0)) throw InvalidArgument("good_box_fraction: xi must lie in (0, 1)");
  if (!(volume > 0.0)) throw InvalidArgument("good_box_fraction: V must be positive");
  if (t < 1) throw InvalidArgument("good_box_fraction: t must be an integer >= 1");
  if (replicas < 1) throw InvalidArgument("good_box_fraction: needs at least one replica");
  if (!(torus_factor >= 1.0)) throw InvalidArgument("good_box_fraction: torus factor must be >= 1");

  const int dim = params.dim;
  const auto d = static_cast<std::size_t>(dim);
  const double side = std::pow(volume, 1.0 / dim);
  const double torus = torus_factor * side;
  GoodBoxReport rep;
  rep.volume = volume;
  rep.xi = xi;
  rep.marks = marks;
  rep.times = t;
  rep.replicas = replicas;
  rep.threshold = (1.0 - xi) * lambda * volume / static_cast<double>(marks);
  rep.predicted_single =
      std::pow(poisson_tail(lambda * volume / static_cast<double>(marks),
                            static_cast<std::int64_t>(std::ceil(rep.threshold))),
               static_cast<double>(marks));

  const auto flags = map_replicas(replicas, streams.threads, [&](std::size_t r) {
    Rng rng = streams.stream(r);
    std::poisson_distribution<std::size_t> count(lambda * std::pow(torus, dim));
    const std::size_t n = count(rng);
    std::uniform_real_distribution<double> pos(-0.5 * torus, 0.5 * torus);
    std::uniform_int_distribution<std::size_t> mark(0, marks - 1);
    std::vector<double> x(n * d);
    std::vector<std::size_t> m(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t a = 0; a < d; ++a) x[i * d + a] = pos(rng);
      m[i] = mark(rng);
    }
    std::vector<char> good(t, 0);
    std::vector<double> inc(d);
    std::vector<std::size_t> per_mark(marks);
    for (std::size_t step = 0; step < t; ++step) {
      std::fill(per_mark.begin(), per_mark.end(), 0);
      for (std::size_t i = 0; i < n; ++i) {
        sample_increment(params, 1.0, rng, inc);
        bool inside = true;
        for (std::size_t a = 0; a < d; ++a) {
          double& c = x[i * d + a];
          c += inc[a];
          c -= torus * std::floor(c / torus + 0.5);
          inside = inside && std::abs(c) <= 0.5 * side;
        }
        if (inside) ++per_mark[m[i]];
      }
      good[step] = std::all_of(per_mark.begin(), per_mark.end(), [&](std::size_t c) {
        return static_cast<double>(c) >= rep.threshold;
      });
    }
    return good;
  });

  std::vector<double> frac(replicas);
  rep.per_time.assign(t, 0.0);
  for (std::size_t r = 0; r < replicas; ++r) {
    frac[r] = static_cast<double>(std::count(flags[r].begin(), flags[r].end(), 1)) /
              static_cast<double>(t);
    for (std::size_t i = 0; i < t; ++i) rep.per_time[i] += flags[r][i];
  }
  for (auto& v : rep.per_time) v /= static_cast<double>(replicas);
  rep.good_fraction = mean_ci(frac);
  rep.flags = flags.front();
  return rep;
}

}  // namespace dynbool
