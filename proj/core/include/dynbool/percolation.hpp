#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dynbool/detection.hpp"
#include "dynbool/field.hpp"
#include "dynbool/levy.hpp"
#include "dynbool/rng.hpp"
#include "dynbool/stats.hpp"
#include "dynbool/target.hpp"

namespace dynbool {

/// Connected components of the overlap graph |x_i - x_j| <= R_i + R_j.
/// Component ids are numbered by their smallest member, so two labelings of
/// the same partition compare equal.
struct ComponentLabeling {
  std::vector<std::size_t> labels;
  std::vector<std::size_t> sizes;
  std::size_t largest = 0;  // smallest id among the largest components

  std::size_t count() const { return sizes.size(); }
  std::size_t largest_size() const { return sizes.empty() ? 0 : sizes[largest]; }
  bool operator==(const ComponentLabeling&) const = default;
};

/// Bucket-grid union-find; supports dim <= 4.
ComponentLabeling components(std::span<const double> positions, std::span<const double> radii,
                             int dim);

/// All-pairs reference implementation.
ComponentLabeling components_brute_force(std::span<const double> positions,
                                         std::span<const double> radii, int dim);

/// Mean mass fraction of the largest component of a Poisson cloud in
/// [-W, W]^dim.
Estimate giant_fraction(double lambda, const RadiusLaw& law, int dim, double window,
                        std::size_t n, const ReplicaStreams& streams);

/// giant_fraction on an increasing lambda ladder. Every replica draws one
/// cloud at the largest lambda and thins it with independent marks, so the
/// clouds are nested across the ladder.
std::vector<Estimate> giant_fraction_ladder(std::span<const double> lambdas, const RadiusLaw& law,
                                            int dim, double window, std::size_t n,
                                            const ReplicaStreams& streams);

/// Probability that one component joins the faces x_0 = -W and x_0 = W of
/// [-W, W]^dim (a ball touches a face when it reaches it).
Estimate crossing_probability(double lambda, const RadiusLaw& law, int dim, double window,
                              std::size_t n, const ReplicaStreams& streams);

/// Crossing probabilities along a lambda ladder from nested clouds; the
/// per-replica crossing indicator is nondecreasing in lambda.
std::vector<Estimate> crossing_ladder(std::span<const double> lambdas, const RadiusLaw& law,
                                      int dim, double window, std::size_t n,
                                      const ReplicaStreams& streams);

struct LambdaCInterval {
  double lo = 0.0;        // crossing estimate significantly below 1/2
  double hi = 0.0;        // crossing estimate significantly above 1/2
  double midpoint = 0.0;  // bisection point of crossing = 1/2
  double window = 0.0;
  std::size_t replicas = 0;
  std::size_t evaluations = 0;
};

/// Bisection of the crossing probability at 1/2 on nested clouds. The
/// interval is widened to the lambdas whose Wilson band excludes 1/2.
/// Requires dim >= 2.
LambdaCInterval estimate_lambda_c(const RadiusLaw& law, int dim, double window, double tolerance,
                                  std::size_t n, const ReplicaStreams& streams);

struct DiscretisationSpec {
  double n_cut = 0.0;            // N
  double delta = 0.0;            // mark-partition width actually used
  double requested_delta = 0.0;
  std::size_t marks = 0;         // M
  bool delta_adjusted = false;
  std::vector<double> levels;    // radius of each mark class, decreasing
};

/// Partition f(N) + n delta, n = 0..M, of the radius marks. When (1 - f(N))
/// is not a multiple of delta, delta is shrunk to the nearest value that is.
DiscretisationSpec discretisation_spec(const RadiusLaw& law, double n_cut, double delta);

struct DiscretisedCloud {
  MarkedCloud cloud;                // retained particles, ids kept
  std::vector<std::size_t> mark;    // mark class of each retained particle
  std::vector<std::size_t> source;  // index into the input cloud
  DiscretisationSpec spec;
};

/// Drops particles with mark <= f(N) (radius >= N) and rounds the rest down:
/// a mark in (p_n, p_{n+1}] gets radius tail_inverse(p_{n+1}).
DiscretisedCloud discretize_radii(const MarkedCloud& cloud, const RadiusLaw& law, double n_cut,
                                  double delta);

struct PercolationSetup {
  double lambda = 2.0;
  RadiusLaw law = RadiusLaw::constant(1.0);
  StableParams params;
  TargetMotion target;
  int horizon = 10;        // integer T
  double step = 1.0;       // motion step; checks happen at integer times
  bool sub_integer = false;  // also check at every grid time
  std::size_t replicas = 1000;
  double window = 10.0;    // half-width of the simulation window
  std::optional<double> rho;              // giant mass-fraction floor, default theta/2
  std::optional<LambdaCInterval> lambda_c;  // refuse unless lambda > lambda_c->hi
};

struct PercolationResult {
  SurvivalCurve percolation;
  SurvivalCurve detection;  // same replicas and check times
  std::vector<std::size_t> first_perc;
  std::vector<std::size_t> first_det;
  double rho = 0.0;
  double theta = 0.0;
  double lambda_c_hi = 0.0;
};

/// T_perc: first check time at which the target lies within R_i of a particle
/// whose component is the largest in the window and carries at least rho of
/// the particles. T_det is recorded on the same replicas and check times.
PercolationResult simulate_percolation_time(const PercolationSetup& setup,
                                            const ReplicaStreams& streams);

struct GoodBoxReport {
  double volume = 0.0;
  double xi = 0.0;
  std::size_t marks = 0;
  std::size_t times = 0;
  std::size_t replicas = 0;
  double threshold = 0.0;     // (1 - xi) lambda V / M
  Estimate good_fraction;     // over replicas of the per-replica fraction
  double predicted_single = 0.0;  // P(Poisson(lambda V / M) >= threshold)^M
  std::vector<char> flags;    // replica 0, one per integer time 1..t
  std::vector<double> per_time;  // fraction of replicas good at each time
};

/// Count-based necessary condition for a good box: at every integer time
/// i = 1..t each of the M marks has at least (1 - xi) lambda V / M points in
/// the cube Q_V centred at the origin. Particles live on a periodic torus of
/// side `torus_factor` times the side of Q_V, which keeps every snapshot an
/// exact Poisson process.
GoodBoxReport good_box_fraction(double lambda, std::size_t marks, double xi, double volume,
                                std::size_t t, const StableParams& params, std::size_t replicas,
                                const ReplicaStreams& streams, double torus_factor = 4.0);

}  // namespace dynbool
