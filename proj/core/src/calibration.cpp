#include "dynbool/calibration.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "dynbool/errors.hpp"
#include "dynbool/format.hpp"

namespace dynbool {

namespace {

std::string residual_table(const std::vector<CalibrationRow>& rows) {
  std::ostringstream s;
  s << "kind,r,t,estimate,ci,bound\n";
  for (const auto& r : rows)
    s << r.kind << ',' << format_double(r.r) << ',' << format_double(r.t) << ','
      << format_double(r.estimate.value) << ',' << format_double(r.estimate.half_width) << ','
      << format_double(r.bound) << '\n';
  return s.str();
}

}  // namespace

CalibrationReport calibrate(const StableParams& params, const CalibrationOptions& o,
                            const ReplicaStreams& streams) {
  params.validate();
  if (params.alpha >= 2.0)
    throw DomainError("calibrate: the escape bound is stated for alpha < 2 only");
  params.require_transient();
  if (o.replicas < 100) throw InvalidArgument("calibrate: needs at least 100 replicas");

  CalibrationReport rep;
  auto& c = rep.constants;
  c.alpha = params.alpha;
  c.dim = params.dim;
  c.replicas = o.replicas;
  c.step = o.step;
  const double a = params.alpha;

  std::vector<CalibrationRow> escape;
  double worst_rel = 0.0;
  for (double r : o.escape_radii)
    for (double t : o.escape_times) {
      CalibrationRow row{"escape", r, t, {}, 0.0};
      row.estimate = escape_probability(params, r, t, o.replicas, o.step,
                                        streams.child("escape/" + format_double(r) + "/" + format_double(t)));
      const double need = row.estimate.hi() * std::pow(r, a) / t;
      if (need > c.escape_c) {
        c.escape_c = need;
        worst_rel = row.estimate.value > 0.0 ? row.estimate.half_width / row.estimate.value : 1.0;
      }
      escape.push_back(row);
    }
  for (auto& row : escape) row.bound = c.escape_c * std::pow(row.r, -a) * row.t;
  rep.rows = escape;
  if (!(c.escape_c > 0.0) || worst_rel > o.tolerance)
    throw NumericFailure("calibrate: escape fit is too noisy\n" + residual_table(rep.rows));

  std::vector<CalibrationRow> hits;
  for (double x : o.hit_distances)
    for (double t : o.hit_times) {
      if (!(x / 6.0 - o.hit_radius > 0.0))
        throw InvalidArgument("calibrate: hitting distances must exceed 6 r");
      CalibrationRow row{"hit", x, t, {}, 0.0};
      row.estimate = hitting_probability(params, x, o.hit_radius, t, o.replicas, o.step,
                                         streams.child("hit/" + format_double(x) + "/" + format_double(t)));
      hits.push_back(row);
    }

  double best_score = std::numeric_limits<double>::infinity();
  for (double kappa : o.kappas)
    for (double cp : o.c_primes) {
      CalibratedBoundConstants trial = c;
      trial.hit_c = 1.0;
      trial.hit_kappa = kappa;
      trial.hit_c_prime = cp;
      double envelope = 0.0;
      std::vector<double> shape;
      for (const auto& row : hits) {
        const double l = row.r / 6.0 - o.hit_radius;
        shape.push_back(hitting_bound(params, row.r, o.hit_radius, row.t, trial, l).total);
        envelope = std::max(envelope, row.estimate.hi() / shape.back());
      }
      double score = 0.0;
      for (std::size_t i = 0; i < hits.size(); ++i)
        score += std::log(envelope * shape[i] / std::max(hits[i].estimate.hi(), 1e-300));
      if (score < best_score) {
        best_score = score;
        c.hit_c = envelope;
        c.hit_kappa = kappa;
        c.hit_c_prime = cp;
      }
    }
  for (auto& row : hits)
    row.bound = hitting_bound(params, row.r, o.hit_radius, row.t, c, row.r / 6.0 - o.hit_radius).total;
  rep.rows.insert(rep.rows.end(), hits.begin(), hits.end());
  if (!(c.hit_c > 0.0) || !std::isfinite(c.hit_c))
    throw NumericFailure("calibrate: hitting fit failed\n" + residual_table(rep.rows));
  return rep;
}

void write_constants_json(std::ostream& out, const CalibratedBoundConstants& c) {
  nlohmann::ordered_json j;
  j["alpha"] = c.alpha;
  j["dim"] = c.dim;
  j["escape_c"] = c.escape_c;
  j["hit_c"] = c.hit_c;
  j["hit_c_prime"] = c.hit_c_prime;
  j["hit_kappa"] = c.hit_kappa;
  j["replicas"] = c.replicas;
  j["step"] = c.step;
  out << j.dump(2) << '\n';
}

CalibratedBoundConstants read_constants_json(std::istream& in) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("constants", std::string("unreadable constants file: ") + e.what());
  }
  CalibratedBoundConstants c;
  auto get = [&](const char* key, auto& dst) {
    if (!j.contains(key)) throw SchemaError(std::string("constants.") + key, "missing field");
    try {
      j.at(key).get_to(dst);
    } catch (const nlohmann::json::exception&) {
      throw SchemaError(std::string("constants.") + key, "wrong type");
    }
  };
  get("alpha", c.alpha);
  get("dim", c.dim);
  get("escape_c", c.escape_c);
  get("hit_c", c.hit_c);
  get("hit_c_prime", c.hit_c_prime);
  get("hit_kappa", c.hit_kappa);
  get("replicas", c.replicas);
  get("step", c.step);
  return c;
}

}  // namespace dynbool
