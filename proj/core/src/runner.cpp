#include "dynbool/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <numbers>
#include <ostream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "dynbool/calibration.hpp"
#include "dynbool/coverage.hpp"
#include "dynbool/detection.hpp"
#include "dynbool/errors.hpp"
#include "dynbool/field.hpp"
#include "dynbool/format.hpp"
#include "dynbool/percolation.hpp"
#include "dynbool/sausage.hpp"

#ifndef DYNBOOL_VERSION
#define DYNBOOL_VERSION "0.0.0"
#endif

namespace dynbool {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

std::string tool_version() { return DYNBOOL_VERSION; }

namespace {

std::string default_threads() {
  if (const char* env = std::getenv("DYNBOOL_THREADS")) {
    try {
      if (parse_int(env) >= 1) return env;
    } catch (const InvalidArgument&) {
    }
  }
  return "1";
}

using F = FieldType;

std::vector<FieldSpec> common_fields() {
  return {
      {"seed", F::Seed, "1", "master seed"},
      {"threads", F::Integer, "", "worker threads (default $DYNBOOL_THREADS or 1)"},
      {"alpha", F::Real, "1.5", "stability index in (0, 2]"},
      {"d", F::Integer, "2", "spatial dimension"},
  };
}

std::vector<FieldSpec> planner_fields() {
  return {
      {"eps_trunc", F::Real, "0.01", "bound on expected omitted detectors"},
      {"constants", F::Text, "", "calibrated constants JSON (calibrated inline when empty)"},
      {"calibrate_n", F::Integer, "20000", "replicas for inline calibration"},
      {"window", F::Real, "", "fixed half-width beyond the target reach, bypasses the planner"},
  };
}

const std::map<std::string, std::vector<FieldSpec>, std::less<>>& schemas() {
  static const auto table = [] {
    std::map<std::string, std::vector<FieldSpec>, std::less<>> t;
    auto add = [&](const std::string& lab, std::vector<FieldSpec> own, bool planner = false) {
      auto all = common_fields();
      all.insert(all.end(), own.begin(), own.end());
      if (planner) {
        auto p = planner_fields();
        all.insert(all.end(), p.begin(), p.end());
      }
      t[lab] = std::move(all);
    };
    add("sample-path", {{"T", F::Real, "10", "horizon"},
                        {"h", F::Real, "0.01", "time step"},
                        {"start", F::RealList, "", "start point (origin when empty)"}});
    add("sausage", {{"radius", F::Text, "const:1", "radius law"},
                    {"T", F::RealList, "10,25,50", "horizons"},
                    {"h", F::Real, "0.01", "time step"},
                    {"n", F::Integer, "200", "replicas"}});
    add("detect", {{"lambda", F::Real, "0.5", "intensity"},
                   {"radius", F::Text, "const:1", "radius law"},
                   {"target", F::Text, "static", "static | linear:B[:psi] | levy"},
                   {"T", F::Real, "10", "horizon"},
                   {"h", F::Real, "0.01", "time step"},
                   {"n", F::Integer, "20000", "replicas"},
                   {"method", F::Text, "direct", "direct | void | both"},
                   {"report", F::RealList, "", "report times (51 even points when empty)"},
                   {"inner", F::Integer, "32", "inner paths per Levy target (void method)"}},
        true);
    add("cover", {{"lambda", F::Real, "1", "intensity"},
                  {"radius", F::Text, "const:1", "radius law"},
                  {"set", F::Text, "square", "segment | square | cube | cantor[:L]"},
                  {"k", F::RealList, "4,8,16,32", "scale ladder"},
                  {"eps", F::Real, "", "net resolution (0.1 x 10% radius quantile when empty)"},
                  {"h", F::Real, "0.05", "time step"},
                  {"n", F::Integer, "40", "replicas per k"}},
        true);
    add("percolate", {{"lambda", F::Real, "2", "intensity"},
                      {"radius", F::Text, "const:1", "radius law"},
                      {"target", F::Text, "static", "target motion"},
                      {"T", F::Integer, "10", "integer horizon"},
                      {"h", F::Real, "1", "motion step, 1/h integer"},
                      {"n", F::Integer, "1000", "replicas"},
                      {"window", F::Real, "10", "window half-width"},
                      {"rho", F::Real, "", "giant mass-fraction floor (theta/2 when empty)"},
                      {"sub_integer", F::Flag, "false", "also check between integer times"},
                      {"n_cut", F::Real, "", "radius truncation N"},
                      {"delta", F::Real, "", "mark-partition width"},
                      {"lambda_c_n", F::Integer, "100", "replicas for the lambda_c gate"}});
    add("goodbox", {{"lambda", F::Real, "1", "intensity"},
                    {"M", F::Integer, "4", "number of marks"},
                    {"xi", F::Real, "0.2", "thinning slack"},
                    {"V", F::Real, "2000", "box volume"},
                    {"t", F::Integer, "100", "integer times"},
                    {"n", F::Integer, "1", "replicas"},
                    {"torus", F::Real, "4", "torus side over box side"}});
    add("lambda-c", {{"radius", F::Text, "const:1", "radius law"},
                     {"window", F::Real, "10", "box half-width"},
                     {"tolerance", F::Real, "0.005", "bisection tolerance"},
                     {"n", F::Integer, "200", "replicas"},
                     {"doubling", F::Flag, "false", "repeat with the window doubled"}});
    add("plan-window", {{"lambda", F::Real, "0.5", "intensity"},
                        {"radius", F::Text, "const:1", "radius law"},
                        {"target", F::Text, "static", "target motion"},
                        {"T", F::Real, "10", "horizon"}},
        true);
    add("calibrate", {{"n", F::Integer, "20000", "replicas per grid point"},
                      {"h", F::Real, "0.01", "time step"},
                      {"tolerance", F::Real, "0.25", "accepted relative CI at the defining point"}});
    add("report-data", {{"lambda", F::Real, "0.05", "intensity"},
                        {"radius", F::Text, "const:1", "radius law"},
                        {"window", F::Real, "10", "window half-width"},
                        {"T", F::Real, "5", "horizon"},
                        {"h", F::Real, "0.01", "time step"}});
    return t;
  }();
  return table;
}

void check_type(const std::string& path, FieldType type, const std::string& v) {
  if (v.empty()) return;
  try {
    switch (type) {
      case F::Real: parse_double(v); break;
      case F::Integer: parse_int(v); break;
      case F::Seed:
        if (v.find_first_not_of("0123456789") != std::string::npos || v.size() > 20)
          throw InvalidArgument("not an unsigned 64-bit integer");
        std::stoull(v);
        break;
      case F::Flag:
        if (v != "true" && v != "false" && v != "1" && v != "0")
          throw InvalidArgument("expected true or false");
        break;
      case F::RealList: {
        std::stringstream s(v);
        std::string item;
        while (std::getline(s, item, ',')) parse_double(item);
        break;
      }
      case F::Text: break;
    }
  } catch (const std::exception& e) {
    throw SchemaError(path, "bad value '" + v + "' (" + e.what() + ")");
  }
}

}  // namespace

const std::vector<std::string>& lab_names() {
  static const std::vector<std::string> names{"sample-path", "sausage",  "detect",
                                              "cover",       "percolate", "goodbox",
                                              "lambda-c",    "plan-window", "calibrate",
                                              "report-data"};
  return names;
}

const std::vector<FieldSpec>& lab_schema(std::string_view lab) {
  const auto it = schemas().find(lab);
  if (it == schemas().end()) throw SchemaError("lab", "unknown lab '" + std::string(lab) + "'");
  return it->second;
}

KeyValues parse_config_text(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw SchemaError("config:" + std::to_string(e.line()), e.message());
  }
  KeyValues kv;
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      kv["common." + name] = node.data();
      continue;
    }
    for (const auto& [key, leaf] : node) {
      if (!leaf.empty()) throw SchemaError(name + "." + key, "nested sections are not supported");
      kv[name + "." + key] = leaf.data();
    }
  }
  return kv;
}

KeyValues read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("config", "cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

ResolvedConfig::ResolvedConfig(std::string lab, std::map<std::string, std::string> values)
    : lab_(std::move(lab)), values_(std::move(values)) {}

bool ResolvedConfig::has(const std::string& key) const {
  const auto it = values_.find(key);
  return it != values_.end() && !it->second.empty();
}

const std::string& ResolvedConfig::text(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw SchemaError(lab_ + "." + key, "not in the schema");
  return it->second;
}

double ResolvedConfig::real(const std::string& key) const {
  if (!has(key)) throw SchemaError(lab_ + "." + key, "required value is missing");
  return parse_double(text(key));
}

std::int64_t ResolvedConfig::integer(const std::string& key) const {
  if (!has(key)) throw SchemaError(lab_ + "." + key, "required value is missing");
  return parse_int(text(key));
}

std::uint64_t ResolvedConfig::seed() const { return std::stoull(text("seed")); }

unsigned ResolvedConfig::threads() const {
  const auto t = integer("threads");
  if (t < 1 || t > 1024) throw SchemaError(lab_ + ".threads", "must lie in [1, 1024]");
  return static_cast<unsigned>(t);
}

bool ResolvedConfig::flag(const std::string& key) const {
  const auto& v = text(key);
  return v == "true" || v == "1";
}

std::vector<double> ResolvedConfig::reals(const std::string& key) const {
  std::vector<double> out;
  std::stringstream s(text(key));
  std::string item;
  while (std::getline(s, item, ',')) out.push_back(parse_double(item));
  return out;
}

ResolvedConfig resolve_config(std::string_view lab, const KeyValues& file,
                              const std::map<std::string, std::string>& overrides) {
  const auto& schema = lab_schema(lab);
  const std::string name(lab);
  auto known = [&](const std::string& key) {
    return std::any_of(schema.begin(), schema.end(), [&](const FieldSpec& f) { return f.name == key; });
  };
  for (const auto& [path, value] : file) {
    const auto dot = path.find('.');
    const std::string section = path.substr(0, dot), key = path.substr(dot + 1);
    if (section != "common" && !schemas().contains(section))
      throw SchemaError(section, "unknown config section");
    if (section == name && !known(key)) throw SchemaError(path, "unknown key");
    if (section == "common") {
      const auto c = common_fields();
      const bool common_key =
          std::any_of(c.begin(), c.end(), [&](const FieldSpec& f) { return f.name == key; });
      bool any_lab = common_key;
      for (const auto& [l, s] : schemas())
        any_lab = any_lab || std::any_of(s.begin(), s.end(), [&](const FieldSpec& f) { return f.name == key; });
      if (!any_lab) throw SchemaError(path, "unknown key");
    }
  }
  for (const auto& [key, value] : overrides)
    if (!known(key)) throw SchemaError(name + "." + key, "unknown key");

  std::map<std::string, std::string> values;
  for (const auto& f : schema) {
    std::string v = f.name == "threads" ? default_threads() : f.fallback;
    if (auto it = file.find("common." + f.name); it != file.end()) v = it->second;
    if (auto it = file.find(name + "." + f.name); it != file.end()) v = it->second;
    if (auto it = overrides.find(f.name); it != overrides.end()) v = it->second;
    check_type(name + "." + f.name, f.type, v);
    values[f.name] = v;
  }
  return ResolvedConfig(name, std::move(values));
}

std::string config_hash(const ResolvedConfig& config) {
  std::string canon = "lab=" + config.lab() + "\n";
  for (const auto& [k, v] : config.values())
    if (k != "threads") canon += k + "=" + v + "\n";
  const std::uint64_t h = mix64(fnv1a(canon));
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 0; i < 16; ++i) out[15 - i] = digits[(h >> (4 * i)) & 0xf];
  return out;
}

namespace {

class Csv {
 public:
  Csv(const fs::path& path, const std::string& hash, const std::string& lab,
      std::initializer_list<std::string> columns)
      : out_(path, std::ios::binary) {
    if (!out_) throw NumericFailure("cannot write " + path.string());
    out_ << "# config_hash=" << hash << "\n# lab=" << lab << '\n';
    bool first = true;
    for (const auto& c : columns) {
      out_ << (first ? "" : ",") << c;
      first = false;
    }
    out_ << '\n';
  }
  template <class... Cells>
  void row(const Cells&... cells) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
    out_ << '\n';
  }

 private:
  static std::string cell(double v) { return format_double(v); }
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  template <class I>
    requires std::is_integral_v<I>
  static std::string cell(I v) { return std::to_string(v); }

  std::ofstream out_;
};

struct LabContext {
  const ResolvedConfig& cfg;
  fs::path out_dir;
  std::string hash;
  ReplicaStreams streams;
  std::ostream& log;
  std::vector<fs::path> files;
  Json summary = Json::object();
  Json constants = nullptr;
  Json extra = Json::object();

  fs::path file(const std::string& name) {
    files.push_back(out_dir / name);
    return files.back();
  }
  Csv csv(const std::string& name, std::initializer_list<std::string> columns) {
    return Csv(file(name), hash, cfg.lab(), columns);
  }
};

StableParams params_of(const ResolvedConfig& cfg) {
  StableParams p{cfg.real("alpha"), static_cast<int>(cfg.integer("d"))};
  try {
    p.validate();
  } catch (const InvalidArgument& e) {
    throw SchemaError(cfg.lab() + ".alpha", e.what());
  }
  return p;
}

RadiusLaw law_of(const ResolvedConfig& cfg, int dim) {
  try {
    auto law = RadiusLaw::parse(cfg.text("radius"));
    law.validate(dim);
    return law;
  } catch (const InvalidArgument& e) {
    throw SchemaError(cfg.lab() + ".radius", e.what());
  }
}

TargetMotion target_of(const ResolvedConfig& cfg, int dim) {
  try {
    return TargetMotion::parse(cfg.text("target"), dim);
  } catch (const InvalidArgument& e) {
    throw SchemaError(cfg.lab() + ".target", e.what());
  }
}

std::size_t count_of(const ResolvedConfig& cfg, const std::string& key) {
  const auto n = cfg.integer(key);
  if (n < 1) throw SchemaError(cfg.lab() + "." + key, "must be >= 1");
  return static_cast<std::size_t>(n);
}

Json constants_json(const CalibratedBoundConstants& c) {
  std::ostringstream s;
  write_constants_json(s, c);
  return Json::parse(s.str());
}

CalibratedBoundConstants constants_for(LabContext& ctx, const StableParams& p) {
  CalibratedBoundConstants c;
  if (ctx.cfg.has("constants")) {
    std::ifstream in(ctx.cfg.text("constants"));
    if (!in) throw SchemaError(ctx.cfg.lab() + ".constants", "cannot read " + ctx.cfg.text("constants"));
    c = read_constants_json(in);
    if (!c.matches(p))
      throw SchemaError(ctx.cfg.lab() + ".constants", "constants were calibrated for another (alpha, d)");
  } else {
    CalibrationOptions o;
    o.replicas = count_of(ctx.cfg, "calibrate_n");
    ctx.log << "calibrating bound constants inline (n=" << o.replicas << ")\n";
    c = calibrate(p, o, ctx.streams.child("calibrate")).constants;
  }
  ctx.constants = constants_json(c);
  return c;
}

// Brownian case: the sup of each coordinate over [0, T] has Gaussian tails
// with variance 2T, so the window margin m solves
// lambda * surface(W) * 2d * sqrt(pi d T) * exp(-m^2 / (4 d T)) = eps.
double gaussian_margin(int dim, double lambda, double inner, double horizon, double eps) {
  const double d = dim;
  const double surface = 2.0 * std::pow(std::numbers::pi, d / 2.0) / std::tgamma(d / 2.0);
  double m = 1.0;
  for (int it = 0; it < 50; ++it) {
    const double pre = lambda * surface * std::pow(inner + m, d - 1.0) * 2.0 * d *
                       std::sqrt(std::numbers::pi * d * horizon);
    m = std::sqrt(4.0 * d * horizon * std::max(std::log(std::max(pre, 1.0) / eps), 1.0));
  }
  return m;
}

// Window plans for nested horizons ending at `horizon`; a single plan when the
// window is fixed or the motion is Brownian.
std::vector<WindowPlan> window_for(LabContext& ctx, const StableParams& p, double lambda,
                                   const RadiusLaw& law, double horizon, double target_margin,
                                   std::optional<CalibratedBoundConstants>& constants) {
  const auto& cfg = ctx.cfg;
  std::vector<WindowPlan> plans;
  const double eps = cfg.real("eps_trunc");
  if (cfg.has("window")) {
    WindowPlan plan;
    // A fixed window is measured beyond the target's reach.
    if (!(cfg.real("window") > 0.0)) throw SchemaError(cfg.lab() + ".window", "must be positive");
    plan.halfwidth = cfg.real("window") + target_margin;
    plan.horizon = horizon;
    plan.eps_trunc = eps;
    plan.margin = target_margin;
    plans.push_back(plan);
  } else if (p.alpha >= 2.0) {
    WindowPlan plan;
    plan.horizon = horizon;
    plan.eps_trunc = eps;
    plan.radius_quantile = law.quantile(0.999);
    plan.margin = target_margin;
    plan.halfwidth = plan.radius_quantile + target_margin +
                     gaussian_margin(p.dim, lambda, plan.radius_quantile, horizon, eps);
    plans.push_back(plan);
  } else {
    if (!constants) constants = constants_for(ctx, p);
    PlanOptions o;
    o.target_displacement = target_margin;
    plans = plan_window_schedule(p, lambda, law, horizon, eps, *constants, o);
  }
  auto& out = ctx.extra["window_plan"] = Json::array();
  for (const auto& plan : plans)
    out.push_back({{"halfwidth", plan.halfwidth}, {"horizon", plan.horizon},
                   {"eps_trunc", plan.eps_trunc}, {"achieved", plan.achieved},
                   {"radius_quantile", plan.radius_quantile}, {"margin", plan.margin}});
  return plans;
}

double target_margin(LabContext& ctx, const StableParams& p, const TargetMotion& g, double horizon,
                     std::optional<CalibratedBoundConstants>& constants) {
  if (!g.is_random() || p.alpha >= 2.0) return g.displacement_allowance(p, horizon, 0.0);
  if (!constants && !ctx.cfg.has("window")) constants = constants_for(ctx, p);
  return constants ? g.displacement_allowance(p, horizon, constants->escape_c) : 0.0;
}

void write_survival(Csv& csv, const std::string& series, const SurvivalCurve& c) {
  for (std::size_t i = 0; i < c.times.size(); ++i)
    csv.row(series, c.times[i], c.survival[i], c.lo[i], c.hi[i], c.ci(i), c.log_survival[i]);
}

void write_rate(Csv& csv, const std::string& series, const RateFit& r, double reference) {
  std::string warning = r.warning;
  std::replace(warning.begin(), warning.end(), ',', ';');
  std::replace(warning.begin(), warning.end(), '\n', ' ');
  csv.row(series, r.rate, r.stderr_, r.t_lo, r.t_hi, r.points, reference, warning);
}

RateFit safe_rate(const SurvivalCurve& c) {
  try {
    return decay_rate(c);
  } catch (const std::exception& e) {
    RateFit r;
    r.rate = r.stderr_ = r.t_lo = r.t_hi = std::nan("");
    r.warning = e.what();
    return r;
  }
}

double static_rate(const StableParams& p, double lambda, const RadiusLaw& law) {
  if (!(p.dim > p.alpha)) return std::nan("");
  return lambda * capacity_constant(p.alpha, p.dim) * law.moment(p.dim - p.alpha);
}

void lab_sample_path(LabContext& ctx) {
  const auto p = params_of(ctx.cfg);
  std::vector<double> start = ctx.cfg.reals("start");
  if (start.empty()) start.assign(static_cast<std::size_t>(p.dim), 0.0);
  if (start.size() != static_cast<std::size_t>(p.dim))
    throw SchemaError("sample-path.start", "needs d coordinates");
  Rng rng = ctx.streams.stream(0);
  const auto path = sample_skeleton(p, start, ctx.cfg.real("T"), ctx.cfg.real("h"), rng);
  std::ofstream out(ctx.file("path.csv"), std::ios::binary);
  out << "# config_hash=" << ctx.hash << "\n# lab=sample-path\nt";
  for (int k = 0; k < p.dim; ++k) out << ",x" << k;
  out << '\n';
  for (std::size_t i = 0; i < path.size(); ++i) {
    out << format_double(path.times[i]);
    for (double v : path.position(i)) out << ',' << format_double(v);
    out << '\n';
  }
  ctx.summary["points"] = path.size();
}

void lab_report_data(LabContext& ctx) {
  const auto p = params_of(ctx.cfg);
  const auto law = law_of(ctx.cfg, p.dim);
  Rng rng = ctx.streams.stream(0);
  const auto cloud = sample_cloud(ctx.cfg.real("lambda"), ctx.cfg.real("window"), law, p.dim, rng);
  const auto times = time_grid(ctx.cfg.real("T"), ctx.cfg.real("h"));
  const auto paths = evolve(cloud, p, times, rng);
  {
    std::ofstream out(ctx.file("cloud.csv"), std::ios::binary);
    out << "# config_hash=" << ctx.hash << "\n# lab=report-data\n";
    write_cloud_csv(out, cloud);
  }
  std::ofstream out(ctx.file("trajectories.csv"), std::ios::binary);
  out << "# config_hash=" << ctx.hash << "\n# lab=report-data\nid,t";
  for (int k = 0; k < p.dim; ++k) out << ",x" << k;
  out << '\n';
  for (std::size_t i = 0; i < paths.size(); ++i)
    for (std::size_t j = 0; j < paths[i].size(); ++j) {
      out << cloud.ids[i] << ',' << format_double(paths[i].times[j]);
      for (double v : paths[i].position(j)) out << ',' << format_double(v);
      out << '\n';
    }
  ctx.summary["particles"] = cloud.size();
}

void lab_sausage(LabContext& ctx) {
  const auto p = params_of(ctx.cfg);
  p.require_transient();
  const auto law = law_of(ctx.cfg, p.dim);
  const auto horizons = ctx.cfg.reals("T");
  const auto ladder = sausage_rate_ladder(p, law, horizons, ctx.cfg.real("h"),
                                          count_of(ctx.cfg, "n"), ctx.streams);
  const double target = capacity_constant(p.alpha, p.dim) * law.moment(p.dim - p.alpha);
  auto csv = ctx.csv("sausage_rate.csv", {"T", "rate", "ci", "n", "target"});
  for (const auto& r : ladder) csv.row(r.horizon, r.rate.value, r.rate.half_width, r.rate.n, target);
  ctx.summary["target"] = target;
}

void lab_detect(LabContext& ctx) {
  const auto& cfg = ctx.cfg;
  const auto p = params_of(cfg);
  DetectionSetup s;
  s.params = p;
  s.lambda = cfg.real("lambda");
  s.law = law_of(cfg, p.dim);
  s.target = target_of(cfg, p.dim);
  s.horizon = cfg.real("T");
  s.step = cfg.real("h");
  s.replicas = count_of(cfg, "n");
  s.report_times = cfg.reals("report");
  if (s.report_times.empty())
    for (int i = 0; i <= 50; ++i) s.report_times.push_back(s.horizon * i / 50.0);
  const auto& method = cfg.text("method");
  if (method != "direct" && method != "void" && method != "both")
    throw SchemaError("detect.method", "expected direct, void or both");

  auto surv = ctx.csv("survival.csv", {"series", "t", "survival", "lo", "hi", "ci", "log_survival"});
  std::vector<std::pair<std::string, RateFit>> rates;
  if (method != "void") {
    std::optional<CalibratedBoundConstants> constants;
    const double margin = target_margin(ctx, p, s.target, s.horizon, constants);
    const auto plans = window_for(ctx, p, s.lambda, s.law, s.horizon, margin, constants);
    const auto curve = simulate_detection(s, plans, ctx.streams.child("direct"));
    write_survival(surv, to_string(SurvivalMethod::Direct), curve);
    rates.emplace_back(to_string(SurvivalMethod::Direct), safe_rate(curve));
  }
  if (method != "direct") {
    const auto curve = void_survival(s, CompactSet::origin(p.dim), ctx.streams.child("void"),
                                     count_of(cfg, "inner"));
    write_survival(surv, to_string(SurvivalMethod::VoidFormula), curve);
    rates.emplace_back(to_string(SurvivalMethod::VoidFormula), safe_rate(curve));
  }
  const double reference = s.target.kind() == TargetMotion::Kind::Static
                               ? static_rate(p, s.lambda, s.law)
                               : std::nan("");
  auto rate = ctx.csv("rate.csv", {"series", "rate", "stderr", "t_lo", "t_hi", "points",
                                   "reference", "warning"});
  for (const auto& [name, r] : rates) write_rate(rate, name, r, reference);
}

void lab_cover(LabContext& ctx) {
  const auto& cfg = ctx.cfg;
  const auto p = params_of(cfg);
  p.require_transient();
  CoverageSetup s;
  s.params = p;
  s.lambda = cfg.real("lambda");
  s.law = law_of(cfg, p.dim);
  try {
    s.set = TargetSet::parse(cfg.text("set"), p.dim);
  } catch (const InvalidArgument& e) {
    throw SchemaError("cover.set", e.what());
  }
  s.eps = cfg.has("eps") ? cfg.real("eps") : default_coverage_eps(s.law);
  s.step = cfg.real("h");
  s.replicas = count_of(cfg, "n");
  const auto ks = cfg.reals("k");
  std::optional<CalibratedBoundConstants> constants;
  std::vector<CoverageResult> results;
  for (double k : ks) {
    CoverageSetup sk = s;
    sk.k = k;
    sk.t_max = std::max(3.0 * predicted_coverage_time(sk), 4.0 * sk.step);
    CoverageResult r;
    for (int attempt = 0; attempt < 4; ++attempt) {
      const auto plans = window_for(ctx, p, sk.lambda, sk.law, sk.t_max, sk.set.half_extent(k), constants);
      r = simulate_coverage(sk, plans.back(), ctx.streams.child("k=" + format_double(k)));
      if (r.usable) break;
      sk.t_max *= 2.0;
    }
    results.push_back(std::move(r));
  }
  const double beta = s.set.nominal_dimension();
  const double target = beta / static_rate(p, s.lambda, s.law);
  auto csv = ctx.csv("coverage.csv", {"k", "log_k", "mean_upper", "ci_upper", "mean_lower", "ci_lower",
                                      "ratio_upper", "ratio_lower", "censor_upper", "censor_lower",
                                      "t_max", "target_ratio"});
  for (const auto& r : results) {
    const double lk = std::log(r.k);
    csv.row(r.k, lk, r.mean_upper.value, r.mean_upper.half_width, r.mean_lower.value,
            r.mean_lower.half_width, r.mean_upper.value / lk, r.mean_lower.value / lk,
            r.censor_upper, r.censor_lower, r.t_max, target);
  }
  ctx.summary["eps"] = s.eps;
  ctx.summary["target_ratio"] = target;
  if (results.size() >= 4 && std::all_of(ks.begin(), ks.end(), [](double k) { return k > 1.0; })) {
    const auto slope = coverage_slope(results, target);
    ctx.summary["slope"] = slope.slope;
    ctx.summary["slope_stderr"] = slope.slope_stderr;
    ctx.summary["ratio_decreasing"] = slope.ratio_decreasing;
  }
}

void lab_percolate(LabContext& ctx) {
  const auto& cfg = ctx.cfg;
  const auto p = params_of(cfg);
  PercolationSetup s;
  s.params = p;
  s.lambda = cfg.real("lambda");
  s.law = law_of(cfg, p.dim);
  s.target = target_of(cfg, p.dim);
  const auto horizon = cfg.integer("T");
  if (horizon < 1) throw SchemaError("percolate.T", "must be an integer >= 1");
  s.horizon = static_cast<int>(horizon);
  s.step = cfg.real("h");
  s.replicas = count_of(cfg, "n");
  s.window = cfg.real("window");
  s.sub_integer = cfg.flag("sub_integer");
  if (cfg.has("rho")) s.rho = cfg.real("rho");
  if (cfg.has("n_cut") != cfg.has("delta"))
    throw SchemaError("percolate.delta", "n_cut and delta must be given together");
  if (cfg.has("n_cut")) {
    // The discretised cloud is again a marked Poisson cloud: intensity
    // lambda (1 - f(N)) with the rounded radius levels as atoms.
    const auto spec = discretisation_spec(s.law, cfg.real("n_cut"), cfg.real("delta"));
    const double kept = 1.0 - s.law.tail(spec.n_cut);
    std::vector<double> probs(spec.marks, spec.delta / kept);
    s.law = RadiusLaw::discrete(spec.levels, probs);
    s.lambda *= kept;
    ctx.extra["discretisation"] = {{"N", spec.n_cut}, {"delta", spec.delta},
                                   {"requested_delta", spec.requested_delta}, {"M", spec.marks},
                                   {"delta_adjusted", spec.delta_adjusted}, {"levels", spec.levels}};
    if (spec.delta_adjusted)
      ctx.log << "delta adjusted from " << format_double(spec.requested_delta) << " to "
              << format_double(spec.delta) << '\n';
  }
  s.lambda_c = estimate_lambda_c(s.law, p.dim, std::min(s.window, 10.0), 0.01,
                                 count_of(cfg, "lambda_c_n"), ctx.streams.child("lambda_c"));
  const auto res = simulate_percolation_time(s, ctx.streams);
  auto surv = ctx.csv("percolation.csv", {"series", "t", "survival", "lo", "hi", "ci", "log_survival"});
  write_survival(surv, "percolation", res.percolation);
  write_survival(surv, "detection", res.detection);
  auto rate = ctx.csv("rate.csv", {"series", "rate", "stderr", "t_lo", "t_hi", "points",
                                   "reference", "warning"});
  write_rate(rate, "percolation", safe_rate(res.percolation), std::nan(""));
  write_rate(rate, "detection", safe_rate(res.detection), std::nan(""));
  ctx.summary["theta"] = res.theta;
  ctx.summary["rho"] = res.rho;
  ctx.summary["lambda_c"] = {s.lambda_c->lo, s.lambda_c->hi};
}

void lab_goodbox(LabContext& ctx) {
  const auto& cfg = ctx.cfg;
  const auto p = params_of(cfg);
  const auto marks = cfg.integer("M"), t = cfg.integer("t");
  if (marks < 1) throw SchemaError("goodbox.M", "must be >= 1");
  if (t < 1) throw SchemaError("goodbox.t", "must be an integer >= 1");
  const auto rep = good_box_fraction(cfg.real("lambda"), static_cast<std::size_t>(marks),
                                     cfg.real("xi"), cfg.real("V"), static_cast<std::size_t>(t), p,
                                     count_of(cfg, "n"), ctx.streams, cfg.real("torus"));
  auto csv = ctx.csv("goodbox.csv", {"i", "good_flag", "fraction"});
  for (std::size_t i = 0; i < rep.flags.size(); ++i)
    csv.row(i + 1, static_cast<int>(rep.flags[i]), rep.per_time[i]);
  ctx.summary["good_fraction"] = rep.good_fraction.value;
  ctx.summary["good_fraction_ci"] = rep.good_fraction.half_width;
  ctx.summary["threshold"] = rep.threshold;
  ctx.summary["predicted_single_time"] = rep.predicted_single;
  ctx.summary["statistic"] = "count-based necessary condition";
}

void lab_lambda_c(LabContext& ctx) {
  const auto& cfg = ctx.cfg;
  const auto p = params_of(cfg);
  const auto law = law_of(cfg, p.dim);
  std::vector<double> windows{cfg.real("window")};
  if (cfg.flag("doubling")) windows.push_back(2.0 * windows.front());
  auto csv = ctx.csv("lambda_c.csv", {"window", "lo", "midpoint", "hi", "replicas"});
  for (double w : windows) {
    const auto iv = estimate_lambda_c(law, p.dim, w, cfg.real("tolerance"), count_of(cfg, "n"),
                                      ctx.streams.child("W=" + format_double(w)));
    csv.row(w, iv.lo, iv.midpoint, iv.hi, iv.replicas);
  }
}

void lab_plan_window(LabContext& ctx) {
  const auto p = params_of(ctx.cfg);
  const auto law = law_of(ctx.cfg, p.dim);
  const auto g = target_of(ctx.cfg, p.dim);
  const double horizon = ctx.cfg.real("T");
  std::optional<CalibratedBoundConstants> constants;
  const double margin = target_margin(ctx, p, g, horizon, constants);
  const auto plans = window_for(ctx, p, ctx.cfg.real("lambda"), law, horizon, margin, constants);
  auto csv = ctx.csv("plan.csv", {"halfwidth", "horizon", "eps_trunc", "achieved",
                                  "radius_quantile", "margin"});
  for (const auto& plan : plans)
    csv.row(plan.halfwidth, plan.horizon, plan.eps_trunc, plan.achieved, plan.radius_quantile,
            plan.margin);
}

void lab_calibrate(LabContext& ctx) {
  const auto p = params_of(ctx.cfg);
  CalibrationOptions o;
  o.replicas = count_of(ctx.cfg, "n");
  o.step = ctx.cfg.real("h");
  o.tolerance = ctx.cfg.real("tolerance");
  const auto rep = calibrate(p, o, ctx.streams);
  {
    std::ofstream out(ctx.file("constants.json"), std::ios::binary);
    write_constants_json(out, rep.constants);
  }
  auto csv = ctx.csv("calibration.csv", {"kind", "r", "t", "estimate", "ci", "bound", "ratio"});
  for (const auto& r : rep.rows)
    csv.row(r.kind, r.r, r.t, r.estimate.value, r.estimate.half_width, r.bound, r.ratio());
  ctx.constants = constants_json(rep.constants);
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

RunOutcome run(std::string_view lab, const std::optional<fs::path>& config_path,
               const std::map<std::string, std::string>& overrides, const fs::path& out_dir,
               std::ostream& log) {
  RunOutcome outcome;
  try {
    const KeyValues file = config_path ? read_config_file(*config_path) : KeyValues{};
    const auto cfg = resolve_config(lab, file, overrides);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw SchemaError("out", "cannot create " + out_dir.string() + ": " + ec.message());
    LabContext ctx{cfg, out_dir, config_hash(cfg), {cfg.seed(), cfg.lab(), cfg.threads()}, log, {}};
    const std::string name(lab);
    if (name == "sample-path") lab_sample_path(ctx);
    else if (name == "sausage") lab_sausage(ctx);
    else if (name == "detect") lab_detect(ctx);
    else if (name == "cover") lab_cover(ctx);
    else if (name == "percolate") lab_percolate(ctx);
    else if (name == "goodbox") lab_goodbox(ctx);
    else if (name == "lambda-c") lab_lambda_c(ctx);
    else if (name == "plan-window") lab_plan_window(ctx);
    else if (name == "calibrate") lab_calibrate(ctx);
    else if (name == "report-data") lab_report_data(ctx);

    Json m;
    m["tool"] = "dynbool";
    m["tool_version"] = tool_version();
    m["lab"] = name;
    m["master_seed"] = cfg.seed();
    m["config_hash"] = ctx.hash;
    m["config"] = Json::object();
    for (const auto& [k, v] : cfg.values()) m["config"][k] = v;
    m["calibrated_constants"] = ctx.constants;
    for (auto& [k, v] : ctx.extra.items()) m[k] = v;
    m["summary"] = ctx.summary;
    m["outputs"] = Json::array();
    for (const auto& f : ctx.files) m["outputs"].push_back(f.filename().string());
    m["timestamp"] = utc_timestamp();
    std::ofstream(out_dir / "manifest.json", std::ios::binary) << m.dump(2) << '\n';
    outcome.files = ctx.files;
    outcome.files.push_back(out_dir / "manifest.json");
    outcome.message = "ok";
  } catch (const SchemaError& e) {
    outcome.exit_code = 2;
    outcome.message = std::string("schema error: ") + e.what();
  } catch (const InvalidArgument& e) {
    outcome.exit_code = 2;
    outcome.message = std::string("invalid argument: ") + e.what();
  } catch (const DomainError& e) {
    outcome.exit_code = 2;
    outcome.message = std::string("domain error: ") + e.what();
  } catch (const NumericFailure& e) {
    outcome.exit_code = 3;
    outcome.message = std::string("numeric failure: ") + e.what();
  } catch (const PlannerFailure& e) {
    outcome.exit_code = 3;
    outcome.message = std::string("window planner failure: ") + e.what();
  } catch (const std::exception& e) {
    outcome.exit_code = 3;
    outcome.message = std::string("failure: ") + e.what();
  }
  if (outcome.exit_code != 0) log << outcome.message << '\n';
  return outcome;
}

}  // namespace dynbool
