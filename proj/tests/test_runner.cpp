#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "doctest.h"
#include "dynbool/errors.hpp"
#include "dynbool/runner.hpp"

using namespace dynbool;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("dynbool_runner_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string field_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const SchemaError& e) {
    return e.field();
  }
  return "";
}

}  // namespace

TEST_CASE("lab catalogue and schemas") {
  const auto& names = lab_names();
  CHECK(names.size() == 10);
  for (const auto& n : names) {
    const auto& s = lab_schema(n);
    REQUIRE(s.size() >= 4);
    CHECK(s[0].name == "seed");
    CHECK(s[1].name == "threads");
    CHECK(s[2].name == "alpha");
    CHECK(s[3].name == "d");
  }
  CHECK(field_of([] { lab_schema("nope"); }) == "lab");
}

TEST_CASE("INI parsing puts bare keys in common") {
  const auto kv = parse_config_text("seed = 5\n[detect]\nlambda = 0.25\n[common]\nalpha = 1.2\n");
  CHECK(kv.at("common.seed") == "5");
  CHECK(kv.at("common.alpha") == "1.2");
  CHECK(kv.at("detect.lambda") == "0.25");
  CHECK_THROWS_AS(parse_config_text("[broken\n"), SchemaError);
}

TEST_CASE("resolution precedence: override, lab section, common, default") {
  const auto file = parse_config_text("[common]\nalpha = 1.2\nlambda = 0.7\n[detect]\nlambda = 0.25\nT = 4\n");
  const auto cfg = resolve_config("detect", file, {{"T", "3"}});
  CHECK(cfg.real("alpha") == 1.2);   // common
  CHECK(cfg.real("lambda") == 0.25); // lab section beats common
  CHECK(cfg.real("T") == 3.0);       // override beats lab section
  CHECK(cfg.real("h") == 0.01);      // default
  CHECK(cfg.integer("n") == 20000);
  CHECK(cfg.text("method") == "direct");
  CHECK(cfg.reals("report").empty());
  CHECK_FALSE(cfg.has("window"));
  // A common key that only other labs know is accepted but unused.
  const auto cov = resolve_config("cover", file, {});
  CHECK(cov.real("lambda") == 0.7);
}

TEST_CASE("schema violations name the offending key") {
  CHECK(field_of([] { resolve_config("detect", parse_config_text("[detect]\nbogus = 1\n"), {}); }) ==
        "detect.bogus");
  CHECK(field_of([] { resolve_config("detect", parse_config_text("[nosuch]\nx = 1\n"), {}); }) == "nosuch");
  CHECK(field_of([] { resolve_config("detect", {}, {{"bogus", "1"}}); }) == "detect.bogus");
  CHECK(field_of([] { resolve_config("detect", {}, {{"lambda", "abc"}}); }) == "detect.lambda");
  CHECK(field_of([] { resolve_config("detect", {}, {{"n", "1.5"}}); }) == "detect.n");
  CHECK(field_of([] { resolve_config("detect", parse_config_text("zzz = 1\n"), {}); }) == "common.zzz");
  CHECK(field_of([] { resolve_config("detect", {}, {{"threads", "0"}}).threads(); }) == "detect.threads");
}

TEST_CASE("thread default comes from the environment") {
  ::setenv("DYNBOOL_THREADS", "3", 1);
  CHECK(resolve_config("sausage", {}, {}).threads() == 3);
  ::unsetenv("DYNBOOL_THREADS");
  CHECK(resolve_config("sausage", {}, {}).threads() == 1);
}

TEST_CASE("config hash ignores threads only") {
  const auto a = resolve_config("sausage", {}, {{"threads", "1"}});
  const auto b = resolve_config("sausage", {}, {{"threads", "8"}});
  const auto c = resolve_config("sausage", {}, {{"seed", "2"}});
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a) != config_hash(c));
  CHECK(config_hash(a).size() == 16);
  CHECK(config_hash(a) != config_hash(resolve_config("detect", {}, {})));
}

TEST_CASE("sample-path run writes CSV and manifest") {
  const auto dir = scratch("path");
  std::ostringstream log;
  const auto out = run("sample-path", std::nullopt, {{"T", "1"}, {"h", "0.1"}, {"seed", "9"}}, dir, log);
  REQUIRE(out.exit_code == 0);
  CHECK(out.files.size() == 2);
  const auto csv = slurp(dir / "path.csv");
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  const std::string hash = manifest.at("config_hash");
  CHECK(csv.rfind("# config_hash=" + hash + "\n# lab=sample-path\nt,x0,x1\n0,0,0\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3 + 11);
  for (const char* key : {"tool", "tool_version", "lab", "master_seed", "config_hash", "config",
                          "calibrated_constants", "summary", "outputs", "timestamp"})
    CHECK(manifest.contains(key));
  CHECK(manifest["master_seed"] == 9);
  CHECK(manifest["tool_version"] == tool_version());
  CHECK(manifest["outputs"][0] == "path.csv");
  CHECK(manifest["config"]["T"] == "1");
}

TEST_CASE("config files drive runs") {
  const auto dir = scratch("cfg");
  fs::create_directories(dir);
  std::ofstream(dir / "run.ini") << "seed = 4\n[report-data]\nlambda = 0.02\nT = 0.5\nh = 0.1\n";
  std::ostringstream log;
  const auto out = run("report-data", dir / "run.ini", {}, dir / "out", log);
  REQUIRE(out.exit_code == 0);
  const auto traj = slurp(dir / "out" / "trajectories.csv");
  CHECK(traj.find("\nid,t,x0,x1\n") != std::string::npos);
  const auto cloud = slurp(dir / "out" / "cloud.csv");
  CHECK(cloud.find("\nid,x0,x1,radius\n") != std::string::npos);
  CHECK(run("report-data", dir / "missing.ini", {}, dir / "out", log).exit_code == 2);
}

TEST_CASE("exit codes") {
  std::ostringstream log;
  const auto dir = scratch("codes");
  auto bad_key = run("detect", std::nullopt, {{"bogus", "1"}}, dir, log);
  CHECK(bad_key.exit_code == 2);
  CHECK(bad_key.message.find("detect.bogus") != std::string::npos);
  // Capacity needs d > alpha.
  CHECK(run("sausage", std::nullopt, {{"alpha", "2"}, {"d", "2"}}, dir, log).exit_code == 2);
  CHECK(run("calibrate", std::nullopt, {{"alpha", "2"}, {"d", "3"}}, dir, log).exit_code == 2);
  // A hopelessly noisy calibration is a numeric failure.
  CHECK(run("calibrate", std::nullopt, {{"n", "100"}, {"tolerance", "0.01"}}, dir, log).exit_code == 3);
}

TEST_CASE("lab outputs have the documented columns") {
  std::ostringstream log;
  const auto dir = scratch("labs");
  auto header = [&](const fs::path& p) {
    std::istringstream in(slurp(p));
    std::string line;
    while (std::getline(in, line))
      if (line.empty() || line[0] != '#') return line;
    return std::string();
  };
  REQUIRE(run("detect", std::nullopt,
              {{"method", "void"}, {"n", "20"}, {"T", "1"}, {"h", "0.05"}, {"report", "0,0.5,1"}},
              dir / "detect", log)
              .exit_code == 0);
  CHECK(header(dir / "detect" / "survival.csv") == "series,t,survival,lo,hi,ci,log_survival");
  CHECK(header(dir / "detect" / "rate.csv") == "series,rate,stderr,t_lo,t_hi,points,reference,warning");

  REQUIRE(run("goodbox", std::nullopt, {{"V", "80"}, {"t", "3"}, {"n", "5"}}, dir / "gb", log).exit_code == 0);
  CHECK(header(dir / "gb" / "goodbox.csv") == "i,good_flag,fraction");

  REQUIRE(run("plan-window", std::nullopt, {{"window", "12"}}, dir / "plan", log).exit_code == 0);
  CHECK(header(dir / "plan" / "plan.csv") == "halfwidth,horizon,eps_trunc,achieved,radius_quantile,margin");
  CHECK(slurp(dir / "plan" / "plan.csv").find("\n12,10,0.01,") != std::string::npos);

  REQUIRE(run("sausage", std::nullopt, {{"T", "1,2"}, {"n", "4"}, {"h", "0.05"}}, dir / "s", log).exit_code == 0);
  CHECK(header(dir / "s" / "sausage_rate.csv") == "T,rate,ci,n,target");
}

TEST_CASE("CSV bytes do not depend on the thread count") {
  std::ostringstream log;
  const auto dir = scratch("threads");
  const std::map<std::string, std::string> base{
      {"method", "both"}, {"n", "60"}, {"T", "1"}, {"h", "0.05"}, {"report", "0,0.5,1"}, {"window", "8"}};
  auto one = base, eight = base;
  one["threads"] = "1";
  eight["threads"] = "8";
  REQUIRE(run("detect", std::nullopt, one, dir / "a", log).exit_code == 0);
  REQUIRE(run("detect", std::nullopt, eight, dir / "b", log).exit_code == 0);
  CHECK(slurp(dir / "a" / "survival.csv") == slurp(dir / "b" / "survival.csv"));
  CHECK(slurp(dir / "a" / "rate.csv") == slurp(dir / "b" / "rate.csv"));
}
