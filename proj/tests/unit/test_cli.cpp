#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "tplmon/commands.hpp"
#include "tplmon/errors.hpp"

using namespace tplmon;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("tplmon_unit_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(TPLMON_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("config parsing and overrides") {
  const auto c = config_from_json(nlohmann::json::parse(R"({"alpha": 0.05, "vote_cap": 3})"));
  CHECK(c.alpha == 0.05);
  CHECK(c.vote_cap == 3);
  CHECK(c.seed == RunConfig{}.seed);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"alpah": 0.05})")), ArgumentError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"alpha": "x"})")), ArgumentError);

  RunConfig bad;
  bad.alpha = 1.5;
  CHECK_THROWS_AS(validate(bad), ArgumentError);
  bad = RunConfig{};
  bad.method = "m4";
  CHECK_THROWS_AS(validate(bad), ArgumentError);

  const auto round = config_from_json(nlohmann::json::parse(to_json(RunConfig{}).dump()));
  CHECK(to_json(round).dump() == to_json(RunConfig{}).dump());
}

TEST_CASE("simulate, fit and monitor through the CLI") {
  const auto dir = scratch("cli");
  const auto sim = (dir / "sim").string();
  REQUIRE(run_cli("simulate --out " + sim) == 0);
  const auto status1 = slurp(dir / "sim" / "status1.csv");
  CHECK(std::count(status1.begin(), status1.end(), '\n') == 721);

  // Same config twice: identical files.
  REQUIRE(run_cli("simulate --out " + (dir / "sim2").string()) == 0);
  for (const char* f : {"status1.csv", "status2.csv", "manifest.json"}) {
    CHECK(slurp(dir / "sim" / f) == slurp(dir / "sim2" / f));
  }

  const auto ref = (dir / "sim" / "status1.csv").string();
  REQUIRE(run_cli("monitor --method m1 --reference " + ref + " --query " + ref + " --out " +
                  (dir / "m1").string()) == 0);
  const auto verdicts = nlohmann::json::parse(slurp(dir / "m1" / "verdicts.json"));
  CHECK(verdicts["verdicts"].size() == 36);
  for (const auto& v : verdicts["verdicts"]) CHECK(v["decision"] == "unchanged");

  REQUIRE(run_cli("fit --reference " + ref + " --out " + (dir / "fit").string()) == 0);
  REQUIRE(run_cli("fit --reference " + ref + " --out " + (dir / "fit2").string()) == 0);
  CHECK(slurp(dir / "fit" / "fit.json") == slurp(dir / "fit2" / "fit.json"));
}

TEST_CASE("exit codes") {
  const auto dir = scratch("codes");
  CHECK(run_cli("") == 2);
  CHECK(run_cli("monitor --method m9") == 2);
  CHECK(run_cli("fit --reference " + (dir / "missing.csv").string()) == 2);

  {
    std::ofstream bad(dir / "bad.csv");
    bad << "design,laser_power,scan_rate,radius,height\n1.6,50,40,-1,1\n";
  }
  CHECK(run_cli("fit --reference " + (dir / "bad.csv").string()) == 3);

  {
    std::ofstream two(dir / "two.csv");
    two << "design,laser_power,scan_rate,radius,height\n";
    for (int i = 0; i < 3; ++i) {
      two << "1.6,50,40,1.1,1.0\n1.6,50,60,1.0,0.9\n";
    }
  }
  CHECK(run_cli("fit --reference " + (dir / "two.csv").string() + " --out " + dir.string()) == 3);

  {
    std::ofstream cfg(dir / "infeasible.json");
    cfg << R"({"offset": {"b_R": {"intercept": -0.02}}})";
  }
  CHECK(run_cli("simulate --config " + (dir / "infeasible.json").string() + " --out " +
                (dir / "x").string()) == 5);
}

TEST_CASE("m3-unknown reports missing thresholds") {
  // A widening cap of zero leaves every parameter unbounded once the held-out
  // group falls outside the fold's median.
  const auto dir = scratch("m3u");
  REQUIRE(run_cli("simulate --out " + dir.string()) == 0);
  {
    std::ofstream cfg(dir / "cap.json");
    cfg << R"({"widening_cap": 0.0})";
  }
  const auto ref = (dir / "status1.csv").string();
  CHECK(run_cli("monitor --method m3-unknown --config " + (dir / "cap.json").string() +
                " --reference " + ref + " --query " + ref + " --out " + dir.string()) == 4);
}
