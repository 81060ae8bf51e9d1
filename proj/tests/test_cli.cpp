#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(OCTRL_BIN_PATH) + " " + args + " >> cli_cmd.log 2>&1";
  const int rc = std::system(cmd.c_str());
  if (WIFEXITED(rc)) return WEXITSTATUS(rc);
  return -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), "missing file: ", path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int count_lines(const std::string& text) {
  int n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::path("cli_scratch") / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_expanding_dataset(const fs::path& path, bool with_reward) {
  std::ofstream out(path);
  const int n = 40;
  for (int i = 0; i < n; ++i) {
    const double s = -3.0 + 6.0 * i / (n - 1);
    out << "{\"state\":[" << s << "],\"action\":[0.0],\"deriv\":[" << 10.0 * s << "]";
    if (with_reward) out << ",\"reward\":" << -s * s;
    out << "}\n";
  }
}

}  // namespace

TEST_CASE("help exits cleanly") {
  CHECK(run("--help") == 0);
  CHECK(run("gen-data --help") == 0);
}

TEST_CASE("missing or invalid configuration is a usage error") {
  CHECK(run("fit") == 2);                  // neither --config nor --env
  CHECK(run("fit --env bogus") == 2);      // unknown environment
  CHECK(run("gen-data --env ou --N 0") == 2);
  CHECK(run("solve --env ou --dt 0") == 2);
  CHECK(run("fit --env ou --sigma -1") == 2);
  CHECK(run("gen-data --env ou --mode sideways") == 2);
  CHECK(run("no-such-subcommand") == 2);
}

TEST_CASE("missing input files exit with the io code") {
  fs::path dir = fresh_dir("missing");
  CHECK(run("solve --env ou --out " + dir.string()) == 1);  // no model.bin yet
  CHECK(run("fit --config no_such_config.json") == 1);
}

TEST_CASE("malformed config files are rejected") {
  fs::path dir = fresh_dir("badcfg");
  std::ofstream(dir / "broken.json") << "{ not json";
  CHECK(run("fit --config " + (dir / "broken.json").string()) == 2);
}

TEST_CASE("full pipeline produces the documented artifacts") {
  fs::path dir = fresh_dir("pipe");
  const std::string d = dir.string();

  REQUIRE(run("gen-data --env ou --N 60 --mode exact --seed 3 --out " + d) == 0);
  const std::string data = slurp(d + "/dataset.jsonl");
  CHECK(count_lines(data) == 60);

  REQUIRE(run("fit --env ou --sigma 2 --gamma 1e-6 --data " + d + "/dataset.jsonl --out " + d) ==
          0);
  CHECK(fs::exists(dir / "model.bin"));
  CHECK(slurp(d + "/fit_log.txt").find("reward_set=1") != std::string::npos);

  REQUIRE(run("solve --env ou --rho 1 --dt 0.1 --out " + d) == 0);
  CHECK(fs::exists(dir / "solution.bin"));
  const std::string solve_log = slurp(d + "/solve_log.txt");
  CHECK(solve_log.find("converged=1") != std::string::npos);
  CHECK(count_lines(slurp(d + "/trace.csv")) >= 2);

  REQUIRE(run("eval --env ou --points 64 --out " + d) == 0);
  CHECK(count_lines(slurp(d + "/eval.csv")) == 65);  // header + grid
  const std::string summary = slurp(d + "/eval_summary.csv");
  // second line: points,offset_rel_l2; rho=1 discounts heavily, so the
  // profile only roughly tracks the undiscounted-limit reference here
  const auto comma = summary.find(',', summary.find('\n'));
  const double rel = std::stod(summary.substr(comma + 1));
  CHECK(rel < 0.5);

  REQUIRE(run("rollout --env ou --policy learned --episodes 3 --out " + d) == 0);
  CHECK(count_lines(slurp(d + "/rollout.csv")) == 4);
  CHECK(slurp(d + "/rollout_summary.csv").find("learned,3,") != std::string::npos);

  REQUIRE(run("rollout --env ou --policy random --episodes 3 --out " + d) == 0);
  CHECK(slurp(d + "/rollout_summary.csv").find("random,3,") != std::string::npos);

  // A solution fitted on 1-D observations cannot be evaluated on the
  // pendulum's embedded grid.
  CHECK(run("eval --env pendulum --points 16 --out " + d) == 2);
}

TEST_CASE("reruns write byte-identical outputs") {
  fs::path a = fresh_dir("rep_a");
  fs::path b = fresh_dir("rep_b");

  const std::string gen = "gen-data --env ou --N 50 --mode em --h-step 0.05 --seed 11 --out ";
  REQUIRE(run(gen + a.string()) == 0);
  REQUIRE(run(gen + b.string()) == 0);
  CHECK(slurp(a.string() + "/dataset.jsonl") == slurp(b.string() + "/dataset.jsonl"));

  const std::string fit = "fit --env ou --sigma 2 --gamma 1e-6 --data " + a.string() +
                          "/dataset.jsonl --out ";
  REQUIRE(run(fit + a.string()) == 0);
  REQUIRE(run(fit + b.string()) == 0);

  const std::string solve = "solve --env ou --rho 1 --dt 0.1 --out ";
  REQUIRE(run(solve + a.string()) == 0);
  REQUIRE(run(solve + b.string()) == 0);
  CHECK(slurp(a.string() + "/trace.csv") == slurp(b.string() + "/trace.csv"));

  const std::string eval = "eval --env ou --points 40 --out ";
  REQUIRE(run(eval + a.string()) == 0);
  REQUIRE(run(eval + b.string()) == 0);
  CHECK(slurp(a.string() + "/eval.csv") == slurp(b.string() + "/eval.csv"));
  CHECK(slurp(a.string() + "/eval_summary.csv") == slurp(b.string() + "/eval_summary.csv"));

  const std::string roll = "rollout --env ou --policy learned --episodes 4 --out ";
  REQUIRE(run(roll + a.string()) == 0);
  REQUIRE(run(roll + b.string()) == 0);
  CHECK(slurp(a.string() + "/rollout.csv") == slurp(b.string() + "/rollout.csv"));
}

TEST_CASE("rates runs from a config file and writes sorted rows") {
  fs::path dir = fresh_dir("rates");
  const std::string cfg_path = (dir / "cfg.json").string();
  std::ofstream(cfg_path) << R"({
    "env": "ou",
    "sigma": 2.0,
    "gamma": 1e-6,
    "epsilon": 0.01,
    "rho": 1.0,
    "dt": 0.1,
    "dataset": {"generate": {"N": 10, "mode": "exact"}},
    "eval_grid": {"lo": -3.0, "hi": 3.0, "points": 50},
    "rates": {"N_list": [20, 10], "seeds": 2, "seed_base": 5},
    "out_dir": )" << (dir / "out").string().insert(0, "\"").append("\"") << "\n}";

  REQUIRE(run("rates --config " + cfg_path) == 0);
  const std::string rates = slurp((dir / "out" / "rates.csv").string());
  std::istringstream lines(rates);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "N,seed,l2_error");
  const char* want[] = {"10,5,", "10,6,", "20,5,", "20,6,"};
  for (const char* prefix : want) {
    REQUIRE(std::getline(lines, line));
    CHECK(line.rfind(prefix, 0) == 0);
  }
  CHECK(count_lines(slurp((dir / "out" / "rates_summary.csv").string())) == 3);
  const std::string fit_csv = slurp((dir / "out" / "rates_fit.csv").string());
  CHECK(count_lines(fit_csv) == 2);

  // identical rerun
  fs::path out2 = dir / "out2";
  REQUIRE(run("rates --config " + cfg_path + " --out " + out2.string()) == 0);
  CHECK(slurp((out2 / "rates.csv").string()) == rates);
}

TEST_CASE("divergent dynamics exit with the divergence code") {
  fs::path dir = fresh_dir("diverge");
  write_expanding_dataset(dir / "d.jsonl", true);
  REQUIRE(run("fit --env ou --sigma 1 --gamma 1e-8 --data " + (dir / "d.jsonl").string() +
              " --out " + dir.string()) == 0);
  CHECK(run("solve --env ou --rho 0 --dt 0.05 --tol 1e-12 --k-max 1500 --out " + dir.string()) ==
        3);
}

TEST_CASE("a reward-free dataset fits but cannot drive a solve") {
  fs::path dir = fresh_dir("noreward");
  write_expanding_dataset(dir / "d.jsonl", false);
  REQUIRE(run("fit --env ou --sigma 2 --gamma 1e-6 --data " + (dir / "d.jsonl").string() +
              " --out " + dir.string()) == 0);
  CHECK(slurp(dir.string() + "/fit_log.txt").find("reward_set=0") != std::string::npos);
  CHECK(run("solve --env ou --rho 1 --dt 0.1 --out " + dir.string()) == 2);
}

TEST_CASE("gen-data honors an explicit output file and rollout mode") {
  fs::path dir = fresh_dir("genfile");
  const std::string f = (dir / "set.jsonl").string();
  REQUIRE(run("gen-data --env ou --N 25 --mode rollout --seed 4 --out " + dir.string() +
              " --out-file " + f) == 0);
  CHECK(count_lines(slurp(f)) == 25);
  CHECK_FALSE(fs::exists(dir / "dataset.jsonl"));
}
