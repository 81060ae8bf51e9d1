#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "octrl/dataset.hpp"
#include "octrl/envs.hpp"
#include "octrl/errors.hpp"
#include "octrl/rng.hpp"

using namespace octrl;

namespace {

std::string tmp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "octrl_test_dataset";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

std::string write_file(const std::string& name, const std::string& text) {
  const std::string path = tmp_file(name);
  std::ofstream out(path);
  out << text;
  return path;
}

bool bit_equal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

std::string message_of(const std::string& path) {
  try {
    load_dataset(path);
  } catch (const error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("finite difference") {
  TransitionRecord r;
  r.state = Eigen::VectorXd::Zero(1);
  r.action = Eigen::VectorXd::Zero(1);
  r.next_state = Eigen::VectorXd::Constant(1, 0.1);
  r.dt = 0.1;
  CHECK(finite_difference(r)[0] == 1.0);
  r.dt = 0.0;
  CHECK_THROWS_AS(finite_difference(r), error);
}

TEST_CASE("finite difference matches a simulator step") {
  Env env = Env::builtin("pendulum");
  Rng rng(3);
  Eigen::Vector2d x(1.2, -0.5);
  Eigen::VectorXd a = Eigen::VectorXd::Constant(1, 0.7);
  TransitionRecord r;
  r.state = x;
  r.action = a;
  r.next_state = env.em_step(x, a, 0.05, rng);
  r.dt = 0.05;
  Eigen::VectorXd fd = finite_difference(r);
  Eigen::VectorXd direct = (r.next_state - r.state) / 0.05;
  CHECK(bit_equal(fd, direct));
}

TEST_CASE("jsonl single record") {
  const std::string p = write_file("one.jsonl", R"({"state":[0],"action":[0],"deriv":[0]})" "\n");
  Dataset d = load_dataset(p);
  CHECK(d.size() == 1);
  CHECK(d.state_dim() == 1);
  CHECK_FALSE(d.has_rewards());
}

TEST_CASE("jsonl next_state conversion") {
  const std::string p = write_file(
      "fd.jsonl", R"({"state":[0],"action":[0],"next_state":[0.1],"dt":0.1})" "\n");
  Dataset d = load_dataset(p);
  CHECK(d.derivs(0, 0) == 1.0);
}

TEST_CASE("format from extension") {
  CHECK(format_from_path("a/b.jsonl") == DatasetFormat::jsonl);
  CHECK(format_from_path("a/b.ndjson") == DatasetFormat::jsonl);
  CHECK(format_from_path("a/b.csv") == DatasetFormat::csv);
  CHECK_THROWS_AS(format_from_path("a/b.txt"), error);
}

TEST_CASE("loader errors name the offending line") {
  const std::string bad_json = write_file(
      "bad2.jsonl",
      R"({"state":[0],"action":[0],"deriv":[0]})" "\nnot json\n");
  CHECK(message_of(bad_json).find("line 2") != std::string::npos);

  const std::string bad_dim = write_file(
      "dim3.jsonl",
      R"({"state":[0],"action":[0],"deriv":[0]})" "\n"
      R"({"state":[0],"action":[0],"deriv":[0]})" "\n"
      R"({"state":[0,1],"action":[0],"deriv":[0,1]})" "\n");
  CHECK(message_of(bad_dim).find("line 3") != std::string::npos);

  const std::string non_finite = write_file(
      "inf.jsonl", R"({"state":[1e999],"action":[0],"deriv":[0]})" "\n");
  CHECK(message_of(non_finite).find("line 1") != std::string::npos);

  const std::string missing = write_file(
      "miss.jsonl", R"({"state":[0],"action":[0]})" "\n");
  CHECK(message_of(missing).find("line 1") != std::string::npos);

  CHECK_THROWS_AS(load_dataset(tmp_file("does_not_exist.jsonl")), error);
}

TEST_CASE("mixed reward presence is rejected") {
  const std::string p = write_file(
      "mixed.jsonl",
      R"({"state":[0],"action":[0],"deriv":[0],"reward":-1.0})" "\n"
      R"({"state":[1],"action":[0],"deriv":[0]})" "\n");
  CHECK_THROWS_AS(load_dataset(p), error);
}

TEST_CASE("empty dataset is rejected") {
  const std::string p = write_file("empty.jsonl", "\n");
  CHECK_THROWS_AS(load_dataset(p), error);
}

TEST_CASE("jsonl round trip is lossless") {
  Env env = Env::builtin("ou");
  Dataset d = sample_iid(env, env.default_state_box(), env.default_action_box(), 25, 1e-3, 9);
  const std::string p = tmp_file("round.jsonl");
  save_dataset(d, p);
  Dataset back = load_dataset(p);
  CHECK(bit_equal(back.states, d.states));
  CHECK(bit_equal(back.actions, d.actions));
  CHECK(bit_equal(back.derivs, d.derivs));
  CHECK(bit_equal(back.rewards, d.rewards));
}

TEST_CASE("csv round trip is lossless") {
  Env env = Env::builtin("pendulum");
  Dataset d = sample_iid(env, env.default_state_box(), env.default_action_box(), 10, 0.05, 4);
  const std::string p = tmp_file("round.csv");
  save_dataset(d, p);
  Dataset back = load_dataset(p);
  CHECK(back.size() == 10);
  CHECK(back.state_dim() == 3);
  CHECK(bit_equal(back.states, d.states));
  CHECK(bit_equal(back.actions, d.actions));
  CHECK(bit_equal(back.derivs, d.derivs));
  CHECK(bit_equal(back.rewards, d.rewards));
}

TEST_CASE("csv header mapping") {
  const std::string p = write_file("head.csv",
                                   "state_0,action_0,deriv_0\n"
                                   "0.5,1.5,-0.5\n"
                                   "1.0,0.0,2.0\n"
                                   "0.0,0.0,0.0\n");
  Dataset d = load_dataset(p);
  CHECK(d.size() == 3);
  CHECK(d.states(0, 0) == 0.5);
  CHECK(d.actions(0, 0) == 1.5);
  CHECK(d.derivs(1, 0) == 2.0);
  CHECK_FALSE(d.has_rewards());
}

TEST_CASE("sample_iid deterministic drift at a zero-width box") {
  Env env = Env::builtin("ou");
  env.set_epsilon(0.0);
  Eigen::MatrixXd sbox(1, 2), abox(1, 2);
  sbox << 0.0, 0.0;
  abox << 0.0, 0.0;
  Dataset d = sample_iid(env, sbox, abox, 1, 0.1, 7);
  CHECK(d.derivs(0, 0) == 0.0);  // f(0) + G(0) * 0
  CHECK(d.rewards[0] == 0.0);
}

TEST_CASE("sample_iid exact drift matches f + G a") {
  for (const char* name : {"ou", "nonlinear"}) {
    Env env = Env::builtin(name);
    Dataset d = sample_iid(env, env.default_state_box(), env.default_action_box(), 40, 1e-3, 11,
                           DerivMode::exact_drift);
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      Eigen::VectorXd x = d.states.row(i);
      Eigen::VectorXd a = d.actions.row(i);
      CHECK(d.derivs.row(i).transpose().isApprox(env.controlled_drift(x, a), 1e-14));
    }
  }
  Env pend = Env::builtin("pendulum");
  Dataset d = sample_iid(pend, pend.default_state_box(), pend.default_action_box(), 40, 0.05, 11,
                         DerivMode::exact_drift);
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    const double c = d.states(i, 0), s = d.states(i, 1), om = d.states(i, 2);
    const double a = d.actions(i, 0);
    CHECK(d.derivs(i, 0) == doctest::Approx(-s * om).epsilon(1e-12));
    CHECK(d.derivs(i, 1) == doctest::Approx(c * om).epsilon(1e-12));
    CHECK(d.derivs(i, 2) == doctest::Approx(15.0 * s + 3.0 * a).epsilon(1e-12));
  }
}

TEST_CASE("sample_iid noise obeys the CLT envelope") {
  Env env = Env::builtin("ou");  // epsilon = 0.01
  const double h = 1e-3;
  const Eigen::Index N = 10000;
  Dataset d = sample_iid(env, env.default_state_box(), env.default_action_box(), N, h, 21);
  Eigen::VectorXd clean = -d.states.col(0) + d.actions.col(0);
  const double mean_dev = (d.derivs.col(0) - clean).mean();
  const double bound = 3.0 * std::sqrt(2.0 * env.epsilon() / h) / std::sqrt(double(N));
  CHECK(std::abs(mean_dev) <= bound);
}

TEST_CASE("sample_iid is deterministic and prefix-nested") {
  Env env = Env::builtin("ou");
  Dataset a = sample_iid(env, env.default_state_box(), env.default_action_box(), 60, 1e-3, 33);
  Dataset b = sample_iid(env, env.default_state_box(), env.default_action_box(), 60, 1e-3, 33);
  CHECK(bit_equal(a.states, b.states));
  CHECK(bit_equal(a.derivs, b.derivs));

  Dataset prefix = sample_iid(env, env.default_state_box(), env.default_action_box(), 25, 1e-3, 33);
  CHECK(bit_equal(prefix.states, a.states.topRows(25)));
  CHECK(bit_equal(prefix.actions, a.actions.topRows(25)));
  CHECK(bit_equal(prefix.derivs, a.derivs.topRows(25)));
}

TEST_CASE("sample_iid rejects degenerate boxes") {
  Env env = Env::builtin("ou");
  Eigen::MatrixXd sbox(1, 2), abox(1, 2);
  sbox << 1.0, -1.0;
  abox << 0.0, 0.0;
  CHECK_THROWS_AS(sample_iid(env, sbox, abox, 5, 1e-3, 1), error);
}

TEST_CASE("sample_iid fills state rewards") {
  Env env = Env::builtin("ou");
  Dataset d = sample_iid(env, env.default_state_box(), env.default_action_box(), 30, 1e-3, 5);
  REQUIRE(d.has_rewards());
  for (Eigen::Index i = 0; i < d.size(); ++i)
    CHECK(d.rewards[i] == doctest::Approx(-3.0 * d.states(i, 0) * d.states(i, 0)).epsilon(1e-14));
}

TEST_CASE("sample_rollout produces bounded episode data") {
  Env env = Env::builtin("pendulum");
  Dataset d = sample_rollout(env, 450, 17);
  CHECK(d.size() == 450);
  CHECK(d.states.allFinite());
  CHECK(d.derivs.allFinite());
  CHECK((d.actions.col(0).array().abs() <= 2.0).all());
  CHECK((d.states.col(2).array().abs() <= 8.0).all());
  Dataset again = sample_rollout(env, 450, 17);
  CHECK(bit_equal(again.states, d.states));
}

TEST_CASE("dataset validation") {
  Dataset d;
  d.states = Eigen::MatrixXd::Zero(3, 1);
  d.actions = Eigen::MatrixXd::Zero(3, 1);
  d.derivs = Eigen::MatrixXd::Zero(3, 1);
  CHECK_NOTHROW(d.validate());
  d.rewards = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(d.validate(), error);
  d.rewards = Eigen::VectorXd::Zero(3);
  d.states(1, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(d.validate(), error);
}
