#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "octrl/dataset.hpp"
#include "octrl/errors.hpp"
#include "octrl/kernels.hpp"
#include "octrl/rng.hpp"
#include "octrl/world_model.hpp"

using namespace octrl;

namespace {

std::string tmp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "octrl_test_wm";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

KernelSpec se(double sigma) {
  KernelSpec k;
  k.lengthscale = sigma;
  return k;
}

Dataset random_dataset(Eigen::Index n, int ns, int na, std::uint64_t seed) {
  Rng rng(seed);
  Dataset d;
  d.states.resize(n, ns);
  d.actions.resize(n, na);
  d.derivs.resize(n, ns);
  d.rewards.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < ns; ++j) {
      d.states(i, j) = rng.uniform(-2, 2);
      d.derivs(i, j) = rng.uniform(-3, 3);
    }
    for (int j = 0; j < na; ++j) d.actions(i, j) = rng.uniform(-1.5, 1.5);
    d.rewards[i] = -d.states.row(i).squaredNorm();
  }
  return d;
}

bool bit_equal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

}  // namespace

TEST_CASE("assemble_gram hand check") {
  Eigen::MatrixXd X(2, 1), U(2, 1);
  X << 0, 1;
  U << 2, 3;
  Eigen::MatrixXd K = assemble_gram(X, U, se(1.0), 0.01);
  const double k01 = std::exp(-0.5);
  CHECK(K(0, 0) == doctest::Approx(1.0 * (1 + 4) + 2 * 0.01).epsilon(1e-14));
  CHECK(K(0, 1) == doctest::Approx(k01 * (1 + 6)).epsilon(1e-14));
  CHECK(K(1, 0) == K(0, 1));
  CHECK(K(1, 1) == doctest::Approx(1.0 * (1 + 9) + 2 * 0.01).epsilon(1e-14));
}

TEST_CASE("assemble_target matches the per-entry definition") {
  Dataset d = random_dataset(15, 2, 1, 7);
  KernelSpec k = se(1.3);
  const double eps = 0.05;
  Eigen::MatrixXd Kd = assemble_target(d.states, d.derivs, k, eps);
  for (int i = 0; i < 15; ++i) {
    for (int j = 0; j < 15; ++j) {
      Eigen::VectorXd xi = d.states.row(i), xj = d.states.row(j);
      const double expect = d.derivs.row(i).dot(kernel_grad_x(k, xi, xj)) +
                            eps * kernel_hess_trace_x(k, xi, xj);
      CHECK(Kd(i, j) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("fit satisfies the linear-solve contracts") {
  Dataset d = random_dataset(60, 2, 2, 11);
  KernelSpec k = se(1.0);
  const double gamma = 1e-8, eps = 0.01;
  WorldModel m = WorldModel::fit(d, k, gamma, eps);
  m.set_reward(d.rewards);

  Eigen::MatrixXd Kd = assemble_target(d.states, d.derivs, k, eps);
  const double dyn_res = (m.apply_gram(m.dynamics()) - Kd).norm();
  CHECK(dyn_res <= 1e-8 * (1.0 + Kd.norm()));

  Eigen::MatrixXd r = m.reward_coef();
  const double rew_res = (m.apply_gram(r) - d.rewards).norm();
  CHECK(rew_res <= 1e-8 * (1.0 + d.rewards.norm()));
}

TEST_CASE("apply_gram agrees with the assembled matrix") {
  Dataset d = random_dataset(25, 1, 2, 3);
  KernelSpec k = se(0.9);
  WorldModel m = WorldModel::fit(d, k, 1e-6, 0.0);
  Eigen::MatrixXd K = assemble_gram(d.states, d.actions, k, 1e-6);
  Eigen::MatrixXd probe = Eigen::MatrixXd::Random(25, 3);
  CHECK((m.apply_gram(probe) - K * probe).norm() <= 1e-10 * (K * probe).norm());
}

TEST_CASE("action channels are row scalings of the dynamics") {
  Dataset d = random_dataset(30, 2, 2, 5);
  WorldModel m = WorldModel::fit(d, se(1.2), 1e-7, 0.01);
  Eigen::VectorXd v = Eigen::VectorXd::Random(30);
  for (int k = 0; k < 2; ++k) {
    Eigen::VectorXd direct = d.actions.col(k).asDiagonal() * (m.dynamics() * v);
    CHECK((m.channel_apply(k, v) - direct).norm() <= 1e-12 * (1.0 + direct.norm()));
    Eigen::MatrixXd Bk = m.action_channel(k);
    CHECK((Bk * v - direct).norm() <= 1e-12 * (1.0 + direct.norm()));
  }
  CHECK_THROWS_AS(m.channel_apply(2, v), error);
}

TEST_CASE("reward-free fit and repeatable refit") {
  Dataset d = random_dataset(20, 1, 1, 13);
  Eigen::VectorXd saved_rewards = d.rewards;
  d.rewards.resize(0);
  WorldModel m = WorldModel::fit(d, se(1.0), 1e-6, 0.0);
  CHECK_FALSE(m.has_reward());
  CHECK_THROWS_AS(m.reward_coef(), error);

  Eigen::MatrixXd dyn_before = m.dynamics();
  m.set_reward(saved_rewards);
  CHECK(m.has_reward());
  CHECK(bit_equal(m.dynamics(), dyn_before));

  Eigen::VectorXd y2 = 2.0 * saved_rewards;
  m.set_reward(y2);
  CHECK((m.apply_gram(m.reward_coef()) - y2).norm() <= 1e-8 * (1.0 + y2.norm()));

  Eigen::VectorXd wrong_len = Eigen::VectorXd::Zero(7);
  CHECK_THROWS_AS(m.set_reward(wrong_len), error);
}

TEST_CASE("binary artifact round trip") {
  Dataset d = random_dataset(18, 2, 1, 17);
  WorldModel m = WorldModel::fit(d, se(1.4), 1e-6, 0.02);
  m.set_reward(d.rewards);
  const std::string p = tmp_file("model.bin");
  m.save(p);
  WorldModel back = WorldModel::load(p);
  CHECK(back.size() == m.size());
  CHECK(back.gamma() == m.gamma());
  CHECK(back.epsilon() == m.epsilon());
  CHECK(back.kernel().lengthscale == m.kernel().lengthscale);
  CHECK(bit_equal(back.train_states(), m.train_states()));
  CHECK(bit_equal(back.train_actions(), m.train_actions()));
  CHECK(bit_equal(back.dynamics(), m.dynamics()));
  CHECK(bit_equal(back.reward_coef(), m.reward_coef()));
  CHECK(bit_equal(back.gram_states(), m.gram_states()));
  // the reloaded factorization still solves against the same system
  Eigen::VectorXd y = Eigen::VectorXd::Random(18);
  Eigen::VectorXd x = back.gram_factor().solve(y);
  CHECK((back.apply_gram(x) - y).norm() <= 1e-7 * y.norm());
}

TEST_CASE("json artifact carries format and version") {
  Dataset d = random_dataset(8, 1, 1, 19);
  WorldModel m = WorldModel::fit(d, se(1.0), 1e-6, 0.0);
  m.set_reward(d.rewards);
  const std::string p = tmp_file("model.json");
  m.save(p);

  std::ifstream in(p);
  nlohmann::json j = nlohmann::json::parse(in);
  CHECK(j.contains("format"));
  CHECK(j.contains("version"));
  CHECK(j["version"].get<int>() >= 1);

  WorldModel back = WorldModel::load(p);
  CHECK(bit_equal(back.dynamics(), m.dynamics()));
  CHECK(bit_equal(back.train_states(), m.train_states()));
  CHECK(bit_equal(back.reward_coef(), m.reward_coef()));
}

TEST_CASE("corrupted artifact is rejected") {
  const std::string p = tmp_file("garbage.bin");
  std::ofstream out(p, std::ios::binary);
  out << "not a model artifact";
  out.close();
  CHECK_THROWS_AS(WorldModel::load(p), error);
  CHECK_THROWS_AS(WorldModel::load(tmp_file("missing.bin")), error);
}

TEST_CASE("fit rejects invalid inputs") {
  Dataset d = random_dataset(10, 1, 1, 1);
  CHECK_THROWS_AS(WorldModel::fit(d, se(-1.0), 1e-6, 0.0), error);
  CHECK_THROWS_AS(WorldModel::fit(d, se(1.0), -1e-6, 0.0), error);
  CHECK_THROWS_AS(WorldModel::fit(d, se(1.0), 1e-6, -0.1), error);
  Dataset empty;
  CHECK_THROWS_AS(WorldModel::fit(empty, se(1.0), 1e-6, 0.0), error);
}
