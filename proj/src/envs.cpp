#include "octrl/envs.hpp"

#include <cmath>

#include "octrl/dataset.hpp"
#include "octrl/errors.hpp"

namespace octrl {

namespace {
constexpr double kPendGravity = 10.0;
constexpr double kPendMass = 1.0;
constexpr double kPendLength = 1.0;
constexpr double kPendMaxSpeed = 8.0;
constexpr double kPendMaxTorque = 2.0;
// theta_ddot = (3 g / 2 l) sin(theta) + (3 / m l^2) a
constexpr double kPendGravCoef = 3.0 * kPendGravity / (2.0 * kPendLength);
constexpr double kPendTorqueCoef = 3.0 / (kPendMass * kPendLength * kPendLength);

double wrap_angle(double th) {
  double w = std::fmod(th + M_PI, 2.0 * M_PI);
  if (w < 0) w += 2.0 * M_PI;
  return w - M_PI;
}

double nonlinear_gain(double s) { return 0.5 + std::sin(s); }
}  // namespace

Env Env::builtin(const std::string& name) {
  Env e;
  e.name_ = name;
  if (name == "ou") {
    e.kind_ = EnvKind::ou;
    e.obs_dim_ = e.sim_dim_ = e.act_dim_ = 1;
    e.epsilon_ = 0.01;
    e.dt_sim_ = 0.01;
    e.horizon_ = 200;
    e.penalty_.weights = Eigen::VectorXd::Ones(1);
  } else if (name == "nonlinear") {
    e.kind_ = EnvKind::nonlinear;
    e.obs_dim_ = e.sim_dim_ = e.act_dim_ = 1;
    e.epsilon_ = 0.01;
    e.dt_sim_ = 0.01;
    e.horizon_ = 200;
    e.penalty_.weights = Eigen::VectorXd::Ones(1);
  } else if (name == "pendulum") {
    e.kind_ = EnvKind::pendulum;
    e.obs_dim_ = 3;
    e.sim_dim_ = 2;
    e.act_dim_ = 1;
    e.epsilon_ = 0.0;
    e.dt_sim_ = 0.05;
    e.horizon_ = 200;
    e.penalty_.weights = Eigen::VectorXd::Constant(1, 0.001);
    e.penalty_.u_max = Eigen::VectorXd::Constant(1, kPendMaxTorque);
  } else {
    throw_validation("unknown environment: " + name);
  }
  return e;
}

void Env::set_epsilon(double eps) {
  require(eps >= 0.0, "epsilon must be nonnegative");
  epsilon_ = eps;
}
void Env::set_dt_sim(double dt) {
  require(dt > 0.0, "dt_sim must be positive");
  dt_sim_ = dt;
}
void Env::set_horizon(int steps) {
  require(steps >= 1, "horizon must be at least 1");
  horizon_ = steps;
}

Eigen::VectorXd Env::drift(const Eigen::VectorXd& x) const {
  require(x.size() == sim_dim_, "state dimension mismatch");
  Eigen::VectorXd f(sim_dim_);
  switch (kind_) {
    case EnvKind::ou:
      f[0] = -x[0];
      break;
    case EnvKind::nonlinear: {
      const double g = nonlinear_gain(x[0]);
      f[0] = -0.5 * x[0] * (1.0 - g * g);
      break;
    }
    case EnvKind::pendulum:
      f[0] = x[1];
      f[1] = kPendGravCoef * std::sin(x[0]);
      break;
  }
  return f;
}

Eigen::MatrixXd Env::input_map(const Eigen::VectorXd& x) const {
  require(x.size() == sim_dim_, "state dimension mismatch");
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(sim_dim_, act_dim_);
  switch (kind_) {
    case EnvKind::ou:
      g(0, 0) = 1.0;
      break;
    case EnvKind::nonlinear:
      g(0, 0) = nonlinear_gain(x[0]);
      break;
    case EnvKind::pendulum:
      g(1, 0) = kPendTorqueCoef;
      break;
  }
  return g;
}

Eigen::VectorXd Env::controlled_drift(const Eigen::VectorXd& x, const Eigen::VectorXd& a) const {
  require(a.size() == act_dim_, "action dimension mismatch");
  return drift(x) + input_map(x) * a;
}

double Env::state_reward(const Eigen::VectorXd& x) const {
  require(x.size() == sim_dim_, "state dimension mismatch");
  switch (kind_) {
    case EnvKind::ou:
      return -3.0 * x[0] * x[0];
    case EnvKind::nonlinear:
      return -x[0] * x[0];
    case EnvKind::pendulum: {
      const double th = wrap_angle(x[0]);
      return -(th * th + 0.1 * x[1] * x[1]);
    }
  }
  return 0.0;
}

Eigen::VectorXd Env::observe(const Eigen::VectorXd& x) const {
  require(x.size() == sim_dim_, "state dimension mismatch");
  if (kind_ != EnvKind::pendulum) return x;
  Eigen::VectorXd obs(3);
  obs[0] = std::cos(x[0]);
  obs[1] = std::sin(x[0]);
  obs[2] = x[1];
  return obs;
}

Eigen::VectorXd Env::observed_drift(const Eigen::VectorXd& x, const Eigen::VectorXd& a) const {
  Eigen::VectorXd f = controlled_drift(x, a);
  if (kind_ != EnvKind::pendulum) return f;
  Eigen::VectorXd d(3);
  d[0] = -std::sin(x[0]) * x[1];
  d[1] = std::cos(x[0]) * x[1];
  d[2] = f[1];
  return d;
}

Eigen::VectorXd Env::em_step(const Eigen::VectorXd& x, const Eigen::VectorXd& a, double h,
                             Rng& rng) const {
  require(h > 0.0, "step length must be positive");
  require(x.size() == sim_dim_ && a.size() == act_dim_, "em_step dimension mismatch");
  Eigen::VectorXd next(sim_dim_);
  if (kind_ == EnvKind::pendulum) {
    // source-environment convention: clip torque, update velocity first,
    // clip velocity, then advance the angle with the new velocity
    const double torque = std::clamp(a[0], -kPendMaxTorque, kPendMaxTorque);
    double acc = kPendGravCoef * std::sin(x[0]) + kPendTorqueCoef * torque;
    double om = x[1] + acc * h;
    if (epsilon_ > 0.0) om += std::sqrt(2.0 * epsilon_ * h) * rng.normal();
    om = std::clamp(om, -kPendMaxSpeed, kPendMaxSpeed);
    next[0] = x[0] + om * h;
    next[1] = om;
  } else {
    next = x + controlled_drift(x, a) * h;
    if (epsilon_ > 0.0)
      for (Eigen::Index i = 0; i < next.size(); ++i)
        next[i] += std::sqrt(2.0 * epsilon_ * h) * rng.normal();
  }
  if (!next.allFinite()) throw_divergence("simulation produced a non-finite state");
  return next;
}

Eigen::VectorXd Env::sample_init(Rng& rng) const {
  Eigen::VectorXd x(sim_dim_);
  if (kind_ == EnvKind::pendulum) {
    x[0] = rng.uniform(-M_PI, M_PI);
    x[1] = rng.uniform(-1.0, 1.0);
  } else {
    x[0] = rng.uniform(-3.0, 3.0);
  }
  return x;
}

double Env::step_reward(const Eigen::VectorXd& x, const Eigen::VectorXd& a) const {
  const double r = state_reward(x) - action_cost(penalty_, a);
  return kind_ == EnvKind::pendulum ? r : r * dt_sim_;
}

double Env::reference_value(double s) const {
  require(has_reference(), "no closed-form reference value for " + name_);
  return s * s;
}

Eigen::MatrixXd Env::default_state_box() const {
  Eigen::MatrixXd box(sim_dim_, 2);
  if (kind_ == EnvKind::pendulum) {
    box << -M_PI, M_PI, -kPendMaxSpeed, kPendMaxSpeed;
  } else {
    box << -3.0, 3.0;
  }
  return box;
}

Eigen::MatrixXd Env::default_action_box() const {
  Eigen::MatrixXd box(act_dim_, 2);
  if (kind_ == EnvKind::pendulum)
    box << -kPendMaxTorque, kPendMaxTorque;
  else
    box << -3.5, 3.5;
  return box;
}

RolloutStats rollout(const Env& env, const PolicyFn& policy, int episodes,
                     std::uint64_t rng_seed) {
  require(episodes >= 1, "episodes must be at least 1");
  RolloutStats stats;
  stats.returns.resize(episodes);
  for (int ep = 0; ep < episodes; ++ep) {
    Rng rng(rng_seed + static_cast<std::uint64_t>(ep));
    Eigen::VectorXd x = env.sample_init(rng);
    double ret = 0.0;
    for (int t = 0; t < env.horizon(); ++t) {
      Eigen::VectorXd a = policy(env.observe(x));
      if (!a.allFinite()) throw_divergence("policy returned a non-finite action");
      ret += env.step_reward(x, a);
      x = env.em_step(x, a, env.dt_sim(), rng);
    }
    stats.returns[ep] = ret;
  }
  stats.mean = stats.returns.mean();
  stats.stddev = episodes > 1
                     ? std::sqrt((stats.returns.array() - stats.mean).square().sum() /
                                 static_cast<double>(episodes - 1))
                     : 0.0;
  return stats;
}

RolloutStats rollout_random(const Env& env, int episodes, std::uint64_t rng_seed) {
  require(episodes >= 1, "episodes must be at least 1");
  // actions drawn inside the policy loop from the episode stream
  RolloutStats stats;
  stats.returns.resize(episodes);
  Eigen::VectorXd hi = env.penalty().bounded()
                           ? env.penalty().u_max
                           : Eigen::VectorXd::Ones(env.action_dim());
  for (int ep = 0; ep < episodes; ++ep) {
    Rng rng(rng_seed + static_cast<std::uint64_t>(ep));
    Eigen::VectorXd x = env.sample_init(rng);
    double ret = 0.0;
    for (int t = 0; t < env.horizon(); ++t) {
      Eigen::VectorXd a(env.action_dim());
      for (Eigen::Index k = 0; k < a.size(); ++k) a[k] = rng.uniform(-hi[k], hi[k]);
      ret += env.step_reward(x, a);
      x = env.em_step(x, a, env.dt_sim(), rng);
    }
    stats.returns[ep] = ret;
  }
  stats.mean = stats.returns.mean();
  stats.stddev = episodes > 1
                     ? std::sqrt((stats.returns.array() - stats.mean).square().sum() /
                                 static_cast<double>(episodes - 1))
                     : 0.0;
  return stats;
}

// ---- dataset generation (declared in dataset.hpp; needs environment dynamics) ----

Dataset sample_iid(const Env& env, const Eigen::MatrixXd& state_box,
                   const Eigen::MatrixXd& action_box, Eigen::Index N, double h,
                   std::uint64_t rng_seed, DerivMode mode) {
  require(N >= 1, "sample_iid: N must be at least 1");
  require(h > 0.0, "sample_iid: h must be positive");
  require(state_box.rows() == env.sim_dim() && state_box.cols() == 2,
          "state box must be sim_dim x 2");
  require(action_box.rows() == env.action_dim() && action_box.cols() == 2,
          "action box must be n_a x 2");
  require((state_box.col(0).array() <= state_box.col(1).array()).all(),
          "degenerate state box (lower > upper)");
  require((action_box.col(0).array() <= action_box.col(1).array()).all(),
          "degenerate action box (lower > upper)");

  Rng rng(rng_seed);
  Dataset d;
  d.states.resize(N, env.obs_dim());
  d.actions.resize(N, env.action_dim());
  d.derivs.resize(N, env.obs_dim());
  d.rewards.resize(N);
  Eigen::VectorXd x(env.sim_dim()), a(env.action_dim());
  // fixed draw order per record (state coords, action coords, then any step
  // noise), so same-seed datasets nest by prefix as N grows
  for (Eigen::Index i = 0; i < N; ++i) {
    for (int k = 0; k < env.sim_dim(); ++k) x[k] = rng.uniform(state_box(k, 0), state_box(k, 1));
    for (int k = 0; k < env.action_dim(); ++k)
      a[k] = rng.uniform(action_box(k, 0), action_box(k, 1));
    d.states.row(i) = env.observe(x).transpose();
    d.actions.row(i) = a.transpose();
    if (mode == DerivMode::exact_drift) {
      d.derivs.row(i) = env.observed_drift(x, a).transpose();
    } else {
      Eigen::VectorXd next = env.em_step(x, a, h, rng);
      d.derivs.row(i) = ((env.observe(next) - env.observe(x)) / h).transpose();
    }
    d.rewards[i] = env.state_reward(x);
  }
  d.validate();
  return d;
}

Dataset sample_rollout(const Env& env, Eigen::Index N, std::uint64_t rng_seed) {
  require(N >= 1, "sample_rollout: N must be at least 1");
  Dataset d;
  d.states.resize(N, env.obs_dim());
  d.actions.resize(N, env.action_dim());
  d.derivs.resize(N, env.obs_dim());
  d.rewards.resize(N);
  Eigen::VectorXd hi = env.penalty().bounded()
                           ? env.penalty().u_max
                           : Eigen::VectorXd::Ones(env.action_dim());
  Eigen::Index i = 0;
  std::uint64_t episode = 0;
  while (i < N) {
    Rng rng(rng_seed + episode);
    ++episode;
    Eigen::VectorXd x = env.sample_init(rng);
    for (int t = 0; t < env.horizon() && i < N; ++t, ++i) {
      Eigen::VectorXd a(env.action_dim());
      for (Eigen::Index k = 0; k < a.size(); ++k) a[k] = rng.uniform(-hi[k], hi[k]);
      Eigen::VectorXd next = env.em_step(x, a, env.dt_sim(), rng);
      d.states.row(i) = env.observe(x).transpose();
      d.actions.row(i) = a.transpose();
      d.derivs.row(i) = ((env.observe(next) - env.observe(x)) / env.dt_sim()).transpose();
      d.rewards[i] = env.state_reward(x);
      x = next;
    }
  }
  d.validate();
  return d;
}

}  // namespace octrl
