#include "octrl/world_model.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <vector>

#include "octrl/errors.hpp"
#include "octrl/rng.hpp"

namespace octrl {

using nlohmann::json;

static Eigen::MatrixXd sq_dists(const Eigen::MatrixXd& X) {
  Eigen::VectorXd n = X.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = -2.0 * X * X.transpose();
  d2.colwise() += n;
  d2.rowwise() += n.transpose();
  return d2.cwiseMax(0.0);
}

Eigen::MatrixXd assemble_gram(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions,
                              const KernelSpec& kernel, double gamma) {
  require(gamma > 0.0, "gamma must be positive");
  require(states.rows() == actions.rows(), "states/actions row mismatch");
  const Eigen::Index n = states.rows();
  Eigen::MatrixXd kg = actions * actions.transpose();
  kg.array() += 1.0;
  kg.array() *= gram(kernel, states).array();
  kg.diagonal().array() += static_cast<double>(n) * gamma;
  return kg;
}

Eigen::MatrixXd assemble_target(const Eigen::MatrixXd& states, const Eigen::MatrixXd& derivs,
                                const KernelSpec& kernel, double epsilon) {
  require(epsilon >= 0.0, "epsilon must be nonnegative");
  require(states.rows() == derivs.rows() && states.cols() == derivs.cols(),
          "states/derivs shape mismatch");
  kernel.validate();
  const double s2 = kernel.lengthscale * kernel.lengthscale;
  const double n_s = static_cast<double>(states.cols());
  // <d_i, grad_x k(x_i, x_j)> = k_ij (<d_i, x_j> - <d_i, x_i>) / s2
  Eigen::MatrixXd grad_dot = derivs * states.transpose();
  grad_dot.colwise() -= (derivs.array() * states.array()).rowwise().sum().matrix();
  Eigen::MatrixXd d2 = sq_dists(states);
  Eigen::MatrixXd kd =
      (grad_dot.array() / s2 + epsilon * (d2.array() / (s2 * s2) - n_s / s2)) *
      (d2.array() / (-2.0 * s2)).exp();
  return kd;
}

Eigen::MatrixXd WorldModel::apply_gram(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd out = gram_states_ * x;
  for (int k = 0; k < action_dim(); ++k) {
    Eigen::VectorXd u = actions_.col(k);
    out += u.asDiagonal() * (gram_states_ * (u.asDiagonal() * x));
  }
  out += static_cast<double>(size()) * gamma_ * x;
  return out;
}

// One Frobenius-residual estimate of K_gamma X - RHS from a few random probes;
// full products are avoided until the estimate suggests trouble.
static double probe_residual(const WorldModel& m, const Eigen::MatrixXd& x,
                             const Eigen::MatrixXd& rhs) {
  Rng rng(0x9e3779b97f4a7c15ull);
  const int probes = 8;
  double acc = 0.0;
  for (int p = 0; p < probes; ++p) {
    Eigen::VectorXd w(x.cols());
    for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = rng.normal();
    acc += (m.apply_gram(x * w) - rhs * w).squaredNorm();
  }
  return std::sqrt(acc / probes);
}

// Iterative refinement until ||K_gamma X - RHS||_F <= 1e-8 (1 + ||RHS||_F).
// Direct Cholesky solves are backward stable but the contract is on the
// residual itself, which one or two correction passes tighten cheaply.
static void refine(const WorldModel& m, const SpdFactor& factor, Eigen::MatrixXd& x,
                   const Eigen::MatrixXd& rhs, const char* label) {
  const double bound = 1e-8 * (1.0 + rhs.norm());
  const bool big = rhs.rows() > 2048 && rhs.cols() > 8;
  if (big && probe_residual(m, x, rhs) <= 0.5 * bound) return;
  for (int pass = 0; pass < 3; ++pass) {
    Eigen::MatrixXd r = rhs - m.apply_gram(x);
    if (r.norm() <= bound) return;
    factor.solve_in_place(r);
    x += r;
  }
  if ((rhs - m.apply_gram(x)).norm() > bound)
    std::cerr << "warning: " << label << " solve residual above contract after refinement\n";
}

WorldModel WorldModel::fit(const Dataset& data, const KernelSpec& kernel, double gamma,
                           double epsilon) {
  data.validate();
  kernel.validate();
  require(gamma > 0.0, "gamma must be positive");
  require(epsilon >= 0.0, "epsilon must be nonnegative");

  WorldModel m;
  m.kernel_ = kernel;
  m.gamma_ = gamma;
  m.epsilon_ = epsilon;
  m.states_ = data.states;
  m.actions_ = data.actions;
  m.gram_states_ = gram(kernel, m.states_);

  const Eigen::Index n = m.size();
  auto build_kgamma = [&](double g) {
    Eigen::MatrixXd kg = m.actions_ * m.actions_.transpose();
    kg.array() += 1.0;
    kg.array() *= m.gram_states_.array();
    kg.diagonal().array() += static_cast<double>(n) * g;
    return kg;
  };

  Eigen::MatrixXd kg = build_kgamma(gamma);
  const double one_norm = kg.cwiseAbs().colwise().sum().maxCoeff();
  try {
    m.factor_.compute(std::move(kg));
  } catch (const error&) {
    // one-time fallback for numerically singular K_gamma
    m.gamma_ = 10.0 * gamma;
    std::cerr << "warning: Gram factorization failed; retrying with gamma=" << m.gamma_ << "\n";
    Eigen::MatrixXd kg2 = build_kgamma(m.gamma_);
    m.factor_.compute(std::move(kg2));
  }
  m.rcond_ = m.factor_.rcond(one_norm);

  Eigen::MatrixXd kd = assemble_target(m.states_, data.derivs, kernel, epsilon);
  m.dynamics_ = kd;
  m.factor_.solve_in_place(m.dynamics_);
  refine(m, m.factor_, m.dynamics_, kd, "dynamics");
  return m;
}

void WorldModel::set_reward(const Eigen::VectorXd& y_r) {
  require(factor_.ready(), "model not fitted");
  require(y_r.size() == size(), "reward vector length mismatch");
  require(y_r.allFinite(), "reward vector contains non-finite values");
  Eigen::MatrixXd r = factor_.solve(y_r);
  refine(*this, factor_, r, y_r, "reward");
  reward_coef_ = r.col(0);
}

const Eigen::VectorXd& WorldModel::reward_coef() const {
  require(has_reward(), "reward coefficients not set; call set_reward first");
  return reward_coef_;
}

Eigen::VectorXd WorldModel::channel_apply(int k, const Eigen::VectorXd& v) const {
  require(k >= 0 && k < action_dim(), "action channel out of range");
  return actions_.col(k).asDiagonal() * (dynamics_ * v);
}

Eigen::MatrixXd WorldModel::action_channel(int k) const {
  require(k >= 0 && k < action_dim(), "action channel out of range");
  return actions_.col(k).asDiagonal() * dynamics_;
}

// ---- serialization ----

namespace {

constexpr char kMagic[8] = {'O', 'C', 'T', 'R', 'L', 'W', 'M', '\n'};
constexpr std::uint32_t kVersion = 1;

void write_bytes(std::ostream& out, const void* p, size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}
template <typename T>
void write_pod(std::ostream& out, T v) {
  write_bytes(out, &v, sizeof(T));
}
void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  write_bytes(out, m.data(), sizeof(double) * static_cast<size_t>(m.size()));
}
void read_bytes(std::istream& in, void* p, size_t n) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (!in) throw_io("truncated model artifact");
}
template <typename T>
T read_pod(std::istream& in) {
  T v;
  read_bytes(in, &v, sizeof(T));
  return v;
}
Eigen::MatrixXd read_matrix(std::istream& in) {
  const auto rows = read_pod<std::uint64_t>(in);
  const auto cols = read_pod<std::uint64_t>(in);
  require(rows <= (1u << 20) && cols <= (1u << 20), "model artifact has absurd dimensions");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  read_bytes(in, m.data(), sizeof(double) * static_cast<size_t>(m.size()));
  return m;
}

bool is_json_path(const std::string& path) {
  return path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}
Eigen::MatrixXd matrix_from_json(const json& j) {
  require(j.is_array() && !j.empty(), "model artifact: bad matrix");
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = static_cast<Eigen::Index>(j[0].size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    require(static_cast<Eigen::Index>(j[i].size()) == cols, "model artifact: ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

}  // namespace

void WorldModel::save_stream(std::ostream& out) const {
  write_bytes(out, kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(out, kVersion);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(kernel_.family));
  write_pod<double>(out, kernel_.lengthscale);
  write_pod<double>(out, gamma_);
  write_pod<double>(out, epsilon_);
  write_matrix(out, states_);
  write_matrix(out, actions_);
  write_matrix(out, dynamics_);
  write_pod<std::uint8_t>(out, has_reward() ? 1 : 0);
  if (has_reward()) write_matrix(out, reward_coef_);
}

WorldModel WorldModel::load_stream(std::istream& in) {
  char magic[8];
  read_bytes(in, magic, sizeof(magic));
  require(std::memcmp(magic, kMagic, sizeof(magic)) == 0, "not a model artifact");
  const auto version = read_pod<std::uint32_t>(in);
  require(version == kVersion, "unsupported model artifact version");
  WorldModel m;
  const auto family = read_pod<std::uint32_t>(in);
  require(family == 0, "unknown kernel family in model artifact");
  m.kernel_.family = KernelFamily::squared_exponential;
  m.kernel_.lengthscale = read_pod<double>(in);
  m.gamma_ = read_pod<double>(in);
  m.epsilon_ = read_pod<double>(in);
  m.states_ = read_matrix(in);
  m.actions_ = read_matrix(in);
  m.dynamics_ = read_matrix(in);
  if (read_pod<std::uint8_t>(in) != 0) m.reward_coef_ = read_matrix(in).col(0);
  m.finalize_from_loaded();
  return m;
}

void WorldModel::save(const std::string& path) const {
  require(factor_.ready(), "model not fitted");
  if (is_json_path(path)) {
    json j;
    j["format"] = "world_model";
    j["version"] = kVersion;
    j["kernel"] = {{"family", "squared_exponential"}, {"sigma", kernel_.lengthscale}};
    j["gamma"] = gamma_;
    j["epsilon"] = epsilon_;
    j["train_states"] = matrix_to_json(states_);
    j["train_actions"] = matrix_to_json(actions_);
    j["dynamics"] = matrix_to_json(dynamics_);
    if (has_reward()) j["reward_coef"] = matrix_to_json(reward_coef_);
    std::ofstream out(path);
    if (!out) throw_io("cannot write model artifact: " + path);
    out << j.dump(1) << "\n";
    if (!out.good()) throw_io("write failed: " + path);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_io("cannot write model artifact: " + path);
  save_stream(out);
  if (!out.good()) throw_io("write failed: " + path);
}

void WorldModel::finalize_from_loaded() {
  kernel_.validate();
  require(gamma_ > 0.0 && epsilon_ >= 0.0, "model artifact: bad gamma/epsilon");
  require(states_.rows() >= 1 && states_.rows() == actions_.rows(), "model artifact: bad tables");
  require(dynamics_.rows() == states_.rows() && dynamics_.cols() == states_.rows(),
          "model artifact: dynamics shape mismatch");
  gram_states_ = gram(kernel_, states_);
  Eigen::MatrixXd kg = actions_ * actions_.transpose();
  kg.array() += 1.0;
  kg.array() *= gram_states_.array();
  kg.diagonal().array() += static_cast<double>(size()) * gamma_;
  const double one_norm = kg.cwiseAbs().colwise().sum().maxCoeff();
  factor_.compute(std::move(kg));
  rcond_ = factor_.rcond(one_norm);
}

WorldModel WorldModel::load(const std::string& path) {
  if (!is_json_path(path)) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw_io("cannot open model artifact: " + path);
    return load_stream(in);
  }
  WorldModel m;
  std::ifstream in(path);
  if (!in) throw_io("cannot open model artifact: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw_validation(std::string("model artifact parse error: ") + e.what());
  }
  require(j.value("format", "") == "world_model", "not a model artifact");
  require(j.value("version", 0u) == kVersion, "unsupported model artifact version");
  m.kernel_.lengthscale = j["kernel"]["sigma"].get<double>();
  m.gamma_ = j["gamma"].get<double>();
  m.epsilon_ = j["epsilon"].get<double>();
  m.states_ = matrix_from_json(j["train_states"]);
  m.actions_ = matrix_from_json(j["train_actions"]);
  m.dynamics_ = matrix_from_json(j["dynamics"]);
  if (j.contains("reward_coef")) m.reward_coef_ = matrix_from_json(j["reward_coef"]).col(0);
  m.finalize_from_loaded();
  return m;
}

}  // namespace octrl
