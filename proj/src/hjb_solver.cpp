#include "octrl/hjb_solver.hpp"

#include <cstring>
#include <fstream>
#include <iostream>

#include "octrl/errors.hpp"

namespace octrl {

void DpConfig::validate() const {
  require(rho >= 0.0, "rho must be nonnegative");
  require(dt > 0.0, "dt must be positive");
  require(tol > 0.0, "tol must be positive");
  require(k_max >= 1, "k_max must be at least 1");
}

LuFactor build_propagator(const WorldModel& model, const DpConfig& config) {
  config.validate();
  Eigen::MatrixXd m = -config.dt * model.dynamics();
  m.diagonal().array() += 1.0 + config.dt * config.rho;
  LuFactor lu;
  try {
    lu.compute(std::move(m));
  } catch (const error& e) {
    throw_validation(std::string(e.what()) +
                     "; the IMEX system is singular, try rho > 0 or a smaller dt");
  }
  return lu;
}

Eigen::VectorXd imex_step(const LuFactor& propagator, const Eigen::VectorXd& v,
                          const DpConfig& config, const Eigen::VectorXd& r,
                          const Eigen::VectorXd& d) {
  return propagator.solve(v + config.dt * (r + d));
}

HjbSolution solve(std::shared_ptr<const WorldModel> model, const ActionPenalty& penalty,
                  const DpConfig& config, const Eigen::VectorXd* v0) {
  require(model != nullptr, "solve: model required");
  config.validate();
  penalty.validate();
  require(penalty.dim() == model->action_dim(), "penalty dimension does not match model actions");
  const Eigen::VectorXd& r = model->reward_coef();  // throws if reward not set
  if (config.rho == 0.0)
    std::cerr << "warning: rho=0 (undiscounted); the value is defined only up to a constant,"
                 " compare offset-corrected\n";

  const Eigen::Index n = model->size();
  const int n_a = model->action_dim();
  LuFactor propagator = build_propagator(*model, config);

  HjbSolution sol;
  sol.model = model;
  sol.penalty = penalty;
  sol.config = config;
  sol.trace.reserve(static_cast<size_t>(config.k_max));

  Eigen::VectorXd v;
  if (v0 != nullptr) {
    require(v0->size() == n, "v0 size mismatch");
    v = *v0;
  } else {
    v = Eigen::VectorXd::Zero(n);
  }

  Eigen::MatrixXd costates(n, n_a);
  for (int k = 1; k <= config.k_max; ++k) {
    Eigen::VectorXd av = model->dynamics() * v;
    for (int c = 0; c < n_a; ++c)
      costates.col(c) =
          model->gram_states() * (model->train_actions().col(c).asDiagonal() * av);
    Eigen::VectorXd conj = conjugate_rowwise(penalty, costates);
    if (!conj.allFinite())
      throw_divergence("HJB iteration diverged at iteration " + std::to_string(k) +
                       " (max |v| before step: " + std::to_string(v.cwiseAbs().maxCoeff()) +
                       ")");
    Eigen::VectorXd d = model->gram_factor().solve(conj);
    Eigen::VectorXd next = imex_step(propagator, v, config, r, d);
    if (!next.allFinite())
      throw_divergence("HJB iteration diverged at iteration " + std::to_string(k) +
                       " (max |v| before step: " + std::to_string(v.cwiseAbs().maxCoeff()) +
                       ")");
    const double change = (next - v).norm();
    sol.trace.push_back(change);
    v = std::move(next);
    sol.iterations = k;
    sol.final_change = change;
    if (change <= config.tol) {
      sol.converged = true;
      break;
    }
  }

  sol.v = std::move(v);
  sol.channel_weights.resize(n, n_a);
  Eigen::VectorXd av = model->dynamics() * sol.v;
  for (int c = 0; c < n_a; ++c)
    sol.channel_weights.col(c) = model->train_actions().col(c).cwiseProduct(av);
  return sol;
}

double value_at(const HjbSolution& sol, const Eigen::VectorXd& x) {
  return sol.v.dot(gram_row(sol.model->kernel(), x, sol.model->train_states()));
}

Eigen::VectorXd costate_at(const HjbSolution& sol, const Eigen::VectorXd& x) {
  return sol.channel_weights.transpose() *
         gram_row(sol.model->kernel(), x, sol.model->train_states());
}

Eigen::VectorXd policy_at(const HjbSolution& sol, const Eigen::VectorXd& x) {
  return argmax_action(sol.penalty, costate_at(sol, x));
}

Eigen::VectorXd value_at(const HjbSolution& sol, const Eigen::MatrixXd& X) {
  return gram(sol.model->kernel(), X, sol.model->train_states()) * sol.v;
}

Eigen::MatrixXd policy_at(const HjbSolution& sol, const Eigen::MatrixXd& X) {
  Eigen::MatrixXd lam =
      gram(sol.model->kernel(), X, sol.model->train_states()) * sol.channel_weights;
  Eigen::MatrixXd u(lam.rows(), lam.cols());
  for (Eigen::Index i = 0; i < lam.rows(); ++i)
    u.row(i) = argmax_action(sol.penalty, lam.row(i).transpose()).transpose();
  return u;
}

// ---- serialization ----

namespace {
constexpr char kMagic[8] = {'O', 'C', 'T', 'R', 'L', 'S', 'L', '\n'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T read_pod(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw_io("truncated solution artifact");
  return v;
}
void write_vector(std::ostream& out, const Eigen::VectorXd& v) {
  write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(v.size()));
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<size_t>(v.size())));
}
Eigen::VectorXd read_vector(std::istream& in) {
  const auto n = read_pod<std::uint64_t>(in);
  require(n <= (1u << 24), "solution artifact has absurd dimensions");
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(sizeof(double) * n));
  if (!in) throw_io("truncated solution artifact");
  return v;
}
}  // namespace

void save_solution(const HjbSolution& sol, const std::string& path) {
  require(sol.model != nullptr, "solution has no model");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_io("cannot write solution artifact: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(out, kVersion);
  write_pod<double>(out, sol.config.rho);
  write_pod<double>(out, sol.config.dt);
  write_pod<double>(out, sol.config.tol);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(sol.config.k_max));
  write_vector(out, sol.penalty.weights);
  write_pod<std::uint8_t>(out, sol.penalty.bounded() ? 1 : 0);
  if (sol.penalty.bounded()) write_vector(out, sol.penalty.u_max);
  write_vector(out, sol.v);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(sol.iterations));
  write_pod<double>(out, sol.final_change);
  write_pod<std::uint8_t>(out, sol.converged ? 1 : 0);
  sol.model->save_stream(out);
  if (!out.good()) throw_io("write failed: " + path);
}

HjbSolution load_solution(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot open solution artifact: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw_validation("not a solution artifact: " + path);
  require(read_pod<std::uint32_t>(in) == kVersion, "unsupported solution artifact version");
  HjbSolution sol;
  sol.config.rho = read_pod<double>(in);
  sol.config.dt = read_pod<double>(in);
  sol.config.tol = read_pod<double>(in);
  sol.config.k_max = static_cast<int>(read_pod<std::uint32_t>(in));
  sol.penalty.weights = read_vector(in);
  if (read_pod<std::uint8_t>(in) != 0) sol.penalty.u_max = read_vector(in);
  sol.v = read_vector(in);
  sol.iterations = static_cast<int>(read_pod<std::uint32_t>(in));
  sol.final_change = read_pod<double>(in);
  sol.converged = read_pod<std::uint8_t>(in) != 0;
  sol.model = std::make_shared<WorldModel>(WorldModel::load_stream(in));
  require(sol.v.size() == sol.model->size(), "solution artifact: v size mismatch");
  sol.channel_weights.resize(sol.model->size(), sol.model->action_dim());
  Eigen::VectorXd av = sol.model->dynamics() * sol.v;
  for (int c = 0; c < sol.model->action_dim(); ++c)
    sol.channel_weights.col(c) = sol.model->train_actions().col(c).cwiseProduct(av);
  return sol;
}

}  // namespace octrl
