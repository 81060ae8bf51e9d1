#include "octrl/cli.hpp"

#include <CLI11.hpp>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <thread>
#include <vector>

#include "octrl/csv.hpp"
#include "octrl/dataset.hpp"
#include "octrl/envs.hpp"
#include "octrl/errors.hpp"
#include "octrl/hjb_solver.hpp"
#include "octrl/metrics.hpp"
#include "octrl/world_model.hpp"

namespace octrl {

namespace {

class Timer {
 public:
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void log_line(const std::string& msg) { std::fprintf(stderr, "[octrl] %s\n", msg.c_str()); }

Env resolve_env(const ExperimentConfig& cfg) {
  Env env = Env::builtin(cfg.env.name);
  if (cfg.env.epsilon) env.set_epsilon(*cfg.env.epsilon);
  if (cfg.env.dt_sim) env.set_dt_sim(*cfg.env.dt_sim);
  if (cfg.env.horizon) env.set_horizon(*cfg.env.horizon);
  return env;
}

ActionPenalty resolve_penalty(const ExperimentConfig& cfg, const Env& env) {
  return cfg.penalty ? *cfg.penalty : env.penalty();
}

Eigen::MatrixXd box_or_default(const std::vector<std::array<double, 2>>& box,
                               const Eigen::MatrixXd& fallback, const char* what) {
  if (box.empty()) return fallback;
  require(static_cast<Eigen::Index>(box.size()) == fallback.rows(),
          std::string(what) + " row count does not match the environment dimension");
  Eigen::MatrixXd out(fallback.rows(), 2);
  for (std::size_t i = 0; i < box.size(); ++i) {
    out(static_cast<Eigen::Index>(i), 0) = box[i][0];
    out(static_cast<Eigen::Index>(i), 1) = box[i][1];
  }
  return out;
}

Dataset generate_dataset(const ExperimentConfig& cfg, const Env& env, const GenerateSpec& g) {
  const std::uint64_t seed = g.seed.value_or(cfg.seed);
  if (g.mode == "rollout") return sample_rollout(env, g.N, seed);
  const DerivMode mode = (g.mode == "exact") ? DerivMode::exact_drift : DerivMode::em_step;
  const Eigen::MatrixXd sbox = box_or_default(g.state_box, env.default_state_box(), "state_box");
  const Eigen::MatrixXd abox =
      box_or_default(g.action_box, env.default_action_box(), "action_box");
  return sample_iid(env, sbox, abox, g.N, g.h, seed, mode);
}

Dataset resolve_dataset(const ExperimentConfig& cfg, const CliPaths& paths, const Env& env) {
  if (!paths.dataset_file.empty()) return load_dataset(paths.dataset_file);
  if (cfg.dataset.file) return load_dataset(*cfg.dataset.file);
  if (cfg.dataset.generate) return generate_dataset(cfg, env, *cfg.dataset.generate);
  throw_validation("no dataset source: set dataset.file, dataset.generate, or --data");
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw_io("cannot create output directory " + dir + ": " + ec.message());
}

KernelSpec kernel_of(const ExperimentConfig& cfg) {
  KernelSpec k;
  k.lengthscale = cfg.sigma;
  return k;
}

DpConfig dp_of(const ExperimentConfig& cfg) {
  DpConfig d;
  d.rho = cfg.rho;
  d.dt = cfg.dt;
  d.tol = cfg.tol;
  d.k_max = cfg.k_max;
  return d;
}

// theta sweep embedded through the observation map for the pendulum,
// plain 1-D states otherwise
Eigen::MatrixXd eval_states(const Env& env, const EvalGridSpec& grid) {
  Eigen::VectorXd xs = Eigen::VectorXd::LinSpaced(grid.points, grid.lo, grid.hi);
  if (grid.points == 1) xs[0] = grid.lo;
  Eigen::MatrixXd X(grid.points, env.obs_dim());
  for (int i = 0; i < grid.points; ++i) {
    if (env.kind() == EnvKind::pendulum) {
      Eigen::Vector2d sim(xs[i], grid.thetadot);
      X.row(i) = env.observe(sim).transpose();
    } else {
      X(i, 0) = xs[i];
    }
  }
  return X;
}

struct GridError {
  Eigen::VectorXd pointwise;  // offset-corrected deviation / ||q - mean q||
  double rel_l2 = std::numeric_limits<double>::quiet_NaN();
};

// rewards are maximized, references are quoted as costs: compare -V against q
GridError grid_error(const Eigen::VectorXd& values, const Eigen::VectorXd& reference) {
  GridError ge;
  Eigen::VectorXd p = -values;
  Eigen::VectorXd pc = p.array() - p.mean();
  Eigen::VectorXd qc = reference.array() - reference.mean();
  const double denom = qc.norm();
  require(denom > 0.0, "reference signal is constant on the grid");
  ge.pointwise = (pc - qc) / denom;
  ge.rel_l2 = ge.pointwise.norm();
  return ge;
}

double rates_cell_error(const ExperimentConfig& cfg, const Env& env, const GenerateSpec& tmpl,
                        std::int64_t N, std::uint64_t seed, const Eigen::MatrixXd& grid_states,
                        const Eigen::VectorXd& reference) {
  GenerateSpec g = tmpl;
  g.N = N;
  g.seed = seed;
  Dataset data = generate_dataset(cfg, env, g);
  auto model = std::make_shared<WorldModel>(
      WorldModel::fit(data, kernel_of(cfg), cfg.gamma, cfg.epsilon));
  model->set_reward(data.rewards);
  HjbSolution sol = solve(std::move(model), resolve_penalty(cfg, env), dp_of(cfg));
  Eigen::VectorXd values = value_at(sol, grid_states);
  return grid_error(values, reference).rel_l2;
}

int env_threads() {
  const char* s = std::getenv("OCTRL_THREADS");
  if (!s || !*s) return 1;
  const long v = std::strtol(s, nullptr, 10);
  return v >= 1 ? static_cast<int>(v) : 1;
}

PolicyFn learned_policy(std::shared_ptr<const HjbSolution> sol) {
  return [sol](const Eigen::VectorXd& obs) { return policy_at(*sol, obs); };
}

}  // namespace

int cmd_gen_data(const ExperimentConfig& cfg, const CliPaths& paths) {
  require(cfg.dataset.generate.has_value(), "gen-data needs a dataset.generate spec");
  Timer timer;
  Env env = resolve_env(cfg);
  Dataset data = generate_dataset(cfg, env, *cfg.dataset.generate);
  ensure_out_dir(paths.out_dir);
  const std::string out =
      paths.dataset_file.empty() ? join_path(paths.out_dir, "dataset.jsonl") : paths.dataset_file;
  save_dataset(data, out);
  log_line("gen-data: wrote " + std::to_string(data.size()) + " records to " + out + " (" +
           fmt17(timer.ms()) + " ms)");
  return 0;
}

int cmd_fit(const ExperimentConfig& cfg, const CliPaths& paths) {
  Timer timer;
  Env env = resolve_env(cfg);
  Dataset data = resolve_dataset(cfg, paths, env);
  WorldModel model = WorldModel::fit(data, kernel_of(cfg), cfg.gamma, cfg.epsilon);
  if (data.has_rewards()) model.set_reward(data.rewards);
  ensure_out_dir(paths.out_dir);
  const std::string out =
      paths.model_file.empty() ? join_path(paths.out_dir, "model.bin") : paths.model_file;
  model.save(out);

  std::ofstream log(join_path(paths.out_dir, "fit_log.txt"));
  log << "N=" << model.size() << "\n"
      << "state_dim=" << model.state_dim() << "\n"
      << "action_dim=" << model.action_dim() << "\n"
      << "sigma=" << fmt17(cfg.sigma) << "\n"
      << "gamma=" << fmt17(model.gamma()) << "\n"
      << "epsilon=" << fmt17(model.epsilon()) << "\n"
      << "rcond=" << fmt17(model.rcond()) << "\n"
      << "reward_set=" << (model.has_reward() ? 1 : 0) << "\n"
      << "elapsed_ms=" << fmt17(timer.ms()) << "\n";
  log_line("fit: N=" + std::to_string(model.size()) + " rcond=" + fmt17(model.rcond()) + " (" +
           fmt17(timer.ms()) + " ms)");
  return 0;
}

int cmd_solve(const ExperimentConfig& cfg, const CliPaths& paths) {
  Timer timer;
  Env env = resolve_env(cfg);
  const std::string model_path =
      paths.model_file.empty() ? join_path(paths.out_dir, "model.bin") : paths.model_file;
  auto model = std::make_shared<WorldModel>(WorldModel::load(model_path));
  HjbSolution sol = solve(model, resolve_penalty(cfg, env), dp_of(cfg));
  ensure_out_dir(paths.out_dir);
  const std::string out = paths.solution_file.empty() ? join_path(paths.out_dir, "solution.bin")
                                                      : paths.solution_file;
  save_solution(sol, out);

  CsvWriter trace(join_path(paths.out_dir, "trace.csv"), {"iter", "change"});
  for (std::size_t i = 0; i < sol.trace.size(); ++i)
    trace.row({std::to_string(i + 1), fmt17(sol.trace[i])});
  trace.close();

  std::ofstream log(join_path(paths.out_dir, "solve_log.txt"));
  log << "iterations=" << sol.iterations << "\n"
      << "converged=" << (sol.converged ? 1 : 0) << "\n"
      << "final_change=" << fmt17(sol.final_change) << "\n"
      << "elapsed_ms=" << fmt17(timer.ms()) << "\n";
  log_line("solve: iterations=" + std::to_string(sol.iterations) +
           " converged=" + std::to_string(sol.converged ? 1 : 0) +
           " final_change=" + fmt17(sol.final_change) + " (" + fmt17(timer.ms()) + " ms)");
  return 0;
}

int cmd_eval(const ExperimentConfig& cfg, const CliPaths& paths) {
  Timer timer;
  Env env = resolve_env(cfg);
  const std::string sol_path = paths.solution_file.empty()
                                   ? join_path(paths.out_dir, "solution.bin")
                                   : paths.solution_file;
  HjbSolution sol = load_solution(sol_path);
  require(sol.model->action_dim() == 1, "eval supports single-action environments");
  const EvalGridSpec& grid = cfg.eval_grid;
  Eigen::MatrixXd X = eval_states(env, grid);
  require(X.cols() == sol.model->state_dim(),
          "eval grid dimension does not match the fitted model");
  Eigen::VectorXd values = value_at(sol, X);
  Eigen::MatrixXd actions = policy_at(sol, X);
  Eigen::VectorXd xs = Eigen::VectorXd::LinSpaced(grid.points, grid.lo, grid.hi);

  const double nan = std::numeric_limits<double>::quiet_NaN();
  Eigen::VectorXd reference = Eigen::VectorXd::Constant(grid.points, nan);
  GridError ge;
  ge.pointwise = Eigen::VectorXd::Constant(grid.points, nan);
  if (env.has_reference()) {
    for (int i = 0; i < grid.points; ++i) reference[i] = env.reference_value(xs[i]);
    ge = grid_error(values, reference);
  }

  ensure_out_dir(paths.out_dir);
  CsvWriter csv(join_path(paths.out_dir, "eval.csv"),
                {"x", "value", "policy", "reference", "error"});
  for (int i = 0; i < grid.points; ++i)
    csv.row({fmt17(xs[i]), fmt17(values[i]), fmt17(actions(i, 0)), fmt17(reference[i]),
             fmt17(ge.pointwise[i])});
  csv.close();

  CsvWriter summary(join_path(paths.out_dir, "eval_summary.csv"), {"points", "offset_rel_l2"});
  summary.row({std::to_string(grid.points), fmt17(ge.rel_l2)});
  summary.close();
  log_line("eval: " + std::to_string(grid.points) +
           " points, offset_rel_l2=" + fmt17(ge.rel_l2) + " (" + fmt17(timer.ms()) + " ms)");
  return 0;
}

int cmd_rollout(const ExperimentConfig& cfg, const CliPaths& paths) {
  Timer timer;
  Env env = resolve_env(cfg);
  const std::uint64_t seed = cfg.rollout.seed.value_or(cfg.seed);
  RolloutStats stats;
  if (cfg.rollout.policy == "random") {
    stats = rollout_random(env, cfg.rollout.episodes, seed);
  } else {
    const std::string sol_path = paths.solution_file.empty()
                                     ? join_path(paths.out_dir, "solution.bin")
                                     : paths.solution_file;
    auto sol = std::make_shared<HjbSolution>(load_solution(sol_path));
    require(sol->model->state_dim() == env.obs_dim(),
            "solution state dimension does not match the environment");
    stats = rollout(env, learned_policy(sol), cfg.rollout.episodes, seed);
  }

  ensure_out_dir(paths.out_dir);
  CsvWriter csv(join_path(paths.out_dir, "rollout.csv"), {"episode", "return"});
  for (Eigen::Index i = 0; i < stats.returns.size(); ++i)
    csv.row({std::to_string(i), fmt17(stats.returns[i])});
  csv.close();

  CsvWriter summary(join_path(paths.out_dir, "rollout_summary.csv"),
                    {"policy", "episodes", "mean", "std"});
  summary.row({cfg.rollout.policy, std::to_string(cfg.rollout.episodes), fmt17(stats.mean),
               fmt17(stats.stddev)});
  summary.close();
  log_line("rollout: policy=" + cfg.rollout.policy + " mean=" + fmt17(stats.mean) +
           " std=" + fmt17(stats.stddev) + " (" + fmt17(timer.ms()) + " ms)");
  return 0;
}

int cmd_rates(const ExperimentConfig& cfg, const CliPaths& paths) {
  require(cfg.dataset.generate.has_value(), "rates needs a dataset.generate spec");
  Env env = resolve_env(cfg);
  require(env.has_reference(), "rates needs an environment with a reference value");
  const GenerateSpec tmpl = *cfg.dataset.generate;
  const std::uint64_t seed_base = cfg.rates.seed_base.value_or(cfg.seed);

  std::vector<std::int64_t> Ns = cfg.rates.N_list;
  std::sort(Ns.begin(), Ns.end());
  Eigen::MatrixXd grid_states = eval_states(env, cfg.eval_grid);
  Eigen::VectorXd xs = Eigen::VectorXd::LinSpaced(cfg.eval_grid.points, cfg.eval_grid.lo,
                                                  cfg.eval_grid.hi);
  Eigen::VectorXd reference(cfg.eval_grid.points);
  for (int i = 0; i < cfg.eval_grid.points; ++i) reference[i] = env.reference_value(xs[i]);

  struct Cell {
    std::int64_t N;
    std::uint64_t seed;
    double error = std::numeric_limits<double>::quiet_NaN();
  };
  std::vector<Cell> cells;
  for (std::int64_t N : Ns)
    for (int s = 0; s < cfg.rates.seeds; ++s)
      cells.push_back({N, seed_base + static_cast<std::uint64_t>(s)});

  auto run_cell = [&](Cell& cell) {
    Timer cell_timer;
    try {
      cell.error = rates_cell_error(cfg, env, tmpl, cell.N, cell.seed, grid_states, reference);
    } catch (const std::exception& e) {
      log_line("rates: N=" + std::to_string(cell.N) + " seed=" + std::to_string(cell.seed) +
               " failed: " + e.what());
    }
    log_line("rates: N=" + std::to_string(cell.N) + " seed=" + std::to_string(cell.seed) +
             " error=" + fmt17(cell.error) + " (" + fmt17(cell_timer.ms()) + " ms)");
  };

  Timer timer;
  const int workers = std::min<int>(env_threads(), static_cast<int>(cells.size()));
  if (workers <= 1) {
    for (auto& cell : cells) run_cell(cell);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < cells.size(); i = next.fetch_add(1))
          run_cell(cells[i]);
      });
    for (auto& t : pool) t.join();
  }

  ensure_out_dir(paths.out_dir);
  CsvWriter csv(join_path(paths.out_dir, "rates.csv"), {"N", "seed", "l2_error"});
  for (const auto& cell : cells)
    csv.row({std::to_string(cell.N), std::to_string(cell.seed), fmt17(cell.error)});
  csv.close();

  std::vector<std::string> header = {"N"};
  for (double q : cfg.rates.quantiles) header.push_back("q" + fmt17(q));
  CsvWriter summary(join_path(paths.out_dir, "rates_summary.csv"), header);
  std::vector<double> log_n, log_median;
  for (std::int64_t N : Ns) {
    std::vector<double> errs;
    for (const auto& cell : cells)
      if (cell.N == N) errs.push_back(cell.error);
    std::vector<std::string> row = {std::to_string(N)};
    for (double q : cfg.rates.quantiles) row.push_back(fmt17(quantile(errs, q)));
    summary.row(row);
    const double med = quantile(errs, 0.5);
    if (std::isfinite(med) && med > 0.0) {
      log_n.push_back(std::log(static_cast<double>(N)));
      log_median.push_back(std::log(med));
    }
  }
  summary.close();

  double slope = std::numeric_limits<double>::quiet_NaN();
  double intercept = std::numeric_limits<double>::quiet_NaN();
  if (log_n.size() >= 2) std::tie(slope, intercept) = fit_line(log_n, log_median);
  CsvWriter fitcsv(join_path(paths.out_dir, "rates_fit.csv"), {"slope", "intercept"});
  fitcsv.row({fmt17(slope), fmt17(intercept)});
  fitcsv.close();
  log_line("rates: " + std::to_string(cells.size()) + " cells, slope=" + fmt17(slope) + " (" +
           fmt17(timer.ms()) + " ms)");
  return 0;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"generator world models and HJB dynamic programming for controlled diffusions"};
  app.require_subcommand(1);

  std::string config_path, env_name, out_dir, data_file, model_file, solution_file, out_file;
  std::optional<std::uint64_t> seed;
  std::optional<double> sigma, gamma, epsilon, rho, dt, tol, h;
  std::optional<int> k_max, episodes, points;
  std::optional<std::int64_t> N;
  std::string mode, policy;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON experiment config");
    sub->add_option("--env", env_name, "built-in environment (ou, nonlinear, pendulum)");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "global RNG seed");
    sub->add_option("--sigma", sigma, "kernel lengthscale");
    sub->add_option("--gamma", gamma, "ridge regularization");
    sub->add_option("--epsilon", epsilon, "diffusion coefficient used in the fit");
    sub->add_option("--rho", rho, "discount rate");
    sub->add_option("--dt", dt, "pseudo-time step");
    sub->add_option("--tol", tol, "termination tolerance");
    sub->add_option("--k-max", k_max, "iteration cap");
    sub->add_option("--N", N, "generated dataset size");
    sub->add_option("--mode", mode, "derivative generation mode (em, exact, rollout)");
    sub->add_option("--h-step", h, "generation step length");
    sub->add_option("--data", data_file, "dataset file (overrides the config source)");
    sub->add_option("--model", model_file, "model artifact path");
    sub->add_option("--solution", solution_file, "solution artifact path");
    sub->add_option("--episodes", episodes, "rollout episode count");
    sub->add_option("--policy", policy, "rollout policy (learned, random)");
    sub->add_option("--points", points, "evaluation grid size");
    return sub;
  };

  CLI::App* c_gen = add_common(app.add_subcommand("gen-data", "generate a dataset"));
  c_gen->add_option("--out-file", out_file, "dataset output path (extension picks the format)");
  CLI::App* c_fit = add_common(app.add_subcommand("fit", "fit the world model"));
  CLI::App* c_solve = add_common(app.add_subcommand("solve", "run the IMEX recursion"));
  CLI::App* c_eval = add_common(app.add_subcommand("eval", "evaluate value/policy on a grid"));
  CLI::App* c_roll = add_common(app.add_subcommand("rollout", "evaluate by simulation"));
  CLI::App* c_rates = add_common(app.add_subcommand("rates", "convergence-rate study"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    ExperimentConfig cfg;
    if (!config_path.empty()) {
      cfg = ExperimentConfig::load(config_path);
      if (!env_name.empty()) cfg.env.name = env_name;
    } else if (!env_name.empty()) {
      cfg = default_config(env_name);
    } else {
      throw_validation("need --config or --env");
    }
    if (seed) cfg.seed = *seed;
    if (sigma) cfg.sigma = *sigma;
    if (gamma) cfg.gamma = *gamma;
    if (epsilon) cfg.epsilon = *epsilon;
    if (rho) cfg.rho = *rho;
    if (dt) cfg.dt = *dt;
    if (tol) cfg.tol = *tol;
    if (k_max) cfg.k_max = *k_max;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (!data_file.empty()) cfg.dataset.file = data_file;
    if (N || !mode.empty() || h) {
      if (!cfg.dataset.generate) cfg.dataset.generate = GenerateSpec{};
      if (N) cfg.dataset.generate->N = *N;
      if (!mode.empty()) cfg.dataset.generate->mode = mode;
      if (h) cfg.dataset.generate->h = *h;
    }
    if (episodes) cfg.rollout.episodes = *episodes;
    if (!policy.empty()) cfg.rollout.policy = policy;
    if (points) cfg.eval_grid.points = *points;
    cfg.validate();

    CliPaths paths;
    paths.out_dir = cfg.out_dir;
    paths.model_file = model_file;
    paths.solution_file = solution_file;
    if (c_gen->parsed()) {
      paths.dataset_file = out_file;
      return cmd_gen_data(cfg, paths);
    }
    paths.dataset_file = data_file;
    if (c_fit->parsed()) return cmd_fit(cfg, paths);
    if (c_solve->parsed()) return cmd_solve(cfg, paths);
    if (c_eval->parsed()) return cmd_eval(cfg, paths);
    if (c_roll->parsed()) return cmd_rollout(cfg, paths);
    if (c_rates->parsed()) return cmd_rates(cfg, paths);
    throw_validation("no subcommand selected");
  } catch (const error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace octrl
