#include "octrl/config.hpp"

#include <cmath>
#include <fstream>

#include "octrl/errors.hpp"

namespace octrl {

using nlohmann::json;

void ExperimentConfig::validate() const {
  require(!env.name.empty(), "config: env.name required");
  if (env.epsilon) require(*env.epsilon >= 0.0, "config: env.epsilon must be nonnegative");
  if (env.dt_sim) require(*env.dt_sim > 0.0, "config: env.dt_sim must be positive");
  if (env.horizon) require(*env.horizon >= 1, "config: env.horizon must be at least 1");
  require(sigma > 0.0, "config: sigma must be positive");
  require(gamma > 0.0, "config: gamma must be positive");
  require(epsilon >= 0.0, "config: epsilon must be nonnegative");
  require(rho >= 0.0, "config: rho must be nonnegative");
  require(dt > 0.0, "config: dt must be positive");
  require(tol > 0.0, "config: tol must be positive");
  require(k_max >= 1, "config: k_max must be at least 1");
  if (penalty) penalty->validate();
  if (dataset.generate) {
    const auto& g = *dataset.generate;
    require(g.N >= 1, "config: dataset.generate.N must be at least 1");
    require(g.h > 0.0, "config: dataset.generate.h must be positive");
    require(g.mode == "em" || g.mode == "exact" || g.mode == "rollout",
            "config: dataset.generate.mode must be em, exact, or rollout");
    for (const auto& b : g.state_box)
      require(b[0] <= b[1], "config: degenerate state box (lower > upper)");
    for (const auto& b : g.action_box)
      require(b[0] <= b[1], "config: degenerate action box (lower > upper)");
  }
  require(eval_grid.points >= 1, "config: eval_grid.points must be at least 1");
  require(eval_grid.lo <= eval_grid.hi, "config: eval_grid.lo must not exceed hi");
  require(!rates.N_list.empty(), "config: rates.N_list must not be empty");
  for (auto n : rates.N_list) require(n >= 1, "config: rates.N_list entries must be positive");
  require(rates.seeds >= 1, "config: rates.seeds must be at least 1");
  for (double q : rates.quantiles)
    require(q >= 0.0 && q <= 1.0, "config: rates.quantiles must lie in [0,1]");
  require(rollout.episodes >= 1, "config: rollout.episodes must be at least 1");
  require(rollout.policy == "learned" || rollout.policy == "random",
          "config: rollout.policy must be learned or random");
  require(!out_dir.empty(), "config: out_dir required");
}

namespace {

json boxes_to_json(const std::vector<std::array<double, 2>>& boxes) {
  json out = json::array();
  for (const auto& b : boxes) out.push_back(json::array({b[0], b[1]}));
  return out;
}

std::vector<std::array<double, 2>> boxes_from_json(const json& j, const char* what) {
  require(j.is_array(), std::string("config: ") + what + " must be an array of [lo, hi] pairs");
  std::vector<std::array<double, 2>> out;
  for (const auto& b : j) {
    require(b.is_array() && b.size() == 2, std::string("config: ") + what + " entries need 2 numbers");
    out.push_back({b[0].get<double>(), b[1].get<double>()});
  }
  return out;
}

template <typename T>
json opt_json(const std::optional<T>& v) {
  if (v) return json(*v);
  return json(nullptr);
}

}  // namespace

json ExperimentConfig::to_json() const {
  json j;
  j["env"] = {{"name", env.name},
              {"epsilon", opt_json(env.epsilon)},
              {"dt_sim", opt_json(env.dt_sim)},
              {"horizon", opt_json(env.horizon)}};
  j["kernel"] = {{"sigma", sigma}};
  j["gamma"] = gamma;
  j["epsilon"] = epsilon;
  j["rho"] = rho;
  j["dt"] = dt;
  j["tol"] = tol;
  j["k_max"] = k_max;
  if (penalty) {
    json p;
    p["weights"] = std::vector<double>(penalty->weights.data(),
                                       penalty->weights.data() + penalty->weights.size());
    if (penalty->bounded())
      p["u_max"] = std::vector<double>(penalty->u_max.data(),
                                       penalty->u_max.data() + penalty->u_max.size());
    else
      p["u_max"] = nullptr;
    j["penalty"] = p;
  } else {
    j["penalty"] = nullptr;
  }
  json ds;
  ds["file"] = opt_json(dataset.file);
  if (dataset.generate) {
    const auto& g = *dataset.generate;
    ds["generate"] = {{"N", g.N},
                      {"mode", g.mode},
                      {"h", g.h},
                      {"state_box", boxes_to_json(g.state_box)},
                      {"action_box", boxes_to_json(g.action_box)},
                      {"seed", opt_json(g.seed)}};
  } else {
    ds["generate"] = nullptr;
  }
  j["dataset"] = ds;
  j["eval_grid"] = {{"lo", eval_grid.lo},
                    {"hi", eval_grid.hi},
                    {"points", eval_grid.points},
                    {"thetadot", eval_grid.thetadot}};
  j["rates"] = {{"N_list", rates.N_list},
                {"seeds", rates.seeds},
                {"seed_base", opt_json(rates.seed_base)},
                {"quantiles", rates.quantiles}};
  j["rollout"] = {{"episodes", rollout.episodes},
                  {"seed", opt_json(rollout.seed)},
                  {"policy", rollout.policy}};
  j["seed"] = seed;
  j["out_dir"] = out_dir;
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  try {
    if (j.contains("env")) {
      const auto& e = j["env"];
      if (e.is_string()) {
        c.env.name = e.get<std::string>();
      } else {
        if (e.contains("name")) c.env.name = e["name"].get<std::string>();
        if (e.contains("epsilon") && !e["epsilon"].is_null())
          c.env.epsilon = e["epsilon"].get<double>();
        if (e.contains("dt_sim") && !e["dt_sim"].is_null())
          c.env.dt_sim = e["dt_sim"].get<double>();
        if (e.contains("horizon") && !e["horizon"].is_null())
          c.env.horizon = e["horizon"].get<int>();
      }
    }
    if (j.contains("kernel") && j["kernel"].contains("sigma"))
      c.sigma = j["kernel"]["sigma"].get<double>();
    if (j.contains("gamma")) c.gamma = j["gamma"].get<double>();
    if (j.contains("epsilon")) c.epsilon = j["epsilon"].get<double>();
    if (j.contains("rho")) c.rho = j["rho"].get<double>();
    if (j.contains("dt")) c.dt = j["dt"].get<double>();
    if (j.contains("tol")) c.tol = j["tol"].get<double>();
    if (j.contains("k_max")) c.k_max = j["k_max"].get<int>();
    if (j.contains("penalty") && !j["penalty"].is_null()) {
      ActionPenalty p;
      auto w = j["penalty"]["weights"].get<std::vector<double>>();
      p.weights = Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
      if (j["penalty"].contains("u_max") && !j["penalty"]["u_max"].is_null()) {
        auto u = j["penalty"]["u_max"].get<std::vector<double>>();
        p.u_max = Eigen::Map<Eigen::VectorXd>(u.data(), static_cast<Eigen::Index>(u.size()));
      }
      c.penalty = p;
    }
    if (j.contains("dataset")) {
      const auto& d = j["dataset"];
      if (d.contains("file") && !d["file"].is_null())
        c.dataset.file = d["file"].get<std::string>();
      if (d.contains("generate") && !d["generate"].is_null()) {
        GenerateSpec g;
        const auto& gj = d["generate"];
        if (gj.contains("N")) g.N = gj["N"].get<std::int64_t>();
        if (gj.contains("mode")) g.mode = gj["mode"].get<std::string>();
        if (gj.contains("h")) g.h = gj["h"].get<double>();
        if (gj.contains("state_box")) g.state_box = boxes_from_json(gj["state_box"], "state_box");
        if (gj.contains("action_box"))
          g.action_box = boxes_from_json(gj["action_box"], "action_box");
        if (gj.contains("seed") && !gj["seed"].is_null())
          g.seed = gj["seed"].get<std::uint64_t>();
        c.dataset.generate = g;
      }
    }
    if (j.contains("eval_grid")) {
      const auto& g = j["eval_grid"];
      if (g.contains("lo")) c.eval_grid.lo = g["lo"].get<double>();
      if (g.contains("hi")) c.eval_grid.hi = g["hi"].get<double>();
      if (g.contains("points")) c.eval_grid.points = g["points"].get<int>();
      if (g.contains("thetadot")) c.eval_grid.thetadot = g["thetadot"].get<double>();
    }
    if (j.contains("rates")) {
      const auto& r = j["rates"];
      if (r.contains("N_list")) c.rates.N_list = r["N_list"].get<std::vector<std::int64_t>>();
      if (r.contains("seeds")) c.rates.seeds = r["seeds"].get<int>();
      if (r.contains("seed_base") && !r["seed_base"].is_null())
        c.rates.seed_base = r["seed_base"].get<std::uint64_t>();
      if (r.contains("quantiles")) c.rates.quantiles = r["quantiles"].get<std::vector<double>>();
    }
    if (j.contains("rollout")) {
      const auto& r = j["rollout"];
      if (r.contains("episodes")) c.rollout.episodes = r["episodes"].get<int>();
      if (r.contains("seed") && !r["seed"].is_null())
        c.rollout.seed = r["seed"].get<std::uint64_t>();
      if (r.contains("policy")) c.rollout.policy = r["policy"].get<std::string>();
    }
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("out_dir")) c.out_dir = j["out_dir"].get<std::string>();
  } catch (const json::exception& e) {
    throw_validation(std::string("config parse error: ") + e.what());
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_io("cannot open config: " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw_validation(std::string("config parse error in ") + path + ": " + e.what());
  }
  return from_json(j);
}

void ExperimentConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw_io("cannot write config: " + path);
  out << to_json().dump(2) << "\n";
  if (!out.good()) throw_io("write failed: " + path);
}

ExperimentConfig default_config(const std::string& env_name) {
  ExperimentConfig c;
  c.env.name = env_name;
  GenerateSpec g;
  if (env_name == "ou") {
    c.sigma = 10.0;
    c.gamma = 1e-10;
    c.epsilon = 0.01;
    c.rho = 0.0;
    g.N = 200;
    g.mode = "exact";
    c.eval_grid = {-3.0, 3.0, 1000, 0.0};
  } else if (env_name == "nonlinear") {
    c.sigma = 1.0;
    c.gamma = 1e-8;
    c.epsilon = 0.01;
    c.rho = 0.0;
    g.N = 200;
    g.mode = "exact";
    c.eval_grid = {-3.0, 3.0, 1000, 0.0};
  } else if (env_name == "pendulum") {
    c.sigma = 3.0;
    c.gamma = 1e-7;
    c.epsilon = 0.0;
    c.rho = 0.1;
    g.N = 8000;
    g.mode = "em";
    g.h = 0.05;
    c.eval_grid = {-M_PI, M_PI, 181, 0.0};
  } else {
    throw_validation("unknown environment: " + env_name);
  }
  c.dt = 0.01;
  c.tol = 1e-8;
  c.k_max = 1000;
  c.dataset.generate = g;
  c.rollout.episodes = 50;
  c.seed = 1;
  return c;
}

}  // namespace octrl
