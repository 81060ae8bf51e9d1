#include "octrl/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <vector>

#include "octrl/errors.hpp"

namespace octrl {

using nlohmann::json;

void Dataset::validate() const {
  require(states.rows() >= 1, "dataset is empty");
  require(states.cols() >= 1 && actions.cols() >= 1, "dataset needs n_s >= 1 and n_a >= 1");
  require(actions.rows() == states.rows() && derivs.rows() == states.rows(),
          "dataset tables must share the same number of rows");
  require(derivs.cols() == states.cols(), "deriv dimension must match state dimension");
  if (has_rewards())
    require(rewards.size() == states.rows(), "reward vector length mismatch");
  require(states.allFinite() && actions.allFinite() && derivs.allFinite(),
          "dataset contains non-finite values");
  if (has_rewards()) require(rewards.allFinite(), "dataset rewards contain non-finite values");
}

Eigen::VectorXd finite_difference(const TransitionRecord& record) {
  require(record.dt > 0.0, "finite_difference: dt must be positive");
  require(record.state.size() == record.next_state.size(),
          "finite_difference: state dimension mismatch");
  return (record.next_state - record.state) / record.dt;
}

DatasetFormat format_from_path(const std::string& path) {
  auto ends_with = [&](const char* suf) {
    std::string s(suf);
    return path.size() >= s.size() && path.compare(path.size() - s.size(), s.size(), s) == 0;
  };
  if (ends_with(".jsonl") || ends_with(".ndjson")) return DatasetFormat::jsonl;
  if (ends_with(".csv")) return DatasetFormat::csv;
  throw_validation("cannot infer dataset format from path: " + path);
}

// ---- jsonl ----

static Eigen::VectorXd to_vector(const json& j, const std::string& key, size_t line_no) {
  if (!j.is_array() || j.empty())
    throw_validation("line " + std::to_string(line_no) + ": '" + key +
                     "' must be a non-empty array");
  Eigen::VectorXd v(j.size());
  for (size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number())
      throw_validation("line " + std::to_string(line_no) + ": '" + key + "' has a non-number");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

static Dataset from_records(const std::vector<TransitionRecord>& recs,
                            const std::vector<Eigen::VectorXd>& derivs, bool any_reward,
                            bool all_reward) {
  const Eigen::Index n = static_cast<Eigen::Index>(recs.size());
  require(n >= 1, "dataset is empty");
  if (any_reward && !all_reward)
    throw_validation("dataset mixes records with and without 'reward'");
  Dataset d;
  d.states.resize(n, recs[0].state.size());
  d.actions.resize(n, recs[0].action.size());
  d.derivs.resize(n, recs[0].state.size());
  if (all_reward) d.rewards.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    d.states.row(i) = recs[i].state.transpose();
    d.actions.row(i) = recs[i].action.transpose();
    d.derivs.row(i) = derivs[i].transpose();
    if (all_reward) d.rewards[i] = recs[i].reward;
  }
  return d;
}

static Dataset load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_io("cannot open dataset file: " + path);
  std::vector<TransitionRecord> recs;
  std::vector<Eigen::VectorXd> derivs;
  bool any_reward = false, all_reward = true;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw_validation("line " + std::to_string(line_no) + ": JSON parse error: " + e.what());
    }
    TransitionRecord r;
    if (!j.contains("state") || !j.contains("action"))
      throw_validation("line " + std::to_string(line_no) + ": missing 'state' or 'action'");
    r.state = to_vector(j["state"], "state", line_no);
    r.action = to_vector(j["action"], "action", line_no);
    Eigen::VectorXd dv;
    if (j.contains("deriv")) {
      dv = to_vector(j["deriv"], "deriv", line_no);
    } else if (j.contains("next_state") && j.contains("dt")) {
      r.next_state = to_vector(j["next_state"], "next_state", line_no);
      if (!j["dt"].is_number() || j["dt"].get<double>() <= 0.0)
        throw_validation("line " + std::to_string(line_no) + ": 'dt' must be a positive number");
      r.dt = j["dt"].get<double>();
      dv = finite_difference(r);
    } else {
      throw_validation("line " + std::to_string(line_no) +
                       ": record needs 'deriv' or ('next_state' and 'dt')");
    }
    if (dv.size() != r.state.size())
      throw_validation("line " + std::to_string(line_no) + ": deriv dimension mismatch");
    if (j.contains("reward")) {
      if (!j["reward"].is_number())
        throw_validation("line " + std::to_string(line_no) + ": 'reward' must be a number");
      r.has_reward = true;
      r.reward = j["reward"].get<double>();
      any_reward = true;
    } else {
      all_reward = false;
    }
    if (!recs.empty()) {
      if (r.state.size() != recs[0].state.size() || r.action.size() != recs[0].action.size())
        throw_validation("line " + std::to_string(line_no) +
                         ": dimensions differ from earlier records");
    }
    if (!r.state.allFinite() || !r.action.allFinite() || !dv.allFinite() ||
        (r.has_reward && !std::isfinite(r.reward)))
      throw_validation("line " + std::to_string(line_no) + ": non-finite value");
    recs.push_back(std::move(r));
    derivs.push_back(std::move(dv));
  }
  Dataset d = from_records(recs, derivs, any_reward, any_reward && all_reward);
  d.validate();
  return d;
}

// ---- csv ----

static std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

static int count_prefixed(const std::vector<std::string>& header, const std::string& prefix) {
  int n = 0;
  while (true) {
    std::string want = prefix + std::to_string(n);
    bool found = false;
    for (const auto& h : header)
      if (h == want) found = true;
    if (!found) break;
    ++n;
  }
  return n;
}

static Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_io("cannot open dataset file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw_validation("line 1: missing CSV header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header = split_csv(line);
  const int n_s = count_prefixed(header, "state_");
  const int n_a = count_prefixed(header, "action_");
  const int n_d = count_prefixed(header, "deriv_");
  if (n_s < 1 || n_a < 1 || n_d != n_s)
    throw_validation("line 1: header must contain state_i, action_i, deriv_i columns");
  std::vector<int> col(static_cast<size_t>(n_s + n_a + n_d) + 1, -1);
  bool has_reward = false;
  for (size_t c = 0; c < header.size(); ++c) {
    const std::string& h = header[c];
    auto set = [&](const std::string& prefix, int base, int count) {
      for (int k = 0; k < count; ++k)
        if (h == prefix + std::to_string(k)) col[static_cast<size_t>(base + k)] = static_cast<int>(c);
    };
    set("state_", 0, n_s);
    set("action_", n_s, n_a);
    set("deriv_", n_s + n_a, n_d);
    if (h == "reward") {
      col.back() = static_cast<int>(c);
      has_reward = true;
    }
  }
  std::vector<std::vector<double>> rows;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<std::string> cells = split_csv(line);
    if (cells.size() != header.size())
      throw_validation("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " cells, got " +
                       std::to_string(cells.size()));
    std::vector<double> vals;
    vals.reserve(col.size());
    for (size_t k = 0; k + 1 < col.size(); ++k) {
      const std::string& cell = cells[static_cast<size_t>(col[k])];
      char* end = nullptr;
      double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0')
        throw_validation("line " + std::to_string(line_no) + ": bad number '" + cell + "'");
      vals.push_back(v);
    }
    if (has_reward) {
      const std::string& cell = cells[static_cast<size_t>(col.back())];
      char* end = nullptr;
      double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0')
        throw_validation("line " + std::to_string(line_no) + ": bad number '" + cell + "'");
      vals.push_back(v);
    }
    rows.push_back(std::move(vals));
  }
  require(!rows.empty(), "dataset is empty");
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  Dataset d;
  d.states.resize(n, n_s);
  d.actions.resize(n, n_a);
  d.derivs.resize(n, n_s);
  if (has_reward) d.rewards.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<size_t>(i)];
    for (int k = 0; k < n_s; ++k) d.states(i, k) = r[static_cast<size_t>(k)];
    for (int k = 0; k < n_a; ++k) d.actions(i, k) = r[static_cast<size_t>(n_s + k)];
    for (int k = 0; k < n_s; ++k) d.derivs(i, k) = r[static_cast<size_t>(n_s + n_a + k)];
    if (has_reward) d.rewards[i] = r.back();
  }
  d.validate();
  return d;
}

Dataset load_dataset(const std::string& path, DatasetFormat format) {
  return format == DatasetFormat::jsonl ? load_jsonl(path) : load_csv(path);
}

Dataset load_dataset(const std::string& path) {
  return load_dataset(path, format_from_path(path));
}

// 17 significant digits: enough for an exact double round trip
static std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void save_dataset(const Dataset& data, const std::string& path, DatasetFormat format) {
  data.validate();
  std::ofstream out(path);
  if (!out) throw_io("cannot write dataset file: " + path);
  if (format == DatasetFormat::jsonl) {
    for (Eigen::Index i = 0; i < data.size(); ++i) {
      out << "{\"state\":[";
      for (int k = 0; k < data.state_dim(); ++k)
        out << (k ? "," : "") << fmt(data.states(i, k));
      out << "],\"action\":[";
      for (int k = 0; k < data.action_dim(); ++k)
        out << (k ? "," : "") << fmt(data.actions(i, k));
      out << "],\"deriv\":[";
      for (int k = 0; k < data.state_dim(); ++k)
        out << (k ? "," : "") << fmt(data.derivs(i, k));
      out << "]";
      if (data.has_rewards()) out << ",\"reward\":" << fmt(data.rewards[i]);
      out << "}\n";
    }
  } else {
    for (int k = 0; k < data.state_dim(); ++k) out << (k ? "," : "") << "state_" << k;
    for (int k = 0; k < data.action_dim(); ++k) out << ",action_" << k;
    for (int k = 0; k < data.state_dim(); ++k) out << ",deriv_" << k;
    if (data.has_rewards()) out << ",reward";
    out << "\n";
    for (Eigen::Index i = 0; i < data.size(); ++i) {
      for (int k = 0; k < data.state_dim(); ++k)
        out << (k ? "," : "") << fmt(data.states(i, k));
      for (int k = 0; k < data.action_dim(); ++k) out << "," << fmt(data.actions(i, k));
      for (int k = 0; k < data.state_dim(); ++k) out << "," << fmt(data.derivs(i, k));
      if (data.has_rewards()) out << "," << fmt(data.rewards[i]);
      out << "\n";
    }
  }
  if (!out.good()) throw_io("write failed: " + path);
}

void save_dataset(const Dataset& data, const std::string& path) {
  save_dataset(data, path, format_from_path(path));
}

}  // namespace octrl
