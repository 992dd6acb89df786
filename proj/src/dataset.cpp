#include "flowrl/dataset.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace flowrl {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

Transition Dataset::row(Index i) const {
  return {S.row(i).transpose(), A.row(i).transpose(), R(i), S2.row(i).transpose(), done[i] != 0};
}

double Dataset::recompute_mean_return() const {
  double total = 0.0, segment = 0.0;
  long episodes = 0;
  for (Index i = 0; i < n(); ++i) {
    segment += R(i);
    if (done[i]) {
      total += segment;
      segment = 0.0;
      ++episodes;
    }
  }
  if (episodes == 0) throw std::runtime_error("dataset holds no complete episode");
  return total / episodes;
}

std::vector<Index> Dataset::sample_indices(int batch, Rng& rng) const {
  if (batch < 1 || n() == 0) throw std::invalid_argument("empty batch request");
  std::vector<Index> idx(batch);
  for (int i = 0; i < batch; ++i) idx[i] = rng.uniform_int(0, static_cast<int>(n()) - 1);
  return idx;
}

Dataset make_offline_dataset(const EnvSpec& env, const std::string& behavior, Index n_transitions,
                             std::uint64_t seed) {
  if (n_transitions < env.horizon)
    throw std::invalid_argument("n_transitions must be at least one horizon");
  Dataset ds;
  ds.env = env.name;
  ds.behavior = behavior;
  ds.seed = seed;
  ds.state_dim = env.state_dim;
  ds.action_dim = env.action_dim;
  ds.S.resize(n_transitions, env.state_dim);
  ds.A.resize(n_transitions, env.action_dim);
  ds.S2.resize(n_transitions, env.state_dim);
  ds.R.resize(n_transitions);
  ds.done.assign(static_cast<std::size_t>(n_transitions), 0);

  Rng rng(seed);
  BehaviorPolicy pol{behavior};
  Index i = 0;
  while (i < n_transitions) {
    pol.begin_episode(rng);
    VectorXd s = env.reset(rng);
    for (int h = 0; h < env.horizon && i < n_transitions; ++h) {
      VectorXd a = pol.act(env, s, rng);
      StepResult res = env.step(s, a);
      bool done = res.done || h == env.horizon - 1;
      ds.S.row(i) = s.transpose();
      ds.A.row(i) = a.transpose();
      ds.S2.row(i) = res.s2.transpose();
      ds.R(i) = res.r;
      ds.done[static_cast<std::size_t>(i)] = done ? 1 : 0;
      ++i;
      s = res.s2;
      if (done) break;
    }
  }
  ds.behavior_mean_return = ds.recompute_mean_return();
  return ds;
}

namespace {

json vec_to_json(const Eigen::Ref<const Eigen::RowVectorXd>& v) {
  json arr = json::array();
  for (Index j = 0; j < v.size(); ++j) arr.push_back(v(j));
  return arr;
}

VectorXd json_to_vec(const json& arr) {
  VectorXd v(arr.size());
  for (std::size_t j = 0; j < arr.size(); ++j) v(static_cast<Index>(j)) = arr[j].get<double>();
  return v;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset file: " + path);
  json header = {{"env", ds.env},
                 {"state_dim", ds.state_dim},
                 {"action_dim", ds.action_dim},
                 {"n", ds.n()},
                 {"behavior", ds.behavior},
                 {"seed", ds.seed},
                 {"behavior_mean_return", ds.behavior_mean_return},
                 {"version", 1}};
  out << header.dump() << "\n";
  for (Index i = 0; i < ds.n(); ++i) {
    json row = {{"s", vec_to_json(ds.S.row(i))},
                {"a", vec_to_json(ds.A.row(i))},
                {"r", ds.R(i)},
                {"s2", vec_to_json(ds.S2.row(i))},
                {"d", ds.done[static_cast<std::size_t>(i)] != 0}};
    out << row.dump() << "\n";
  }
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read dataset file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("dataset file is empty: " + path);
  json header = json::parse(line);

  Dataset ds;
  ds.env = header.at("env").get<std::string>();
  ds.behavior = header.at("behavior").get<std::string>();
  ds.seed = header.at("seed").get<std::uint64_t>();
  ds.state_dim = header.at("state_dim").get<int>();
  ds.action_dim = header.at("action_dim").get<int>();
  ds.behavior_mean_return = header.at("behavior_mean_return").get<double>();
  Index n = header.at("n").get<Index>();

  ds.S.resize(n, ds.state_dim);
  ds.A.resize(n, ds.action_dim);
  ds.S2.resize(n, ds.state_dim);
  ds.R.resize(n);
  ds.done.assign(static_cast<std::size_t>(n), 0);
  for (Index i = 0; i < n; ++i) {
    if (!std::getline(in, line)) throw std::runtime_error("dataset file truncated: " + path);
    json row = json::parse(line);
    ds.S.row(i) = json_to_vec(row.at("s")).transpose();
    ds.A.row(i) = json_to_vec(row.at("a")).transpose();
    ds.S2.row(i) = json_to_vec(row.at("s2")).transpose();
    ds.R(i) = row.at("r").get<double>();
    ds.done[static_cast<std::size_t>(i)] = row.at("d").get<bool>() ? 1 : 0;
  }
  return ds;
}

}  // namespace flowrl
