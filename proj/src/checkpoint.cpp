#include "flowrl/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace flowrl {

using Eigen::MatrixXd;
using nlohmann::json;

namespace {

template <class State, class Arrays>
Arrays arrays_impl(State& st) {
  Arrays out;
  auto push_mlp = [&out](const std::string& prefix, auto& mlp) {
    const char* names[] = {"W1", "b1", "W2", "b2", "W3", "b3"};
    auto params = mlp.params();
    for (std::size_t i = 0; i < params.size(); ++i)
      out.emplace_back(prefix + "." + names[i], params[i]);
  };
  push_mlp("actor", st.actor.mlp);
  push_mlp("actor_target", st.actor_target.mlp);
  push_mlp("critic1", st.critic1);
  push_mlp("critic2", st.critic2);
  push_mlp("critic1_target", st.critic1_t);
  push_mlp("critic2_target", st.critic2_t);
  return out;
}

}  // namespace

ConstNamedArrays checkpoint_arrays(const TrainState& st) {
  return arrays_impl<const TrainState, ConstNamedArrays>(st);
}

NamedArrays checkpoint_arrays(TrainState& st) { return arrays_impl<TrainState, NamedArrays>(st); }

void save_checkpoint(const TrainState& st, const std::string& path) {
  json arrays = json::object();
  for (const auto& [name, mat] : checkpoint_arrays(st)) {
    json data = json::array();
    for (Eigen::Index r = 0; r < mat->rows(); ++r)
      for (Eigen::Index c = 0; c < mat->cols(); ++c) data.push_back((*mat)(r, c));
    arrays[name] = {{"shape", {mat->rows(), mat->cols()}}, {"data", std::move(data)}};
  }
  json root = {{"version", 1},
               {"family", to_string(st.cfg.family)},
               {"env", st.env.name},
               {"step", st.step},
               {"arrays", std::move(arrays)}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << root.dump();
}

void load_checkpoint(TrainState& st, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  json root = json::parse(in);
  if (root.at("version").get<int>() != 1) throw std::runtime_error("unknown checkpoint version");
  const json& arrays = root.at("arrays");

  NamedArrays dest = checkpoint_arrays(st);
  // Architecture check first so a mismatch reports both full shape lists.
  std::ostringstream expected, found;
  bool mismatch = false;
  for (const auto& [name, mat] : dest) {
    expected << name << "[" << mat->rows() << "x" << mat->cols() << "] ";
    if (!arrays.contains(name)) {
      found << name << "[missing] ";
      mismatch = true;
      continue;
    }
    const json& shape = arrays.at(name).at("shape");
    long r = shape.at(0).get<long>(), c = shape.at(1).get<long>();
    found << name << "[" << r << "x" << c << "] ";
    if (r != mat->rows() || c != mat->cols()) mismatch = true;
  }
  if (mismatch)
    throw std::runtime_error("checkpoint architecture mismatch; expected: " + expected.str() +
                             "; found: " + found.str());

  for (auto& [name, mat] : dest) {
    const json& data = arrays.at(name).at("data");
    Eigen::Index k = 0;
    for (Eigen::Index r = 0; r < mat->rows(); ++r)
      for (Eigen::Index c = 0; c < mat->cols(); ++c)
        (*mat)(r, c) = data.at(static_cast<std::size_t>(k++)).get<double>();
  }
  st.step = root.at("step").get<long long>();
}

}  // namespace flowrl
