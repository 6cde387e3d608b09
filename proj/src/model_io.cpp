/*
 * Copyright 2026 The llpx authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "llpx/model_io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "llpx/errors.hpp"

namespace llpx {

namespace {

using json = nlohmann::json;

json vec_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::VectorXd vec_from_json(const json& j) {
  Eigen::VectorXd out(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) out[i] = j[i].get<double>();
  return out;
}

// Zero vectors compress to []; the surrounding dimension restores them.
json perturb_to_json(const TaskPerturbations& p) {
  json out = json::array();
  for (const Eigen::VectorXd& v : p) {
    if (v.isZero(0.0))
      out.push_back(json::array());
    else
      out.push_back(vec_to_json(v));
  }
  return out;
}

TaskPerturbations perturb_from_json(const json& j, Eigen::Index dims) {
  TaskPerturbations out;
  out.reserve(j.size());
  for (const json& e : j) {
    if (e.empty())
      out.push_back(Eigen::VectorXd::Zero(dims));
    else
      out.push_back(vec_from_json(e));
  }
  return out;
}

json hp_to_json_obj(const HyperParams& hp) {
  json j;
  j["C1"] = hp.C1;
  j["C2"] = hp.C2;
  j["lambda1"] = hp.lambda1;
  j["lambda2"] = hp.lambda2;
  j["eps"] = hp.eps;
  j["delta"] = hp.delta;
  if (!hp.delta_source.empty()) j["delta_source"] = hp.delta_source;
  if (!hp.delta_target.empty()) j["delta_target"] = hp.delta_target;
  j["stop_epsilon"] = hp.stop_epsilon;
  j["max_rounds"] = hp.max_rounds;
  j["qp_tol"] = hp.qp_tol;
  j["qp_max_iter"] = hp.qp_max_iter;
  j["clip_epsilon"] = hp.scaling.clip_epsilon;
  j["kernel"] = to_string(hp.kernel.family);
  j["gamma"] = hp.kernel.gamma;
  return j;
}

HyperParams hp_from_json_obj(const json& j) {
  HyperParams hp;
  hp.C1 = j.value("C1", hp.C1);
  hp.C2 = j.value("C2", hp.C2);
  hp.lambda1 = j.value("lambda1", hp.lambda1);
  hp.lambda2 = j.value("lambda2", hp.lambda2);
  hp.eps = j.value("eps", hp.eps);
  hp.delta = j.value("delta", hp.delta);
  if (j.contains("delta_source"))
    hp.delta_source = j["delta_source"].get<std::vector<double>>();
  if (j.contains("delta_target"))
    hp.delta_target = j["delta_target"].get<std::vector<double>>();
  hp.stop_epsilon = j.value("stop_epsilon", hp.stop_epsilon);
  hp.max_rounds = j.value("max_rounds", hp.max_rounds);
  hp.qp_tol = j.value("qp_tol", hp.qp_tol);
  hp.qp_max_iter = j.value("qp_max_iter", hp.qp_max_iter);
  hp.scaling.clip_epsilon = j.value("clip_epsilon", hp.scaling.clip_epsilon);
  if (j.contains("kernel"))
    hp.kernel.family = kernel_family_from_string(j["kernel"].get<std::string>());
  hp.kernel.gamma = j.value("gamma", hp.kernel.gamma);
  hp.validate();
  return hp;
}

json parse_json(const std::string& text, const char* what) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded())
    throw DataError(std::string("invalid JSON in ") + what);
  return j;
}

}  // namespace

std::string hyperparams_to_json(const HyperParams& hp) {
  return hp_to_json_obj(hp).dump(2) + "\n";
}

HyperParams hyperparams_from_json(const std::string& text) {
  return hp_from_json_obj(parse_json(text, "hyperparams"));
}

std::string model_to_json(const TrainedModel& model) {
  json j;
  j["format"] = "llpx-model";
  j["version"] = 1;
  j["hyperparams"] = hp_to_json_obj(model.hp);
  j["beta"] = vec_to_json(model.dual.beta);
  j["objective"] = model.dual.objective;
  j["kkt_residual"] = model.dual.kkt_residual;
  j["qp_iterations"] = model.dual.iterations;
  j["qp_converged"] = model.dual.converged;
  j["b1"] = model.b1;
  j["b2"] = model.b2;
  j["converged"] = model.converged;
  j["rounds"] = model.rounds;
  j["dimension"] = model.dimension;
  j["bag_task"] = model.bag_task;
  j["bag_targets"] = vec_to_json(model.bag_targets);
  json means = json::array();
  for (const Eigen::VectorXd& m : model.bag_means) means.push_back(vec_to_json(m));
  j["bag_means"] = means;
  if (!model.bag_points.empty()) {
    json points = json::array();
    for (const Eigen::MatrixXd& m : model.bag_points) {
      json bag = json::array();
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        bag.push_back(vec_to_json(m.col(c)));
      points.push_back(bag);
    }
    j["bag_points"] = points;
  }
  j["perturbations"] = {{"source", perturb_to_json(model.perturbations.source)},
                        {"target", perturb_to_json(model.perturbations.target)}};
  if (model.linear_weights) {
    j["weights"] = {{"w0", vec_to_json(model.linear_weights->w0)},
                    {"v1", vec_to_json(model.linear_weights->v1)},
                    {"v2", vec_to_json(model.linear_weights->v2)}};
  }
  return j.dump() + "\n";
}

TrainedModel model_from_json(const std::string& text) {
  json j = parse_json(text, "model");
  if (j.value("format", "") != std::string("llpx-model"))
    throw DataError("not a llpx model file");
  TrainedModel m;
  m.hp = hp_from_json_obj(j.at("hyperparams"));
  m.dual.beta = vec_from_json(j.at("beta"));
  m.dual.objective = j.at("objective").get<double>();
  m.dual.kkt_residual = j.at("kkt_residual").get<double>();
  m.dual.iterations = j.at("qp_iterations").get<long>();
  m.dual.converged = j.at("qp_converged").get<bool>();
  m.b1 = j.at("b1").get<double>();
  m.b2 = j.at("b2").get<double>();
  m.converged = j.at("converged").get<bool>();
  m.rounds = j.at("rounds").get<int>();
  m.dimension = j.at("dimension").get<Eigen::Index>();
  m.bag_task = j.at("bag_task").get<std::vector<int>>();
  m.bag_targets = vec_from_json(j.at("bag_targets"));
  for (const json& e : j.at("bag_means")) m.bag_means.push_back(vec_from_json(e));
  if (j.contains("bag_points")) {
    for (const json& bag : j["bag_points"]) {
      Eigen::MatrixXd pts(m.dimension, bag.size());
      for (std::size_t c = 0; c < bag.size(); ++c)
        pts.col(c) = vec_from_json(bag[c]);
      m.bag_points.push_back(std::move(pts));
    }
  }
  m.perturbations.source =
      perturb_from_json(j.at("perturbations").at("source"), m.dimension);
  m.perturbations.target =
      perturb_from_json(j.at("perturbations").at("target"), m.dimension);
  if (j.contains("weights")) {
    Weights w;
    w.w0 = vec_from_json(j["weights"].at("w0"));
    w.v1 = vec_from_json(j["weights"].at("v1"));
    w.v2 = vec_from_json(j["weights"].at("v2"));
    m.linear_weights = std::move(w);
  }
  return m;
}

void save_model(const std::string& path, const TrainedModel& model) {
  atomic_write_file(path, model_to_json(model));
}

TrainedModel load_model(const std::string& path) {
  return model_from_json(read_file(path));
}

void atomic_write_file(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp + "'");
    out << content;
    out.flush();
    if (!out) throw DataError("write failed for '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw DataError("cannot rename '" + tmp + "' to '" + path + "'");
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace llpx
