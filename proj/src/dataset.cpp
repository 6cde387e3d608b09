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

#include "llpx/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "llpx/errors.hpp"
#include "llpx/numfmt.hpp"
#include "llpx/rng.hpp"

namespace llpx {

void TaskDataset::validate() const {
  std::unordered_set<std::size_t> seen;
  for (std::size_t b = 0; b < bags.size(); ++b) {
    const Bag& bag = bags[b];
    if (bag.members.empty())
      throw DataError("bag " + std::to_string(b) + " is empty");
    if (bag.proportion < 0.0 || bag.proportion > 1.0)
      throw DataError("bag " + std::to_string(b) + " proportion out of [0,1]");
    for (std::size_t id : bag.members) {
      if (id >= instances.size())
        throw DataError("bag " + std::to_string(b) + " references instance " +
                        std::to_string(id) + " past the dataset");
      if (!seen.insert(id).second)
        throw DataError("instance " + std::to_string(id) +
                        " appears in more than one bag");
    }
  }
  for (std::size_t i = 0; i < instances.size(); ++i)
    if (instances[i].features.size() > dimension)
      throw DataError("instance " + std::to_string(i) +
                      " exceeds the dataset dimension");
}

PerturbationSet PerturbationSet::zeros(const TaskDataset& src,
                                       const TaskDataset& tgt) {
  PerturbationSet out;
  out.source.assign(src.instances.size(), Eigen::VectorXd::Zero(src.dimension));
  out.target.assign(tgt.instances.size(), Eigen::VectorXd::Zero(tgt.dimension));
  return out;
}

namespace {

int parse_label_token(std::string_view tok, std::size_t line_no) {
  if (tok == "+1" || tok == "1") return 1;
  if (tok == "-1") return -1;
  throw ParseError("bad label '" + std::string(tok) + "' at line " +
                   std::to_string(line_no));
}

}  // namespace

ParsedInstances parse_sparse_text(std::string_view text) {
  ParsedInstances out;
  std::vector<std::vector<std::pair<long, double>>> sparse;
  std::vector<int> labels;
  long max_index = 0;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    std::string_view line = text.substr(
        pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    std::istringstream ls{std::string(line)};
    std::string tok;
    if (!(ls >> tok)) continue;  // blank line

    labels.push_back(parse_label_token(tok, line_no));
    sparse.emplace_back();
    long prev_index = 0;
    while (ls >> tok) {
      std::size_t colon = tok.find(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 == tok.size())
        throw ParseError("malformed feature '" + tok + "' at line " +
                         std::to_string(line_no));
      long idx;
      double val;
      try {
        idx = parse_long(std::string_view(tok).substr(0, colon));
        val = parse_double(std::string_view(tok).substr(colon + 1));
      } catch (const DataError&) {
        throw ParseError("malformed feature '" + tok + "' at line " +
                         std::to_string(line_no));
      }
      if (idx < 1)
        throw ParseError("index " + std::to_string(idx) +
                         " below 1 at line " + std::to_string(line_no));
      if (idx == prev_index)
        throw ParseError("duplicate index " + std::to_string(idx) +
                         " at line " + std::to_string(line_no));
      if (idx < prev_index)
        throw ParseError("non-increasing index " + std::to_string(idx) +
                         " at line " + std::to_string(line_no));
      prev_index = idx;
      max_index = std::max(max_index, idx);
      sparse.back().emplace_back(idx, val);
    }
  }

  out.dimension = max_index;
  out.instances.reserve(sparse.size());
  for (std::size_t i = 0; i < sparse.size(); ++i) {
    Instance ins;
    ins.features = Eigen::VectorXd::Zero(max_index);
    for (auto [idx, val] : sparse[i]) ins.features[idx - 1] = val;
    ins.label = labels[i];
    out.instances.push_back(std::move(ins));
  }
  return out;
}

ParsedInstances parse_sparse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_sparse_text(ss.str());
}

std::string format_sparse(const std::vector<Instance>& instances) {
  std::ostringstream out;
  for (const Instance& ins : instances) {
    out << (ins.label.value_or(1) > 0 ? "+1" : "-1");
    for (Eigen::Index j = 0; j < ins.features.size(); ++j) {
      if (ins.features[j] == 0.0) continue;
      out << ' ' << (j + 1) << ':' << fmt_double(ins.features[j]);
    }
    out << '\n';
  }
  return out.str();
}

void write_sparse_file(const std::string& path,
                       const std::vector<Instance>& instances) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << format_sparse(instances);
}

double bag_proportion(const std::vector<int>& labels) {
  if (labels.empty()) throw DataError("bag_proportion: empty bag");
  std::size_t positives = 0;
  for (int y : labels) {
    if (y != 1 && y != -1)
      throw DataError("bag_proportion: label must be +1 or -1");
    positives += y == 1;
  }
  return static_cast<double>(positives) / static_cast<double>(labels.size());
}

double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

double invert_proportion(double p, const ScalingConfig& cfg) {
  if (!(p >= 0.0 && p <= 1.0))
    throw DataError("invert_proportion: p outside [0,1]");
  if (!(cfg.clip_epsilon > 0.0 && cfg.clip_epsilon < 0.5))
    throw DataError("invert_proportion: clip_epsilon outside (0, 0.5)");
  double q = std::clamp(p, cfg.clip_epsilon, 1.0 - cfg.clip_epsilon);
  // log(q) - log(1-q) rather than log(q/(1-q)): the two logs swap under
  // q -> 1-q, which makes the map exactly odd around 1/2.
  return std::log(q) - std::log(1.0 - q);
}

TaskDataset synth_bags(std::vector<Instance> instances, std::size_t bag_size,
                       std::uint64_t seed, const ScalingConfig& cfg) {
  if (bag_size < 1) throw DataError("synth_bags: bag_size must be >= 1");
  if (bag_size > instances.size()) throw DataError("synth_bags: no complete bag");
  for (const Instance& ins : instances)
    if (!ins.label) throw DataError("synth_bags: all instances must be labeled");

  std::vector<std::size_t> order(instances.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);

  TaskDataset out;
  for (const Instance& ins : instances)
    out.dimension = std::max(out.dimension, ins.features.size());
  for (Instance& ins : instances) {
    if (ins.features.size() < out.dimension) {
      Eigen::VectorXd padded = Eigen::VectorXd::Zero(out.dimension);
      padded.head(ins.features.size()) = ins.features;
      ins.features = std::move(padded);
    }
  }
  out.instances = std::move(instances);

  std::size_t n_bags = out.instances.size() / bag_size;
  out.bags.reserve(n_bags);
  for (std::size_t b = 0; b < n_bags; ++b) {
    Bag bag;
    std::vector<int> labels;
    for (std::size_t k = 0; k < bag_size; ++k) {
      std::size_t id = order[b * bag_size + k];
      bag.members.push_back(id);
      labels.push_back(*out.instances[id].label);
    }
    bag.proportion = bag_proportion(labels);
    bag.target = invert_proportion(bag.proportion, cfg);
    out.bags.push_back(std::move(bag));
  }
  return out;
}

Eigen::VectorXd bag_mean(const TaskDataset& task, std::size_t bag_index,
                         const TaskPerturbations* perturb) {
  if (bag_index >= task.bags.size())
    throw DataError("bag_mean: bag index out of range");
  const Bag& bag = task.bags[bag_index];
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(task.dimension);
  for (std::size_t id : bag.members) {
    sum += task.instances[id].features;
    if (perturb) {
      const Eigen::VectorXd& dx = (*perturb)[id];
      if (dx.size() != task.dimension)
        throw DataError("bag_mean: perturbation dimension mismatch");
      sum += dx;
    }
  }
  return sum / static_cast<double>(bag.members.size());
}

namespace {

std::vector<Instance> two_gaussian_sample(Rng& rng, std::size_t n,
                                          Eigen::Index dims, double class_sep,
                                          double shift_e2) {
  std::vector<Instance> out;
  out.reserve(n);
  std::size_t n_pos = n / 2 + n % 2;
  for (std::size_t i = 0; i < n; ++i) {
    bool positive = i < n_pos;
    Instance ins;
    ins.features = Eigen::VectorXd::Zero(dims);
    for (Eigen::Index d = 0; d < dims; ++d) ins.features[d] = rng.normal();
    ins.features[0] += (positive ? 0.5 : -0.5) * class_sep;
    ins.features[1] += shift_e2;
    ins.label = positive ? 1 : -1;
    out.push_back(std::move(ins));
  }
  return out;
}

}  // namespace

RelatedTasks gen_related_tasks(std::uint64_t seed, std::size_t n_source,
                               std::size_t n_target, Eigen::Index dims,
                               double mean_shift, double class_sep) {
  if (dims < 2) throw DataError("gen_related_tasks: dims must be >= 2");
  if (n_source < 2 || n_target < 2)
    throw DataError("gen_related_tasks: instance counts must be >= 2");
  if (!(class_sep > 0.0))
    throw DataError("gen_related_tasks: class_sep must be positive");

  RelatedTasks out;
  Rng src_rng(seed, 1);
  Rng tgt_rng(seed, 2);
  out.source = two_gaussian_sample(src_rng, n_source, dims, class_sep, 0.0);
  out.target = two_gaussian_sample(tgt_rng, n_target, dims, class_sep, mean_shift);
  return out;
}

std::string bag_assignment_csv(const TaskDataset& task, int task_id) {
  std::ostringstream out;
  out << "instance_id,bag_id,task\n";
  for (std::size_t b = 0; b < task.bags.size(); ++b)
    for (std::size_t id : task.bags[b].members)
      out << id << ',' << b << ',' << task_id << '\n';
  return out.str();
}

}  // namespace llpx
