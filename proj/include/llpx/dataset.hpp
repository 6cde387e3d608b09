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

#ifndef LLPX_DATASET_HPP_
#define LLPX_DATASET_HPP_

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace llpx {

/// One data point. Features are stored dense at the dataset dimension;
/// the label is kept only for bag synthesis and evaluation.
struct Instance {
  Eigen::VectorXd features;
  std::optional<int> label;  // +1 / -1 when known
};

/// A group of instances sharing one label proportion. `target` is the
/// regression value obtained by inverting the (clipped) proportion.
struct Bag {
  std::vector<std::size_t> members;
  double proportion = 0.0;
  double target = 0.0;
};

/// Proportions are clipped to [clip_epsilon, 1 - clip_epsilon] before
/// inversion; the inverse sigmoid diverges at 0 and 1.
struct ScalingConfig {
  double clip_epsilon = 1e-3;
};

/// Instances plus disjoint bags over a subset of them.
struct TaskDataset {
  std::vector<Instance> instances;
  std::vector<Bag> bags;
  Eigen::Index dimension = 0;

  bool empty() const { return instances.empty(); }

  /// Throws DataError on any structural invariant violation
  /// (overlapping bags, out-of-range member ids, dimension mismatch).
  void validate() const;
};

/// Per-instance noise estimates for one task; one vector per instance.
using TaskPerturbations = std::vector<Eigen::VectorXd>;

/// Bounded noise estimates for both tasks. Every vector has norm 0 or
/// delta_i after an update round.
struct PerturbationSet {
  TaskPerturbations source;
  TaskPerturbations target;

  static PerturbationSet zeros(const TaskDataset& src, const TaskDataset& tgt);

  const TaskPerturbations& task(int task_id) const {
    return task_id == 1 ? source : target;
  }
  TaskPerturbations& task(int task_id) { return task_id == 1 ? source : target; }
};

struct ParsedInstances {
  std::vector<Instance> instances;
  Eigen::Index dimension = 0;
};

// Line-oriented sparse format: `<label> <idx>:<val> ...` with label in
// {+1, -1, 1} and strictly increasing 1-based indices per line.
ParsedInstances parse_sparse_text(std::string_view text);
ParsedInstances parse_sparse_file(const std::string& path);

std::string format_sparse(const std::vector<Instance>& instances);
void write_sparse_file(const std::string& path, const std::vector<Instance>& instances);

/// Fraction of +1 labels; throws DataError on an empty bag.
double bag_proportion(const std::vector<int>& labels);

double sigmoid(double t);

/// Inverse Platt scaling of a clipped proportion: log(p') - log(1 - p').
/// Throws DataError for p outside [0, 1].
double invert_proportion(double p, const ScalingConfig& cfg);

/// Shuffles instance order with a seeded RNG and cuts floor(N/bag_size)
/// bags of exactly bag_size members; remainder instances stay in the
/// dataset but belong to no bag. All instances must be labeled.
TaskDataset synth_bags(std::vector<Instance> instances, std::size_t bag_size,
                       std::uint64_t seed, const ScalingConfig& cfg);

/// Mean of (optionally perturbed) member feature vectors.
Eigen::VectorXd bag_mean(const TaskDataset& task, std::size_t bag_index,
                         const TaskPerturbations* perturb = nullptr);

struct RelatedTasks {
  std::vector<Instance> source;
  std::vector<Instance> target;
};

/// Two balanced two-Gaussian samples with unit isotropic jitter. Source
/// class means sit at +-(class_sep/2) e1; target class means are both
/// shifted by mean_shift along e2, so the tasks share their separating
/// direction but not their offset.
RelatedTasks gen_related_tasks(std::uint64_t seed, std::size_t n_source,
                               std::size_t n_target, Eigen::Index dims,
                               double mean_shift, double class_sep);

/// CSV body with columns (instance_id, bag_id, task).
std::string bag_assignment_csv(const TaskDataset& task, int task_id);

}  // namespace llpx

#endif  // LLPX_DATASET_HPP_
