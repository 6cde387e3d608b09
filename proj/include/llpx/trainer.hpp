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

#ifndef LLPX_TRAINER_HPP_
#define LLPX_TRAINER_HPP_

#include <Eigen/Core>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "llpx/dataset.hpp"
#include "llpx/kernel.hpp"
#include "llpx/qp.hpp"

namespace llpx {

struct HyperParams {
  double C1 = 1.0;
  double C2 = 1.0;
  double lambda1 = 10.0;  // source increment penalty; keep lambda1 > lambda2
  double lambda2 = 1.0;
  double eps = 0.1;       // shared tube half-width
  double delta = 0.01;    // per-instance noise bound, broadcast scalar
  std::vector<double> delta_source;  // optional per-instance overrides
  std::vector<double> delta_target;
  double stop_epsilon = 1e-4;
  int max_rounds = 50;
  double qp_tol = 1e-6;
  long qp_max_iter = 10'000'000;
  ScalingConfig scaling;
  KernelSpec kernel;

  double delta_for(int task_id, std::size_t instance) const {
    const auto& v = task_id == 1 ? delta_source : delta_target;
    return instance < v.size() ? v[instance] : delta;
  }
  void validate() const;
};

/// Terms of the primal objective; total is their sum.
struct ObjectiveBreakdown {
  double regularizer = 0.0;   // 1/2|w0|^2 + lambda1/2|v1|^2 + lambda2/2|v2|^2
  double slack_source = 0.0;  // C1 * sum of source tube violations
  double slack_target = 0.0;  // C2 * sum of target tube violations
  double total = 0.0;
};

/// Shared direction plus per-task increments; w_t = w0 + v_t.
struct Weights {
  Eigen::VectorXd w0, v1, v2;
};

struct TrainedModel {
  DualSolution dual;
  double b1 = 0.0;
  double b2 = 0.0;
  PerturbationSet perturbations;
  HyperParams hp;
  std::shared_ptr<const TaskDataset> source;
  std::shared_ptr<const TaskDataset> target;
  std::optional<Weights> linear_weights;

  // Kernel expansion frozen at the final round, flat-indexed with source
  // bags first. A deserialized model predicts from these without the
  // original instances; bag_points (perturbed members, one column each)
  // is only kept for non-linear kernels, where means are not enough.
  std::vector<Eigen::VectorXd> bag_means;
  std::vector<Eigen::MatrixXd> bag_points;
  Eigen::VectorXd bag_targets;
  std::vector<int> bag_task;
  Eigen::Index dimension = 0;

  bool converged = false;
  int rounds = 0;

  std::size_t source_bags() const {
    std::size_t n = 0;
    for (int t : bag_task) n += t == 1;
    return n;
  }
};

/// Per-round diagnostics collected during fit.
struct FitRound {
  double dual_objective = 0.0;
  ObjectiveBreakdown primal;
  Eigen::VectorXd delta_norms_source;  // |dx| per instance in this round's QP
  Eigen::VectorXd delta_norms_target;
  long qp_iterations = 0;
};

struct FitTrace {
  std::vector<FitRound> rounds;
};

/// Alternating optimization: solve the fixed-perturbation dual, recover
/// biases, then apply the closed-form bounded perturbation update; stop
/// when the dual objective stalls in relative terms or an update leaves
/// every perturbation unchanged (a fixed point). The source task may be
/// empty, which degrades to single-task training.
TrainedModel fit(std::shared_ptr<const TaskDataset> source,
                 std::shared_ptr<const TaskDataset> target,
                 const HyperParams& hp, FitTrace* trace = nullptr);
TrainedModel fit(const TaskDataset& source, const TaskDataset& target,
                 const HyperParams& hp, FitTrace* trace = nullptr);

/// Per-task bias from free bags (0 < |beta| < C) via the tube-boundary
/// identities, falling back to the midpoint of the KKT-feasible interval.
std::pair<double, double> recover_biases(const QpProblem& p,
                                         const Eigen::VectorXd& beta);

/// w0 = sum_i beta_i mbar_i over all bags; v1, v2 scale the per-task sums
/// by 1/lambda. Throws unless the kernel is linear.
Weights expand_weights_linear(const Eigen::VectorXd& beta,
                              const TaskDataset& source,
                              const TaskDataset& target,
                              const PerturbationSet& perturb,
                              const KernelSpec& kernel, double lambda1,
                              double lambda2);

/// f_t(x); for linear kernels equals (w0 + v_t).x + b_t.
double decision_value(const TrainedModel& model, const Eigen::VectorXd& x,
                      int task_id);

/// Sign of the target-task plane; exact ties go negative.
int predict(const TrainedModel& model, const Eigen::VectorXd& x);

/// Closed-form update: every member of a bag whose residual leaves the
/// tube moves delta_i along -+ u_t/|u_t|; in-tube bags reset to zero.
PerturbationSet update_perturbations(const TaskDataset& source,
                                     const TaskDataset& target,
                                     const BagGram& gram,
                                     const Eigen::VectorXd& beta, double b1,
                                     double b2, const PerturbationSet& current,
                                     const HyperParams& hp);

/// Steepest-growth direction u_t of the decision function at x, from the
/// kernel gradient expansion. For linear kernels this is w_t identically.
Eigen::VectorXd transfer_direction(int task_id, const Eigen::VectorXd& x,
                                   const TaskDataset& source,
                                   const TaskDataset& target,
                                   const PerturbationSet& perturb,
                                   const Eigen::VectorXd& beta,
                                   const KernelSpec& kernel, double lambda1,
                                   double lambda2);

/// Exact primal value at the model's weights, biases and perturbations.
ObjectiveBreakdown primal_objective(const TrainedModel& model);

namespace detail {
/// Decision value through the kernel expansion, bypassing the explicit
/// linear weights. Used to cross-check the two representations.
double decision_value_expansion(const TrainedModel& model,
                                const Eigen::VectorXd& x, int task_id);
}  // namespace detail

}  // namespace llpx

#endif  // LLPX_TRAINER_HPP_
