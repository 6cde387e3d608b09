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

#ifndef LLPX_QP_HPP_
#define LLPX_QP_HPP_

#include <Eigen/Core>
#include <cstdint>
#include <vector>

namespace llpx {

// Dual problem in the signed coefficients beta = alpha* - alpha:
//
//   min  1/2 beta' Q beta - y' beta + sum_i eps_i |beta_i|
//   s.t. sum_{task-1 bags} beta = 0,  sum_{task-2 bags} beta = 0,
//        -C_i <= beta_i <= C_i
//
// Exactly one equality constraint per task, matching the two independent
// bias variables of the primal.

struct QpProblem {
  const Eigen::MatrixXd* Q = nullptr;  // symmetric PSD, one row per bag
  Eigen::VectorXd targets;             // y per bag
  Eigen::VectorXd eps;                 // tube half-width per bag, >= 0
  Eigen::VectorXd box;                 // C per bag, > 0
  std::vector<int> task_of;            // 1 or 2 per bag

  std::size_t size() const { return task_of.size(); }
  void check() const;  // throws DataError when malformed
};

struct DualSolution {
  Eigen::VectorXd beta;
  double objective = 0.0;
  double kkt_residual = 0.0;
  long iterations = 0;   // pair updates performed
  bool converged = true; // false iff iterations == max_iter
};

/// SMO-style solver: picks the maximal violating same-task pair,
/// alternating between tasks, and minimizes the objective exactly along
/// each pair direction (the |beta| kinks included). Deterministic.
DualSolution solve_beta_qp(const QpProblem& p, double tol = 1e-6,
                           long max_iter = 10'000'000,
                           const Eigen::VectorXd* warm_start = nullptr);

/// Maximal KKT violation over all bags, with one multiplier per task
/// fitted by least squares against the per-bag stationarity intervals.
double kkt_residual(const QpProblem& p, const DualSolution& s);

/// 1/2 beta' Q beta - y' beta + eps' |beta|; beta must lie in the box.
double dual_objective(const QpProblem& p, const Eigen::VectorXd& beta);

namespace detail {
// Position classification shared by the KKT diagnostic and the bias
// recovery. Tolerances are absolute-or-relative in C.
inline bool beta_is_zero(double beta, double c) {
  return std::abs(beta) <= 1e-12 * std::max(1.0, c);
}
inline bool beta_at_upper(double beta, double c) {
  return c - beta <= 1e-9 * std::max(1.0, c);
}
inline bool beta_at_lower(double beta, double c) {
  return beta + c <= 1e-9 * std::max(1.0, c);
}
}  // namespace detail

}  // namespace llpx

#endif  // LLPX_QP_HPP_
