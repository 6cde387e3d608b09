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

#ifndef LLPX_KERNEL_HPP_
#define LLPX_KERNEL_HPP_

#include <Eigen/Core>
#include <string>

#include "llpx/dataset.hpp"

namespace llpx {

enum class KernelFamily { linear, gaussian };

struct KernelSpec {
  KernelFamily family = KernelFamily::linear;
  double gamma = 1.0;  // gaussian only; must be > 0

  void validate() const;
};

std::string to_string(KernelFamily family);
KernelFamily kernel_family_from_string(const std::string& name);

/// linear: a.b; gaussian: exp(-gamma |a-b|^2). Symmetric in (a, b).
double eval_kernel(const KernelSpec& k, const Eigen::VectorXd& a,
                   const Eigen::VectorXd& b);

/// Gradient of K(a, x) with respect to the second argument x.
/// linear: a; gaussian: 2 gamma (a-x) exp(-gamma |a-x|^2).
Eigen::VectorXd kernel_grad(const KernelSpec& k, const Eigen::VectorXd& a,
                            const Eigen::VectorXd& x);

/// Bag-level effective Gram matrix for the dual quadratic form.
///
/// Bags are indexed flat: source bags first (task 1), then target bags
/// (task 2). `base` holds the raw mean kernel values
///   base(i, j) = 1/(|Bi||Bj|) sum_{i' in Bi, j' in Bj} K(xbar_i', xbar_j')
/// and `matrix` scales each entry with the task-block coefficient:
/// (1+lambda1)/lambda1 on the source block, (1+lambda2)/lambda2 on the
/// target block, 1 on the cross block. Both are symmetric; `matrix` is
/// positive semidefinite.
struct BagGram {
  Eigen::MatrixXd matrix;
  Eigen::MatrixXd base;
  double c11 = 0.0, c22 = 0.0, c12 = 1.0;
  std::size_t t1 = 0, t2 = 0;

  std::size_t size() const { return t1 + t2; }
  int task_of(std::size_t flat) const { return flat < t1 ? 1 : 2; }
  std::size_t bag_of(std::size_t flat) const { return flat < t1 ? flat : flat - t1; }
  double coeff(int task_a, int task_b) const {
    if (task_a != task_b) return c12;
    return task_a == 1 ? c11 : c22;
  }
};

BagGram assemble_bag_gram(const TaskDataset& source, const TaskDataset& target,
                          const PerturbationSet& perturb, const KernelSpec& k,
                          double lambda1, double lambda2);

namespace detail {
/// Reference double-sum assembly; the production path collapses linear
/// kernels onto bag means. Kept callable for equivalence checks.
BagGram assemble_bag_gram_double_sum(const TaskDataset& source,
                                     const TaskDataset& target,
                                     const PerturbationSet& perturb,
                                     const KernelSpec& k, double lambda1,
                                     double lambda2);
}  // namespace detail

}  // namespace llpx

#endif  // LLPX_KERNEL_HPP_
