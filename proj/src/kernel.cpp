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

#include "llpx/kernel.hpp"

#include <cmath>

#include "llpx/errors.hpp"

namespace llpx {

void KernelSpec::validate() const {
  if (family == KernelFamily::gaussian && !(gamma > 0.0))
    throw DataError("gaussian kernel needs gamma > 0");
}

std::string to_string(KernelFamily family) {
  return family == KernelFamily::linear ? "linear" : "gaussian";
}

KernelFamily kernel_family_from_string(const std::string& name) {
  if (name == "linear") return KernelFamily::linear;
  if (name == "gaussian") return KernelFamily::gaussian;
  throw DataError("unknown kernel family '" + name + "'");
}

double eval_kernel(const KernelSpec& k, const Eigen::VectorXd& a,
                   const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw DataError("eval_kernel: dimension mismatch");
  if (k.family == KernelFamily::linear) return a.dot(b);
  return std::exp(-k.gamma * (a - b).squaredNorm());
}

Eigen::VectorXd kernel_grad(const KernelSpec& k, const Eigen::VectorXd& a,
                            const Eigen::VectorXd& x) {
  if (a.size() != x.size()) throw DataError("kernel_grad: dimension mismatch");
  if (k.family == KernelFamily::linear) return a;
  Eigen::VectorXd diff = a - x;
  return 2.0 * k.gamma * std::exp(-k.gamma * diff.squaredNorm()) * diff;
}

namespace {

struct GramLayout {
  std::size_t t1, t2;
  double c11, c22;
};

GramLayout make_layout(const TaskDataset& source, const TaskDataset& target,
                       double lambda1, double lambda2) {
  if (!(lambda1 > 0.0) || !(lambda2 > 0.0))
    throw DataError("assemble_bag_gram: lambdas must be positive");
  return {source.bags.size(), target.bags.size(), (1.0 + lambda1) / lambda1,
          (1.0 + lambda2) / lambda2};
}

void scale_blocks(BagGram& g) {
  std::size_t n = g.size();
  g.matrix.resize(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      g.matrix(i, j) = g.coeff(g.task_of(i), g.task_of(j)) * g.base(i, j);
}

}  // namespace

BagGram assemble_bag_gram(const TaskDataset& source, const TaskDataset& target,
                          const PerturbationSet& perturb, const KernelSpec& k,
                          double lambda1, double lambda2) {
  k.validate();
  if (k.family != KernelFamily::linear)
    return detail::assemble_bag_gram_double_sum(source, target, perturb, k,
                                                lambda1, lambda2);

  GramLayout lay = make_layout(source, target, lambda1, lambda2);
  BagGram g;
  g.t1 = lay.t1;
  g.t2 = lay.t2;
  g.c11 = lay.c11;
  g.c22 = lay.c22;

  // Linear kernel: the double sum over members is exactly the dot product
  // of bag means, O(bags^2 d) instead of O(N^2 d).
  std::size_t n = g.size();
  std::vector<Eigen::VectorXd> means(n);
  for (std::size_t i = 0; i < lay.t1; ++i)
    means[i] = bag_mean(source, i, &perturb.source);
  for (std::size_t j = 0; j < lay.t2; ++j)
    means[lay.t1 + j] = bag_mean(target, j, &perturb.target);

  g.base.resize(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      double v = means[i].dot(means[j]);
      g.base(i, j) = v;
      g.base(j, i) = v;
    }
  scale_blocks(g);
  return g;
}

namespace detail {

BagGram assemble_bag_gram_double_sum(const TaskDataset& source,
                                     const TaskDataset& target,
                                     const PerturbationSet& perturb,
                                     const KernelSpec& k, double lambda1,
                                     double lambda2) {
  GramLayout lay = make_layout(source, target, lambda1, lambda2);
  BagGram g;
  g.t1 = lay.t1;
  g.t2 = lay.t2;
  g.c11 = lay.c11;
  g.c22 = lay.c22;

  auto perturbed = [](const TaskDataset& task, const TaskPerturbations& p,
                      std::size_t id) {
    if (id < p.size() && p[id].size() == task.dimension)
      return Eigen::VectorXd(task.instances[id].features + p[id]);
    return task.instances[id].features;
  };

  std::size_t n = g.size();
  auto bag_at = [&](std::size_t flat) -> const Bag& {
    return flat < lay.t1 ? source.bags[flat] : target.bags[flat - lay.t1];
  };
  auto point = [&](std::size_t flat, std::size_t member) {
    if (flat < lay.t1)
      return perturbed(source, perturb.source, source.bags[flat].members[member]);
    const Bag& b = target.bags[flat - lay.t1];
    return perturbed(target, perturb.target, b.members[member]);
  };

  g.base.resize(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const Bag& bi = bag_at(i);
      const Bag& bj = bag_at(j);
      double sum = 0.0;
      for (std::size_t a = 0; a < bi.members.size(); ++a)
        for (std::size_t b = 0; b < bj.members.size(); ++b)
          sum += eval_kernel(k, point(i, a), point(j, b));
      double v = sum / (static_cast<double>(bi.members.size()) *
                        static_cast<double>(bj.members.size()));
      g.base(i, j) = v;
      g.base(j, i) = v;
    }
  }
  scale_blocks(g);
  return g;
}

}  // namespace detail

}  // namespace llpx
