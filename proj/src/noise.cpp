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

#include "llpx/noise.hpp"

#include <algorithm>
#include <limits>
#include <cmath>
#include <numeric>

#include "llpx/errors.hpp"
#include "llpx/rng.hpp"

namespace llpx {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}  // namespace

Eigen::VectorXd column_stds(const std::vector<Instance>& instances) {
  if (instances.size() < 2)
    throw DataError("column_stds: need at least 2 instances");
  Eigen::Index dims = 0;
  for (const Instance& ins : instances)
    dims = std::max(dims, ins.features.size());

  auto at = [](const Instance& ins, Eigen::Index d) {
    return d < ins.features.size() ? ins.features[d] : 0.0;
  };
  double n = static_cast<double>(instances.size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dims);
  for (const Instance& ins : instances)
    for (Eigen::Index d = 0; d < dims; ++d) mean[d] += at(ins, d);
  mean /= n;

  // Population variance; deterministic and defined for tiny datasets.
  Eigen::VectorXd var = Eigen::VectorXd::Zero(dims);
  for (const Instance& ins : instances)
    for (Eigen::Index d = 0; d < dims; ++d) {
      double c = at(ins, d) - mean[d];
      var[d] += c * c;
    }
  var /= n;

  // Constant columns are exactly zero, not mean-rounding residue.
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(dims, kInf);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(dims, -kInf);
  for (const Instance& ins : instances)
    for (Eigen::Index d = 0; d < dims; ++d) {
      lo[d] = std::min(lo[d], at(ins, d));
      hi[d] = std::max(hi[d], at(ins, d));
    }
  for (Eigen::Index d = 0; d < dims; ++d)
    if (lo[d] == hi[d]) var[d] = 0.0;
  return var.cwiseMax(0.0).cwiseSqrt();
}

NoiseModel NoiseModel::from_data(const std::vector<Instance>& instances,
                                 std::uint64_t seed) {
  NoiseModel m;
  m.base_stds = column_stds(instances);
  m.seed = seed;
  return m;
}

std::vector<Instance> corrupt_fraction(const std::vector<Instance>& instances,
                                       double fraction,
                                       const NoiseModel& model) {
  if (!(fraction >= 0.0 && fraction <= 1.0))
    throw DataError("corrupt_fraction: fraction outside [0,1]");

  std::size_t n = instances.size();
  std::size_t n_corrupt = static_cast<std::size_t>(
      std::floor(fraction * static_cast<double>(n)));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng select_rng(model.seed, 0x5e1ec7);
  select_rng.shuffle(order);

  std::vector<bool> chosen(n, false);
  for (std::size_t i = 0; i < n_corrupt; ++i) chosen[order[i]] = true;

  std::vector<Instance> out = instances;
  for (std::size_t i = 0; i < n; ++i) {
    if (!chosen[i]) continue;
    // Per-instance stream: corruption parallelizes without changing bits.
    Rng rng(model.seed, i);
    Eigen::VectorXd& x = out[i].features;
    for (Eigen::Index d = 0; d < x.size(); ++d) {
      double s0 = d < model.base_stds.size() ? model.base_stds[d] : 0.0;
      double sigma = rng.uniform(0.0, 2.0 * s0);
      double noise = rng.normal();
      x[d] += sigma * noise;
    }
  }
  return out;
}

}  // namespace llpx
