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

#ifndef LLPX_NOISE_HPP_
#define LLPX_NOISE_HPP_

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "llpx/dataset.hpp"

namespace llpx {

/// Data-driven Gaussian corruption: each corrupted instance draws, per
/// dimension, a noise std uniformly from [0, 2 sigma0_i] and then adds
/// zero-mean Gaussian noise with that std.
struct NoiseModel {
  Eigen::VectorXd base_stds;  // sigma0 per dimension, from the clean data
  std::uint64_t seed = 0;

  static NoiseModel from_data(const std::vector<Instance>& instances,
                              std::uint64_t seed);
};

/// Population standard deviation per dimension; needs >= 2 instances.
Eigen::VectorXd column_stds(const std::vector<Instance>& instances);

/// Corrupts floor(fraction * N) instances chosen uniformly without
/// replacement; the rest pass through untouched. Labels are never
/// modified. Deterministic per (model.seed, instance id).
std::vector<Instance> corrupt_fraction(const std::vector<Instance>& instances,
                                       double fraction,
                                       const NoiseModel& model);

}  // namespace llpx

#endif  // LLPX_NOISE_HPP_
