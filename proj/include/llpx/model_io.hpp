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

#ifndef LLPX_MODEL_IO_HPP_
#define LLPX_MODEL_IO_HPP_

#include <string>

#include "llpx/trainer.hpp"

namespace llpx {

// Self-describing JSON: hyperparameters, per-bag beta, biases,
// per-instance perturbations, bag means/targets/tasks, and the explicit
// linear weights when present. Doubles are written in shortest
// round-trip form, so save(load(s)) == s byte for byte. Instance data
// is not embedded; a reloaded model predicts through its bag means.

std::string hyperparams_to_json(const HyperParams& hp);
HyperParams hyperparams_from_json(const std::string& text);

std::string model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const std::string& text);

void save_model(const std::string& path, const TrainedModel& model);
TrainedModel load_model(const std::string& path);

/// Write-then-rename so readers never observe a partial file.
void atomic_write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

}  // namespace llpx

#endif  // LLPX_MODEL_IO_HPP_
