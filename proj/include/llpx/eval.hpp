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

#ifndef LLPX_EVAL_HPP_
#define LLPX_EVAL_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "llpx/dataset.hpp"
#include "llpx/trainer.hpp"

namespace llpx {

/// Fraction of positions where prediction and truth agree.
double accuracy(const std::vector<int>& predictions,
                const std::vector<int>& truth);

inline constexpr const char* kMethodTlLlp = "tl-llp";
inline constexpr const char* kMethodDelta0 = "tl-llp-delta0";
inline constexpr const char* kMethodSingleTask = "single-task";

struct CvReport {
  std::vector<double> fold_accuracies;
  double mean = 0.0;
  double stddev = 0.0;  // population std over folds
  std::size_t bag_size = 0;
  HyperParams hp;
  double wall_seconds = 0.0;
  std::vector<double> fold_seconds;
};

/// K-fold cross validation over the target instances only; the source
/// task is held fixed. Fold membership depends on (seed, k, N) alone;
/// bags are re-synthesized per training fold with a fold-derived seed.
/// Pass an empty source dataset for single-task training.
CvReport cross_validate(const TaskDataset& source,
                        const std::vector<Instance>& target_instances,
                        const HyperParams& hp, std::size_t bag_size, int k,
                        std::uint64_t seed);

struct SweepRow {
  double noise_fraction = 0.0;
  std::string method;
  std::vector<double> accuracies;  // fold accuracies pooled across seeds
  double mean = 0.0;
  double stddev = 0.0;
};

struct SweepReport {
  std::vector<SweepRow> rows;  // fractions ascending, methods in fixed order
  std::size_t bag_size = 0;
  double wall_seconds = 0.0;
};

/// For every (fraction, seed) cell: corrupt both tasks once, then
/// cross-validate each method on the same corrupted data. Methods:
/// tl-llp as configured, tl-llp-delta0 with delta = 0, single-task with
/// the source dropped. Cells are independent; `jobs` caps worker
/// threads and never changes the result.
SweepReport noise_sweep(const std::vector<Instance>& source_instances,
                        const std::vector<Instance>& target_instances,
                        const HyperParams& hp, std::size_t bag_size,
                        std::vector<double> fractions,
                        const std::vector<std::uint64_t>& seeds, int k = 5,
                        int jobs = 1);

struct BenchRow {
  std::size_t n = 0;  // instances per task
  double seconds_per_round = 0.0;
  int rounds = 0;
};

/// Synthetic tasks at each size; reports the median per-round training
/// time over `reps` repetitions.
std::vector<BenchRow> bench_runtime(const std::vector<std::size_t>& sizes,
                                    const HyperParams& hp, std::uint64_t seed,
                                    int reps = 3);

// ---- report serialization ----------------------------------------------
//
// CSV schema shared by cv and sweep reports, one row per fold:
//   dataset,bag_size,method,noise_fraction,fold,accuracy,seconds
// Leading '#' lines carry hyperparameters (deterministic) and timing
// metadata (excluded from reproducibility comparisons). The seconds
// column is 0 unless per-fold timings are requested.

std::string cv_report_to_csv(const CvReport& r, const std::string& dataset,
                             const std::string& method, bool with_timings = false);
CvReport cv_report_from_csv(std::string_view text);

std::string sweep_report_to_csv(const SweepReport& r, const std::string& dataset);
SweepReport sweep_report_from_csv(std::string_view text);

std::string cv_report_to_json(const CvReport& r, const std::string& dataset,
                              const std::string& method);
CvReport cv_report_from_json(std::string_view text);

std::string sweep_report_to_json(const SweepReport& r, const std::string& dataset);
SweepReport sweep_report_from_json(std::string_view text);

std::string bench_to_csv(const std::vector<BenchRow>& rows);
std::vector<BenchRow> bench_from_csv(std::string_view text);

}  // namespace llpx

#endif  // LLPX_EVAL_HPP_
