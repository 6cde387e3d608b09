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

#include "llpx/eval.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "llpx/errors.hpp"
#include "llpx/model_io.hpp"
#include "llpx/noise.hpp"
#include "llpx/numfmt.hpp"
#include "llpx/rng.hpp"

namespace llpx {

namespace {

using json = nlohmann::json;
using clock_type = std::chrono::steady_clock;

double seconds_since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double mean = std::accumulate(xs.begin(), xs.end(), 0.0) /
                static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= static_cast<double>(xs.size());
  return {mean, std::sqrt(var)};
}

Eigen::VectorXd pad_to(const Eigen::VectorXd& x, Eigen::Index dims) {
  if (x.size() == dims) return x;
  if (x.size() > dims) throw DataError("instance dimension exceeds the model");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(dims);
  out.head(x.size()) = x;
  return out;
}

}  // namespace

double accuracy(const std::vector<int>& predictions,
                const std::vector<int>& truth) {
  if (predictions.empty()) throw DataError("accuracy: empty input");
  if (predictions.size() != truth.size())
    throw DataError("accuracy: length mismatch");
  std::size_t agree = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    agree += predictions[i] == truth[i];
  return static_cast<double>(agree) / static_cast<double>(predictions.size());
}

CvReport cross_validate(const TaskDataset& source,
                        const std::vector<Instance>& target_instances,
                        const HyperParams& hp, std::size_t bag_size, int k,
                        std::uint64_t seed) {
  if (k < 2) throw DataError("cross_validate: k must be >= 2");
  std::size_t n = target_instances.size();
  if (n < static_cast<std::size_t>(k))
    throw DataError("cross_validate: fewer instances than folds");
  for (const Instance& ins : target_instances)
    if (!ins.label) throw DataError("cross_validate: unlabeled target instance");

  auto t0 = clock_type::now();
  auto source_ptr = std::make_shared<const TaskDataset>(source);

  // Fold membership depends on (seed, k, n) only, never on features.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng fold_rng(seed, 0xF01d);
  fold_rng.shuffle(order);

  CvReport report;
  report.bag_size = bag_size;
  report.hp = hp;
  for (int f = 0; f < k; ++f) {
    auto tf = clock_type::now();
    std::size_t lo = n * static_cast<std::size_t>(f) / static_cast<std::size_t>(k);
    std::size_t hi =
        n * (static_cast<std::size_t>(f) + 1) / static_cast<std::size_t>(k);

    std::vector<Instance> train;
    train.reserve(n - (hi - lo));
    for (std::size_t i = 0; i < n; ++i)
      if (i < lo || i >= hi) train.push_back(target_instances[order[i]]);
    if (train.size() < bag_size)
      throw DataError("cross_validate: training fold too small for one bag");

    std::uint64_t fold_seed = Rng(seed, 0xBA6 + static_cast<std::uint64_t>(f)).next();
    TaskDataset fold_target = synth_bags(std::move(train), bag_size, fold_seed,
                                         hp.scaling);
    TrainedModel model = fit(
        source_ptr, std::make_shared<const TaskDataset>(std::move(fold_target)),
        hp);

    std::vector<int> preds, truth;
    preds.reserve(hi - lo);
    for (std::size_t i = lo; i < hi; ++i) {
      const Instance& ins = target_instances[order[i]];
      preds.push_back(predict(model, pad_to(ins.features, model.dimension)));
      truth.push_back(*ins.label);
    }
    report.fold_accuracies.push_back(accuracy(preds, truth));
    report.fold_seconds.push_back(seconds_since(tf));
  }

  std::tie(report.mean, report.stddev) = mean_std(report.fold_accuracies);
  report.wall_seconds = seconds_since(t0);
  return report;
}

SweepReport noise_sweep(const std::vector<Instance>& source_instances,
                        const std::vector<Instance>& target_instances,
                        const HyperParams& hp, std::size_t bag_size,
                        std::vector<double> fractions,
                        const std::vector<std::uint64_t>& seeds, int k,
                        int jobs) {
  for (double f : fractions)
    if (!(f >= 0.0 && f <= 1.0))
      throw DataError("noise_sweep: fractions must lie in [0,1]");
  if (fractions.empty() || seeds.empty())
    throw DataError("noise_sweep: need at least one fraction and one seed");
  std::sort(fractions.begin(), fractions.end());
  fractions.erase(std::unique(fractions.begin(), fractions.end()),
                  fractions.end());

  auto t0 = clock_type::now();
  const std::vector<std::string> methods = {kMethodTlLlp, kMethodDelta0,
                                            kMethodSingleTask};

  // Noise scale comes from the clean data, once per task.
  Eigen::VectorXd src_stds = column_stds(source_instances);
  Eigen::VectorXd tgt_stds = column_stds(target_instances);

  struct Cell {
    std::size_t fi, si;
  };
  std::vector<Cell> cells;
  for (std::size_t fi = 0; fi < fractions.size(); ++fi)
    for (std::size_t si = 0; si < seeds.size(); ++si) cells.push_back({fi, si});

  std::vector<std::array<std::vector<double>, 3>> cell_results(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;

  auto run_cell = [&](std::size_t ci) {
    const Cell& cell = cells[ci];
    double fraction = fractions[cell.fi];
    std::uint64_t seed = seeds[cell.si];

    NoiseModel src_nm{src_stds,
                      Rng(seed, 0xA0 + 2 * cell.fi).next()};
    NoiseModel tgt_nm{tgt_stds,
                      Rng(seed, 0xA1 + 2 * cell.fi).next()};
    std::vector<Instance> src_noisy =
        corrupt_fraction(source_instances, fraction, src_nm);
    std::vector<Instance> tgt_noisy =
        corrupt_fraction(target_instances, fraction, tgt_nm);

    TaskDataset src_ds = synth_bags(src_noisy, bag_size, seed, hp.scaling);
    TaskDataset empty_src;
    empty_src.dimension = src_ds.dimension;

    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      HyperParams mhp = hp;
      const TaskDataset* src = &src_ds;
      if (methods[mi] == kMethodDelta0) mhp.delta = 0.0;
      if (methods[mi] == kMethodSingleTask) src = &empty_src;
      CvReport cv = cross_validate(*src, tgt_noisy, mhp, bag_size, k, seed);
      cell_results[ci][mi] = cv.fold_accuracies;
    }
  };

  auto worker = [&]() {
    while (true) {
      std::size_t ci = next.fetch_add(1);
      if (ci >= cells.size()) break;
      try {
        run_cell(ci);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };

  int workers = std::clamp<int>(jobs, 1, static_cast<int>(cells.size()));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  // Deterministic aggregation order: fraction-major, fixed method order,
  // fold accuracies pooled across seeds in seed order.
  SweepReport report;
  report.bag_size = bag_size;
  for (std::size_t fi = 0; fi < fractions.size(); ++fi) {
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      SweepRow row;
      row.noise_fraction = fractions[fi];
      row.method = methods[mi];
      for (std::size_t si = 0; si < seeds.size(); ++si) {
        const auto& accs = cell_results[fi * seeds.size() + si][mi];
        row.accuracies.insert(row.accuracies.end(), accs.begin(), accs.end());
      }
      std::tie(row.mean, row.stddev) = mean_std(row.accuracies);
      report.rows.push_back(std::move(row));
    }
  }
  report.wall_seconds = seconds_since(t0);
  return report;
}

std::vector<BenchRow> bench_runtime(const std::vector<std::size_t>& sizes,
                                    const HyperParams& hp, std::uint64_t seed,
                                    int reps) {
  for (std::size_t i = 1; i < sizes.size(); ++i)
    if (sizes[i] <= sizes[i - 1])
      throw DataError("bench_runtime: sizes must be increasing");
  if (reps < 1) throw DataError("bench_runtime: reps must be >= 1");

  // Pinned round count so seconds-per-round measures one gram assembly,
  // one dual solve and one perturbation update at every size.
  HyperParams bhp = hp;
  bhp.max_rounds = 3;
  bhp.stop_epsilon = 1e-12;

  std::vector<BenchRow> out;
  for (std::size_t n : sizes) {
    // Small-magnitude 200-dimensional features, like the weighted text
    // representations the method targets; this keeps most bags at bound
    // support, the regime the pairwise solver is built for.
    RelatedTasks tasks =
        gen_related_tasks(Rng(seed, n).next(), n, n, 200, 0.5, 2.0);
    for (auto* side : {&tasks.source, &tasks.target})
      for (Instance& ins : *side) ins.features *= 0.1;
    auto src = std::make_shared<const TaskDataset>(
        synth_bags(std::move(tasks.source), 4, Rng(seed, n + 1).next(),
                   bhp.scaling));
    auto tgt = std::make_shared<const TaskDataset>(
        synth_bags(std::move(tasks.target), 4, Rng(seed, n + 2).next(),
                   bhp.scaling));

    fit(src, tgt, bhp);  // warm-up: page-faults and allocator growth

    std::vector<double> per_round;
    int rounds = 0;
    for (int rep = 0; rep < reps; ++rep) {
      auto t0 = clock_type::now();
      TrainedModel model = fit(src, tgt, bhp);
      double dt = seconds_since(t0);
      rounds = model.rounds;
      per_round.push_back(dt / std::max(1, model.rounds));
    }
    std::sort(per_round.begin(), per_round.end());
    BenchRow row;
    row.n = n;
    row.seconds_per_round = per_round[per_round.size() / 2];
    row.rounds = rounds;
    out.push_back(row);
  }
  return out;
}

// ---- serialization -------------------------------------------------------

namespace {

json hp_json(const HyperParams& hp) {
  return json::parse(hyperparams_to_json(hp));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    std::size_t next = s.find(sep, pos);
    if (next == std::string_view::npos) {
      out.emplace_back(s.substr(pos));
      break;
    }
    out.emplace_back(s.substr(pos, next - pos));
    pos = next + 1;
  }
  return out;
}

constexpr const char* kCsvHeader =
    "dataset,bag_size,method,noise_fraction,fold,accuracy,seconds";

struct CsvDoc {
  std::map<std::string, std::string> directives;  // text after '# key: '
  std::vector<std::vector<std::string>> rows;
};

CsvDoc parse_csv(std::string_view text) {
  CsvDoc doc;
  bool saw_header = false;
  for (const std::string& line : split(text, '\n')) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::size_t colon = line.find(": ");
      if (colon != std::string::npos)
        doc.directives[line.substr(2, colon - 2)] = line.substr(colon + 2);
      continue;
    }
    if (!saw_header) {
      if (line != kCsvHeader)
        throw DataError("unexpected CSV header: '" + line + "'");
      saw_header = true;
      continue;
    }
    auto fields = split(line, ',');
    if (fields.size() != 7)
      throw DataError("bad CSV row: '" + line + "'");
    doc.rows.push_back(std::move(fields));
  }
  if (!saw_header) throw DataError("CSV report has no header row");
  return doc;
}

void append_rows(std::ostringstream& out, const std::string& dataset,
                 std::size_t bag_size, const std::string& method,
                 double fraction, const std::vector<double>& accuracies,
                 const std::vector<double>& seconds) {
  for (std::size_t f = 0; f < accuracies.size(); ++f) {
    double secs = f < seconds.size() ? seconds[f] : 0.0;
    out << dataset << ',' << bag_size << ',' << method << ','
        << fmt_double(fraction) << ',' << f << ',' << fmt_double(accuracies[f])
        << ',' << fmt_double(secs) << '\n';
  }
}

}  // namespace

std::string cv_report_to_csv(const CvReport& r, const std::string& dataset,
                             const std::string& method, bool with_timings) {
  std::ostringstream out;
  out << "# llpx-report: cv 1\n";
  out << "# hyperparams: " << hp_json(r.hp).dump() << '\n';
  json meta;
  meta["wall_seconds"] = r.wall_seconds;
  meta["fold_seconds"] = r.fold_seconds;
  out << "# meta: " << meta.dump() << '\n';
  out << kCsvHeader << '\n';
  append_rows(out, dataset, r.bag_size, method, 0.0, r.fold_accuracies,
              with_timings ? r.fold_seconds : std::vector<double>{});
  return out.str();
}

CvReport cv_report_from_csv(std::string_view text) {
  CsvDoc doc = parse_csv(text);
  CvReport r;
  if (auto it = doc.directives.find("hyperparams"); it != doc.directives.end())
    r.hp = hyperparams_from_json(it->second);
  if (auto it = doc.directives.find("meta"); it != doc.directives.end()) {
    json meta = json::parse(it->second);
    r.wall_seconds = meta.value("wall_seconds", 0.0);
    if (meta.contains("fold_seconds"))
      r.fold_seconds = meta["fold_seconds"].get<std::vector<double>>();
  }
  for (const auto& row : doc.rows) {
    r.bag_size = static_cast<std::size_t>(parse_long(row[1]));
    r.fold_accuracies.push_back(parse_double(row[5]));
  }
  std::tie(r.mean, r.stddev) = mean_std(r.fold_accuracies);
  return r;
}

std::string sweep_report_to_csv(const SweepReport& r,
                                const std::string& dataset) {
  std::ostringstream out;
  out << "# llpx-report: sweep 1\n";
  json meta;
  meta["wall_seconds"] = r.wall_seconds;
  out << "# meta: " << meta.dump() << '\n';
  out << kCsvHeader << '\n';
  for (const SweepRow& row : r.rows)
    append_rows(out, dataset, r.bag_size, row.method, row.noise_fraction,
                row.accuracies, {});
  return out.str();
}

SweepReport sweep_report_from_csv(std::string_view text) {
  CsvDoc doc = parse_csv(text);
  SweepReport r;
  if (auto it = doc.directives.find("meta"); it != doc.directives.end())
    r.wall_seconds = json::parse(it->second).value("wall_seconds", 0.0);
  for (const auto& row : doc.rows) {
    r.bag_size = static_cast<std::size_t>(parse_long(row[1]));
    double fraction = parse_double(row[3]);
    const std::string& method = row[2];
    if (r.rows.empty() || r.rows.back().method != method ||
        r.rows.back().noise_fraction != fraction) {
      SweepRow nr;
      nr.noise_fraction = fraction;
      nr.method = method;
      r.rows.push_back(std::move(nr));
    }
    r.rows.back().accuracies.push_back(parse_double(row[5]));
  }
  for (SweepRow& row : r.rows)
    std::tie(row.mean, row.stddev) = mean_std(row.accuracies);
  return r;
}

std::string cv_report_to_json(const CvReport& r, const std::string& dataset,
                              const std::string& method) {
  json j;
  j["format"] = "llpx-cv-report";
  j["version"] = 1;
  j["meta"] = {{"wall_seconds", r.wall_seconds},
               {"fold_seconds", r.fold_seconds}};
  json body;
  body["dataset"] = dataset;
  body["method"] = method;
  body["bag_size"] = r.bag_size;
  body["hyperparams"] = hp_json(r.hp);
  body["fold_accuracies"] = r.fold_accuracies;
  body["mean"] = r.mean;
  body["std"] = r.stddev;
  j["report"] = body;
  return j.dump(2) + "\n";
}

CvReport cv_report_from_json(std::string_view text) {
  json j = json::parse(text);
  CvReport r;
  const json& body = j.at("report");
  r.bag_size = body.at("bag_size").get<std::size_t>();
  r.hp = hyperparams_from_json(body.at("hyperparams").dump());
  r.fold_accuracies = body.at("fold_accuracies").get<std::vector<double>>();
  r.mean = body.at("mean").get<double>();
  r.stddev = body.at("std").get<double>();
  if (j.contains("meta")) {
    r.wall_seconds = j["meta"].value("wall_seconds", 0.0);
    if (j["meta"].contains("fold_seconds"))
      r.fold_seconds = j["meta"]["fold_seconds"].get<std::vector<double>>();
  }
  return r;
}

std::string sweep_report_to_json(const SweepReport& r,
                                 const std::string& dataset) {
  json j;
  j["format"] = "llpx-sweep-report";
  j["version"] = 1;
  j["meta"] = {{"wall_seconds", r.wall_seconds}};
  json rows = json::array();
  for (const SweepRow& row : r.rows) {
    rows.push_back({{"noise_fraction", row.noise_fraction},
                    {"method", row.method},
                    {"accuracies", row.accuracies},
                    {"mean", row.mean},
                    {"std", row.stddev}});
  }
  j["report"] = {{"dataset", dataset}, {"bag_size", r.bag_size}, {"rows", rows}};
  return j.dump(2) + "\n";
}

SweepReport sweep_report_from_json(std::string_view text) {
  json j = json::parse(text);
  SweepReport r;
  const json& body = j.at("report");
  r.bag_size = body.at("bag_size").get<std::size_t>();
  for (const json& e : body.at("rows")) {
    SweepRow row;
    row.noise_fraction = e.at("noise_fraction").get<double>();
    row.method = e.at("method").get<std::string>();
    row.accuracies = e.at("accuracies").get<std::vector<double>>();
    row.mean = e.at("mean").get<double>();
    row.stddev = e.at("std").get<double>();
    r.rows.push_back(std::move(row));
  }
  if (j.contains("meta")) r.wall_seconds = j["meta"].value("wall_seconds", 0.0);
  return r;
}

std::string bench_to_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  out << "n,seconds_per_round,rounds\n";
  for (const BenchRow& r : rows)
    out << r.n << ',' << fmt_double(r.seconds_per_round) << ',' << r.rounds
        << '\n';
  return out.str();
}

std::vector<BenchRow> bench_from_csv(std::string_view text) {
  std::vector<BenchRow> out;
  bool saw_header = false;
  for (const std::string& line : split(text, '\n')) {
    if (line.empty() || line[0] == '#') continue;
    if (!saw_header) {
      if (line != "n,seconds_per_round,rounds")
        throw DataError("unexpected bench CSV header");
      saw_header = true;
      continue;
    }
    auto fields = split(line, ',');
    if (fields.size() != 3) throw DataError("bad bench CSV row");
    BenchRow r;
    r.n = static_cast<std::size_t>(parse_long(fields[0]));
    r.seconds_per_round = parse_double(fields[1]);
    r.rounds = static_cast<int>(parse_long(fields[2]));
    out.push_back(r);
  }
  return out;
}

}  // namespace llpx
