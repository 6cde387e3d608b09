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

#include "llpx/cli.hpp"

#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "llpx/dataset.hpp"
#include "llpx/errors.hpp"
#include "llpx/eval.hpp"
#include "llpx/model_io.hpp"
#include "llpx/noise.hpp"
#include "llpx/numfmt.hpp"
#include "llpx/rng.hpp"
#include "llpx/trainer.hpp"

namespace llpx::cli {

namespace {

using json = nlohmann::json;

struct RunConfig {
  HyperParams hp;
  std::size_t bag_size = 16;
  std::uint64_t seed = 1;
  std::string format = "csv";
  int folds = 5;
  int jobs = 1;
  std::vector<double> fractions = {0.0, 0.02, 0.04, 0.08, 0.16, 0.32};
  int num_seeds = 5;
  std::vector<std::size_t> sizes = {250, 500, 1000};
  std::string tag = "synthetic";
  bool single_task = false;
  bool timings = false;

  // gen parameters
  std::size_t n_source = 2000;
  std::size_t n_target = 800;
  long dims = 50;
  double mean_shift = 0.5;
  double class_sep = 2.0;

  // paths
  std::string source, target, input, model, out, out_source, out_target;
  int task = 2;
};

// Config keys and command line flags are the same names (with '_'
// swapped for '-'); anything else in a config file is rejected.
const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "C1",         "C2",          "lambda1",    "lambda2",   "eps",
      "delta",      "stop_epsilon", "max_rounds", "qp_tol",    "qp_max_iter",
      "clip_epsilon", "kernel",    "gamma",      "bag_size",  "seed",
      "format",     "folds",       "jobs",       "fractions", "num_seeds",
      "sizes",      "tag",         "single_task", "timings",  "n_source",
      "n_target",   "dims",        "mean_shift", "class_sep", "source",
      "target",     "input",       "model",      "out",       "out_source",
      "out_target", "task"};
  return keys;
}

void apply_config(const std::string& path, RunConfig& cfg, bool& seed_from_config) {
  json j = json::parse(read_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw DataError("config '" + path + "' is not a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const std::string& k : known_keys()) known |= k == key;
    if (!known) throw DataError("unknown config key '" + key + "'");
    (void)value;
  }
  cfg.hp.C1 = j.value("C1", cfg.hp.C1);
  cfg.hp.C2 = j.value("C2", cfg.hp.C2);
  cfg.hp.lambda1 = j.value("lambda1", cfg.hp.lambda1);
  cfg.hp.lambda2 = j.value("lambda2", cfg.hp.lambda2);
  cfg.hp.eps = j.value("eps", cfg.hp.eps);
  cfg.hp.delta = j.value("delta", cfg.hp.delta);
  cfg.hp.stop_epsilon = j.value("stop_epsilon", cfg.hp.stop_epsilon);
  cfg.hp.max_rounds = j.value("max_rounds", cfg.hp.max_rounds);
  cfg.hp.qp_tol = j.value("qp_tol", cfg.hp.qp_tol);
  cfg.hp.qp_max_iter = j.value("qp_max_iter", cfg.hp.qp_max_iter);
  cfg.hp.scaling.clip_epsilon = j.value("clip_epsilon", cfg.hp.scaling.clip_epsilon);
  if (j.contains("kernel"))
    cfg.hp.kernel.family = kernel_family_from_string(j["kernel"].get<std::string>());
  cfg.hp.kernel.gamma = j.value("gamma", cfg.hp.kernel.gamma);
  cfg.bag_size = j.value("bag_size", cfg.bag_size);
  if (j.contains("seed")) {
    cfg.seed = j["seed"].get<std::uint64_t>();
    seed_from_config = true;
  }
  cfg.format = j.value("format", cfg.format);
  cfg.folds = j.value("folds", cfg.folds);
  cfg.jobs = j.value("jobs", cfg.jobs);
  if (j.contains("fractions"))
    cfg.fractions = j["fractions"].get<std::vector<double>>();
  cfg.num_seeds = j.value("num_seeds", cfg.num_seeds);
  if (j.contains("sizes")) cfg.sizes = j["sizes"].get<std::vector<std::size_t>>();
  cfg.tag = j.value("tag", cfg.tag);
  cfg.single_task = j.value("single_task", cfg.single_task);
  cfg.timings = j.value("timings", cfg.timings);
  cfg.n_source = j.value("n_source", cfg.n_source);
  cfg.n_target = j.value("n_target", cfg.n_target);
  cfg.dims = j.value("dims", cfg.dims);
  cfg.mean_shift = j.value("mean_shift", cfg.mean_shift);
  cfg.class_sep = j.value("class_sep", cfg.class_sep);
  cfg.source = j.value("source", cfg.source);
  cfg.target = j.value("target", cfg.target);
  cfg.input = j.value("input", cfg.input);
  cfg.model = j.value("model", cfg.model);
  cfg.out = j.value("out", cfg.out);
  cfg.out_source = j.value("out_source", cfg.out_source);
  cfg.out_target = j.value("out_target", cfg.out_target);
  cfg.task = j.value("task", cfg.task);
}

void pad_instances(std::vector<Instance>& instances, Eigen::Index dims) {
  for (Instance& ins : instances) {
    if (ins.features.size() > dims)
      throw DataError("instance dimension exceeds the requested dimension");
    if (ins.features.size() < dims) {
      Eigen::VectorXd padded = Eigen::VectorXd::Zero(dims);
      padded.head(ins.features.size()) = ins.features;
      ins.features = std::move(padded);
    }
  }
}

std::string require(const std::string& value, const char* what) {
  if (value.empty())
    throw UsageError(std::string("missing required option: ") + what);
  return value;
}

std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t stream) {
  return Rng(seed, stream).next();
}

void check_tag(const std::string& tag) {
  if (tag.find(',') != std::string::npos || tag.find('\n') != std::string::npos)
    throw DataError("dataset tag must not contain ',' or newlines");
}

int cmd_gen(const RunConfig& cfg) {
  RelatedTasks tasks =
      gen_related_tasks(cfg.seed, cfg.n_source, cfg.n_target, cfg.dims,
                        cfg.mean_shift, cfg.class_sep);
  atomic_write_file(require(cfg.out_source, "--out-source"),
                    format_sparse(tasks.source));
  atomic_write_file(require(cfg.out_target, "--out-target"),
                    format_sparse(tasks.target));
  std::cerr << "llpx: wrote " << cfg.out_source << " (" << tasks.source.size()
            << " instances) and " << cfg.out_target << " ("
            << tasks.target.size() << " instances)\n";
  return 0;
}

int cmd_bag(const RunConfig& cfg) {
  ParsedInstances parsed = parse_sparse_file(require(cfg.input, "--input"));
  TaskDataset ds = synth_bags(std::move(parsed.instances), cfg.bag_size,
                              cfg.seed, cfg.hp.scaling);
  atomic_write_file(require(cfg.out, "--out"),
                    bag_assignment_csv(ds, cfg.task));
  std::cerr << "llpx: wrote " << cfg.out << " (" << ds.bags.size()
            << " bags of size " << cfg.bag_size << ")\n";
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  ParsedInstances src = parse_sparse_file(require(cfg.source, "--source"));
  ParsedInstances tgt = parse_sparse_file(require(cfg.target, "--target"));
  Eigen::Index dims = std::max(src.dimension, tgt.dimension);
  pad_instances(src.instances, dims);
  pad_instances(tgt.instances, dims);

  TaskDataset source_ds;
  source_ds.dimension = dims;
  if (!cfg.single_task && !src.instances.empty())
    source_ds = synth_bags(std::move(src.instances), cfg.bag_size,
                           derived_seed(cfg.seed, 1), cfg.hp.scaling);
  TaskDataset target_ds = synth_bags(std::move(tgt.instances), cfg.bag_size,
                                     derived_seed(cfg.seed, 2), cfg.hp.scaling);

  TrainedModel model = fit(source_ds, target_ds, cfg.hp);
  save_model(require(cfg.out, "--out"), model);
  std::cerr << "llpx: trained " << (model.converged ? "to convergence" : "(hit max rounds)")
            << " in " << model.rounds << " round(s), dual objective "
            << fmt_double(model.dual.objective) << "; wrote " << cfg.out << "\n";
  return 0;
}

int cmd_predict(const RunConfig& cfg) {
  TrainedModel model = load_model(require(cfg.model, "--model"));
  ParsedInstances in = parse_sparse_file(require(cfg.input, "--input"));
  if (in.dimension > model.dimension)
    throw DataError("input dimension exceeds the model dimension");
  pad_instances(in.instances, model.dimension);

  std::ostringstream out;
  for (const Instance& ins : in.instances)
    out << (predict(model, ins.features) > 0 ? "+1" : "-1") << '\n';
  atomic_write_file(require(cfg.out, "--out"), out.str());
  std::cerr << "llpx: wrote " << cfg.out << " (" << in.instances.size()
            << " predictions)\n";
  return 0;
}

int cmd_cv(const RunConfig& cfg) {
  check_tag(cfg.tag);
  ParsedInstances src = parse_sparse_file(require(cfg.source, "--source"));
  ParsedInstances tgt = parse_sparse_file(require(cfg.target, "--target"));
  Eigen::Index dims = std::max(src.dimension, tgt.dimension);
  pad_instances(src.instances, dims);
  pad_instances(tgt.instances, dims);

  TaskDataset source_ds;
  source_ds.dimension = dims;
  if (!cfg.single_task)
    source_ds = synth_bags(std::move(src.instances), cfg.bag_size,
                           derived_seed(cfg.seed, 1), cfg.hp.scaling);

  CvReport report = cross_validate(source_ds, tgt.instances, cfg.hp,
                                   cfg.bag_size, cfg.folds, cfg.seed);
  std::string method = cfg.single_task ? kMethodSingleTask : kMethodTlLlp;
  std::string text = cfg.format == "json"
                         ? cv_report_to_json(report, cfg.tag, method)
                         : cv_report_to_csv(report, cfg.tag, method, cfg.timings);
  atomic_write_file(require(cfg.out, "--out"), text);
  std::cerr << "llpx: cv mean accuracy " << fmt_double(report.mean) << " +- "
            << fmt_double(report.stddev) << "; wrote " << cfg.out << "\n";
  return 0;
}

int cmd_sweep(const RunConfig& cfg) {
  check_tag(cfg.tag);
  ParsedInstances src = parse_sparse_file(require(cfg.source, "--source"));
  ParsedInstances tgt = parse_sparse_file(require(cfg.target, "--target"));
  Eigen::Index dims = std::max(src.dimension, tgt.dimension);
  pad_instances(src.instances, dims);
  pad_instances(tgt.instances, dims);

  if (cfg.num_seeds < 1) throw DataError("num_seeds must be >= 1");
  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < cfg.num_seeds; ++i)
    seeds.push_back(cfg.seed + static_cast<std::uint64_t>(i));

  SweepReport report =
      noise_sweep(src.instances, tgt.instances, cfg.hp, cfg.bag_size,
                  cfg.fractions, seeds, cfg.folds, cfg.jobs);
  std::string text = cfg.format == "json"
                         ? sweep_report_to_json(report, cfg.tag)
                         : sweep_report_to_csv(report, cfg.tag);
  atomic_write_file(require(cfg.out, "--out"), text);
  std::cerr << "llpx: sweep over " << cfg.fractions.size() << " fraction(s), "
            << seeds.size() << " seed(s); wrote " << cfg.out << "\n";
  return 0;
}

int cmd_bench(const RunConfig& cfg) {
  std::vector<BenchRow> rows = bench_runtime(cfg.sizes, cfg.hp, cfg.seed);
  atomic_write_file(require(cfg.out, "--out"), bench_to_csv(rows));
  std::cerr << "llpx: benchmarked " << rows.size() << " size(s); wrote "
            << cfg.out << "\n";
  return 0;
}

std::string flag_name(const std::string& key) {
  std::string out = "--" + key;
  for (char& c : out)
    if (c == '_') c = '-';
  return out;
}

}  // namespace

int run(int argc, const char* const* argv) {
  RunConfig cfg;

  // The config file seeds the defaults, flags override. Find it before
  // CLI11 runs so bound defaults are already the config values.
  bool seed_from_config = false;
  std::string config_path;
  try {
    for (int i = 1; i < argc; ++i) {
      std::string arg = argv[i];
      if (arg == "--config" && i + 1 < argc)
        config_path = argv[i + 1];
      else if (arg.rfind("--config=", 0) == 0)
        config_path = arg.substr(9);
    }
    if (!config_path.empty()) apply_config(config_path, cfg, seed_from_config);

    if (!seed_from_config) {
      if (const char* env = std::getenv("LLPX_SEED"); env && *env)
        cfg.seed = static_cast<std::uint64_t>(parse_long(env));
    }
  } catch (const DataError& e) {
    std::cerr << "llpx: " << e.what() << "\n";
    return 2;
  }

  CLI::App app{"TL-LLP: transfer learning for label proportions with uncertain inputs"};
  app.require_subcommand(1);
  std::string config_dummy;
  app.add_option("--config", config_dummy, "JSON config file; flags override its values");
  std::string kernel_name = to_string(cfg.hp.kernel.family);

  auto add_hp = [&](CLI::App* sub) {
    sub->add_option(flag_name("C1"), cfg.hp.C1, "source slack weight")->capture_default_str();
    sub->add_option(flag_name("C2"), cfg.hp.C2, "target slack weight")->capture_default_str();
    sub->add_option(flag_name("lambda1"), cfg.hp.lambda1, "source increment penalty")->capture_default_str();
    sub->add_option(flag_name("lambda2"), cfg.hp.lambda2, "target increment penalty")->capture_default_str();
    sub->add_option(flag_name("eps"), cfg.hp.eps, "tube half-width")->capture_default_str();
    sub->add_option(flag_name("delta"), cfg.hp.delta, "per-instance noise bound")->capture_default_str();
    sub->add_option(flag_name("stop_epsilon"), cfg.hp.stop_epsilon, "relative stopping threshold")->capture_default_str();
    sub->add_option(flag_name("max_rounds"), cfg.hp.max_rounds, "alternation round cap")->capture_default_str();
    sub->add_option(flag_name("qp_tol"), cfg.hp.qp_tol, "dual solver tolerance")->capture_default_str();
    sub->add_option(flag_name("qp_max_iter"), cfg.hp.qp_max_iter, "dual solver update cap")->capture_default_str();
    sub->add_option(flag_name("clip_epsilon"), cfg.hp.scaling.clip_epsilon, "proportion clipping")->capture_default_str();
    sub->add_option(flag_name("kernel"), kernel_name,
                    "kernel family: linear | gaussian")
        ->check(CLI::IsMember({"linear", "gaussian"}))
        ->capture_default_str();
    sub->add_option(flag_name("gamma"), cfg.hp.kernel.gamma, "gaussian kernel width")->capture_default_str();
  };
  auto add_common = [&](CLI::App* sub, bool with_bags = true) {
    sub->add_option(flag_name("seed"), cfg.seed, "RNG seed (LLPX_SEED overrides the default)")->capture_default_str();
    if (with_bags)
      sub->add_option(flag_name("bag_size"), cfg.bag_size, "instances per bag")->capture_default_str();
  };

  CLI::App* gen = app.add_subcommand("gen", "generate related synthetic tasks");
  add_common(gen, false);
  gen->add_option(flag_name("n_source"), cfg.n_source, "source instances")->capture_default_str();
  gen->add_option(flag_name("n_target"), cfg.n_target, "target instances")->capture_default_str();
  gen->add_option(flag_name("dims"), cfg.dims, "feature dimensions")->capture_default_str();
  gen->add_option(flag_name("mean_shift"), cfg.mean_shift, "target mean shift along e2")->capture_default_str();
  gen->add_option(flag_name("class_sep"), cfg.class_sep, "class separation along e1")->capture_default_str();
  gen->add_option(flag_name("out_source"), cfg.out_source, "output source file");
  gen->add_option(flag_name("out_target"), cfg.out_target, "output target file");

  CLI::App* bag = app.add_subcommand("bag", "synthesize bags and export assignments");
  add_common(bag);
  bag->add_option(flag_name("input"), cfg.input, "labeled sparse instance file");
  bag->add_option(flag_name("task"), cfg.task, "task id for the CSV column")->capture_default_str();
  bag->add_option(flag_name("clip_epsilon"), cfg.hp.scaling.clip_epsilon, "proportion clipping")->capture_default_str();
  bag->add_option(flag_name("out"), cfg.out, "output CSV");

  CLI::App* train = app.add_subcommand("train", "fit a model on two LLP tasks");
  add_common(train);
  add_hp(train);
  train->add_option(flag_name("source"), cfg.source, "labeled source instances");
  train->add_option(flag_name("target"), cfg.target, "labeled target instances");
  train->add_flag(flag_name("single_task"), cfg.single_task, "drop the source task");
  train->add_option(flag_name("out"), cfg.out, "output model JSON");

  CLI::App* pred = app.add_subcommand("predict", "label instances with a trained model");
  pred->add_option(flag_name("model"), cfg.model, "model JSON from train");
  pred->add_option(flag_name("input"), cfg.input, "sparse instance file");
  pred->add_option(flag_name("out"), cfg.out, "output predictions, one +-1 per line");

  CLI::App* cv = app.add_subcommand("cv", "k-fold cross validation on the target task");
  add_common(cv);
  add_hp(cv);
  cv->add_option(flag_name("source"), cfg.source, "labeled source instances");
  cv->add_option(flag_name("target"), cfg.target, "labeled target instances");
  cv->add_option(flag_name("folds"), cfg.folds, "fold count")->capture_default_str();
  cv->add_flag(flag_name("single_task"), cfg.single_task, "drop the source task");
  cv->add_option(flag_name("tag"), cfg.tag, "dataset column value")->capture_default_str();
  cv->add_option(flag_name("format"), cfg.format, "report format: csv | json")->capture_default_str();
  cv->add_flag(flag_name("timings"), cfg.timings, "fill the per-fold seconds column (breaks byte reproducibility)");
  cv->add_option(flag_name("out"), cfg.out, "output report");

  CLI::App* sweep = app.add_subcommand("sweep", "noise sensitivity sweep over corruption fractions");
  add_common(sweep);
  add_hp(sweep);
  sweep->add_option(flag_name("source"), cfg.source, "labeled source instances");
  sweep->add_option(flag_name("target"), cfg.target, "labeled target instances");
  sweep->add_option(flag_name("folds"), cfg.folds, "fold count")->capture_default_str();
  sweep->add_option(flag_name("fractions"), cfg.fractions, "corruption fractions")->delimiter(',')->capture_default_str();
  sweep->add_option(flag_name("num_seeds"), cfg.num_seeds, "seeds per fraction (seed, seed+1, ...)")->capture_default_str();
  sweep->add_option(flag_name("jobs"), cfg.jobs, "worker threads for sweep cells")->capture_default_str();
  sweep->add_option(flag_name("tag"), cfg.tag, "dataset column value")->capture_default_str();
  sweep->add_option(flag_name("format"), cfg.format, "report format: csv | json")->capture_default_str();
  sweep->add_option(flag_name("out"), cfg.out, "output report");

  CLI::App* bench = app.add_subcommand("bench", "per-round runtime at growing task sizes");
  add_common(bench, false);
  add_hp(bench);
  bench->add_option(flag_name("sizes"), cfg.sizes, "instances per task")->delimiter(',')->capture_default_str();
  bench->add_option(flag_name("out"), cfg.out, "output CSV");

  for (CLI::App* sub : {gen, bag, train, pred, cv, sweep, bench})
    sub->add_option("--config", config_dummy,
                    "JSON config file; flags override its values");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "llpx: " << e.what() << "\n";
    return 1;
  }

  try {
    cfg.hp.kernel.family = kernel_family_from_string(kernel_name);
    cfg.hp.validate();
    if (gen->parsed()) return cmd_gen(cfg);
    if (bag->parsed()) return cmd_bag(cfg);
    if (train->parsed()) return cmd_train(cfg);
    if (pred->parsed()) return cmd_predict(cfg);
    if (cv->parsed()) return cmd_cv(cfg);
    if (sweep->parsed()) return cmd_sweep(cfg);
    if (bench->parsed()) return cmd_bench(cfg);
    throw UsageError("no subcommand given");
  } catch (const UsageError& e) {
    std::cerr << "llpx: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "llpx: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "llpx: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "llpx: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace llpx::cli
