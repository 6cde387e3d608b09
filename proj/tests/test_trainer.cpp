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

#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>

#include "llpx/errors.hpp"
#include "llpx/eval.hpp"
#include "llpx/model_io.hpp"
#include "llpx/trainer.hpp"
#include "support/oracles.hpp"

using namespace llpx;

namespace {

HyperParams base_hp() {
  HyperParams hp;
  hp.C1 = 1.0;
  hp.C2 = 1.0;
  hp.lambda1 = 3.0;
  hp.lambda2 = 1.0;
  hp.eps = 0.1;
  hp.delta = 0.01;
  hp.qp_tol = 1e-9;
  return hp;
}

TaskDataset balanced_pairs_task(int n_bags) {
  // Every bag holds one positive and one negative instance, so every
  // proportion is 1/2 and every target is 0.
  TaskDataset ds;
  ds.dimension = 2;
  Rng rng(7);
  for (int b = 0; b < n_bags; ++b) {
    for (int s = 0; s < 2; ++s) {
      Instance ins;
      ins.features = Eigen::Vector2d(rng.normal(), rng.normal());
      ins.label = s == 0 ? 1 : -1;
      ds.instances.push_back(ins);
    }
    ds.bags.push_back({{static_cast<std::size_t>(2 * b),
                        static_cast<std::size_t>(2 * b + 1)},
                       0.5, 0.0});
  }
  return ds;
}

QpProblem wrap_gram(const BagGram& gram, const TaskDataset& src,
                    const TaskDataset& tgt, const HyperParams& hp) {
  QpProblem p;
  std::size_t n = gram.size();
  p.Q = &gram.matrix;
  p.targets.resize(n);
  p.eps = Eigen::VectorXd::Constant(n, hp.eps);
  p.box.resize(n);
  for (std::size_t f = 0; f < n; ++f) {
    int t = gram.task_of(f);
    const Bag& bag = t == 1 ? src.bags[gram.bag_of(f)] : tgt.bags[gram.bag_of(f)];
    p.targets[f] = bag.target;
    p.box[f] = t == 1 ? hp.C1 : hp.C2;
    p.task_of.push_back(t);
  }
  return p;
}

}  // namespace

TEST_CASE("fit converges immediately when the tube covers every target") {
  TaskDataset source = balanced_pairs_task(2);
  TaskDataset target = balanced_pairs_task(3);
  HyperParams hp = base_hp();
  hp.eps = 0.1;  // > 0 = |y|

  FitTrace trace;
  TrainedModel m = fit(source, target, hp, &trace);
  CHECK(m.converged);
  CHECK(m.rounds == 1);
  CHECK(m.dual.beta.cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(m.linear_weights);
  CHECK(m.linear_weights->w0.norm() == 0.0);
  CHECK(m.linear_weights->v1.norm() == 0.0);
  CHECK(m.linear_weights->v2.norm() == 0.0);
}

TEST_CASE("fit with delta zero stays perturbation-free and stops early") {
  llpx_test::RandomProblem prob = llpx_test::random_problem(3, 3, 3, 4, 8);
  HyperParams hp = base_hp();
  hp.delta = 0.0;
  hp.eps = 0.05;

  FitTrace trace;
  TrainedModel m = fit(prob.source, prob.target, hp, &trace);
  CHECK(m.converged);
  CHECK(m.rounds <= 2);
  for (const auto& v : m.perturbations.source) CHECK(v.norm() == 0.0);
  for (const auto& v : m.perturbations.target) CHECK(v.norm() == 0.0);
  for (const FitRound& r : trace.rounds) {
    if (r.delta_norms_source.size() > 0)
      CHECK(r.delta_norms_source.maxCoeff() == 0.0);
    if (r.delta_norms_target.size() > 0)
      CHECK(r.delta_norms_target.maxCoeff() == 0.0);
  }
}

TEST_CASE("recover_biases from a free interior bag") {
  Eigen::MatrixXd Q(1, 1);
  Q << 2.0;
  QpProblem p;
  p.Q = &Q;
  p.targets = Eigen::VectorXd::Constant(1, 1.0);
  p.eps = Eigen::VectorXd::Constant(1, 0.1);
  p.box = Eigen::VectorXd::Constant(1, 1.0);
  p.task_of = {1};

  Eigen::VectorXd beta = Eigen::VectorXd::Constant(1, 0.3);
  auto [b1, b2] = recover_biases(p, beta);
  CHECK(b1 == doctest::Approx(1.0 - 0.1 - 0.6).epsilon(1e-15));
  CHECK(b2 == 0.0);
  // Primal-dual consistency: the bag sits on the tube boundary.
  double fbar = 2.0 * 0.3 + b1;
  CHECK(fbar - 1.0 == doctest::Approx(-0.1).epsilon(1e-15));
}

TEST_CASE("recover_biases midpoint fallback with all-zero beta") {
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(2, 2);
  QpProblem p;
  p.Q = &Q;
  p.targets = Eigen::Vector2d(0.2, -0.1);
  p.eps = Eigen::VectorXd::Constant(2, 0.5);
  p.box = Eigen::VectorXd::Constant(2, 1.0);
  p.task_of = {1, 1};

  auto [b1, b2] = recover_biases(p, Eigen::VectorXd::Zero(2));
  // Interval [max(y - eps), min(y + eps)] = [-0.3, 0.4].
  CHECK(b1 == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(b2 == 0.0);
}

TEST_CASE("recover_biases is zero on a symmetric problem") {
  Eigen::MatrixXd Q(2, 2);
  Q << 3.0, 1.0, 1.0, 3.0;
  QpProblem p;
  p.Q = &Q;
  p.targets = Eigen::Vector2d(0.8, -0.8);
  p.eps = Eigen::VectorXd::Constant(2, 0.05);
  p.box = Eigen::VectorXd::Constant(2, 10.0);
  p.task_of = {1, 1};

  DualSolution s = solve_beta_qp(p, 1e-12);
  CHECK(s.beta[0] == doctest::Approx(-s.beta[1]).epsilon(1e-12));
  auto [b1, b2] = recover_biases(p, s.beta);
  CHECK(std::abs(b1) <= 1e-10);
  CHECK(b2 == 0.0);
}

TEST_CASE("expand_weights_linear hand example and errors") {
  TaskDataset source;
  source.dimension = 2;
  Instance a;
  a.features = Eigen::Vector2d(2, 0);
  a.label = 1;
  source.instances = {a};
  source.bags.push_back({{0}, 1.0, 1.0});
  TaskDataset target;
  target.dimension = 2;

  PerturbationSet pert = PerturbationSet::zeros(source, target);
  KernelSpec linear;
  Eigen::VectorXd beta = Eigen::VectorXd::Constant(1, 1.0);
  Weights w = expand_weights_linear(beta, source, target, pert, linear, 1.0, 1.0);
  CHECK(w.w0 == Eigen::Vector2d(2, 0));
  CHECK(w.v1 == Eigen::Vector2d(2, 0));
  CHECK(w.v2 == Eigen::Vector2d(0, 0));
  CHECK(Eigen::Vector2d(w.w0 + w.v1) == Eigen::Vector2d(4, 0));

  Weights zero = expand_weights_linear(Eigen::VectorXd::Zero(1), source, target,
                                       pert, linear, 1.0, 1.0);
  CHECK(zero.w0.norm() == 0.0);
  CHECK(zero.v1.norm() == 0.0);
  CHECK(zero.v2.norm() == 0.0);

  KernelSpec gaussian{KernelFamily::gaussian, 1.0};
  CHECK_THROWS_AS(
      expand_weights_linear(beta, source, target, pert, gaussian, 1.0, 1.0),
      DataError);
}

TEST_CASE("decision_value and predict on a hand-built model") {
  TrainedModel m;
  m.hp = base_hp();
  m.hp.lambda1 = 1.0;
  m.hp.lambda2 = 1.0;
  m.dimension = 2;
  m.linear_weights = Weights{Eigen::Vector2d(2, 0), Eigen::Vector2d(2, 0),
                             Eigen::Vector2d(0, 0)};
  m.b1 = 0.0;
  m.b2 = 0.3;

  CHECK(decision_value(m, Eigen::Vector2d(1, 0), 1) == 4.0);
  CHECK(decision_value(m, Eigen::Vector2d(1, 0), 2) ==
        doctest::Approx(2.3).epsilon(1e-15));
  CHECK(predict(m, Eigen::Vector2d(1, 0)) == 1);

  // Zero model: the decision value is the bias alone.
  m.linear_weights = Weights{Eigen::Vector2d(0, 0), Eigen::Vector2d(0, 0),
                             Eigen::Vector2d(0, 0)};
  CHECK(decision_value(m, Eigen::Vector2d(5, -3), 1) == 0.0);
  CHECK(decision_value(m, Eigen::Vector2d(5, -3), 2) == 0.3);
  CHECK(predict(m, Eigen::Vector2d(5, -3)) == 1);
  m.b2 = -0.3;
  CHECK(predict(m, Eigen::Vector2d(5, -3)) == -1);
  m.b2 = 0.0;
  CHECK(predict(m, Eigen::Vector2d(5, -3)) == -1);  // tie goes negative

  CHECK_THROWS_AS(decision_value(m, Eigen::Vector3d(1, 0, 0), 1), DataError);
  CHECK_THROWS_AS(decision_value(m, Eigen::Vector2d(1, 0), 3), DataError);
}

TEST_CASE("update_perturbations follows the closed form") {
  // One source bag of two identical instances (1,0); beta = 1 and
  // lambda1 = 1 give w1 = (2,0).
  TaskDataset source;
  source.dimension = 2;
  for (int i = 0; i < 2; ++i) {
    Instance ins;
    ins.features = Eigen::Vector2d(1, 0);
    ins.label = 1;
    source.instances.push_back(ins);
  }
  source.bags.push_back({{0, 1}, 1.0, 0.0});  // target y = 0
  TaskDataset target;
  target.dimension = 2;

  HyperParams hp = base_hp();
  hp.lambda1 = 1.0;
  hp.lambda2 = 1.0;
  hp.eps = 0.1;
  hp.delta = 0.1;

  PerturbationSet pert = PerturbationSet::zeros(source, target);
  BagGram gram = assemble_bag_gram(source, target, pert, hp.kernel, 1.0, 1.0);
  Eigen::VectorXd beta = Eigen::VectorXd::Constant(1, 1.0);

  // Residual r = 2 > eps, so every member moves -delta * w1/|w1|.
  PerturbationSet next =
      update_perturbations(source, target, gram, beta, 0.0, 0.0, pert, hp);
  for (const auto& dx : next.source) {
    CHECK(dx[0] == doctest::Approx(-0.1).epsilon(1e-14));
    CHECK(dx[1] == 0.0);
    CHECK(std::abs(dx.norm() - hp.delta) <= 1e-12 * hp.delta);
  }

  // Inside the tube nothing moves.
  source.bags[0].target = 2.0;
  gram = assemble_bag_gram(source, target, pert, hp.kernel, 1.0, 1.0);
  next = update_perturbations(source, target, gram, beta, 0.0, 0.0, pert, hp);
  for (const auto& dx : next.source) CHECK(dx.norm() == 0.0);

  // Degenerate direction: beta = 0 makes u vanish; a biased residual
  // outside the tube still yields no perturbation.
  source.bags[0].target = 0.0;
  next = update_perturbations(source, target, gram, Eigen::VectorXd::Zero(1),
                              5.0, 0.0, pert, hp);
  for (const auto& dx : next.source) CHECK(dx.norm() == 0.0);
}

TEST_CASE("perturbation norms are exactly zero or delta every round") {
  llpx_test::RandomProblem prob = llpx_test::random_problem(17, 4, 4, 3, 8);
  HyperParams hp = base_hp();
  hp.eps = 0.05;
  hp.delta = 0.01;

  FitTrace trace;
  TrainedModel m = fit(prob.source, prob.target, hp, &trace);
  REQUIRE(trace.rounds.size() >= 1);
  for (const FitRound& r : trace.rounds) {
    for (Eigen::Index i = 0; i < r.delta_norms_source.size(); ++i) {
      double n = r.delta_norms_source[i];
      CHECK((n == 0.0 || std::abs(n - hp.delta) <= 1e-12 * hp.delta));
    }
    for (Eigen::Index i = 0; i < r.delta_norms_target.size(); ++i) {
      double n = r.delta_norms_target[i];
      CHECK((n == 0.0 || std::abs(n - hp.delta) <= 1e-12 * hp.delta));
    }
  }
  for (const auto& v : m.perturbations.source) {
    double n = v.norm();
    CHECK((n == 0.0 || std::abs(n - hp.delta) <= 1e-12 * hp.delta));
  }
}

TEST_CASE("linear transfer direction equals the expanded weights") {
  llpx_test::RandomProblem prob = llpx_test::random_problem(23, 3, 3, 3, 8);
  HyperParams hp = base_hp();
  hp.eps = 0.02;
  hp.delta = 0.05;
  TrainedModel m = fit(prob.source, prob.target, hp);
  REQUIRE(m.linear_weights);

  Rng rng(5);
  Eigen::VectorXd x(8);
  for (int d = 0; d < 8; ++d) x[d] = rng.normal();

  for (int task : {1, 2}) {
    Eigen::VectorXd u = transfer_direction(
        task, x, *m.source, *m.target, m.perturbations, m.dual.beta, hp.kernel,
        hp.lambda1, hp.lambda2);
    Eigen::VectorXd w = task == 1
                            ? m.linear_weights->w0 + m.linear_weights->v1
                            : m.linear_weights->w0 + m.linear_weights->v2;
    CHECK((u - w).cwiseAbs().maxCoeff() <= 1e-10 * (1.0 + w.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("primal_objective of hand-built zero models") {
  TrainedModel m;
  m.hp = base_hp();
  m.hp.C1 = 2.0;
  m.hp.eps = 0.5;
  m.dimension = 2;
  m.linear_weights = Weights{Eigen::Vector2d(0, 0), Eigen::Vector2d(0, 0),
                             Eigen::Vector2d(0, 0)};
  m.dual.beta = Eigen::VectorXd::Zero(1);
  m.bag_means = {Eigen::Vector2d(1, 0)};
  m.bag_targets = Eigen::VectorXd::Constant(1, 1.0);
  m.bag_task = {1};

  ObjectiveBreakdown ob = primal_objective(m);
  CHECK(ob.regularizer == 0.0);
  CHECK(ob.slack_source == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(ob.slack_target == 0.0);
  CHECK(ob.total == doctest::Approx(1.0).epsilon(1e-15));

  // Tube wide enough: everything is zero.
  m.bag_targets[0] = 0.3;
  ob = primal_objective(m);
  CHECK(ob.total == 0.0);
}

TEST_CASE("duality gap closes on delta-free problems") {
  for (std::uint64_t seed : {101u, 102u, 103u}) {
    llpx_test::RandomProblem prob = llpx_test::random_problem(seed, 3, 3, 4, 8);
    HyperParams hp = base_hp();
    hp.delta = 0.0;
    hp.eps = 0.05;
    hp.qp_tol = 1e-10;
    TrainedModel m = fit(prob.source, prob.target, hp);
    double primal = primal_objective(m).total;
    double dual = m.dual.objective;
    CHECK(std::abs(primal - (-dual)) <= 1e-3 * (1.0 + std::abs(primal)));
  }
}

TEST_CASE("alternating rounds never increase the primal objective") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    llpx_test::RandomProblem prob = llpx_test::random_problem(seed, 4, 4, 4, 8);
    HyperParams hp = base_hp();
    hp.eps = 0.1;
    hp.delta = 0.01;
    hp.qp_tol = 1e-10;

    FitTrace trace;
    TrainedModel m = fit(prob.source, prob.target, hp, &trace);
    CHECK(m.rounds <= hp.max_rounds);
    double fmax = 0.0;
    for (const FitRound& r : trace.rounds)
      fmax = std::max(fmax, std::abs(r.primal.total));
    for (std::size_t r = 1; r < trace.rounds.size(); ++r)
      CHECK(trace.rounds[r].primal.total <=
            trace.rounds[r - 1].primal.total + 1e-6 * (1.0 + fmax));
  }
}

TEST_CASE("single-task delta-free training matches an exact scaled SVR") {
  llpx_test::RandomProblem prob = llpx_test::random_problem(31, 0, 6, 3, 8);
  HyperParams hp = base_hp();
  hp.lambda1 = 2.0;
  hp.lambda2 = 2.0;  // equal lambdas pin the scale to (1+lambda)/lambda
  hp.C2 = 2.0;
  hp.eps = 0.02;
  hp.delta = 0.0;
  hp.qp_tol = 1e-12;

  TrainedModel m = fit(prob.source, prob.target, hp);

  // Reference: bag-mean epsilon-SVR with the kernel scaled by
  // (1+lambda)/lambda, solved exactly by stationarity enumeration.
  double scale = (1.0 + hp.lambda2) / hp.lambda2;
  std::size_t t = prob.target.bags.size();
  std::vector<Eigen::VectorXd> means;
  for (std::size_t b = 0; b < t; ++b) means.push_back(bag_mean(prob.target, b));
  Eigen::MatrixXd Q(t, t);
  Eigen::VectorXd y(t);
  for (std::size_t i = 0; i < t; ++i) {
    y[i] = prob.target.bags[i].target;
    for (std::size_t j = 0; j < t; ++j) Q(i, j) = scale * means[i].dot(means[j]);
  }
  llpx_test::ExactQpResult ex = llpx_test::enumerate_qp_exact(
      Q, y, Eigen::VectorXd::Constant(t, hp.eps),
      Eigen::VectorXd::Constant(t, hp.C2), std::vector<int>(t, 2));
  REQUIRE(ex.found);
  bool has_free = false;
  for (std::size_t i = 0; i < t; ++i)
    has_free |= std::abs(ex.beta[i]) > 1e-8 &&
                std::abs(ex.beta[i]) < hp.C2 - 1e-8;
  REQUIRE(has_free);  // bias is pinned only through free bags

  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd x(8);
    for (int d = 0; d < 8; ++d) x[d] = rng.normal();
    double ref = ex.mu[1];
    for (std::size_t i = 0; i < t; ++i)
      ref += scale * ex.beta[i] * means[i].dot(x);
    CHECK(decision_value(m, x, 2) == doctest::Approx(ref).epsilon(1e-6));
  }
}

TEST_CASE("fit agrees with an alternating brute-force oracle end to end") {
  llpx_test::RandomProblem prob = llpx_test::random_problem(41, 2, 2, 3, 8);
  HyperParams hp = base_hp();
  hp.eps = 0.05;
  hp.delta = 0.05;
  hp.qp_tol = 1e-12;
  hp.stop_epsilon = 1e-6;

  TrainedModel m = fit(prob.source, prob.target, hp);

  // Oracle: exact QP by enumeration alternated with the closed-form
  // perturbation update, re-implemented here from scratch.
  PerturbationSet pert = PerturbationSet::zeros(prob.source, prob.target);
  double f_prev = llpx_test::kInf, f_cur = llpx_test::kInf;
  for (int round = 1; round <= hp.max_rounds; ++round) {
    BagGram gram = assemble_bag_gram(prob.source, prob.target, pert, hp.kernel,
                                     hp.lambda1, hp.lambda2);
    QpProblem qp = wrap_gram(gram, prob.source, prob.target, hp);
    llpx_test::ExactQpResult ex = llpx_test::enumerate_qp_exact(
        gram.matrix, qp.targets, qp.eps, qp.box, qp.task_of);
    REQUIRE(ex.found);
    f_cur = ex.objective;
    if (round >= 2 &&
        std::abs(f_cur - f_prev) <
            hp.stop_epsilon * std::max(std::abs(f_cur), std::abs(f_prev)))
      break;
    f_prev = f_cur;

    // Closed-form update: the bag residual picks the side, members move
    // delta * w_t / |w_t|.
    Eigen::VectorXd w1 = Eigen::VectorXd::Zero(8), w2 = Eigen::VectorXd::Zero(8);
    double c11 = (1.0 + hp.lambda1) / hp.lambda1;
    double c22 = (1.0 + hp.lambda2) / hp.lambda2;
    for (std::size_t b = 0; b < prob.source.bags.size(); ++b) {
      Eigen::VectorXd mb = bag_mean(prob.source, b, &pert.source);
      w1 += c11 * ex.beta[b] * mb;
      w2 += ex.beta[b] * mb;
    }
    std::size_t t1 = prob.source.bags.size();
    for (std::size_t b = 0; b < prob.target.bags.size(); ++b) {
      Eigen::VectorXd mb = bag_mean(prob.target, b, &pert.target);
      w1 += ex.beta[t1 + b] * mb;
      w2 += c22 * ex.beta[t1 + b] * mb;
    }
    PerturbationSet next = PerturbationSet::zeros(prob.source, prob.target);
    for (std::size_t f = 0; f < gram.size(); ++f) {
      int task = gram.task_of(f);
      const TaskDataset& ds = task == 1 ? prob.source : prob.target;
      const Bag& bag = ds.bags[gram.bag_of(f)];
      // Case residual at the unperturbed bag mean, expansion at the
      // perturbed support points.
      const Eigen::VectorXd& w = task == 1 ? w1 : w2;
      double fbar = w.dot(bag_mean(ds, gram.bag_of(f))) + ex.mu[task - 1];
      double r = fbar - bag.target;
      if (std::abs(r) <= hp.eps) continue;
      if (w.norm() == 0.0) continue;
      Eigen::VectorXd dx = (r > hp.eps ? -1.0 : 1.0) * hp.delta * w / w.norm();
      for (std::size_t id : bag.members) next.task(task)[id] = dx;
    }
    bool same = true;
    for (std::size_t i = 0; i < next.source.size() && same; ++i)
      same = (next.source[i] - pert.source[i]).norm() == 0.0;
    for (std::size_t i = 0; i < next.target.size() && same; ++i)
      same = (next.target[i] - pert.target[i]).norm() == 0.0;
    if (same) break;
    pert = std::move(next);
  }
  CHECK(m.dual.objective == doctest::Approx(f_cur).epsilon(1e-4));
}

TEST_CASE("bag order does not change predictions") {
  llpx_test::RandomProblem prob = llpx_test::random_problem(57, 3, 3, 3, 8);
  HyperParams hp = base_hp();
  hp.eps = 0.05;
  hp.delta = 0.01;
  TrainedModel m1 = fit(prob.source, prob.target, hp);

  TaskDataset src2 = prob.source;
  TaskDataset tgt2 = prob.target;
  std::swap(src2.bags[0], src2.bags[2]);
  std::swap(tgt2.bags[0], tgt2.bags[1]);
  TrainedModel m2 = fit(src2, tgt2, hp);

  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd x(8);
    for (int d = 0; d < 8; ++d) x[d] = rng.normal();
    CHECK(predict(m1, x) == predict(m2, x));
  }
}

TEST_CASE("linear decision values match the kernel expansion") {
  llpx_test::RandomProblem prob = llpx_test::random_problem(61, 3, 3, 3, 8);
  HyperParams hp = base_hp();
  hp.delta = 0.02;
  hp.eps = 0.05;
  TrainedModel m = fit(prob.source, prob.target, hp);
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd x(8);
    for (int d = 0; d < 8; ++d) x[d] = rng.normal();
    for (int task : {1, 2})
      CHECK(decision_value(m, x, task) ==
            doctest::Approx(detail::decision_value_expansion(m, x, task))
                .epsilon(1e-9));
  }
}

TEST_CASE("model JSON round trip is byte stable and preserves decisions") {
  llpx_test::RandomProblem prob = llpx_test::random_problem(71, 3, 3, 3, 8);
  HyperParams hp = base_hp();
  hp.eps = 0.05;
  hp.delta = 0.02;
  TrainedModel m = fit(prob.source, prob.target, hp);

  std::string once = model_to_json(m);
  TrainedModel loaded = model_from_json(once);
  std::string twice = model_to_json(loaded);
  CHECK(once == twice);

  CHECK(loaded.b1 == m.b1);
  CHECK(loaded.b2 == m.b2);
  CHECK(loaded.dual.beta == m.dual.beta);
  CHECK(loaded.rounds == m.rounds);
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd x(8);
    for (int d = 0; d < 8; ++d) x[d] = rng.normal();
    CHECK(decision_value(loaded, x, 2) == decision_value(m, x, 2));
    CHECK(predict(loaded, x) == predict(m, x));
  }

  auto tmp = std::filesystem::temp_directory_path() / "llpx_model_rt.json";
  save_model(tmp.string(), m);
  TrainedModel from_disk = load_model(tmp.string());
  CHECK(model_to_json(from_disk) == once);
  std::filesystem::remove(tmp);
}

TEST_CASE("hyperparams JSON round trip") {
  HyperParams hp = base_hp();
  hp.kernel.family = KernelFamily::gaussian;
  hp.kernel.gamma = 0.37;
  hp.delta_source = {0.1, 0.2};
  HyperParams back = hyperparams_from_json(hyperparams_to_json(hp));
  CHECK(back.C1 == hp.C1);
  CHECK(back.lambda1 == hp.lambda1);
  CHECK(back.kernel.family == hp.kernel.family);
  CHECK(back.kernel.gamma == hp.kernel.gamma);
  CHECK(back.delta_source == hp.delta_source);
  CHECK(hyperparams_to_json(back) == hyperparams_to_json(hp));
}

TEST_CASE("gaussian kernel training keeps its contracts") {
  llpx_test::RandomProblem prob = llpx_test::random_problem(81, 2, 3, 3, 5);
  HyperParams hp = base_hp();
  hp.kernel.family = KernelFamily::gaussian;
  hp.kernel.gamma = 0.5;
  hp.eps = 0.05;
  hp.delta = 0.02;

  FitTrace trace;
  TrainedModel m = fit(prob.source, prob.target, hp, &trace);
  CHECK_FALSE(m.linear_weights);
  CHECK(m.bag_points.size() == m.bag_means.size());
  for (const auto& v : m.perturbations.target) {
    double n = v.norm();
    CHECK((n == 0.0 || std::abs(n - hp.delta) <= 1e-12 * hp.delta));
  }
  ObjectiveBreakdown ob = primal_objective(m);
  CHECK(ob.regularizer >= 0.0);
  CHECK(ob.slack_source >= 0.0);
  CHECK(ob.slack_target >= 0.0);
  CHECK(ob.total == doctest::Approx(ob.regularizer + ob.slack_source +
                                    ob.slack_target));

  // Serialized gaussian models predict through stored bag points.
  TrainedModel loaded = model_from_json(model_to_json(m));
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd x(5);
    for (int d = 0; d < 5; ++d) x[d] = rng.normal();
    CHECK(decision_value(loaded, x, 2) == decision_value(m, x, 2));
  }
}

TEST_CASE("per-instance delta overrides the broadcast scalar") {
  llpx_test::RandomProblem prob = llpx_test::random_problem(87, 2, 3, 3, 8);
  HyperParams hp = base_hp();
  hp.eps = 0.02;
  hp.delta = 0.05;
  hp.delta_target.assign(prob.target.instances.size(), 0.05);
  hp.delta_target[0] = 0.0;   // this instance may never move
  hp.delta_target[1] = 0.01;  // this one has a tighter ball

  TrainedModel m = fit(prob.source, prob.target, hp);
  CHECK(m.perturbations.target[0].norm() == 0.0);
  double n1 = m.perturbations.target[1].norm();
  CHECK((n1 == 0.0 || std::abs(n1 - 0.01) <= 1e-12));
  for (std::size_t i = 2; i < m.perturbations.target.size(); ++i) {
    double n = m.perturbations.target[i].norm();
    CHECK((n == 0.0 || std::abs(n - 0.05) <= 1e-12));
  }
}

TEST_CASE("fit flags when the round budget runs out") {
  llpx_test::RandomProblem prob = llpx_test::random_problem(91, 3, 3, 3, 8);
  HyperParams hp = base_hp();
  hp.eps = 0.01;
  hp.delta = 0.2;  // big enough to keep the perturbations moving
  hp.max_rounds = 2;
  hp.stop_epsilon = 1e-12;

  TrainedModel m = fit(prob.source, prob.target, hp);
  CHECK(m.rounds == 2);
  CHECK_FALSE(m.converged);

  // Even without convergence the model is self-consistent: the stored
  // perturbations are the ones its final QP was solved with.
  BagGram gram = assemble_bag_gram(*m.source, *m.target, m.perturbations,
                                   hp.kernel, hp.lambda1, hp.lambda2);
  QpProblem qp = wrap_gram(gram, *m.source, *m.target, hp);
  CHECK(dual_objective(qp, m.dual.beta) ==
        doctest::Approx(m.dual.objective).epsilon(1e-12));
}

TEST_CASE("fit input validation") {
  llpx_test::RandomProblem prob = llpx_test::random_problem(95, 2, 2, 3, 8);
  HyperParams hp = base_hp();
  hp.C1 = -1.0;
  CHECK_THROWS_AS(fit(prob.source, prob.target, hp), DataError);
  hp = base_hp();
  TaskDataset no_bags;
  no_bags.dimension = 8;
  CHECK_THROWS_AS(fit(prob.source, no_bags, hp), DataError);
}
