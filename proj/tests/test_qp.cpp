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

#include "llpx/errors.hpp"
#include "llpx/kernel.hpp"
#include "llpx/qp.hpp"
#include "support/oracles.hpp"

using namespace llpx;

namespace {

struct Holder {
  Eigen::MatrixXd Q;
  QpProblem p;
};

Holder make_problem(Eigen::MatrixXd Q, Eigen::VectorXd y, double eps, double C,
                    std::vector<int> task_of) {
  Holder h;
  h.Q = std::move(Q);
  h.p.targets = std::move(y);
  h.p.eps = Eigen::VectorXd::Constant(h.p.targets.size(), eps);
  h.p.box = Eigen::VectorXd::Constant(h.p.targets.size(), C);
  h.p.task_of = std::move(task_of);
  h.p.Q = &h.Q;
  return h;
}

Holder random_bag_problem(std::uint64_t seed, std::size_t src_bags,
                          std::size_t tgt_bags, double eps, double C) {
  llpx_test::RandomProblem prob =
      llpx_test::random_problem(seed, src_bags, tgt_bags, 3, 8);
  PerturbationSet pert = PerturbationSet::zeros(prob.source, prob.target);
  KernelSpec k;
  BagGram g = assemble_bag_gram(prob.source, prob.target, pert, k, 3.0, 1.0);

  Holder h;
  h.Q = g.matrix;
  std::size_t n = g.size();
  h.p.targets.resize(n);
  for (std::size_t f = 0; f < n; ++f) {
    int t = g.task_of(f);
    const Bag& bag = t == 1 ? prob.source.bags[g.bag_of(f)]
                            : prob.target.bags[g.bag_of(f)];
    h.p.targets[f] = bag.target;
    h.p.task_of.push_back(t);
  }
  h.p.eps = Eigen::VectorXd::Constant(n, eps);
  h.p.box = Eigen::VectorXd::Constant(n, C);
  h.p.Q = &h.Q;
  return h;
}

void check_feasible(const QpProblem& p, const Eigen::VectorXd& beta) {
  double sums[2] = {0.0, 0.0};
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(std::abs(beta[i]) <= p.box[i] + 1e-12);
    sums[p.task_of[i] - 1] += beta[i];
  }
  CHECK(std::abs(sums[0]) <= 1e-8);
  CHECK(std::abs(sums[1]) <= 1e-8);
}

}  // namespace

TEST_CASE("zero targets inside the tube give the zero solution") {
  Holder h = make_problem(Eigen::Matrix2d{{2, 0}, {0, 2}},
                          Eigen::Vector2d(0, 0), 0.1, 10.0, {1, 1});
  DualSolution s = solve_beta_qp(h.p);
  CHECK(s.beta.cwiseAbs().maxCoeff() == 0.0);
  CHECK(s.objective == 0.0);
  CHECK(s.converged);
}

TEST_CASE("two source bags, analytic optimum by substitution") {
  // With beta2 = -beta1 the objective is a scalar quadratic; the oracle
  // minimizer is (y1 - y2) / (Q11 - 2 Q12 + Q22).
  Eigen::Matrix2d Q{{2, 0}, {0, 2}};
  Eigen::Vector2d y(1, -1);
  double beta1 = (y[0] - y[1]) / (Q(0, 0) - 2 * Q(0, 1) + Q(1, 1));
  CHECK(beta1 == 0.5);
  double oracle_obj = 0.5 * beta1 * beta1 * (Q(0, 0) - 2 * Q(0, 1) + Q(1, 1)) -
                      beta1 * (y[0] - y[1]);
  CHECK(oracle_obj == -0.5);

  Holder h = make_problem(Q, y, 0.0, 10.0, {1, 1});
  DualSolution s = solve_beta_qp(h.p, 1e-10);
  CHECK(s.beta[0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(s.beta[1] == doctest::Approx(-0.5).epsilon(1e-9));
  CHECK(s.objective == doctest::Approx(-0.5).epsilon(1e-9));

  llpx_test::ExactQpResult ex =
      llpx_test::enumerate_qp_exact(h.Q, h.p.targets, h.p.eps, h.p.box, h.p.task_of);
  REQUIRE(ex.found);
  CHECK(ex.objective == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("random six-bag problems match the oracles") {
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    Holder h = random_bag_problem(seed, 3, 3, 0.05, 1.0);
    DualSolution s = solve_beta_qp(h.p, 1e-8);
    check_feasible(h.p, s.beta);

    llpx_test::ExactQpResult ex = llpx_test::enumerate_qp_exact(
        h.Q, h.p.targets, h.p.eps, h.p.box, h.p.task_of);
    REQUIRE(ex.found);
    CHECK(s.objective == doctest::Approx(ex.objective).epsilon(1e-7));

    double pg = llpx_test::projected_gradient_qp(h.Q, h.p.targets, h.p.eps,
                                                 h.p.box, h.p.task_of, 1000000);
    CHECK(std::abs(s.objective - pg) <= 1e-4);
  }
}

TEST_CASE("grid search over tiny polytopes") {
  for (std::uint64_t seed : {31u, 32u}) {
    Holder h = random_bag_problem(seed, 0, 3, 0.0, 0.5);
    DualSolution s = solve_beta_qp(h.p, 1e-8);
    double grid = llpx_test::grid_search_qp(h.Q, h.p.targets, h.p.eps, h.p.box,
                                            h.p.task_of, 1e-3);
    CHECK(std::abs(s.objective - grid) <= 2e-3);
  }
  Holder h = random_bag_problem(33, 2, 1, 0.0, 0.5);
  DualSolution s = solve_beta_qp(h.p, 1e-8);
  double grid = llpx_test::grid_search_qp(h.Q, h.p.targets, h.p.eps, h.p.box,
                                          h.p.task_of, 1e-3);
  CHECK(std::abs(s.objective - grid) <= 2e-3);
  // A lone bag in a task is pinned to zero by its equality constraint.
  CHECK(s.beta[2] == 0.0);
}

TEST_CASE("kkt_residual is zero at the optimum and positive away from it") {
  Holder h = random_bag_problem(41, 2, 2, 0.05, 1.0);
  llpx_test::ExactQpResult ex = llpx_test::enumerate_qp_exact(
      h.Q, h.p.targets, h.p.eps, h.p.box, h.p.task_of);
  REQUIRE(ex.found);

  DualSolution at_opt;
  at_opt.beta = ex.beta;
  CHECK(kkt_residual(h.p, at_opt) <= 1e-8);

  DualSolution zero;
  zero.beta = Eigen::VectorXd::Zero(h.p.size());
  if ((ex.beta.cwiseAbs().maxCoeff() > 1e-6)) {
    CHECK(kkt_residual(h.p, zero) > 1e-6);
  }

  DualSolution nudged;
  nudged.beta = ex.beta;
  nudged.beta[0] += 0.1;
  CHECK(kkt_residual(h.p, nudged) > kkt_residual(h.p, at_opt));
}

TEST_CASE("dual_objective values and convexity") {
  Holder h = make_problem(Eigen::Matrix2d{{2, 0}, {0, 2}},
                          Eigen::Vector2d(1, -1), 0.0, 10.0, {1, 1});
  CHECK(dual_objective(h.p, Eigen::Vector2d(0, 0)) == 0.0);
  CHECK(dual_objective(h.p, Eigen::Vector2d(0.5, -0.5)) == -0.5);
  CHECK_THROWS_AS(dual_objective(h.p, Eigen::Vector2d(11, 0)), DataError);

  Holder r = random_bag_problem(51, 2, 2, 0.1, 1.0);
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd a(r.p.size()), b(r.p.size());
    for (std::size_t i = 0; i < r.p.size(); ++i) {
      a[i] = rng.uniform(-1.0, 1.0);
      b[i] = rng.uniform(-1.0, 1.0);
    }
    double mid = dual_objective(r.p, 0.5 * (a + b));
    double avg = 0.5 * (dual_objective(r.p, a) + dual_objective(r.p, b));
    CHECK(mid <= avg + 1e-12);
  }
}

TEST_CASE("monotone descent per pairwise update") {
  Holder h = random_bag_problem(61, 3, 3, 0.02, 1.0);
  double prev = 0.0;  // objective at beta = 0
  for (long cap = 1; cap <= 60; ++cap) {
    DualSolution s = solve_beta_qp(h.p, 1e-12, cap);
    CHECK(s.objective <= prev + 1e-12);
    prev = s.objective;
    if (s.converged) break;
  }
}

TEST_CASE("solver is deterministic and warm starts land on the same answer") {
  Holder h = random_bag_problem(71, 3, 3, 0.05, 1.0);
  DualSolution a = solve_beta_qp(h.p, 1e-8);
  DualSolution b = solve_beta_qp(h.p, 1e-8);
  CHECK(a.beta == b.beta);
  CHECK(a.iterations == b.iterations);

  Eigen::VectorXd warm = a.beta;
  DualSolution c = solve_beta_qp(h.p, 1e-8, 10'000'000, &warm);
  CHECK(std::abs(c.objective - a.objective) <= 1e-8);
  CHECK(c.iterations <= a.iterations);
}

TEST_CASE("iteration cap flags the solution instead of throwing") {
  Eigen::Matrix4d Q = Eigen::Matrix4d::Identity() * 2.0;
  Q(0, 1) = Q(1, 0) = 0.5;
  Q(2, 3) = Q(3, 2) = 0.25;
  Holder h = make_problem(Q, Eigen::Vector4d(1, -1, 2, -2), 0.0, 5.0,
                          {1, 1, 2, 2});
  DualSolution s = solve_beta_qp(h.p, 1e-12, 2);
  CHECK(s.iterations == 2);
  CHECK_FALSE(s.converged);
  DualSolution full = solve_beta_qp(h.p, 1e-12);
  CHECK(full.converged);
  CHECK(full.objective <= s.objective + 1e-12);
}

TEST_CASE("indefinite quadratic form raises a numerical error") {
  Holder h = make_problem(Eigen::Matrix2d{{0, 1}, {1, 0}},
                          Eigen::Vector2d(1, -1), 0.0, 1.0, {1, 1});
  CHECK_THROWS_AS(solve_beta_qp(h.p), NumericalError);
}

TEST_CASE("malformed problems are rejected") {
  Holder h = make_problem(Eigen::Matrix2d{{1, 0}, {0, 1}},
                          Eigen::Vector2d(1, -1), 0.0, 1.0, {1, 3});
  CHECK_THROWS_AS(solve_beta_qp(h.p), DataError);
  h.p.task_of = {1, 1};
  h.p.box[0] = 0.0;
  CHECK_THROWS_AS(solve_beta_qp(h.p), DataError);
  h.p.box[0] = 1.0;
  h.p.eps[0] = -0.5;
  CHECK_THROWS_AS(solve_beta_qp(h.p), DataError);
}
