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

#include "llpx/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "llpx/errors.hpp"

namespace llpx {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Directional derivatives of the objective at beta along +e_i / -e_i,
// with the |beta| kink resolved on the side the move starts from.
inline double d_up(double g, double beta, double eps) {
  return g + (beta >= 0.0 ? eps : -eps);
}
inline double d_down(double g, double beta, double eps) {
  return -g + (beta <= 0.0 ? eps : -eps);
}

struct Pair {
  int i = -1;
  int j = -1;
  double violation = -kInf;
};

// Maximal violating pair within one task: the best upward move combined
// with the best downward move. Ties keep the lowest index, so the
// solver stays deterministic.
Pair find_pair(const QpProblem& p, const Eigen::VectorXd& beta,
               const Eigen::VectorXd& g, int task) {
  Pair out;
  double best_up = kInf, best_dn = kInf;
  int bi = -1, bj = -1;
  for (std::size_t idx = 0; idx < p.size(); ++idx) {
    if (p.task_of[idx] != task) continue;
    double b = beta[idx], c = p.box[idx], e = p.eps[idx];
    if (b < c) {
      double d = d_up(g[idx], b, e);
      if (d < best_up) {
        best_up = d;
        bi = static_cast<int>(idx);
      }
    }
    if (b > -c) {
      double d = d_down(g[idx], b, e);
      if (d < best_dn) {
        best_dn = d;
        bj = static_cast<int>(idx);
      }
    }
  }
  if (bi < 0 || bj < 0 || bi == bj) return out;
  out.i = bi;
  out.j = bj;
  out.violation = -(best_up + best_dn);
  return out;
}

// Exact minimizer of the convex piecewise quadratic
//   phi(tau) = 1/2 a tau^2 + (g_i - g_j) tau
//              + eps_i |beta_i + tau| + eps_j |beta_j - tau|
// over tau in [0, hi]. phi'(0+) < 0 by pair selection, so tau* > 0.
double line_search(double a, double gi, double gj, double bi, double bj,
                   double ei, double ej, double hi) {
  double cuts[2];
  int ncuts = 0;
  if (-bi > 0.0 && -bi < hi) cuts[ncuts++] = -bi;  // beta_i + tau crosses 0
  if (bj > 0.0 && bj < hi) cuts[ncuts++] = bj;     // beta_j - tau crosses 0
  if (ncuts == 2 && cuts[0] > cuts[1]) std::swap(cuts[0], cuts[1]);

  double lo = 0.0;
  for (int seg = 0; seg <= ncuts; ++seg) {
    double up = seg < ncuts ? cuts[seg] : hi;
    double mid = 0.5 * (lo + up);
    double si = (bi + mid >= 0.0) ? 1.0 : -1.0;
    double sj = (bj - mid >= 0.0) ? 1.0 : -1.0;
    double c = gi - gj + si * ei - sj * ej;
    if (a * lo + c >= 0.0) return lo;        // derivative already nonnegative
    if (a * up + c <= 0.0) {                 // still descending at segment end
      lo = up;
      continue;
    }
    return std::clamp(-c / a, lo, up);       // interior zero of phi'
  }
  return hi;
}

}  // namespace

void QpProblem::check() const {
  std::size_t n = size();
  if (!Q || Q->rows() != static_cast<Eigen::Index>(n) ||
      Q->cols() != static_cast<Eigen::Index>(n))
    throw DataError("QpProblem: Q size mismatch");
  if (targets.size() != static_cast<Eigen::Index>(n) ||
      eps.size() != static_cast<Eigen::Index>(n) ||
      box.size() != static_cast<Eigen::Index>(n))
    throw DataError("QpProblem: vector size mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    if (task_of[i] != 1 && task_of[i] != 2)
      throw DataError("QpProblem: task ids must be 1 or 2");
    if (!(eps[i] >= 0.0)) throw DataError("QpProblem: eps must be >= 0");
    if (!(box[i] > 0.0)) throw DataError("QpProblem: box must be > 0");
  }
}

DualSolution solve_beta_qp(const QpProblem& p, double tol, long max_iter,
                           const Eigen::VectorXd* warm_start) {
  p.check();
  if (!(tol > 0.0)) throw DataError("solve_beta_qp: tol must be positive");
  std::size_t n = p.size();
  const Eigen::MatrixXd& Q = *p.Q;

  DualSolution sol;
  sol.beta = Eigen::VectorXd::Zero(n);
  if (warm_start && warm_start->size() == static_cast<Eigen::Index>(n)) {
    sol.beta = *warm_start;
    for (std::size_t i = 0; i < n; ++i)
      sol.beta[i] = std::clamp(sol.beta[i], -p.box[i], p.box[i]);
  }

  Eigen::VectorXd g = -p.targets;
  if ((sol.beta.array() != 0.0).any()) g += Q * sol.beta;

  const double psd_floor = -1e-9 * (1.0 + Q.diagonal().cwiseAbs().maxCoeff());

  bool converged = false;
  int turn = 0;  // alternates the task tried first
  while (sol.iterations < max_iter) {
    int first = (turn & 1) ? 2 : 1;
    ++turn;
    Pair pr = find_pair(p, sol.beta, g, first);
    if (pr.violation <= tol) {
      Pair other = find_pair(p, sol.beta, g, first == 1 ? 2 : 1);
      if (other.violation <= tol) {
        converged = true;
        break;
      }
      pr = other;
    }

    int i = pr.i, j = pr.j;
    double a = Q(i, i) - 2.0 * Q(i, j) + Q(j, j);
    if (a < psd_floor)
      throw NumericalError("solve_beta_qp: quadratic form is not PSD");
    if (a < 0.0) a = 0.0;

    double hi = std::min(p.box[i] - sol.beta[i], sol.beta[j] + p.box[j]);
    double tau = line_search(a, g[i], g[j], sol.beta[i], sol.beta[j], p.eps[i],
                             p.eps[j], hi);

    double old_i = sol.beta[i], old_j = sol.beta[j];
    sol.beta[i] = std::clamp(old_i + tau, -p.box[i], p.box[i]);
    sol.beta[j] = std::clamp(old_j - tau, -p.box[j], p.box[j]);
    // Gradient follows the moves actually applied, not the nominal tau.
    g += (sol.beta[i] - old_i) * Q.col(i) + (sol.beta[j] - old_j) * Q.col(j);
    ++sol.iterations;
  }

  sol.converged = converged;
  sol.objective = dual_objective(p, sol.beta);
  sol.kkt_residual = kkt_residual(p, sol);
  return sol;
}

double dual_objective(const QpProblem& p, const Eigen::VectorXd& beta) {
  p.check();
  if (beta.size() != static_cast<Eigen::Index>(p.size()))
    throw DataError("dual_objective: beta size mismatch");
  for (std::size_t i = 0; i < p.size(); ++i)
    if (std::abs(beta[i]) > p.box[i] + 1e-9 * std::max(1.0, p.box[i]))
      throw DataError("dual_objective: beta outside the box");
  double quad = 0.5 * beta.dot(*p.Q * beta);
  double lin = p.targets.dot(beta);
  double l1 = p.eps.dot(beta.cwiseAbs());
  return quad - lin + l1;
}

namespace {

struct Interval {
  double lo, hi;
};

// Admissible multiplier range for one bag, from the stationarity and
// complementarity conditions at its beta position.
Interval multiplier_interval(double beta, double c, double eps, double g) {
  if (detail::beta_at_upper(beta, c)) return {-kInf, -g - eps};
  if (detail::beta_at_lower(beta, c)) return {-g + eps, kInf};
  if (detail::beta_is_zero(beta, c)) return {-g - eps, -g + eps};
  if (beta > 0.0) return {-g - eps, -g - eps};
  return {-g + eps, -g + eps};
}

double interval_distance(double mu, const Interval& iv) {
  if (mu < iv.lo) return iv.lo - mu;
  if (mu > iv.hi) return mu - iv.hi;
  return 0.0;
}

// Least-squares fit of a scalar to a set of intervals; the derivative of
// the squared distance sum is monotone, so bisection is exact enough.
double fit_multiplier(const std::vector<Interval>& ivs) {
  double lo = kInf, hi = -kInf;
  for (const Interval& iv : ivs) {
    if (iv.lo > -kInf) {
      lo = std::min(lo, iv.lo);
      hi = std::max(hi, iv.lo);
    }
    if (iv.hi < kInf) {
      lo = std::min(lo, iv.hi);
      hi = std::max(hi, iv.hi);
    }
  }
  if (lo > hi) return 0.0;
  lo -= 1.0;
  hi += 1.0;
  auto deriv = [&ivs](double mu) {
    double d = 0.0;
    for (const Interval& iv : ivs) {
      if (mu > iv.hi)
        d += mu - iv.hi;
      else if (mu < iv.lo)
        d -= iv.lo - mu;
    }
    return d;
  };
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (deriv(mid) > 0.0)
      hi = mid;
    else
      lo = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double kkt_residual(const QpProblem& p, const DualSolution& s) {
  p.check();
  Eigen::VectorXd g = *p.Q * s.beta - p.targets;
  double worst = 0.0;
  for (int task : {1, 2}) {
    std::vector<Interval> ivs;
    for (std::size_t i = 0; i < p.size(); ++i)
      if (p.task_of[i] == task)
        ivs.push_back(
            multiplier_interval(s.beta[i], p.box[i], p.eps[i], g[i]));
    if (ivs.empty()) continue;
    double mu = fit_multiplier(ivs);
    for (const Interval& iv : ivs)
      worst = std::max(worst, interval_distance(mu, iv));
  }
  return worst;
}

}  // namespace llpx
