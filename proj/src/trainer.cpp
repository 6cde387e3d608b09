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

#include "llpx/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

#include "llpx/errors.hpp"

namespace llpx {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

void HyperParams::validate() const {
  if (!(C1 > 0.0) || !(C2 > 0.0))
    throw DataError("HyperParams: C1, C2 must be positive");
  if (!(lambda1 > 0.0) || !(lambda2 > 0.0))
    throw DataError("HyperParams: lambda1, lambda2 must be positive");
  if (!(eps >= 0.0)) throw DataError("HyperParams: eps must be >= 0");
  if (!(delta >= 0.0)) throw DataError("HyperParams: delta must be >= 0");
  for (double d : delta_source)
    if (!(d >= 0.0)) throw DataError("HyperParams: delta_source entries must be >= 0");
  for (double d : delta_target)
    if (!(d >= 0.0)) throw DataError("HyperParams: delta_target entries must be >= 0");
  if (!(stop_epsilon > 0.0))
    throw DataError("HyperParams: stop_epsilon must be positive");
  if (max_rounds < 1) throw DataError("HyperParams: max_rounds must be >= 1");
  if (!(qp_tol > 0.0)) throw DataError("HyperParams: qp_tol must be positive");
  if (qp_max_iter < 1) throw DataError("HyperParams: qp_max_iter must be >= 1");
  if (!(scaling.clip_epsilon > 0.0 && scaling.clip_epsilon < 0.5))
    throw DataError("HyperParams: clip_epsilon outside (0, 0.5)");
  kernel.validate();
}

namespace {

QpProblem make_qp(const BagGram& gram, const TaskDataset& source,
                  const TaskDataset& target, const HyperParams& hp) {
  QpProblem p;
  std::size_t n = gram.size();
  p.Q = &gram.matrix;
  p.targets.resize(n);
  p.eps = Eigen::VectorXd::Constant(n, hp.eps);
  p.box.resize(n);
  p.task_of.resize(n);
  for (std::size_t f = 0; f < n; ++f) {
    int t = gram.task_of(f);
    const Bag& bag =
        t == 1 ? source.bags[gram.bag_of(f)] : target.bags[gram.bag_of(f)];
    p.targets[f] = bag.target;
    p.box[f] = t == 1 ? hp.C1 : hp.C2;
    p.task_of[f] = t;
  }
  return p;
}

bool perturbations_equal(const PerturbationSet& a, const PerturbationSet& b) {
  auto eq = [](const TaskPerturbations& x, const TaskPerturbations& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i].size() != y[i].size() || (x[i].array() != y[i].array()).any())
        return false;
    return true;
  };
  return eq(a.source, b.source) && eq(a.target, b.target);
}

Eigen::VectorXd delta_norms(const TaskPerturbations& p) {
  Eigen::VectorXd out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i].norm();
  return out;
}

ObjectiveBreakdown primal_from_gram(const BagGram& gram,
                                    const Eigen::VectorXd& beta,
                                    const Eigen::VectorXd& targets, double b1,
                                    double b2, double eps, double c1,
                                    double c2) {
  ObjectiveBreakdown out;
  // 1/2|w0|^2 + lambda1/2|v1|^2 + lambda2/2|v2|^2 folds into the scaled
  // quadratic form; the block coefficients carry the 1/lambda terms.
  out.regularizer = 0.5 * beta.dot(gram.matrix * beta);
  Eigen::VectorXd fv = gram.matrix * beta;
  for (std::size_t f = 0; f < gram.size(); ++f) {
    double fbar = fv[f] + (gram.task_of(f) == 1 ? b1 : b2);
    double r = fbar - targets[f];
    double slack = std::max(0.0, r - eps) + std::max(0.0, -r - eps);
    if (gram.task_of(f) == 1)
      out.slack_source += c1 * slack;
    else
      out.slack_target += c2 * slack;
  }
  out.total = out.regularizer + out.slack_source + out.slack_target;
  return out;
}

}  // namespace

std::pair<double, double> recover_biases(const QpProblem& p,
                                         const Eigen::VectorXd& beta) {
  p.check();
  if (beta.size() != static_cast<Eigen::Index>(p.size()))
    throw DataError("recover_biases: beta size mismatch");
  Eigen::VectorXd gv = *p.Q * beta;

  double out[2] = {0.0, 0.0};
  for (int task : {1, 2}) {
    double sum = 0.0;
    int nfree = 0;
    bool any = false;
    double lo = -kInf, hi = kInf;
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p.task_of[i] != task) continue;
      any = true;
      double b = beta[i], c = p.box[i], e = p.eps[i];
      double y = p.targets[i], g = gv[i];
      bool zero = detail::beta_is_zero(b, c);
      bool up = detail::beta_at_upper(b, c);
      bool dn = detail::beta_at_lower(b, c);
      if (!zero && !up && !dn) {
        sum += b > 0.0 ? y - e - g : y + e - g;
        ++nfree;
      } else if (zero) {
        lo = std::max(lo, y - e - g);
        hi = std::min(hi, y + e - g);
      } else if (up) {
        hi = std::min(hi, y - e - g);
      } else {
        lo = std::max(lo, y + e - g);
      }
    }
    if (!any) continue;  // no bags in this task, bias stays 0
    if (nfree > 0) {
      out[task - 1] = sum / nfree;
      continue;
    }
    if (lo > hi + 1e-6 * (1.0 + std::abs(lo) + std::abs(hi)))
      std::cerr << "llpx: recover_biases: empty feasible bias interval for task "
                << task << " (lo=" << lo << ", hi=" << hi << "), using midpoint\n";
    if (lo == -kInf && hi == kInf)
      out[task - 1] = 0.0;
    else if (lo == -kInf)
      out[task - 1] = hi;
    else if (hi == kInf)
      out[task - 1] = lo;
    else
      out[task - 1] = 0.5 * (lo + hi);
  }
  return {out[0], out[1]};
}

Weights expand_weights_linear(const Eigen::VectorXd& beta,
                              const TaskDataset& source,
                              const TaskDataset& target,
                              const PerturbationSet& perturb,
                              const KernelSpec& kernel, double lambda1,
                              double lambda2) {
  if (kernel.family != KernelFamily::linear)
    throw DataError("expand_weights_linear: linear kernel required");
  if (!(lambda1 > 0.0) || !(lambda2 > 0.0))
    throw DataError("expand_weights_linear: lambdas must be positive");
  std::size_t t1 = source.bags.size(), t2 = target.bags.size();
  if (beta.size() != static_cast<Eigen::Index>(t1 + t2))
    throw DataError("expand_weights_linear: beta size mismatch");

  Eigen::Index dims = std::max(source.dimension, target.dimension);
  Weights w{Eigen::VectorXd::Zero(dims), Eigen::VectorXd::Zero(dims),
            Eigen::VectorXd::Zero(dims)};
  for (std::size_t i = 0; i < t1; ++i) {
    Eigen::VectorXd m = bag_mean(source, i, &perturb.source);
    w.w0 += beta[i] * m;
    w.v1 += beta[i] / lambda1 * m;
  }
  for (std::size_t j = 0; j < t2; ++j) {
    Eigen::VectorXd m = bag_mean(target, j, &perturb.target);
    w.w0 += beta[t1 + j] * m;
    w.v2 += beta[t1 + j] / lambda2 * m;
  }
  return w;
}

Eigen::VectorXd transfer_direction(int task_id, const Eigen::VectorXd& x,
                                   const TaskDataset& source,
                                   const TaskDataset& target,
                                   const PerturbationSet& perturb,
                                   const Eigen::VectorXd& beta,
                                   const KernelSpec& kernel, double lambda1,
                                   double lambda2) {
  double c_src = task_id == 1 ? (1.0 + lambda1) / lambda1 : 1.0;
  double c_tgt = task_id == 2 ? (1.0 + lambda2) / lambda2 : 1.0;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(x.size());
  auto add_task = [&](const TaskDataset& task, const TaskPerturbations& pt,
                      std::size_t beta_offset, double coeff) {
    for (std::size_t b = 0; b < task.bags.size(); ++b) {
      const Bag& bag = task.bags[b];
      double scale = coeff * beta[beta_offset + b] /
                     static_cast<double>(bag.members.size());
      if (scale == 0.0) continue;
      for (std::size_t id : bag.members) {
        Eigen::VectorXd point = task.instances[id].features;
        if (id < pt.size() && pt[id].size() == point.size()) point += pt[id];
        u += scale * kernel_grad(kernel, point, x);
      }
    }
  };
  add_task(source, perturb.source, 0, c_src);
  add_task(target, perturb.target, source.bags.size(), c_tgt);
  return u;
}

PerturbationSet update_perturbations(const TaskDataset& source,
                                     const TaskDataset& target,
                                     const BagGram& gram,
                                     const Eigen::VectorXd& beta, double b1,
                                     double b2, const PerturbationSet& current,
                                     const HyperParams& hp) {
  PerturbationSet out = PerturbationSet::zeros(source, target);

  bool linear = hp.kernel.family == KernelFamily::linear;
  Eigen::VectorXd w1, w2;
  double n1 = 0.0, n2 = 0.0;
  if (linear) {
    Weights w = expand_weights_linear(beta, source, target, current, hp.kernel,
                                      hp.lambda1, hp.lambda2);
    w1 = w.w0 + w.v1;
    w2 = w.w0 + w.v2;
    n1 = w1.norm();
    n2 = w2.norm();
  }

  // Bias-free decision value of the current expansion at a raw point.
  auto expansion_at = [&](int task_id, const Eigen::VectorXd& x) {
    if (linear) return task_id == 1 ? w1.dot(x) : w2.dot(x);
    double acc = 0.0;
    auto add_task = [&](const TaskDataset& task, const TaskPerturbations& pt,
                        std::size_t off, double coeff) {
      for (std::size_t b = 0; b < task.bags.size(); ++b) {
        double scale = coeff * beta[off + b] /
                       static_cast<double>(task.bags[b].members.size());
        if (scale == 0.0) continue;
        for (std::size_t id : task.bags[b].members) {
          Eigen::VectorXd point = task.instances[id].features;
          if (id < pt.size() && pt[id].size() == point.size()) point += pt[id];
          acc += scale * eval_kernel(hp.kernel, point, x);
        }
      }
    };
    add_task(source, current.source, 0, gram.coeff(task_id, 1));
    add_task(target, current.target, source.bags.size(), gram.coeff(task_id, 2));
    return acc;
  };

  for (std::size_t f = 0; f < gram.size(); ++f) {
    int t = gram.task_of(f);
    const TaskDataset& task = t == 1 ? source : target;
    const Bag& bag = task.bags[gram.bag_of(f)];
    // Case selection at the unperturbed members: the reachability ball is
    // centered on the observed data, so the residual that decides the
    // case must not move with the previous round's estimate. This also
    // makes the update the exact minimizer of the slack block.
    double fbar;
    if (linear) {
      fbar = expansion_at(t, bag_mean(task, gram.bag_of(f)));
    } else {
      fbar = 0.0;
      for (std::size_t id : bag.members)
        fbar += expansion_at(t, task.instances[id].features);
      fbar /= static_cast<double>(bag.members.size());
    }
    double r = fbar + (t == 1 ? b1 : b2) - bag.target;
    double side;
    if (r > hp.eps)
      side = -1.0;
    else if (-r > hp.eps)
      side = 1.0;
    else
      continue;  // inside the tube: perturbation stays zero

    for (std::size_t id : bag.members) {
      Eigen::VectorXd u;
      double nrm;
      if (linear) {
        u = t == 1 ? w1 : w2;
        nrm = t == 1 ? n1 : n2;
      } else {
        Eigen::VectorXd point = task.instances[id].features;
        const TaskPerturbations& cur = current.task(t);
        if (id < cur.size() && cur[id].size() == point.size()) point += cur[id];
        u = transfer_direction(t, point, source, target, current, beta,
                               hp.kernel, hp.lambda1, hp.lambda2);
        nrm = u.norm();
      }
      if (!(nrm > 0.0) || !std::isfinite(nrm)) continue;  // degenerate direction
      out.task(t)[id] = (side * hp.delta_for(t, id) / nrm) * u;
    }
  }
  return out;
}

double decision_value(const TrainedModel& model, const Eigen::VectorXd& x,
                      int task_id) {
  if (task_id != 1 && task_id != 2)
    throw DataError("decision_value: task must be 1 or 2");
  if (x.size() != model.dimension)
    throw DataError("decision_value: dimension mismatch");
  if (model.hp.kernel.family == KernelFamily::linear && model.linear_weights) {
    const Weights& w = *model.linear_weights;
    double b = task_id == 1 ? model.b1 : model.b2;
    if (task_id == 1) return (w.w0 + w.v1).dot(x) + b;
    return (w.w0 + w.v2).dot(x) + b;
  }
  return detail::decision_value_expansion(model, x, task_id);
}

namespace detail {

double decision_value_expansion(const TrainedModel& model,
                                const Eigen::VectorXd& x, int task_id) {
  if (x.size() != model.dimension)
    throw DataError("decision_value: dimension mismatch");
  double c11 = (1.0 + model.hp.lambda1) / model.hp.lambda1;
  double c22 = (1.0 + model.hp.lambda2) / model.hp.lambda2;
  double acc = 0.0;
  bool linear = model.hp.kernel.family == KernelFamily::linear;
  for (std::size_t f = 0; f < model.bag_task.size(); ++f) {
    int bt = model.bag_task[f];
    double coeff = bt == task_id ? (bt == 1 ? c11 : c22) : 1.0;
    double kbar;
    if (linear) {
      kbar = model.bag_means[f].dot(x);
    } else {
      const Eigen::MatrixXd& pts = model.bag_points[f];
      double sum = 0.0;
      for (Eigen::Index c = 0; c < pts.cols(); ++c)
        sum += eval_kernel(model.hp.kernel, pts.col(c), x);
      kbar = sum / static_cast<double>(pts.cols());
    }
    acc += coeff * model.dual.beta[f] * kbar;
  }
  return acc + (task_id == 1 ? model.b1 : model.b2);
}

}  // namespace detail

int predict(const TrainedModel& model, const Eigen::VectorXd& x) {
  return decision_value(model, x, 2) > 0.0 ? 1 : -1;
}

ObjectiveBreakdown primal_objective(const TrainedModel& model) {
  const HyperParams& hp = model.hp;
  ObjectiveBreakdown out;
  if (hp.kernel.family == KernelFamily::linear && model.linear_weights) {
    const Weights& w = *model.linear_weights;
    out.regularizer = 0.5 * w.w0.squaredNorm() +
                      0.5 * hp.lambda1 * w.v1.squaredNorm() +
                      0.5 * hp.lambda2 * w.v2.squaredNorm();
    for (std::size_t f = 0; f < model.bag_task.size(); ++f) {
      int t = model.bag_task[f];
      Eigen::VectorXd wt = t == 1 ? w.w0 + w.v1 : w.w0 + w.v2;
      double fbar =
          wt.dot(model.bag_means[f]) + (t == 1 ? model.b1 : model.b2);
      double r = fbar - model.bag_targets[f];
      double slack = std::max(0.0, r - hp.eps) + std::max(0.0, -r - hp.eps);
      if (t == 1)
        out.slack_source += hp.C1 * slack;
      else
        out.slack_target += hp.C2 * slack;
    }
    out.total = out.regularizer + out.slack_source + out.slack_target;
    return out;
  }

  if (!model.source || !model.target)
    throw DataError("primal_objective: model carries no datasets");
  BagGram gram =
      assemble_bag_gram(*model.source, *model.target, model.perturbations,
                        hp.kernel, hp.lambda1, hp.lambda2);
  return primal_from_gram(gram, model.dual.beta, model.bag_targets, model.b1,
                          model.b2, hp.eps, hp.C1, hp.C2);
}

TrainedModel fit(std::shared_ptr<const TaskDataset> source,
                 std::shared_ptr<const TaskDataset> target,
                 const HyperParams& hp, FitTrace* trace) {
  if (!source || !target) throw DataError("fit: null dataset");
  hp.validate();
  source->validate();
  target->validate();
  if (target->bags.empty())
    throw DataError("fit: target task needs at least one bag");
  if (!source->instances.empty() && source->dimension != target->dimension)
    throw DataError("fit: source and target dimensions differ");

  PerturbationSet pert = PerturbationSet::zeros(*source, *target);
  DualSolution dual;
  BagGram gram;
  QpProblem qp;
  double b1 = 0.0, b2 = 0.0;
  double f_prev = kInf;
  bool converged = false;
  int rounds = 0;

  for (int r = 1; r <= hp.max_rounds; ++r) {
    rounds = r;
    gram = assemble_bag_gram(*source, *target, pert, hp.kernel, hp.lambda1,
                             hp.lambda2);
    qp = make_qp(gram, *source, *target, hp);
    Eigen::VectorXd warm = dual.beta;
    dual = solve_beta_qp(qp, hp.qp_tol, hp.qp_max_iter,
                         r > 1 ? &warm : nullptr);
    std::tie(b1, b2) = recover_biases(qp, dual.beta);
    double f_cur = dual.objective;

    if (trace) {
      FitRound fr;
      fr.dual_objective = f_cur;
      fr.primal = primal_from_gram(gram, dual.beta, qp.targets, b1, b2, hp.eps,
                                   hp.C1, hp.C2);
      fr.delta_norms_source = delta_norms(pert.source);
      fr.delta_norms_target = delta_norms(pert.target);
      fr.qp_iterations = dual.iterations;
      trace->rounds.push_back(std::move(fr));
    }

    if (r >= 2) {
      double diff = std::abs(f_cur - f_prev);
      if (diff == 0.0 ||
          diff < hp.stop_epsilon * std::max(std::abs(f_cur), std::abs(f_prev))) {
        converged = true;
        break;
      }
    }
    if (r == hp.max_rounds) break;  // keep the perturbations this QP used

    PerturbationSet next = update_perturbations(*source, *target, gram,
                                                dual.beta, b1, b2, pert, hp);
    if (perturbations_equal(next, pert)) {
      // Fixed point: the next QP would be identical, so the objective
      // cannot move again.
      converged = true;
      break;
    }
    pert = std::move(next);
    f_prev = f_cur;
  }

  TrainedModel model;
  model.dual = std::move(dual);
  model.b1 = b1;
  model.b2 = b2;
  model.perturbations = std::move(pert);
  model.hp = hp;
  model.source = source;
  model.target = target;
  model.converged = converged;
  model.rounds = rounds;
  model.dimension = target->dimension;

  std::size_t t1 = source->bags.size(), t2 = target->bags.size();
  model.bag_means.reserve(t1 + t2);
  model.bag_targets.resize(t1 + t2);
  model.bag_task.resize(t1 + t2);
  auto perturbed_points = [&](const TaskDataset& task,
                              const TaskPerturbations& pt, const Bag& bag) {
    Eigen::MatrixXd m(task.dimension, bag.members.size());
    for (std::size_t c = 0; c < bag.members.size(); ++c) {
      std::size_t id = bag.members[c];
      Eigen::VectorXd point = task.instances[id].features;
      if (id < pt.size() && pt[id].size() == point.size()) point += pt[id];
      m.col(c) = point;
    }
    return m;
  };
  bool keep_points = hp.kernel.family != KernelFamily::linear;
  for (std::size_t i = 0; i < t1; ++i) {
    model.bag_means.push_back(bag_mean(*source, i, &model.perturbations.source));
    model.bag_targets[i] = source->bags[i].target;
    model.bag_task[i] = 1;
    if (keep_points)
      model.bag_points.push_back(perturbed_points(
          *source, model.perturbations.source, source->bags[i]));
  }
  for (std::size_t j = 0; j < t2; ++j) {
    model.bag_means.push_back(bag_mean(*target, j, &model.perturbations.target));
    model.bag_targets[t1 + j] = target->bags[j].target;
    model.bag_task[t1 + j] = 2;
    if (keep_points)
      model.bag_points.push_back(perturbed_points(
          *target, model.perturbations.target, target->bags[j]));
  }

  if (hp.kernel.family == KernelFamily::linear)
    model.linear_weights = expand_weights_linear(
        model.dual.beta, *source, *target, model.perturbations, hp.kernel,
        hp.lambda1, hp.lambda2);
  return model;
}

TrainedModel fit(const TaskDataset& source, const TaskDataset& target,
                 const HyperParams& hp, FitTrace* trace) {
  return fit(std::make_shared<TaskDataset>(source),
             std::make_shared<TaskDataset>(target), hp, trace);
}

}  // namespace llpx
