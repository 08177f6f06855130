// Copyright 2026 The qtomo Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "qtomo/errors.hpp"

namespace qtomo {

struct EstimationConfig {
  double epsilon0 = 0.1;     // initial step size; see kMaxStepGrowth
  double lambda = 1e-8;      // entropy multiplier reached at the end (MLME)
  double lambda_start = 1.0; // MLME anneals lambda from here down to `lambda`
  double lambda_decay = 0.1; // ratio between consecutive lambda stages
  int max_iters = 20000;     // step attempts, all stages together
  double grad_tol = 1e-10;   // extremal-equation defect for convergence
  double step_shrink = 0.5;
  double log_floor = 1e-12;  // relative to the largest eigenvalue

  void validate() const {
    if (!(epsilon0 > 0.0)) throw InvariantViolation("config: epsilon0 must be > 0");
    if (!(lambda >= 0.0)) throw InvariantViolation("config: lambda must be >= 0");
    if (!(lambda_start >= 0.0)) throw InvariantViolation("config: lambda_start must be >= 0");
    if (!(lambda_decay > 0.0 && lambda_decay < 1.0)) {
      throw InvariantViolation("config: lambda_decay must lie in (0, 1)");
    }
    if (max_iters < 1) throw InvariantViolation("config: max_iters must be >= 1");
    if (!(grad_tol > 0.0)) throw InvariantViolation("config: grad_tol must be > 0");
    if (!(step_shrink > 0.0 && step_shrink < 1.0)) {
      throw InvariantViolation("config: step_shrink must lie in (0, 1)");
    }
    if (!(log_floor > 0.0)) throw InvariantViolation("config: log_floor must be > 0");
  }

  // Multipliers used stage by stage. A single stage when lambda_start does
  // not exceed lambda (or lambda is 0, i.e. plain likelihood ascent).
  std::vector<double> lambda_schedule() const {
    std::vector<double> s;
    if (lambda > 0.0 && lambda_start > lambda) {
      for (double l = lambda_start; l > lambda * (1.0 + 1e-9); l *= lambda_decay) s.push_back(l);
    }
    s.push_back(lambda);
    return s;
  }
};

inline constexpr int kStepGrowthStreak = 5;
inline constexpr double kStepGrowth = 1.2;
// The step may grow past epsilon0 up to this factor; every step still has to
// pass the ascent test, and processes with small Choi eigenvalues converge
// too slowly with the step pinned at epsilon0.
inline constexpr double kMaxStepGrowth = 100.0;
// The multiplicative update cannot raise the rank of its starting point, so a
// rank-deficient start is mixed with this weight of the maximally mixed point.
inline constexpr double kStartMix = 1e-6;
inline constexpr double kStartEigenFloor = 1e-12;
// Intermediate annealing stages stop once the defect is this small relative
// to their multiplier; the final stage always uses grad_tol.
inline constexpr double kStageDefectRatio = 1e-5;

struct IterationEvent {
  int stage = 0;
  double lambda = 0.0;
  int iteration = 0;
  double log_likelihood = 0.0;
  double defect = 0.0;
  double epsilon = 0.0;
};

using IterationObserver = std::function<void(const IterationEvent&)>;

template <class Point>
struct AscentResult {
  Point point;
  int iterations = 0;  // accepted steps
  int attempts = 0;    // accepted + rejected
  bool converged = false;
  double residual = 0.0;
  int regularizations = 0;
  std::vector<double> likelihood_trace{};
  std::vector<double> objective_trace{};
};

// Constrained steepest ascent shared by every estimator.
//
// A Problem supplies
//   Eval evaluate(const Point&, double lambda) const;
//     Eval has log_likelihood, entropy, defect and boundary (a probability
//     with nonzero count fell below the floor).
//   std::optional<Step> propose(const Point&, const Eval&, double eps, double lambda) const;
//     Step has next, d_log_likelihood, d_entropy, computed from the
//     increment rather than as differences of absolute values so that the
//     acceptance test stays meaningful close to convergence.
//   Point regularize(const Point&) const;  // mix towards the maximally mixed point
//   double total_counts() const;
//
// The objective is log L / N + lambda S. A step is accepted when neither the
// objective nor the likelihood decreases; otherwise the step size shrinks and
// the step is retried.
template <class Problem, class Point>
AscentResult<Point> run_ascent(const Problem& problem, Point start, const EstimationConfig& config,
                               const IterationObserver& observer = {}) {
  config.validate();
  const double n_scale = problem.total_counts();
  const std::vector<double> stages = config.lambda_schedule();

  AscentResult<Point> out{std::move(start)};
  auto eval = problem.evaluate(out.point, stages.front());
  auto objective = [&](const auto& e, double lambda) {
    return e.log_likelihood / n_scale + lambda * e.entropy;
  };
  out.likelihood_trace.push_back(eval.log_likelihood);
  out.objective_trace.push_back(objective(eval, stages.front()));

  const int stage_budget =
      stages.size() > 1 ? std::max(1, config.max_iters / (2 * int(stages.size() - 1))) : 0;
  for (std::size_t si = 0; si < stages.size(); ++si) {
    const double lambda = stages[si];
    const bool last = si + 1 == stages.size();
    const double tol = last ? config.grad_tol : std::max(config.grad_tol, kStageDefectRatio * lambda);
    const int budget = last ? config.max_iters - out.attempts : stage_budget;
    if (si > 0) eval = problem.evaluate(out.point, lambda);

    double eps = config.epsilon0;
    int streak = 0;
    int used = 0;
    bool stage_done = false;
    while (used < budget) {
      if (eval.boundary) {
        out.point = problem.regularize(out.point);
        ++out.regularizations;
        eval = problem.evaluate(out.point, lambda);
        if (eval.boundary) throw NumericalError("estimation: regularization did not lift the boundary");
      }
      if (eval.defect <= tol) {
        stage_done = true;
        break;
      }
      ++used;
      ++out.attempts;
      auto step = problem.propose(out.point, eval, eps, lambda);
      // The likelihood itself must not drop either: with lambda > 0 a step
      // may otherwise buy entropy with likelihood.
      const bool accept = step && step->d_log_likelihood >= 0.0 &&
                          step->d_log_likelihood / n_scale + lambda * step->d_entropy >= 0.0;
      if (accept) {
        out.point = std::move(step->next);
        eval = problem.evaluate(out.point, lambda);
        ++out.iterations;
        out.likelihood_trace.push_back(eval.log_likelihood);
        out.objective_trace.push_back(objective(eval, lambda));
        if (++streak >= kStepGrowthStreak) {
          eps = std::min(eps * kStepGrowth, kMaxStepGrowth * config.epsilon0);
          streak = 0;
        }
        if (observer) {
          observer({int(si), lambda, out.iterations, eval.log_likelihood, eval.defect, eps});
        }
      } else {
        streak = 0;
        eps *= config.step_shrink;
        // The objective can no longer resolve a step: nothing left to gain.
        if (eps < config.epsilon0 * 1e-14) break;
      }
    }
    out.residual = eval.defect;
    if (last) out.converged = stage_done || eval.defect <= tol;
  }
  return out;
}

}  // namespace qtomo
