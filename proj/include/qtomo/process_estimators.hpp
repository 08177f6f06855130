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
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qtomo/ascent.hpp"
#include "qtomo/channels.hpp"
#include "qtomo/data_sim.hpp"
#include "qtomo/state_estimators.hpp"

namespace qtomo {

// Eigenvalue floor of the partial-trace renormalizer; steps that would need
// to invert below it are rejected and retried with a smaller step.
inline constexpr double kRenormalizerFloor = 1e-12;

struct ProcessEstimationReport {
  std::string method;
  ChoiOperator estimator;
  double log_likelihood = 0.0;  // extended for imperfect POMs
  double entropy = 0.0;         // process entropy
  int iterations = 0;
  bool converged = false;
  double residual = 0.0;  // ||W E - Lambda E||_F
  std::vector<double> likelihood_trace{};
  std::vector<double> objective_trace{};
  double max_tp_deviation = 0.0;  // max_k ||tr_K{E_k} - 1_H||_F over all iterates
  int regularizations = 0;
  EstimationConfig config{};
};

namespace detail {

class ProcessProblem {
 public:
  struct Eval {
    double log_likelihood = 0.0;
    double entropy = 0.0;
    double defect = 0.0;
    bool boundary = false;
    std::vector<double> p;  // flattened p_lm
    double eta = 1.0;
    ComplexMatrix w;  // effective W operator
  };
  struct Step {
    ComplexMatrix next;
    double d_log_likelihood = 0.0;
    double d_entropy = 0.0;
  };

  ProcessProblem(const ProcessDataset& data, double log_floor)
      : di_(data.dim_in()), dout_(data.dim_out()), extended_(!data.pom.perfect()),
        log_floor_(log_floor) {
    data.validate();
    const double inv_l = 1.0 / double(data.inputs.size());
    const Eigen::Index d = di_ * dout_;
    detection_ = ComplexMatrix::Zero(d, d);
    for (std::size_t l = 0; l < data.inputs.size(); ++l) {
      const ComplexMatrix rt = data.inputs[l].matrix().transpose();
      detection_ += inv_l * kron(rt, data.pom.sum());
      for (std::size_t m = 0; m < data.pom.size(); ++m) {
        ops_.push_back(inv_l * kron(rt, data.pom.outcome(m)));
        n_.push_back(double(data.counts[l][m]));
        total_ += n_.back();
      }
    }
    if (!(total_ > 0.0)) throw InvariantViolation("process estimation needs at least one count");
  }

  double total_counts() const { return total_; }
  Eigen::Index dim_in() const { return di_; }
  Eigen::Index dim_out() const { return dout_; }

  Eval evaluate(const ComplexMatrix& e, double lambda) const {
    Eval ev;
    const Eigen::Index d = di_ * dout_;
    ev.p.resize(ops_.size());
    for (std::size_t j = 0; j < ops_.size(); ++j) ev.p[j] = trace_inner(e, ops_[j]);
    if (extended_) ev.eta = trace_inner(e, detection_);
    ev.w = extended_ ? ComplexMatrix(-detection_ / ev.eta) : ComplexMatrix::Zero(d, d);
    for (std::size_t j = 0; j < ops_.size(); ++j) {
      if (n_[j] == 0.0) continue;
      if (ev.p[j] <= kProbabilityFloor) {
        ev.boundary = true;
        return ev;
      }
      ev.log_likelihood += n_[j] * std::log(ev.p[j]);
      ev.w += (n_[j] / total_ / ev.p[j]) * ops_[j];
    }
    if (extended_) ev.log_likelihood -= total_ * std::log(ev.eta);
    const Spectrum s = eigh(e);
    const RealVector q = s.values / double(di_);
    ev.entropy = entropy_of_spectrum(q);
    if (lambda > 0.0) {
      const double floor = log_floor_ * std::max(q(q.size() - 1), 0.0);
      RealVector shifted(q.size());
      for (Eigen::Index i = 0; i < q.size(); ++i) shifted(i) = 1.0 + std::log(std::max(q(i), floor));
      ev.w -= (lambda / double(di_)) * from_spectrum(shifted, s.vectors);
    }
    ev.w = hermitize(ev.w);
    const ComplexMatrix we = ev.w * e;
    const ComplexMatrix lagrange =
        kron(matrix_sqrt_psd(partial_trace(hermitize(we * ev.w), di_, dout_, Subsystem::K)),
             identity(dout_));
    ev.defect = (we - lagrange * e).norm();
    return ev;
  }

  // E' = (S^{-1/2} (x) 1)(1 + dA) E (1 + dA)(S^{-1/2} (x) 1), S = tr_K{(1 + dA) E (1 + dA)},
  // dA = (eps/2)(W - tr_K{WE + EW}/2 (x) 1). Expanded so the increment is
  // formed from small quantities only.
  std::optional<Step> propose(const ComplexMatrix& e, const Eval& ev, double eps,
                              double lambda) const {
    const ComplexMatrix we = ev.w * e;
    const ComplexMatrix centre =
        kron(partial_trace(hermitize(we + we.adjoint()), di_, dout_, Subsystem::K) * 0.5,
             identity(dout_));
    const ComplexMatrix da = (0.5 * eps) * (ev.w - centre);
    const ComplexMatrix y1 = sandwich_increment(da, e);
    // S - 1 taking tr_K{E} = 1 as exact. Folding round-off drift of tr_K{E}
    // in here would change the likelihood by O(N * 1e-16) per step with a
    // random sign, which near convergence swamps the true increase and stalls
    // the step-size control; the drift itself stays at round-off level.
    const ComplexMatrix s_minus_one = hermitize(partial_trace(y1, di_, dout_, Subsystem::K));
    Spectrum sp = eigh(s_minus_one);
    for (Eigen::Index i = 0; i < sp.values.size(); ++i) {
      if (!(1.0 + sp.values(i) > kRenormalizerFloor)) return std::nullopt;
      sp.values(i) = std::expm1(-0.5 * std::log1p(sp.values(i)));
    }
    const ComplexMatrix z = kron(from_spectrum(sp.values, sp.vectors), identity(dout_));
    const ComplexMatrix m = e + y1;
    const ComplexMatrix zm = z * m;
    const ComplexMatrix delta = hermitize(y1 + zm + zm.adjoint() + zm * z);

    Step st;
    std::vector<double> ratio(ops_.size(), 0.0);
    for (std::size_t j = 0; j < ops_.size(); ++j) {
      if (n_[j] == 0.0) continue;
      ratio[j] = trace_inner(delta, ops_[j]) / ev.p[j];
      if (!(ratio[j] > -1.0)) return std::nullopt;
    }
    st.d_log_likelihood = log1p_sum(n_, ratio);
    if (extended_) st.d_log_likelihood -= total_ * std::log1p(trace_inner(delta, detection_) / ev.eta);
    st.next = hermitize(e + delta);
    if (lambda > 0.0) {
      st.d_entropy = entropy_of_spectrum(eigh(st.next).values / double(di_)) - ev.entropy;
    }
    return st;
  }

  ComplexMatrix regularize(const ComplexMatrix& e) const {
    return (1.0 - kBoundaryMix) * e + kBoundaryMix * identity(di_ * dout_) / double(dout_);
  }

  double tp_deviation(const ComplexMatrix& e) const {
    return (partial_trace(e, di_, dout_, Subsystem::K) - identity(di_)).norm();
  }

 private:
  Eigen::Index di_;
  Eigen::Index dout_;
  bool extended_;
  double log_floor_;
  std::vector<ComplexMatrix> ops_;  // rho_l^T (x) Pi_m / L
  std::vector<double> n_;
  double total_ = 0.0;
  ComplexMatrix detection_;  // (1/L) sum_l rho_l^T (x) G
};

inline ProcessEstimationReport run_process_estimation(const std::string& method,
                                                      const ProcessDataset& data,
                                                      const EstimationConfig& config,
                                                      const std::optional<ChoiOperator>& start,
                                                      const IterationObserver& observer) {
  config.validate();
  ProcessProblem problem(data, config.log_floor);
  const Eigen::Index d = problem.dim_in() * problem.dim_out();
  ComplexMatrix e0 = identity(d) / double(problem.dim_out());
  if (start) {
    if (start->dim_in() != problem.dim_in() || start->dim_out() != problem.dim_out()) {
      throw DimensionMismatch("start process dimensions differ from the dataset");
    }
    if (!start->trace_preserving()) throw InvariantViolation("start process is not trace-preserving");
    e0 = start->matrix();
    if (min_eigenvalue(e0) < kStartEigenFloor) {
      e0 = (1.0 - kStartMix) * e0 + kStartMix * identity(d) / double(problem.dim_out());
    }
  }
  double max_dev = problem.tp_deviation(e0);
  // Wrap the observer-free problem so every accepted iterate is checked for
  // trace preservation.
  struct Tracked {
    const ProcessProblem& inner;
    double& max_dev;
    double total_counts() const { return inner.total_counts(); }
    auto evaluate(const ComplexMatrix& e, double lambda) const {
      max_dev = std::max(max_dev, inner.tp_deviation(e));
      return inner.evaluate(e, lambda);
    }
    auto propose(const ComplexMatrix& e, const ProcessProblem::Eval& ev, double eps,
                 double lambda) const {
      return inner.propose(e, ev, eps, lambda);
    }
    ComplexMatrix regularize(const ComplexMatrix& e) const { return inner.regularize(e); }
  } tracked{problem, max_dev};

  auto result = run_ascent(tracked, e0, config, observer);
  const auto final_eval = problem.evaluate(result.point, config.lambda_schedule().back());
  ProcessEstimationReport r{method,
                            ChoiOperator(problem.dim_in(), problem.dim_out(), result.point)};
  r.log_likelihood = final_eval.log_likelihood;
  r.entropy = final_eval.entropy;
  r.iterations = result.iterations;
  r.converged = result.converged;
  r.residual = final_eval.defect;
  r.likelihood_trace = std::move(result.likelihood_trace);
  r.objective_trace = std::move(result.objective_trace);
  r.max_tp_deviation = max_dev;
  r.regularizations = result.regularizations;
  r.config = config;
  return r;
}

}  // namespace detail

// W = (1/L) sum_lm (nu_lm / p_lm) rho_l^T (x) Pi_m with nu_lm = n_lm / sum n.
inline ComplexMatrix w_ml_operator(const ProcessDataset& data, const ChoiOperator& e) {
  data.validate();
  const auto p = process_probabilities(e, data.inputs, data.pom);
  double total = 0.0;
  for (const Counts& row : data.counts)
    for (std::int64_t n : row) total += double(n);
  if (!(total > 0.0)) throw InvariantViolation("w_ml_operator: no counts");
  const double inv_l = 1.0 / double(data.inputs.size());
  const Eigen::Index d = e.dim_in() * e.dim_out();
  ComplexMatrix w = ComplexMatrix::Zero(d, d);
  for (std::size_t l = 0; l < data.inputs.size(); ++l) {
    const ComplexMatrix rt = data.inputs[l].matrix().transpose();
    for (std::size_t m = 0; m < data.pom.size(); ++m) {
      const double n = double(data.counts[l][m]);
      if (n == 0.0) continue;
      if (p[l][m] <= kProbabilityFloor) {
        throw NumericalError("w_ml_operator: outcome with counts has vanishing probability");
      }
      w += (inv_l * n / total / p[l][m]) * kron(rt, data.pom.outcome(m));
    }
  }
  return hermitize(w);
}

// W0 = (1/(L sum_l p'_l)) sum_l rho_l^T (x) G, p'_l = sum_m p_lm. The
// estimators subtract it from W whenever the POM is imperfect.
inline ComplexMatrix qpt_imperfect_correction(const ProcessDataset& data, const ChoiOperator& e) {
  const auto p = process_probabilities(e, data.inputs, data.pom);
  double eta = 0.0;
  for (const auto& row : p)
    for (double x : row) eta += x;
  const double inv_l = 1.0 / double(data.inputs.size());
  const Eigen::Index d = e.dim_in() * e.dim_out();
  ComplexMatrix w0 = ComplexMatrix::Zero(d, d);
  for (const DensityMatrix& rho : data.inputs) w0 += kron(rho.matrix().transpose(), data.pom.sum());
  return w0 * (inv_l / eta);
}

inline ProcessEstimationReport qpt_ml_estimate(const ProcessDataset& data,
                                               const EstimationConfig& config = {},
                                               const std::optional<ChoiOperator>& start = std::nullopt,
                                               const IterationObserver& observer = {}) {
  return detail::run_process_estimation("ml", data, detail::without_entropy(config), start,
                                        observer);
}

// With lambda = 0 this is exactly qpt_ml_estimate.
inline ProcessEstimationReport qpt_mlme_estimate(const ProcessDataset& data,
                                                 const EstimationConfig& config = {},
                                                 const IterationObserver& observer = {}) {
  return detail::run_process_estimation("mlme", data, config, std::nullopt, observer);
}

// Estimates from nested input sets; true once the last two differ by at most
// `threshold` in Hilbert-Schmidt distance.
inline bool sequential_stopping(const std::vector<ProcessEstimationReport>& reports,
                                double threshold) {
  if (reports.size() < 2) throw InvariantViolation("sequential_stopping: need at least two reports");
  const auto& a = reports[reports.size() - 2].estimator;
  const auto& b = reports.back().estimator;
  return hs_process_error(a, b) <= threshold;
}

}  // namespace qtomo
