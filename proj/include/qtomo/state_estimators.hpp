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

#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qtomo/ascent.hpp"
#include "qtomo/data_sim.hpp"
#include "qtomo/pom.hpp"
#include "qtomo/states.hpp"

namespace qtomo {

// Probabilities with nonzero counts below this trigger a one-off mix with the
// maximally mixed state.
inline constexpr double kProbabilityFloor = 1e-14;
inline constexpr double kBoundaryMix = 1e-9;

struct EstimationReport {
  std::string method;
  DensityMatrix estimator;
  double log_likelihood = 0.0;  // extended log-likelihood for imperfect POMs
  double entropy = 0.0;
  int iterations = 0;
  bool converged = false;
  double residual = 0.0;  // Frobenius norm of the extremal-equation defect
  std::vector<double> likelihood_trace{};
  std::vector<double> objective_trace{};
  std::vector<double> probabilities{};  // Born probabilities of the estimator
  std::int64_t n_detected = 0;
  double detection_probability = 1.0;  // eta = sum_j p_j at the estimator
  double n_estimated = 0.0;            // N / eta
  int regularizations = 0;
  EstimationConfig config{};
};

inline void require_counts_match(const Counts& counts, const Pom& pom) {
  if (counts.size() != pom.size()) {
    throw DimensionMismatch("counts have " + std::to_string(counts.size()) +
                            " entries but the POM has " + std::to_string(pom.size()) +
                            " outcomes");
  }
}

// sum_j n_j log p_j; zero counts contribute nothing, impossible data give -inf.
inline double log_likelihood(const Counts& counts, const ComplexMatrix& rho, const Pom& pom) {
  require_counts_match(counts, pom);
  const std::vector<double> p = born_probabilities(rho, pom);
  double l = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (counts[j] == 0) continue;
    if (p[j] <= 0.0) return -std::numeric_limits<double>::infinity();
    l += double(counts[j]) * std::log(p[j]);
  }
  return l;
}

inline double log_likelihood(const CountsRecord& c, const DensityMatrix& rho, const Pom& pom) {
  return log_likelihood(c.counts, rho.matrix(), pom);
}

// sum_j n_j log(p_j / eta), eta = sum_j p_j.
inline double extended_log_likelihood(const Counts& counts, const ComplexMatrix& rho,
                                      const Pom& pom) {
  require_counts_match(counts, pom);
  const std::vector<double> p = born_probabilities(rho, pom);
  double eta = 0.0;
  for (double x : p) eta += x;
  double l = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (counts[j] == 0) continue;
    if (p[j] <= 0.0) return -std::numeric_limits<double>::infinity();
    l += double(counts[j]) * std::log(p[j] / eta);
  }
  return l;
}

// R = sum_j (nu_j / p_j) Pi_j over outcomes with nonzero counts.
inline ComplexMatrix r_operator(const Counts& counts, const ComplexMatrix& rho, const Pom& pom) {
  require_counts_match(counts, pom);
  const std::vector<double> p = born_probabilities(rho, pom);
  double n = 0.0;
  for (std::int64_t c : counts) n += double(c);
  if (!(n > 0.0)) throw InvariantViolation("r_operator: no counts");
  ComplexMatrix r = ComplexMatrix::Zero(pom.dim(), pom.dim());
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (counts[j] == 0) continue;
    if (p[j] <= kProbabilityFloor) {
      throw NumericalError("r_operator: outcome " + std::to_string(j + 1) +
                           " has counts but probability " + std::to_string(p[j]));
    }
    r += (double(counts[j]) / n / p[j]) * pom.outcome(j);
  }
  return hermitize(r);
}

namespace detail {

// (1 + A) X (1 + A) expanded around X: returns A X + X A + A X A.
inline ComplexMatrix sandwich_increment(const ComplexMatrix& a, const ComplexMatrix& x) {
  const ComplexMatrix ax = a * x;
  return ax + ax.adjoint() + ax * a;
}

inline double log1p_sum(const std::vector<double>& weights, const std::vector<double>& x) {
  double s = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j)
    if (weights[j] > 0.0) s += weights[j] * std::log1p(x[j]);
  return s;
}

// Likelihood (or extended likelihood) ascent over density matrices.
class StateProblem {
 public:
  struct Eval {
    double log_likelihood = 0.0;
    double entropy = 0.0;
    double defect = 0.0;
    bool boundary = false;
    std::vector<double> p;
    double eta = 1.0;
    ComplexMatrix t;  // ascent operator T
  };
  struct Step {
    ComplexMatrix next;
    double d_log_likelihood = 0.0;
    double d_entropy = 0.0;
  };

  StateProblem(const Counts& counts, const Pom& pom, bool extended, double log_floor)
      : pom_(pom), extended_(extended), log_floor_(log_floor) {
    require_counts_match(counts, pom);
    for (std::int64_t c : counts) {
      if (c < 0) throw InvariantViolation("counts must be non-negative");
      n_.push_back(double(c));
      total_ += double(c);
    }
    if (!(total_ > 0.0)) throw InvariantViolation("estimation needs at least one count");
  }

  double total_counts() const { return total_; }
  Eigen::Index dim() const { return pom_.dim(); }

  Eval evaluate(const ComplexMatrix& rho, double lambda) const {
    Eval e;
    e.p.resize(pom_.size());
    const Eigen::Index d = dim();
    for (std::size_t j = 0; j < pom_.size(); ++j) e.p[j] = trace_inner(rho, pom_.outcome(j));
    if (extended_) {
      e.eta = 0.0;
      for (double x : e.p) e.eta += x;
    }
    e.t = extended_ ? ComplexMatrix(-pom_.sum() / e.eta) : ComplexMatrix(-identity(d));
    for (std::size_t j = 0; j < pom_.size(); ++j) {
      if (n_[j] == 0.0) continue;
      if (e.p[j] <= kProbabilityFloor) {
        e.boundary = true;
        return e;
      }
      e.log_likelihood += n_[j] * std::log(e.p[j]);
      e.t += (n_[j] / total_ / e.p[j]) * pom_.outcome(j);
    }
    if (extended_) e.log_likelihood -= total_ * std::log(e.eta);
    const Spectrum s = eigh(rho);
    e.entropy = entropy_of_spectrum(s.values);
    if (lambda > 0.0) {
      const double floor = log_floor_ * std::max(s.values(s.values.size() - 1), 0.0);
      RealVector logs(s.values.size());
      double mean_log = 0.0;  // tr{rho log rho}
      for (Eigen::Index i = 0; i < logs.size(); ++i) {
        logs(i) = std::log(std::max(s.values(i), floor));
        mean_log += std::max(s.values(i), 0.0) * logs(i);
      }
      e.t -= lambda * (from_spectrum(logs, s.vectors) - mean_log * identity(d));
    }
    e.t = hermitize(e.t);
    e.defect = (e.t * rho).norm();
    return e;
  }

  std::optional<Step> propose(const ComplexMatrix& rho, const Eval& e, double eps,
                              double lambda) const {
    const ComplexMatrix x = sandwich_increment(eps * e.t, rho);
    const double growth = real_trace(x);
    if (!(1.0 + growth > 0.0)) return std::nullopt;
    const ComplexMatrix delta = hermitize((x - growth * rho) / (1.0 + growth));
    Step s;
    std::vector<double> ratio(pom_.size(), 0.0);
    double d_eta = 0.0;
    for (std::size_t j = 0; j < pom_.size(); ++j) {
      const double dp = trace_inner(delta, pom_.outcome(j));
      d_eta += dp;
      if (n_[j] == 0.0) continue;
      ratio[j] = dp / e.p[j];
      if (!(ratio[j] > -1.0)) return std::nullopt;
    }
    s.d_log_likelihood = log1p_sum(n_, ratio);
    if (extended_) s.d_log_likelihood -= total_ * std::log1p(d_eta / e.eta);
    s.next = hermitize(rho + delta);
    s.next /= real_trace(s.next);
    if (lambda > 0.0) s.d_entropy = von_neumann_entropy(s.next) - e.entropy;
    return s;
  }

  ComplexMatrix regularize(const ComplexMatrix& rho) const {
    return (1.0 - kBoundaryMix) * rho + kBoundaryMix * identity(dim()) / double(dim());
  }

 private:
  const Pom& pom_;
  bool extended_;
  double log_floor_;
  std::vector<double> n_;
  double total_ = 0.0;
};

inline EstimationReport run_state_estimation(const std::string& method, const Counts& counts,
                                             const Pom& pom, bool extended,
                                             const EstimationConfig& config,
                                             const std::optional<DensityMatrix>& start,
                                             const IterationObserver& observer) {
  config.validate();
  StateProblem problem(counts, pom, extended, config.log_floor);
  ComplexMatrix rho0 = identity(pom.dim()) / double(pom.dim());
  if (start) {
    if (start->dim() != pom.dim()) throw DimensionMismatch("start state dimension differs");
    rho0 = start->matrix();
    if (min_eigenvalue(rho0) < kStartEigenFloor) {
      rho0 = (1.0 - kStartMix) * rho0 + kStartMix * identity(pom.dim()) / double(pom.dim());
    }
  }
  auto result = run_ascent(problem, rho0, config, observer);
  const std::vector<double> lambdas = config.lambda_schedule();
  const auto final_eval = problem.evaluate(result.point, lambdas.back());
  EstimationReport r{method, DensityMatrix(result.point)};
  r.log_likelihood = final_eval.log_likelihood;
  r.entropy = final_eval.entropy;
  r.iterations = result.iterations;
  r.converged = result.converged;
  r.residual = final_eval.defect;
  r.likelihood_trace = std::move(result.likelihood_trace);
  r.objective_trace = std::move(result.objective_trace);
  r.probabilities = born_probabilities(r.estimator, pom);
  r.n_detected = std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
  r.detection_probability = 0.0;
  for (double x : r.probabilities) r.detection_probability += x;
  r.n_estimated = double(r.n_detected) / r.detection_probability;
  r.regularizations = result.regularizations;
  r.config = config;
  return r;
}

inline EstimationConfig without_entropy(EstimationConfig c) {
  c.lambda = 0.0;
  return c;
}

}  // namespace detail

// Plain likelihood ascent from the maximally mixed state (or `start`). For an
// informationally incomplete POM the unmeasured part of the result depends on
// the iteration path.
inline EstimationReport ml_estimate(const Counts& counts, const Pom& pom,
                                    const EstimationConfig& config = {},
                                    const std::optional<DensityMatrix>& start = std::nullopt,
                                    const IterationObserver& observer = {}) {
  if (!pom.perfect()) throw InvariantViolation("ml_estimate: POM is imperfect, use extended_ml_estimate");
  return detail::run_state_estimation("ml", counts, pom, false, detail::without_entropy(config),
                                      start, observer);
}

// Likelihood plus lambda times entropy, with lambda annealed down to
// config.lambda, so the result is the most mixed state among the ML ones.
inline EstimationReport mlme_estimate(const Counts& counts, const Pom& pom,
                                      const EstimationConfig& config = {},
                                      const IterationObserver& observer = {}) {
  if (!pom.perfect()) throw InvariantViolation("mlme_estimate: POM is imperfect, use extended_mlme_estimate");
  if (!(config.lambda > 0.0)) throw InvariantViolation("mlme_estimate: lambda must be > 0");
  return detail::run_state_estimation("mlme", counts, pom, false, config, std::nullopt, observer);
}

// Maximizes the likelihood of the relative probabilities p_j / eta, which is
// what lossy detectors with an unknown number of emitted copies determine.
inline EstimationReport extended_ml_estimate(const Counts& counts, const Pom& pom,
                                             const EstimationConfig& config = {},
                                             const std::optional<DensityMatrix>& start = std::nullopt,
                                             const IterationObserver& observer = {}) {
  return detail::run_state_estimation("extended-ml", counts, pom, true,
                                      detail::without_entropy(config), start, observer);
}

inline EstimationReport extended_mlme_estimate(const Counts& counts, const Pom& pom,
                                               const EstimationConfig& config = {},
                                               const IterationObserver& observer = {}) {
  if (!(config.lambda > 0.0)) throw InvariantViolation("extended_mlme_estimate: lambda must be > 0");
  return detail::run_state_estimation("extended-mlme", counts, pom, true, config, std::nullopt,
                                      observer);
}

// ---- closed forms -------------------------------------------------------------

inline std::vector<double> frequencies(const Counts& counts) {
  return CountsRecord::from_counts(counts).frequencies();
}

// sum_k |k> nu_k <k| for a von Neumann measurement in the columns of `basis`.
inline DensityMatrix closed_form_von_neumann_mlme(const Counts& counts, const ComplexMatrix& basis) {
  if (static_cast<Eigen::Index>(counts.size()) != basis.cols() || basis.rows() != basis.cols()) {
    throw DimensionMismatch("closed_form_von_neumann_mlme: need one count per basis vector");
  }
  const std::vector<double> nu = frequencies(counts);
  ComplexMatrix rho = ComplexMatrix::Zero(basis.rows(), basis.rows());
  for (Eigen::Index k = 0; k < basis.cols(); ++k)
    rho += nu[std::size_t(k)] * basis.col(k) * basis.col(k).adjoint();
  return DensityMatrix(rho);
}

// Bloch vector (sqrt3 (nu2 - nu3), 0, 3 nu1 - 1); nullopt when it leaves the
// ball and the estimate lies on the boundary, where the iteration is needed.
inline std::optional<DensityMatrix> closed_form_trine_mlme(const std::vector<double>& nu) {
  if (nu.size() != 3) throw DimensionMismatch("closed_form_trine_mlme: three frequencies needed");
  const BlochVector s{std::sqrt(3.0) * (nu[1] - nu[2]), 0.0, 3.0 * nu[0] - 1.0};
  if (s.norm() > 1.0) return std::nullopt;
  return bloch_to_rho(s);
}

inline std::optional<DensityMatrix> closed_form_trine_mlme(const Counts& counts) {
  return closed_form_trine_mlme(frequencies(counts));
}

struct TrineUniqueness {
  bool unique = false;
  std::optional<DensityMatrix> estimator;  // the pure ML state when unique
};

// The trine ML estimator is unique exactly when the frequencies put the
// closed-form Bloch vector on the sphere.
inline TrineUniqueness trine_uniqueness_check(const std::vector<double>& nu) {
  if (nu.size() != 3) throw DimensionMismatch("trine_uniqueness_check: three frequencies needed");
  const double sx = std::sqrt(3.0) * (nu[1] - nu[2]);
  const double sz = 2.0 - 3.0 * nu[1] - 3.0 * nu[2];
  TrineUniqueness t;
  t.unique = std::abs(3.0 * (nu[1] - nu[2]) * (nu[1] - nu[2]) +
                      (3.0 * nu[0] - 1.0) * (3.0 * nu[0] - 1.0) - 1.0) <= 1e-9;
  if (t.unique) {
    const double n = std::hypot(sx, sz);
    t.estimator = bloch_to_rho({sx / n, 0.0, sz / n});
  }
  return t;
}

inline TrineUniqueness trine_uniqueness_check(const Counts& counts) {
  return trine_uniqueness_check(frequencies(counts));
}

struct QutritExceptionResult {
  double rho33 = 0.0;
  double unclamped = 0.0;  // 3 (n2 - n1) / (n2 + n1)
  // rho_33 = 0: every state of the form [[a, c, 0], [c*, b, 0], [0, 0, 0]]
  // is maximum-likelihood.
  bool non_unique = false;
};

inline QutritExceptionResult qutrit_exception_ml(const Counts& counts) {
  if (counts.size() != 2) throw DimensionMismatch("qutrit_exception_ml: two counts needed");
  const double n1 = double(counts[0]);
  const double n2 = double(counts[1]);
  if (!(n1 + n2 > 0.0) || n1 < 0 || n2 < 0) {
    throw InvariantViolation("qutrit_exception_ml: counts must be non-negative and not all zero");
  }
  QutritExceptionResult r;
  r.unclamped = 3.0 * (n2 - n1) / (n2 + n1);
  r.rho33 = std::clamp(r.unclamped, 0.0, 1.0);
  r.non_unique = r.rho33 == 0.0;
  return r;
}

}  // namespace qtomo
