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
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qtomo/operator_core.hpp"
#include "qtomo/rng.hpp"
#include "qtomo/states.hpp"

namespace qtomo {

inline constexpr double kPomPositivityTol = 1e-10;
inline constexpr double kPerfectionTol = 1e-10;
inline constexpr double kGramRankTol = 1e-10;
inline constexpr double kGramSchmidtDropTol = 1e-10;

// Ordered positive outcomes with sum G <= 1. "Perfect" means G = 1.
class Pom {
 public:
  explicit Pom(std::vector<ComplexMatrix> outcomes, std::vector<std::string> labels = {})
      : outcomes_(std::move(outcomes)), labels_(std::move(labels)) {
    if (outcomes_.empty()) throw InvariantViolation("Pom: no outcomes");
    const Eigen::Index d = outcomes_.front().rows();
    sum_ = ComplexMatrix::Zero(d, d);
    for (std::size_t j = 0; j < outcomes_.size(); ++j) {
      ComplexMatrix& o = outcomes_[j];
      require_square(o, "Pom outcome");
      if (o.rows() != d) throw DimensionMismatch("Pom: outcomes have different dimensions");
      if (!all_finite(o)) throw InvariantViolation("Pom: non-finite outcome entries");
      if (!is_hermitian(o, 1e-10)) {
        throw InvariantViolation("Pom: outcome " + std::to_string(j + 1) + " is not Hermitian");
      }
      o = hermitize(o);
      const double lo = min_eigenvalue(o);
      if (lo < -kPomPositivityTol) {
        throw InvariantViolation("Pom: outcome " + std::to_string(j + 1) +
                                 " has eigenvalue " + std::to_string(lo));
      }
      sum_ += o;
    }
    const RealVector g = eigh(sum_).values;
    if (g(g.size() - 1) > 1.0 + kPerfectionTol) {
      throw InvariantViolation("Pom: outcome sum exceeds identity (max eigenvalue " +
                               std::to_string(g(g.size() - 1)) + ")");
    }
    perfect_ = (g.array() - 1.0).abs().maxCoeff() <= kPerfectionTol;
    if (labels_.empty()) {
      for (std::size_t j = 0; j < outcomes_.size(); ++j) labels_.push_back(std::to_string(j + 1));
    } else if (labels_.size() != outcomes_.size()) {
      throw InvariantViolation("Pom: label count does not match outcome count");
    }
  }

  Eigen::Index dim() const { return sum_.rows(); }
  std::size_t size() const { return outcomes_.size(); }
  const ComplexMatrix& outcome(std::size_t j) const { return outcomes_.at(j); }
  const std::vector<ComplexMatrix>& outcomes() const { return outcomes_; }
  const std::vector<std::string>& labels() const { return labels_; }
  const ComplexMatrix& sum() const { return sum_; }
  bool perfect() const { return perfect_; }

 private:
  std::vector<ComplexMatrix> outcomes_;
  std::vector<std::string> labels_;
  ComplexMatrix sum_;
  bool perfect_ = false;
};

// ---- builders -------------------------------------------------------------

inline Pom make_von_neumann(const ComplexMatrix& basis) {
  require_square(basis, "make_von_neumann");
  const Eigen::Index d = basis.rows();
  if (max_abs(basis.adjoint() * basis - identity(d)) > 1e-10) {
    throw InvariantViolation("make_von_neumann: basis columns are not orthonormal");
  }
  std::vector<ComplexMatrix> out;
  for (Eigen::Index k = 0; k < d; ++k) out.emplace_back(basis.col(k) * basis.col(k).adjoint());
  return Pom(std::move(out));
}

inline Pom make_computational_von_neumann(Eigen::Index dim) {
  return make_von_neumann(identity(dim));
}

inline Pom make_trine() {
  const double h = std::sqrt(3.0) / 2.0;
  const ComplexMatrix one = identity(2);
  return Pom({(one + pauli_z()) / 3.0, (one + h * pauli_x() - 0.5 * pauli_z()) / 3.0,
              (one - h * pauli_x() - 0.5 * pauli_z()) / 3.0});
}

inline Pom make_six() {
  const ComplexMatrix one = identity(2);
  return Pom({(one + pauli_x()) / 6.0, (one - pauli_x()) / 6.0, (one + pauli_y()) / 6.0,
              (one - pauli_y()) / 6.0, (one + pauli_z()) / 6.0, (one - pauli_z()) / 6.0},
             {"+x", "-x", "+y", "-y", "+z", "-z"});
}

// Two diagonal qutrit outcomes whose likelihood only constrains rho_33.
inline Pom make_qutrit_two_outcome() {
  ComplexMatrix a = ComplexMatrix::Zero(3, 3);
  ComplexMatrix b = ComplexMatrix::Zero(3, 3);
  a.diagonal() << 0.5, 0.5, 1.0 / 3.0;
  b.diagonal() << 0.5, 0.5, 2.0 / 3.0;
  return Pom({a, b});
}

// Orthonormal Hermite functions psi_0..psi_{count-1} at x.
inline std::vector<double> hermite_functions(double x, int count) {
  std::vector<double> psi(static_cast<std::size_t>(std::max(count, 0)));
  if (count <= 0) return psi;
  psi[0] = std::pow(std::numbers::pi, -0.25) * std::exp(-0.5 * x * x);
  if (count > 1) psi[1] = std::sqrt(2.0) * x * psi[0];
  for (int n = 1; n + 1 < count; ++n) {
    psi[n + 1] = x * std::sqrt(2.0 / (n + 1)) * psi[n] - std::sqrt(double(n) / (n + 1)) * psi[n - 1];
  }
  return psi;
}

inline double uniform_bin_width(const std::vector<double>& x_grid) {
  if (x_grid.size() < 2) throw InvariantViolation("quadrature grid needs at least two points");
  const double dx = (x_grid.back() - x_grid.front()) / double(x_grid.size() - 1);
  if (!(dx > 0.0)) throw InvariantViolation("quadrature grid must be increasing");
  for (std::size_t i = 1; i < x_grid.size(); ++i) {
    if (std::abs(x_grid[i] - x_grid[i - 1] - dx) > 1e-9 * std::max(1.0, dx)) {
      throw InvariantViolation("quadrature grid must be uniformly spaced");
    }
  }
  return dx;
}

// Bin-width-weighted quadrature projectors |x_theta><x_theta| truncated to
// d_rec Fock levels. With several phases every setting is assumed equally
// likely, so each phase's outcomes carry weight 1/thetas.size().
inline Pom make_quadrature_pom(const std::vector<double>& thetas, const std::vector<double>& x_grid,
                               int d_rec) {
  if (d_rec < 1) throw InvariantViolation("make_quadrature_pom: d_rec must be >= 1");
  if (thetas.empty()) throw InvariantViolation("make_quadrature_pom: no phases");
  const double weight = uniform_bin_width(x_grid) / double(thetas.size());
  std::vector<ComplexMatrix> out;
  std::vector<std::string> labels;
  for (double theta : thetas) {
    for (double x : x_grid) {
      const std::vector<double> psi = hermite_functions(x, d_rec);
      Eigen::VectorXcd ket(d_rec);
      for (int n = 0; n < d_rec; ++n) ket(n) = psi[n] * std::polar(1.0, n * theta);
      out.emplace_back(weight * ket * ket.adjoint());
      labels.push_back("theta=" + std::to_string(theta) + ",x=" + std::to_string(x));
    }
  }
  return Pom(std::move(out), std::move(labels));
}

// Phase-averaged quadrature outcomes: diagonal Fock mixtures.
inline Pom make_phase_randomized_fock_mixture(const std::vector<double>& x_grid, int d_rec) {
  if (d_rec < 1) throw InvariantViolation("make_phase_randomized_fock_mixture: d_rec must be >= 1");
  const double dx = uniform_bin_width(x_grid);
  std::vector<ComplexMatrix> out;
  for (double x : x_grid) {
    const std::vector<double> psi = hermite_functions(x, d_rec);
    ComplexMatrix m = ComplexMatrix::Zero(d_rec, d_rec);
    for (int n = 0; n < d_rec; ++n) m(n, n) = dx * psi[n] * psi[n];
    out.push_back(std::move(m));
  }
  return Pom(std::move(out));
}

// Half-wave plate at angle theta, as a Jones matrix on (H, V).
inline ComplexMatrix half_wave_plate(double theta) {
  ComplexMatrix m(2, 2);
  m << std::cos(2 * theta), std::sin(2 * theta), std::sin(2 * theta), -std::cos(2 * theta);
  return m;
}

// Partially polarizing beam splitter with amplitude reflectivities (mu, nu).
inline ComplexMatrix partially_polarizing_splitter(double mu, double nu) {
  ComplexMatrix m = ComplexMatrix::Zero(2, 2);
  m(0, 0) = mu;
  m(1, 1) = nu;
  return m;
}

// Three-detector polarization setup: transmitted arm of the splitter, then
// a pi/8 wave plate and polarizing splitter on the reflected arm. For
// mu = 1/sqrt(3) this is the trine; mu = -1/sqrt(3) gives the trine with the
// two reflected detectors swapped.
inline Pom optical_trine_outcomes(double mu) {
  if (std::abs(mu) > 1.0) throw InvariantViolation("optical_trine_outcomes: |mu| must be <= 1");
  const ComplexMatrix reflect = partially_polarizing_splitter(mu, 1.0);
  const ComplexMatrix plate = half_wave_plate(std::numbers::pi / 8.0);
  const Eigen::VectorXcd h = Eigen::VectorXcd::Unit(2, 0);
  const Eigen::VectorXcd v = Eigen::VectorXcd::Unit(2, 1);
  // Detector amplitudes <out|M, i.e. outcome = M^dagger |out><out| M.
  const ComplexMatrix m = plate * reflect;
  const Eigen::VectorXcd phi2 = m.adjoint() * h;
  const Eigen::VectorXcd phi3 = m.adjoint() * v;
  const ComplexMatrix transmitted = (1.0 - mu * mu) * (identity(2) + pauli_z()) * 0.5;
  return Pom({transmitted, phi2 * phi2.adjoint(), phi3 * phi3.adjoint()},
             {"transmitted", "reflected-H", "reflected-V"});
}

// Returns outcomes Pi~_j = sum_k eta(j, k) Pi_k.
inline Pom apply_efficiencies(const Pom& pom, const Eigen::MatrixXd& eta) {
  if (eta.cols() != static_cast<Eigen::Index>(pom.size()) || eta.rows() == 0) {
    throw DimensionMismatch("apply_efficiencies: eta must have one column per outcome");
  }
  if ((eta.array() < 0.0).any()) throw InvariantViolation("apply_efficiencies: negative entry");
  if ((eta.colwise().sum().array() > 1.0 + 1e-12).any()) {
    throw InvariantViolation("apply_efficiencies: a column of eta sums to more than 1");
  }
  std::vector<ComplexMatrix> out;
  for (Eigen::Index j = 0; j < eta.rows(); ++j) {
    ComplexMatrix m = ComplexMatrix::Zero(pom.dim(), pom.dim());
    for (std::size_t k = 0; k < pom.size(); ++k) m += eta(j, Eigen::Index(k)) * pom.outcome(k);
    out.push_back(std::move(m));
  }
  std::vector<std::string> labels;
  if (eta.rows() == static_cast<Eigen::Index>(pom.size())) labels = pom.labels();
  return Pom(std::move(out), std::move(labels));
}

inline Pom apply_uniform_efficiency(const Pom& pom, double efficiency) {
  const auto n = static_cast<Eigen::Index>(pom.size());
  return apply_efficiencies(pom, efficiency * Eigen::MatrixXd::Identity(n, n));
}

// ---- Gram analysis --------------------------------------------------------

enum class PomClass { PerfectComplete, ImperfectComplete, PerfectIncomplete, ImperfectIncomplete };

inline std::string_view to_string(PomClass c) {
  switch (c) {
    case PomClass::PerfectComplete: return "perfect-complete";
    case PomClass::ImperfectComplete: return "imperfect-complete";
    case PomClass::PerfectIncomplete: return "perfect-incomplete";
    case PomClass::ImperfectIncomplete: return "imperfect-incomplete";
  }
  return "unknown";
}

inline std::string_view describe(PomClass c) {
  switch (c) {
    case PomClass::PerfectComplete: return "perfect informationally complete";
    case PomClass::ImperfectComplete: return "imperfect informationally complete";
    case PomClass::PerfectIncomplete: return "perfect informationally incomplete";
    case PomClass::ImperfectIncomplete: return "imperfect informationally incomplete";
  }
  return "unknown";
}

struct GramReport {
  Eigen::Index dim = 0;
  RealVector eigenvalues;  // descending
  int n_positive = 0;
  bool perfect = false;
  PomClass classification = PomClass::PerfectComplete;

  bool complete() const { return n_positive == dim * dim; }
};

inline Eigen::MatrixXd gram_matrix(const Pom& pom) {
  const auto n = static_cast<Eigen::Index>(pom.size());
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index k = j; k < n; ++k)
      g(j, k) = g(k, j) = trace_inner(pom.outcome(std::size_t(j)), pom.outcome(std::size_t(k)));
  return g;
}

inline GramReport gram_report(const Pom& pom) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram_matrix(pom), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericalError("gram_report: eigensolver failed");
  GramReport r;
  r.dim = pom.dim();
  r.eigenvalues = solver.eigenvalues().reverse();
  const double top = r.eigenvalues(0);
  for (Eigen::Index i = 0; i < r.eigenvalues.size(); ++i)
    if (r.eigenvalues(i) > kGramRankTol * top) ++r.n_positive;
  r.perfect = pom.perfect();
  const bool complete = r.complete();
  r.classification = r.perfect ? (complete ? PomClass::PerfectComplete : PomClass::PerfectIncomplete)
                               : (complete ? PomClass::ImperfectComplete
                                           : PomClass::ImperfectIncomplete);
  return r;
}

// ---- operator-space decomposition ------------------------------------------

// Trace-orthonormal Hermitian basis of operator space: `measured` spans the
// outcomes, `unmeasured` completes it to dim^2 elements.
struct OperatorBasis {
  Eigen::Index dim = 0;
  std::vector<ComplexMatrix> measured;
  std::vector<ComplexMatrix> unmeasured;

  bool complete() const {
    return static_cast<Eigen::Index>(measured.size() + unmeasured.size()) == dim * dim;
  }
};

namespace detail {

// Orthogonalizes `candidate` against `basis` (two passes of modified
// Gram-Schmidt) and appends it when the residual keeps a relative norm of at
// least kGramSchmidtDropTol.
inline bool orthonormalize_into(std::vector<ComplexMatrix>& basis, ComplexMatrix candidate,
                                const std::vector<ComplexMatrix>* also = nullptr) {
  const double original = candidate.norm();
  if (!(original > 0.0)) return false;
  for (int pass = 0; pass < 2; ++pass) {
    if (also)
      for (const ComplexMatrix& b : *also) candidate -= trace_inner(b, candidate) * b;
    for (const ComplexMatrix& b : basis) candidate -= trace_inner(b, candidate) * b;
  }
  candidate = hermitize(candidate);
  const double residual = candidate.norm();
  if (residual < kGramSchmidtDropTol * original) return false;
  basis.push_back(candidate / residual);
  return true;
}

}  // namespace detail

inline OperatorBasis gram_schmidt_operator_basis(const Pom& pom, std::uint64_t seed) {
  OperatorBasis b;
  b.dim = pom.dim();
  const Eigen::Index full = b.dim * b.dim;
  for (const ComplexMatrix& o : pom.outcomes()) {
    if (static_cast<Eigen::Index>(b.measured.size()) == full) break;
    detail::orthonormalize_into(b.measured, o);
  }
  // Complete with random positive operators A A^dagger.
  Rng rng(seed);
  int attempts = 0;
  while (static_cast<Eigen::Index>(b.measured.size() + b.unmeasured.size()) < full) {
    if (++attempts > 1000 * full) throw NumericalError("gram_schmidt_operator_basis: stalled");
    ComplexMatrix a(b.dim, b.dim);
    for (Eigen::Index i = 0; i < a.size(); ++i)
      a.data()[i] = Complex(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    detail::orthonormalize_into(b.unmeasured, a * a.adjoint(), &b.measured);
  }
  return b;
}

struct SubspaceDecomposition {
  std::vector<ComplexMatrix> gamma_meas;
  std::vector<ComplexMatrix> gamma_unmeas;
  ComplexMatrix rho_meas;
  ComplexMatrix rho_unmeas;
};

inline SubspaceDecomposition decompose_state(const ComplexMatrix& rho, const OperatorBasis& basis) {
  if (!basis.complete()) throw InvariantViolation("decompose_state: basis is incomplete");
  if (rho.rows() != basis.dim || rho.cols() != basis.dim) {
    throw DimensionMismatch("decompose_state: state and basis dimensions differ");
  }
  SubspaceDecomposition d{basis.measured, basis.unmeasured,
                          ComplexMatrix::Zero(basis.dim, basis.dim),
                          ComplexMatrix::Zero(basis.dim, basis.dim)};
  for (const ComplexMatrix& g : basis.measured) d.rho_meas += trace_inner(g, rho) * g;
  for (const ComplexMatrix& g : basis.unmeasured) d.rho_unmeas += trace_inner(g, rho) * g;
  return d;
}

inline SubspaceDecomposition decompose_state(const DensityMatrix& rho, const OperatorBasis& basis) {
  return decompose_state(rho.matrix(), basis);
}

// Leading d_rec x d_rec block in the computational basis, not renormalized.
inline ComplexMatrix truncate_state(const ComplexMatrix& m, Eigen::Index d_rec) {
  require_square(m, "truncate_state");
  if (d_rec < 1 || d_rec > m.rows()) {
    throw DimensionMismatch("truncate_state: d_rec " + std::to_string(d_rec) +
                            " outside [1, " + std::to_string(m.rows()) + "]");
  }
  return m.topLeftCorner(d_rec, d_rec);
}

}  // namespace qtomo
