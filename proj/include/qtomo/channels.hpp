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
#include <string>
#include <utility>
#include <vector>

#include "qtomo/operator_core.hpp"
#include "qtomo/states.hpp"

namespace qtomo {

inline constexpr double kTracePreservationTol = 1e-9;

// Kraus operators K_m : input (dim_in) -> output (dim_out), each dim_out x dim_in.
class KrausSet {
 public:
  explicit KrausSet(std::vector<ComplexMatrix> ops) : ops_(std::move(ops)) {
    if (ops_.empty()) throw InvariantViolation("KrausSet: no operators");
    const Eigen::Index rows = ops_.front().rows();
    const Eigen::Index cols = ops_.front().cols();
    if (rows == 0 || cols == 0) throw DimensionMismatch("KrausSet: empty operator");
    ComplexMatrix s = ComplexMatrix::Zero(cols, cols);
    for (const ComplexMatrix& k : ops_) {
      if (k.rows() != rows || k.cols() != cols) {
        throw DimensionMismatch("KrausSet: operators have different shapes");
      }
      if (!all_finite(k)) throw InvariantViolation("KrausSet: non-finite entries");
      s += k.adjoint() * k;
    }
    if (max_eigenvalue(s) > 1.0 + 1e-10) {
      throw InvariantViolation("KrausSet: sum of K^dagger K exceeds identity");
    }
  }

  Eigen::Index dim_in() const { return ops_.front().cols(); }
  Eigen::Index dim_out() const { return ops_.front().rows(); }
  const std::vector<ComplexMatrix>& operators() const { return ops_; }

 private:
  std::vector<ComplexMatrix> ops_;
};

// Positive operator on H (input copy) (x) K (output). Trace preservation means
// tr_K{E} = 1_H.
class ChoiOperator {
 public:
  ChoiOperator(Eigen::Index dim_in, Eigen::Index dim_out, const ComplexMatrix& m)
      : dim_in_(dim_in), dim_out_(dim_out) {
    if (dim_in <= 0 || dim_out <= 0 || m.rows() != dim_in * dim_out ||
        m.cols() != dim_in * dim_out) {
      throw DimensionMismatch("ChoiOperator: matrix is " + std::to_string(m.rows()) + "x" +
                              std::to_string(m.cols()) + ", expected " +
                              std::to_string(dim_in * dim_out));
    }
    if (!all_finite(m)) throw InvariantViolation("ChoiOperator: non-finite entries");
    if (!is_hermitian(m, 1e-10)) throw InvariantViolation("ChoiOperator: not Hermitian");
    m_ = hermitize(m);
    const double lo = min_eigenvalue(m_);
    if (lo < -kStatePositivityTol) {
      throw InvariantViolation("ChoiOperator: eigenvalue " + std::to_string(lo) + " < 0");
    }
    tp_deviation_ = (partial_trace(m_, dim_in_, dim_out_, Subsystem::K) - identity(dim_in_)).norm();
  }

  Eigen::Index dim_in() const { return dim_in_; }
  Eigen::Index dim_out() const { return dim_out_; }
  const ComplexMatrix& matrix() const { return m_; }
  // ||tr_K{E} - 1_H||_F
  double trace_preservation_deviation() const { return tp_deviation_; }
  bool trace_preserving() const { return tp_deviation_ <= kTracePreservationTol; }

 private:
  Eigen::Index dim_in_;
  Eigen::Index dim_out_;
  ComplexMatrix m_;
  double tp_deviation_ = 0.0;
};

// |psi> = sum_l |l> (x) K|l>, i.e. (1 (x) K)|Psi+> sqrt(dim_in).
inline Eigen::VectorXcd choi_vector(const ComplexMatrix& k) {
  const Eigen::Index d_in = k.cols();
  const Eigen::Index d_out = k.rows();
  Eigen::VectorXcd v(d_in * d_out);
  for (Eigen::Index l = 0; l < d_in; ++l) v.segment(l * d_out, d_out) = k.col(l);
  return v;
}

inline ChoiOperator kraus_to_choi(const KrausSet& kraus) {
  const Eigen::Index n = kraus.dim_in() * kraus.dim_out();
  ComplexMatrix e = ComplexMatrix::Zero(n, n);
  for (const ComplexMatrix& k : kraus.operators()) {
    const Eigen::VectorXcd v = choi_vector(k);
    e += v * v.adjoint();
  }
  return ChoiOperator(kraus.dim_in(), kraus.dim_out(), e);
}

// tr_H{E (rho^T (x) 1_K)} without forming the tensor product.
inline ComplexMatrix choi_apply_matrix(const ChoiOperator& e, const ComplexMatrix& rho) {
  if (rho.rows() != e.dim_in() || rho.cols() != e.dim_in()) {
    throw DimensionMismatch("choi_apply: state dimension differs from the channel input");
  }
  const Eigen::Index di = e.dim_in();
  const Eigen::Index dout = e.dim_out();
  ComplexMatrix out = ComplexMatrix::Zero(dout, dout);
  for (Eigen::Index j = 0; j < di; ++j)
    for (Eigen::Index k = 0; k < di; ++k)
      out += rho(j, k) * e.matrix().block(j * dout, k * dout, dout, dout);
  return hermitize(out);
}

inline DensityMatrix choi_apply(const ChoiOperator& e, const DensityMatrix& rho) {
  return DensityMatrix(choi_apply_matrix(e, rho.matrix()));
}

// ---- chi representation ----------------------------------------------------

// Trace-orthonormal operators B_j (dim_out x dim_in) and the chi matrix of a
// process in that basis.
struct ChiMatrix {
  std::vector<ComplexMatrix> basis;
  ComplexMatrix matrix;
};

// {1, sigma_x, sigma_y, sigma_z} / sqrt(2).
inline std::vector<ComplexMatrix> pauli_operator_basis() {
  const double s = 1.0 / std::sqrt(2.0);
  return {identity(2) * s, pauli_x() * s, pauli_y() * s, pauli_z() * s};
}

// Matrix units |a><l|, a < dim_out, l < dim_in.
inline std::vector<ComplexMatrix> matrix_unit_basis(Eigen::Index dim_out, Eigen::Index dim_in) {
  std::vector<ComplexMatrix> b;
  for (Eigen::Index a = 0; a < dim_out; ++a)
    for (Eigen::Index l = 0; l < dim_in; ++l) {
      ComplexMatrix m = ComplexMatrix::Zero(dim_out, dim_in);
      m(a, l) = 1.0;
      b.push_back(std::move(m));
    }
  return b;
}

// Columns are the vectorized basis operators, so E = U chi^T U^dagger.
inline ComplexMatrix chi_transform(const std::vector<ComplexMatrix>& basis, Eigen::Index dim_in,
                                   Eigen::Index dim_out) {
  const Eigen::Index n = dim_in * dim_out;
  if (static_cast<Eigen::Index>(basis.size()) != n) {
    throw InvariantViolation("chi basis has " + std::to_string(basis.size()) +
                             " elements, a complete basis needs " + std::to_string(n));
  }
  ComplexMatrix u(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const ComplexMatrix& b = basis[std::size_t(j)];
    if (b.rows() != dim_out || b.cols() != dim_in) {
      throw DimensionMismatch("chi basis operator has the wrong shape");
    }
    u.col(j) = choi_vector(b);
  }
  if (max_abs(u.adjoint() * u - identity(n)) > 1e-10) {
    throw InvariantViolation("chi basis is not trace-orthonormal");
  }
  return u;
}

inline ChiMatrix choi_to_chi(const ChoiOperator& e, const std::vector<ComplexMatrix>& basis) {
  const ComplexMatrix u = chi_transform(basis, e.dim_in(), e.dim_out());
  return {basis, hermitize((u.adjoint() * e.matrix() * u).transpose())};
}

inline ChoiOperator chi_to_choi(const ChiMatrix& chi, Eigen::Index dim_in, Eigen::Index dim_out) {
  const ComplexMatrix u = chi_transform(chi.basis, dim_in, dim_out);
  return ChoiOperator(dim_in, dim_out, u * chi.matrix.transpose() * u.adjoint());
}

// ---- scalar figures ---------------------------------------------------------

// -tr{(E/D_i) log(E/D_i)}.
inline double process_entropy(const ChoiOperator& e) {
  return entropy_of_spectrum(eigh(e.matrix()).values / double(e.dim_in()));
}

// (1/(2 D_i)) tr{(E1 - E2)^2}.
inline double hs_process_error(const ChoiOperator& a, const ChoiOperator& b) {
  if (a.dim_in() != b.dim_in() || a.dim_out() != b.dim_out()) {
    throw DimensionMismatch("hs_process_error: Choi operators have different dimensions");
  }
  return (a.matrix() - b.matrix()).squaredNorm() / (2.0 * double(a.dim_in()));
}

// ---- common channels --------------------------------------------------------

inline KrausSet unitary_channel(const ComplexMatrix& u) { return KrausSet({u}); }

inline KrausSet identity_channel(Eigen::Index dim) { return KrausSet({identity(dim)}); }

// rho -> (1-p1-p2-p3) rho + p1 X rho X + p2 Y rho Y + p3 Z rho Z.
inline KrausSet pauli_channel(double p1, double p2, double p3) {
  const double p0 = 1.0 - p1 - p2 - p3;
  if (p1 < 0 || p2 < 0 || p3 < 0 || p0 < -1e-15) {
    throw InvariantViolation("pauli_channel: probabilities must lie in the simplex");
  }
  return KrausSet({std::sqrt(std::max(p0, 0.0)) * identity(2), std::sqrt(p1) * pauli_x(),
                   std::sqrt(p2) * pauli_y(), std::sqrt(p3) * pauli_z()});
}

}  // namespace qtomo
