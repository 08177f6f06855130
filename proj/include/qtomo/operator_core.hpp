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
#include <complex>
#include <string>

#include <Eigen/Dense>

#include "qtomo/errors.hpp"

namespace qtomo {

using Complex = std::complex<double>;
using ComplexMatrix =
    Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RealVector = Eigen::VectorXd;

// Spectra more negative than this are treated as a broken positivity
// invariant rather than round-off.
inline constexpr double kNegativeEigenvalueError = 1e-6;

inline ComplexMatrix identity(Eigen::Index d) {
  return ComplexMatrix::Identity(d, d);
}

inline ComplexMatrix pauli_x() {
  ComplexMatrix m(2, 2);
  m << 0.0, 1.0, 1.0, 0.0;
  return m;
}

inline ComplexMatrix pauli_y() {
  ComplexMatrix m(2, 2);
  m << 0.0, Complex(0.0, -1.0), Complex(0.0, 1.0), 0.0;
  return m;
}

inline ComplexMatrix pauli_z() {
  ComplexMatrix m(2, 2);
  m << 1.0, 0.0, 0.0, -1.0;
  return m;
}

inline double max_abs(const ComplexMatrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline bool all_finite(const ComplexMatrix& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const Complex z = m.data()[i];
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  }
  return true;
}

inline bool is_hermitian(const ComplexMatrix& m, double rel_tol = 1e-12) {
  if (m.rows() != m.cols()) return false;
  return max_abs(m - m.adjoint()) <= rel_tol * std::max(1.0, max_abs(m));
}

inline void require_square(const ComplexMatrix& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw DimensionMismatch(std::string(what) + ": expected a non-empty square matrix, got " +
                            std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

inline void require_same_shape(const ComplexMatrix& a, const ComplexMatrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionMismatch(std::string(what) + ": shapes " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                            std::to_string(b.cols()) + " differ");
  }
}

inline ComplexMatrix hermitize(const ComplexMatrix& m) {
  return (m + m.adjoint()) * 0.5;
}

inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

// Factor ordering is H (first, "input" copy) then K (second, "output").
enum class Subsystem { H, K };

inline ComplexMatrix partial_trace(const ComplexMatrix& m, Eigen::Index dim_h, Eigen::Index dim_k,
                                   Subsystem traced) {
  if (dim_h <= 0 || dim_k <= 0 || m.rows() != dim_h * dim_k || m.cols() != dim_h * dim_k) {
    throw DimensionMismatch("partial_trace: matrix is " + std::to_string(m.rows()) + "x" +
                            std::to_string(m.cols()) + ", factors " + std::to_string(dim_h) +
                            "*" + std::to_string(dim_k));
  }
  if (traced == Subsystem::K) {
    ComplexMatrix out = ComplexMatrix::Zero(dim_h, dim_h);
    for (Eigen::Index a = 0; a < dim_h; ++a)
      for (Eigen::Index b = 0; b < dim_h; ++b)
        out(a, b) = m.block(a * dim_k, b * dim_k, dim_k, dim_k).trace();
    return out;
  }
  ComplexMatrix out = ComplexMatrix::Zero(dim_k, dim_k);
  for (Eigen::Index a = 0; a < dim_h; ++a) out += m.block(a * dim_k, a * dim_k, dim_k, dim_k);
  return out;
}

struct Spectrum {
  RealVector values;      // ascending
  ComplexMatrix vectors;  // columns are eigenvectors
};

inline Spectrum eigh(const ComplexMatrix& m) {
  require_square(m, "eigh");
  if (!all_finite(m)) throw NumericalError("eigh: non-finite matrix entries");
  // Eigen's solver reads only the lower triangle; symmetrize so round-off in
  // the upper triangle is not silently discarded.
  const Eigen::MatrixXcd h = hermitize(m);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h);
  if (solver.info() != Eigen::Success) throw NumericalError("eigh: eigensolver did not converge");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

inline ComplexMatrix from_spectrum(const RealVector& values, const ComplexMatrix& vectors) {
  return vectors * values.cast<Complex>().asDiagonal() * vectors.adjoint();
}

inline double clamp_nonnegative_eigenvalue(double v, const char* what) {
  if (v < -kNegativeEigenvalueError) {
    throw NumericalError(std::string(what) + ": eigenvalue " + std::to_string(v) +
                         " is far below zero");
  }
  return std::max(v, 0.0);
}

inline double min_eigenvalue(const ComplexMatrix& m) { return eigh(m).values(0); }
inline double max_eigenvalue(const ComplexMatrix& m) {
  const RealVector v = eigh(m).values;
  return v(v.size() - 1);
}

inline ComplexMatrix matrix_sqrt_psd(const ComplexMatrix& m) {
  Spectrum s = eigh(m);
  for (Eigen::Index i = 0; i < s.values.size(); ++i)
    s.values(i) = std::sqrt(clamp_nonnegative_eigenvalue(s.values(i), "matrix_sqrt_psd"));
  return from_spectrum(s.values, s.vectors);
}

// Eigenvalues below `floor` are raised to it before inverting.
inline ComplexMatrix matrix_inv_sqrt_psd(const ComplexMatrix& m, double floor,
                                         bool* floored = nullptr) {
  Spectrum s = eigh(m);
  bool hit = false;
  for (Eigen::Index i = 0; i < s.values.size(); ++i) {
    double v = clamp_nonnegative_eigenvalue(s.values(i), "matrix_inv_sqrt_psd");
    if (v < floor) {
      v = floor;
      hit = true;
    }
    s.values(i) = 1.0 / std::sqrt(v);
  }
  if (floored) *floored = hit;
  return from_spectrum(s.values, s.vectors);
}

inline ComplexMatrix matrix_log_floored(const ComplexMatrix& m, double floor) {
  if (!(floor > 0.0)) throw InvariantViolation("matrix_log_floored: floor must be positive");
  Spectrum s = eigh(m);
  for (Eigen::Index i = 0; i < s.values.size(); ++i)
    s.values(i) = std::log(std::max(s.values(i), floor));
  return from_spectrum(s.values, s.vectors);
}

inline double trace_inner(const ComplexMatrix& a, const ComplexMatrix& b) {
  require_square(a, "trace_inner");
  require_same_shape(a, b, "trace_inner");
  // Re tr{ab} = Re sum_ij a_ij b_ji without forming the product.
  return (a.array() * b.transpose().array()).sum().real();
}

inline double real_trace(const ComplexMatrix& m) { return m.trace().real(); }

}  // namespace qtomo
