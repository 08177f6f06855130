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

#include "qtomo/operator_core.hpp"

namespace qtomo {

inline constexpr double kStateTraceTol = 1e-10;
inline constexpr double kStatePositivityTol = 1e-10;

// Positive, unit-trace Hermitian matrix. Construction validates; the stored
// matrix is exactly Hermitian.
class DensityMatrix {
 public:
  explicit DensityMatrix(const ComplexMatrix& m) : m_(validated(m)) {}

  static DensityMatrix maximally_mixed(Eigen::Index dim) {
    if (dim <= 0) throw DimensionMismatch("maximally_mixed: dimension must be positive");
    return DensityMatrix(identity(dim) / static_cast<double>(dim));
  }

  // |v><v| / <v|v>.
  static DensityMatrix pure(const Eigen::VectorXcd& v) {
    const double n = v.squaredNorm();
    if (!(n > 0.0)) throw InvariantViolation("pure state from a zero vector");
    return DensityMatrix(ComplexMatrix(v * v.adjoint() / n));
  }

  Eigen::Index dim() const { return m_.rows(); }
  const ComplexMatrix& matrix() const { return m_; }

 private:
  static ComplexMatrix validated(const ComplexMatrix& m) {
    require_square(m, "DensityMatrix");
    if (!all_finite(m)) throw InvariantViolation("DensityMatrix: non-finite entries");
    if (!is_hermitian(m, 1e-10)) throw InvariantViolation("DensityMatrix: not Hermitian");
    const double tr = real_trace(m);
    if (std::abs(tr - 1.0) > kStateTraceTol) {
      throw InvariantViolation("DensityMatrix: trace " + std::to_string(tr) + " != 1");
    }
    const ComplexMatrix h = hermitize(m);
    const double lo = min_eigenvalue(h);
    if (lo < -kStatePositivityTol) {
      throw InvariantViolation("DensityMatrix: eigenvalue " + std::to_string(lo) + " < 0");
    }
    return h;
  }

  ComplexMatrix m_;
};

struct BlochVector {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double norm() const { return std::sqrt(x * x + y * y + z * z); }
};

inline DensityMatrix bloch_to_rho(const BlochVector& s) {
  if (s.norm() > 1.0 + 1e-10) {
    throw InvariantViolation("bloch_to_rho: |s| = " + std::to_string(s.norm()) + " exceeds 1");
  }
  return DensityMatrix((identity(2) + s.x * pauli_x() + s.y * pauli_y() + s.z * pauli_z()) * 0.5);
}

inline BlochVector rho_to_bloch(const ComplexMatrix& rho) {
  if (rho.rows() != 2 || rho.cols() != 2) {
    throw DimensionMismatch("rho_to_bloch: qubit (2x2) matrix required");
  }
  return {trace_inner(rho, pauli_x()), trace_inner(rho, pauli_y()), trace_inner(rho, pauli_z())};
}

inline BlochVector rho_to_bloch(const DensityMatrix& rho) { return rho_to_bloch(rho.matrix()); }

// -sum v log v over a spectrum, with 0 log 0 = 0 and tiny negative round-off
// ignored.
inline double entropy_of_spectrum(const RealVector& values) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    const double v = values(i);
    if (v > 0.0) s -= v * std::log(v);
  }
  return s;
}

inline double von_neumann_entropy(const ComplexMatrix& rho) {
  return entropy_of_spectrum(eigh(rho).values);
}

inline double von_neumann_entropy(const DensityMatrix& rho) {
  return von_neumann_entropy(rho.matrix());
}

inline double purity(const DensityMatrix& rho) {
  return trace_inner(rho.matrix(), rho.matrix());
}

// Half the trace norm of the difference.
inline double trace_distance(const ComplexMatrix& a, const ComplexMatrix& b) {
  require_same_shape(a, b, "trace_distance");
  return 0.5 * eigh(a - b).values.cwiseAbs().sum();
}

inline double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
  return trace_distance(a.matrix(), b.matrix());
}

}  // namespace qtomo
