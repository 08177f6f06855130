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

// Reference computations for the tests, written with plain index loops and
// Bloch-vector algebra so they share no code path with the library.

#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "qtomo/qtomo.hpp"

namespace oracle {

using qtomo::ComplexMatrix;
using cd = std::complex<double>;

// Accepted steps may lose this much (relative) to round-off in the absolute
// log-likelihood; anything larger is a real decrease.
inline constexpr double kMonotoneRelTol = 1e-14;

inline int monotonicity_violations(const std::vector<double>& trace) {
  int bad = 0;
  for (std::size_t k = 1; k < trace.size(); ++k) {
    const double slack = kMonotoneRelTol * std::max(1.0, std::abs(trace[k - 1]));
    if (trace[k] < trace[k - 1] - slack) ++bad;
  }
  return bad;
}

inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      for (int k = 0; k < b.rows(); ++k)
        for (int l = 0; l < b.cols(); ++l) out(i * b.rows() + k, j * b.cols() + l) = a(i, j) * b(k, l);
  return out;
}

// Trace over the second factor of a (dh*dk)x(dh*dk) matrix.
inline ComplexMatrix trace_second(const ComplexMatrix& m, int dh, int dk) {
  ComplexMatrix out = ComplexMatrix::Zero(dh, dh);
  for (int a = 0; a < dh; ++a)
    for (int b = 0; b < dh; ++b)
      for (int k = 0; k < dk; ++k) out(a, b) += m(a * dk + k, b * dk + k);
  return out;
}

inline ComplexMatrix trace_first(const ComplexMatrix& m, int dh, int dk) {
  ComplexMatrix out = ComplexMatrix::Zero(dk, dk);
  for (int a = 0; a < dk; ++a)
    for (int b = 0; b < dk; ++b)
      for (int h = 0; h < dh; ++h) out(a, b) += m(h * dk + a, h * dk + b);
  return out;
}

inline ComplexMatrix random_matrix(int rows, int cols, std::mt19937_64& g) {
  std::normal_distribution<double> n;
  ComplexMatrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = cd(n(g), n(g));
  return m;
}

// Full-rank random state A A^dagger / tr.
inline ComplexMatrix random_state(int d, std::mt19937_64& g) {
  const ComplexMatrix a = random_matrix(d, d, g);
  ComplexMatrix r = a * a.adjoint();
  return r / r.trace().real();
}

inline std::array<double, 3> random_bloch(std::mt19937_64& g, double max_norm = 1.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (;;) {
    std::array<double, 3> s{u(g), u(g), u(g)};
    const double n = std::sqrt(s[0] * s[0] + s[1] * s[1] + s[2] * s[2]);
    if (n <= max_norm) return s;
  }
}

// Random unitary from the QR decomposition of a Gaussian matrix.
inline ComplexMatrix random_unitary(int d, std::mt19937_64& g) {
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(Eigen::MatrixXcd(random_matrix(d, d, g)));
  return ComplexMatrix(qr.householderQ());
}

// A qubit outcome written as c0 1 + c . sigma, so that p = c0 + c . s.
struct BlochOutcome {
  double c0;
  std::array<double, 3> c;
};

inline BlochOutcome bloch_outcome(const ComplexMatrix& o) {
  // c0 = tr(o)/2, c_x = Re o01, c_y = -Im o01, c_z = (o00 - o11)/2
  return {0.5 * (o(0, 0).real() + o(1, 1).real()),
          {o(0, 1).real(), -o(0, 1).imag(), 0.5 * (o(0, 0).real() - o(1, 1).real())}};
}

inline double bloch_log_likelihood(const std::vector<BlochOutcome>& pom,
                                   const std::vector<std::int64_t>& n,
                                   const std::array<double, 3>& s) {
  double l = 0.0;
  for (std::size_t j = 0; j < pom.size(); ++j) {
    if (n[j] == 0) continue;
    const double p = pom[j].c0 + pom[j].c[0] * s[0] + pom[j].c[1] * s[1] + pom[j].c[2] * s[2];
    if (p <= 0.0) return -std::numeric_limits<double>::infinity();
    l += double(n[j]) * std::log(p);
  }
  return l;
}

struct GridOptimum {
  std::array<double, 3> s;
  double log_likelihood;
};

// Brute-force maximum of the qubit log-likelihood over the Bloch ball: a
// 0.01 grid, then a 0.001 grid in the cube of half-width 0.02 around the best
// point. Axes listed in `free` are searched; the others stay at 0.
inline GridOptimum grid_search(const std::vector<BlochOutcome>& pom,
                               const std::vector<std::int64_t>& n, std::array<bool, 3> free) {
  GridOptimum best{{0, 0, 0}, bloch_log_likelihood(pom, n, {0, 0, 0})};
  auto scan = [&](std::array<double, 3> centre, double half, double step) {
    const int k = int(std::lround(half / step));
    std::array<int, 3> lim{};
    for (int a = 0; a < 3; ++a) lim[a] = free[a] ? k : 0;
    GridOptimum local = best;
    for (int i = -lim[0]; i <= lim[0]; ++i)
      for (int j = -lim[1]; j <= lim[1]; ++j)
        for (int l = -lim[2]; l <= lim[2]; ++l) {
          const std::array<double, 3> s{centre[0] + i * step, centre[1] + j * step,
                                        centre[2] + l * step};
          if (s[0] * s[0] + s[1] * s[1] + s[2] * s[2] > 1.0) continue;
          const double v = bloch_log_likelihood(pom, n, s);
          if (v > local.log_likelihood) local = {s, v};
        }
    best = local;
  };
  scan({0, 0, 0}, 1.0, 0.01);
  scan(best.s, 0.02, 0.001);
  return best;
}

// Brute-force Choi operator sum_m |K_m>> <<K_m| with |K>> = sum_l |l> (x) K|l>.
inline ComplexMatrix choi_from_kraus(const std::vector<ComplexMatrix>& kraus) {
  const int di = int(kraus.front().cols());
  const int dout = int(kraus.front().rows());
  ComplexMatrix e = ComplexMatrix::Zero(di * dout, di * dout);
  for (const ComplexMatrix& k : kraus)
    for (int l = 0; l < di; ++l)
      for (int a = 0; a < dout; ++a)
        for (int lp = 0; lp < di; ++lp)
          for (int b = 0; b < dout; ++b) e(l * dout + a, lp * dout + b) += k(a, l) * std::conj(k(b, lp));
  return e;
}

inline ComplexMatrix apply_kraus(const std::vector<ComplexMatrix>& kraus, const ComplexMatrix& rho) {
  ComplexMatrix out = ComplexMatrix::Zero(kraus.front().rows(), kraus.front().rows());
  for (const ComplexMatrix& k : kraus) out += k * rho * k.adjoint();
  return out;
}

}  // namespace oracle
