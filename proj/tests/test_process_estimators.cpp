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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "qtomo/data_sim.hpp"
#include "qtomo/process_estimators.hpp"

using namespace qtomo;

namespace {

std::vector<DensityMatrix> qubit_inputs() {
  return {bloch_to_rho({0, 0, 1}), bloch_to_rho({0, 0, -1}), bloch_to_rho({1, 0, 0}),
          bloch_to_rho({0, 1, 0})};
}

void expect_sound(const ProcessEstimationReport& r) {
  EXPECT_EQ(oracle::monotonicity_violations(r.likelihood_trace), 0) << r.method;
  EXPECT_LE(r.max_tp_deviation, 1e-9);
  EXPECT_GE(min_eigenvalue(r.estimator.matrix()), -1e-10);
  if (r.converged) {
    EXPECT_LE(r.residual, r.config.grad_tol);
  }
}

std::array<double, 3> random_simplex_point(std::mt19937_64& g) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::array<double, 4> cuts{0.0, u(g), u(g), u(g)};
  std::sort(cuts.begin() + 1, cuts.end());
  // three gaps of four sorted points in [0, 1], leaving the last gap as p0
  return {cuts[1] - cuts[0], cuts[2] - cuts[1], cuts[3] - cuts[2]};
}

RealVector sorted_eigenvalues(const ComplexMatrix& m) { return eigh(hermitize(m)).values; }

}  // namespace

// ---- channel representations ---------------------------------------------------

TEST(PauliChannel, ChoiEntries) {
  std::mt19937_64 g(61);
  for (int t = 0; t < 20; ++t) {
    const auto [p1, p2, p3] = random_simplex_point(g);
    ComplexMatrix expected = ComplexMatrix::Zero(4, 4);
    expected(0, 0) = expected(3, 3) = 1 - p1 - p2;
    expected(0, 3) = expected(3, 0) = 1 - p1 - p2 - 2 * p3;
    expected(1, 1) = expected(2, 2) = p1 + p2;
    expected(1, 2) = expected(2, 1) = p1 - p2;
    EXPECT_LT(max_abs(kraus_to_choi(pauli_channel(p1, p2, p3)).matrix() - expected), 1e-12);
  }
  EXPECT_THROW(pauli_channel(0.5, 0.5, 0.5), InvariantViolation);
  EXPECT_THROW(pauli_channel(-0.1, 0.0, 0.0), InvariantViolation);
}

TEST(PauliChannel, ChiIsDiagonal) {
  std::mt19937_64 g(62);
  for (int t = 0; t < 20; ++t) {
    const auto [p1, p2, p3] = random_simplex_point(g);
    const ChoiOperator e = kraus_to_choi(pauli_channel(p1, p2, p3));
    const ChiMatrix chi = choi_to_chi(e, pauli_operator_basis());
    ComplexMatrix expected = ComplexMatrix::Zero(4, 4);
    expected.diagonal() << 2 * (1 - p1 - p2 - p3), 2 * p1, 2 * p2, 2 * p3;
    EXPECT_LT(max_abs(chi.matrix - expected), 1e-12);
    RealVector ev(4);
    ev << 2 * p1, 2 * p2, 2 * p3, 2 - 2 * (p1 + p2 + p3);
    std::sort(ev.data(), ev.data() + 4);
    EXPECT_LT((sorted_eigenvalues(e.matrix()) - ev).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((sorted_eigenvalues(chi.matrix) - ev).cwiseAbs().maxCoeff(), 1e-10);
  }
}

// Any orthonormal operator basis gives a chi matrix unitarily equivalent to E.
TEST(Chi, BasisChangeKeepsSpectrumAndRoundTrips) {
  std::mt19937_64 g(63);
  const auto paulis = pauli_operator_basis();
  auto random_basis = [&]() {
    const ComplexMatrix u = oracle::random_unitary(4, g);
    std::vector<ComplexMatrix> b(4, ComplexMatrix::Zero(2, 2));
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) b[j] += u(k, j) * paulis[k];
    return b;
  };
  for (int t = 0; t < 50; ++t) {
    const std::vector<ComplexMatrix> kraus = {0.6 * oracle::random_unitary(2, g),
                                              0.8 * oracle::random_unitary(2, g)};
    const ChoiOperator e = kraus_to_choi(KrausSet(kraus));
    const ChiMatrix a = choi_to_chi(e, random_basis());
    const ChiMatrix b = choi_to_chi(e, random_basis());
    EXPECT_LT((sorted_eigenvalues(a.matrix) - sorted_eigenvalues(b.matrix)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(max_abs(chi_to_choi(a, 2, 2).matrix() - e.matrix()), 1e-12);
  }
  std::vector<ComplexMatrix> degenerate = paulis;
  degenerate[3] = degenerate[2];
  EXPECT_THROW(choi_to_chi(kraus_to_choi(identity_channel(2)), degenerate), InvariantViolation);
}

TEST(Choi, MatchesBruteForceAndPreservesTrace) {
  std::mt19937_64 g(64);
  for (int t = 0; t < 10; ++t) {
    // a 2 -> 3 channel from an isometry split into three Kraus operators
    const ComplexMatrix v = oracle::random_unitary(9, g).leftCols(2);
    std::vector<ComplexMatrix> kraus;
    for (int m = 0; m < 3; ++m) kraus.push_back(v.middleRows(3 * m, 3));
    const ChoiOperator e = kraus_to_choi(KrausSet(kraus));
    EXPECT_LT(max_abs(e.matrix() - oracle::choi_from_kraus(kraus)), 1e-12);
    EXPECT_TRUE(e.trace_preserving());
    const ComplexMatrix rho = oracle::random_state(2, g);
    EXPECT_LT(max_abs(choi_apply_matrix(e, rho) - oracle::apply_kraus(kraus, rho)), 1e-12);
  }
  EXPECT_THROW(KrausSet({2.0 * identity(2)}), InvariantViolation);
}

TEST(ProcessFigures, EntropyAndError) {
  const ChoiOperator id = kraus_to_choi(identity_channel(2));
  EXPECT_NEAR(process_entropy(id), 0.0, 1e-12);
  EXPECT_NEAR(process_entropy(kraus_to_choi(pauli_channel(0.25, 0.25, 0.25))), std::log(4.0), 1e-12);
  EXPECT_EQ(hs_process_error(id, id), 0.0);
  // orthogonal rank-one Choi operators: (1/4)(4 + 4 - 0)
  EXPECT_NEAR(hs_process_error(id, kraus_to_choi(unitary_channel(pauli_x()))), 2.0, 1e-14);
  // fully depolarizing E = 1/2: (1/4)(4 + 1 - 2)
  const ChoiOperator dep = kraus_to_choi(pauli_channel(0.25, 0.25, 0.25));
  EXPECT_NEAR(hs_process_error(id, dep), 0.75, 1e-14);
  EXPECT_EQ(hs_process_error(id, dep), hs_process_error(dep, id));
}

// K'_m = sum_n U_mn K_n with U^dagger U = 1 describes the same channel.
TEST(Choi, KrausMixingInvariance) {
  std::mt19937_64 g(65);
  for (int t = 0; t < 50; ++t) {
    const ComplexMatrix v = oracle::random_unitary(6, g).leftCols(2);
    const std::vector<ComplexMatrix> kraus = {v.topRows(2), v.middleRows(2, 2), v.bottomRows(2)};
    const ComplexMatrix u = oracle::random_unitary(5, g).leftCols(3);  // 5x3, u^dagger u = 1
    std::vector<ComplexMatrix> mixed(5, ComplexMatrix::Zero(2, 2));
    for (int m = 0; m < 5; ++m)
      for (int n = 0; n < 3; ++n) mixed[m] += u(m, n) * kraus[n];
    EXPECT_LT(max_abs(kraus_to_choi(KrausSet(mixed)).matrix() - kraus_to_choi(KrausSet(kraus)).matrix()), 1e-12);
  }
}

TEST(Chi, RoundTripAcrossDimensions) {
  std::mt19937_64 g(66);
  for (int di = 2; di <= 3; ++di)
    for (int dout = 2; dout <= 3; ++dout) {
      const ComplexMatrix v = oracle::random_unitary(2 * dout, g).leftCols(di);
      const KrausSet kraus({v.topRows(dout), v.bottomRows(dout)});
      const ChoiOperator e = kraus_to_choi(kraus);
      const ComplexMatrix u = oracle::random_unitary(di * dout, g);
      const auto units = matrix_unit_basis(dout, di);
      std::vector<ComplexMatrix> basis(units.size(), ComplexMatrix::Zero(dout, di));
      for (std::size_t j = 0; j < units.size(); ++j)
        for (std::size_t k = 0; k < units.size(); ++k) basis[j] += u(Eigen::Index(k), Eigen::Index(j)) * units[k];
      const ChiMatrix chi = choi_to_chi(e, basis);
      EXPECT_LT((sorted_eigenvalues(chi.matrix) - sorted_eigenvalues(e.matrix())).cwiseAbs().maxCoeff(), 1e-10);
      EXPECT_LT(max_abs(chi_to_choi(chi, di, dout).matrix() - e.matrix()), 1e-10);
    }
}

TEST(Choi, ApplyIsLinearInTheState) {
  std::mt19937_64 g(67);
  const ChoiOperator e = kraus_to_choi(pauli_channel(0.1, 0.2, 0.3));
  const ComplexMatrix a = oracle::random_state(2, g), b = oracle::random_state(2, g);
  EXPECT_LT(max_abs(choi_apply_matrix(e, 0.3 * a + 0.7 * b) -
                    (0.3 * choi_apply_matrix(e, a) + 0.7 * choi_apply_matrix(e, b))), 1e-12);
  EXPECT_THROW(choi_apply_matrix(e, identity(3) / 3.0), DimensionMismatch);
}

// ---- ML and MLME process estimation --------------------------------------------

TEST(QptMl, IdentityChannel) {
  const ChoiOperator truth = kraus_to_choi(identity_channel(2));
  const ProcessDataset data = simulate_process_dataset(truth, qubit_inputs(), make_six(), 20000, 71);
  const ProcessEstimationReport r = qpt_ml_estimate(data);
  expect_sound(r);
  ASSERT_TRUE(r.converged);
  EXPECT_LE(hs_process_error(r.estimator, truth), 5e-3);
  EXPECT_EQ(r.config.lambda, 0.0);
}

TEST(QptMl, PauliChannel) {
  const ChoiOperator truth = kraus_to_choi(pauli_channel(0.1, 0.05, 0.2));
  const ProcessDataset data = simulate_process_dataset(truth, qubit_inputs(), make_six(), 20000, 72);
  const ProcessEstimationReport r = qpt_ml_estimate(data);
  expect_sound(r);
  ASSERT_TRUE(r.converged);
  EXPECT_LE(hs_process_error(r.estimator, truth), 5e-3);
  // extremal equation W E = (Lambda (x) 1) E, and then tr_K{W E} = Lambda
  // with Lambda = sqrt(tr_K{W E W})
  const ComplexMatrix w = w_ml_operator(data, r.estimator);
  const ComplexMatrix& e = r.estimator.matrix();
  const ComplexMatrix lagrange = matrix_sqrt_psd(hermitize(partial_trace(w * e * w, 2, 2, Subsystem::K)));
  EXPECT_LT(max_abs(w * e - kron(lagrange, identity(2)) * e), 1e-8);
  EXPECT_LT(max_abs(partial_trace(w * e, 2, 2, Subsystem::K) - lagrange), 1e-8);
}

TEST(QptMl, RandomStartsAgree) {
  std::mt19937_64 g(73);
  const ChoiOperator truth = kraus_to_choi(pauli_channel(0.1, 0.05, 0.2));
  const ProcessDataset data = simulate_process_dataset(truth, qubit_inputs(), make_six(), 5000, 74);
  const ProcessEstimationReport a = qpt_ml_estimate(data);
  const ChoiOperator start = kraus_to_choi(unitary_channel(oracle::random_unitary(2, g)));
  const ProcessEstimationReport b = qpt_ml_estimate(data, {}, start);
  expect_sound(b);
  ASSERT_TRUE(a.converged && b.converged);
  EXPECT_LT(hs_process_error(a.estimator, b.estimator), 1e-8);
}

TEST(QptMlme, CompleteDataMatchesMl) {
  const ChoiOperator truth = kraus_to_choi(pauli_channel(0.1, 0.05, 0.2));
  const ProcessDataset data = simulate_process_dataset(truth, qubit_inputs(), make_six(), 20000, 75);
  const ProcessEstimationReport a = qpt_ml_estimate(data);
  const ProcessEstimationReport b = qpt_mlme_estimate(data);
  expect_sound(b);
  ASSERT_TRUE(b.converged);
  EXPECT_LT(hs_process_error(a.estimator, b.estimator), 1e-6);
}

// One input leaves most of the process undetermined; MLME fills it in with
// the most mixed choice, ML only matches the data.
TEST(QptMlme, SingleInput) {
  const ChoiOperator truth = kraus_to_choi(identity_channel(2));
  const ProcessDataset data =
      simulate_process_dataset(truth, {bloch_to_rho({0, 0, 1})}, make_computational_von_neumann(2), 10000, 76);
  const ProcessEstimationReport r = qpt_mlme_estimate(data);
  expect_sound(r);
  ASSERT_TRUE(r.converged);
  std::mt19937_64 g(77);
  const ChoiOperator start = kraus_to_choi(unitary_channel(oracle::random_unitary(2, g)));
  const ProcessEstimationReport ml = qpt_ml_estimate(data, {}, start);
  expect_sound(ml);
  const auto p_mlme = process_probabilities(r.estimator, data.inputs, data.pom);
  const auto p_ml = process_probabilities(ml.estimator, data.inputs, data.pom);
  for (std::size_t m = 0; m < 2; ++m) EXPECT_NEAR(p_mlme[0][m], p_ml[0][m], 1e-6);
  EXPECT_GE(r.entropy, ml.entropy - 1e-6);
  EXPECT_GT(r.entropy, 1.0);
  EXPECT_LE(r.entropy, std::log(4.0));
  // the image of |0> is pinned by the data
  const DensityMatrix out = choi_apply(r.estimator, bloch_to_rho({0, 0, 1}));
  EXPECT_GT(rho_to_bloch(out).z, 0.95);
}

// Scaling every outcome by the same efficiency changes nothing.
TEST(QptMl, UniformEfficiencyInvariance) {
  const ChoiOperator truth = kraus_to_choi(pauli_channel(0.1, 0.05, 0.2));
  const ProcessDataset data = simulate_process_dataset(truth, qubit_inputs(), make_six(), 5000, 78);
  ProcessDataset lossy = data;
  lossy.pom = apply_uniform_efficiency(data.pom, 0.7);
  lossy.n_undetected.clear();
  const ProcessEstimationReport a = qpt_ml_estimate(data);
  const ProcessEstimationReport b = qpt_ml_estimate(lossy);
  expect_sound(b);
  ASSERT_TRUE(b.converged);
  EXPECT_LT(max_abs(a.estimator.matrix() - b.estimator.matrix()), 1e-6);
}

TEST(QptMl, ImperfectCorrection) {
  const ChoiOperator id = kraus_to_choi(identity_channel(2));
  ProcessDataset data = simulate_process_dataset(id, qubit_inputs(), make_six(), 100, 79);
  data.pom = apply_uniform_efficiency(data.pom, 0.5);
  // eta = (1/L) sum_l tr{rho_l^T (x) G E}/... = 0.5, so W0 = (1/L) sum_l rho_l^T (x) 1
  ComplexMatrix expected = ComplexMatrix::Zero(4, 4);
  for (const DensityMatrix& rho : data.inputs) expected += kron(rho.matrix().transpose(), identity(2)) / 4.0;
  EXPECT_LT(max_abs(qpt_imperfect_correction(data, id) - expected), 1e-12);
}

TEST(SequentialStopping, NestedInputSets) {
  const ChoiOperator truth = kraus_to_choi(pauli_channel(0.1, 0.05, 0.2));
  std::vector<DensityMatrix> inputs = qubit_inputs();
  const ProcessEstimationReport four =
      qpt_ml_estimate(simulate_process_dataset(truth, inputs, make_six(), 50000, 80));
  inputs.push_back(bloch_to_rho({-1, 0, 0}));
  inputs.push_back(bloch_to_rho({0, -1, 0}));
  const ProcessEstimationReport six =
      qpt_ml_estimate(simulate_process_dataset(truth, inputs, make_six(), 50000, 81));
  EXPECT_TRUE(sequential_stopping({four, six}, 1e-2));
  EXPECT_FALSE(sequential_stopping({four, six}, 0.0));
  EXPECT_TRUE(sequential_stopping({six, six}, 1e-300));
  EXPECT_THROW(sequential_stopping({four}, 1.0), InvariantViolation);
}

TEST(QptMl, Preconditions) {
  const ChoiOperator id = kraus_to_choi(identity_channel(2));
  ProcessDataset data = simulate_process_dataset(id, qubit_inputs(), make_six(), 0, 1);
  EXPECT_THROW(qpt_ml_estimate(data), InvariantViolation);
  data = simulate_process_dataset(id, qubit_inputs(), make_six(), 10, 1);
  data.counts.pop_back();
  EXPECT_THROW(qpt_ml_estimate(data), DimensionMismatch);
  data = simulate_process_dataset(id, qubit_inputs(), make_six(), 10, 1);
  const ChoiOperator wrong = kraus_to_choi(identity_channel(3));
  EXPECT_THROW(qpt_ml_estimate(data, {}, wrong), DimensionMismatch);
  EXPECT_THROW(hs_process_error(id, wrong), DimensionMismatch);
}
