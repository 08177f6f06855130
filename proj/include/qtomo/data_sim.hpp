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
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qtomo/channels.hpp"
#include "qtomo/pom.hpp"
#include "qtomo/rng.hpp"
#include "qtomo/states.hpp"

namespace qtomo {

using Counts = std::vector<std::int64_t>;

// Occurrence counts n_j. `total` is the number of recorded (detected) events
// and always equals the sum of counts; copies lost to detector inefficiency
// are reported separately in `n_undetected` when known.
struct CountsRecord {
  Counts counts;
  std::int64_t total = 0;
  std::optional<std::int64_t> n_undetected;
  std::optional<std::uint64_t> seed;
  std::string pom_ref;

  static CountsRecord from_counts(Counts counts) {
    CountsRecord r;
    r.total = std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
    r.counts = std::move(counts);
    r.validate();
    return r;
  }

  void validate() const {
    for (std::int64_t n : counts)
      if (n < 0) throw InvariantViolation("counts must be non-negative");
    if (std::accumulate(counts.begin(), counts.end(), std::int64_t{0}) != total) {
      throw InvariantViolation("counts do not sum to the recorded total");
    }
    if (n_undetected && *n_undetected < 0) throw InvariantViolation("n_undetected is negative");
  }

  std::vector<double> frequencies() const {
    std::vector<double> nu(counts.size(), 0.0);
    if (total > 0)
      for (std::size_t j = 0; j < counts.size(); ++j) nu[j] = double(counts[j]) / double(total);
    return nu;
  }
};

inline void require_pom_dim(const ComplexMatrix& rho, const Pom& pom, const char* what) {
  if (rho.rows() != pom.dim()) {
    throw DimensionMismatch(std::string(what) + ": state dimension " +
                            std::to_string(rho.rows()) + " differs from POM dimension " +
                            std::to_string(pom.dim()));
  }
}

// p_j = Re tr{rho Pi_j}, tiny negative round-off clamped to 0.
inline std::vector<double> born_probabilities(const ComplexMatrix& rho, const Pom& pom) {
  require_pom_dim(rho, pom, "born_probabilities");
  std::vector<double> p(pom.size());
  for (std::size_t j = 0; j < pom.size(); ++j)
    p[j] = std::max(0.0, trace_inner(rho, pom.outcome(j)));
  return p;
}

inline std::vector<double> born_probabilities(const DensityMatrix& rho, const Pom& pom) {
  return born_probabilities(rho.matrix(), pom);
}

namespace detail {

// Multinomial draw by sequential binomial conditioning. Any probability mass
// missing from `p` is an implicit "not detected" bucket; its count is
// returned through `undetected`.
inline Counts draw_multinomial(const std::vector<double>& p, bool closed, std::int64_t n_total,
                               Rng& rng, std::int64_t& undetected) {
  const double mass = std::accumulate(p.begin(), p.end(), 0.0);
  if (closed ? std::abs(mass - 1.0) > 1e-9 : mass > 1.0 + 1e-9) {
    throw InvariantViolation("sampling: probabilities sum to " + std::to_string(mass));
  }
  Counts n(p.size(), 0);
  std::int64_t remaining = n_total;
  double left = closed ? mass : 1.0;
  for (std::size_t j = 0; j < p.size() && remaining > 0; ++j) {
    if (closed && j + 1 == p.size()) {
      n[j] = remaining;
      remaining = 0;
      break;
    }
    const double q = left > 0.0 ? std::clamp(p[j] / left, 0.0, 1.0) : 0.0;
    n[j] = rng.binomial(remaining, q);
    remaining -= n[j];
    left -= p[j];
  }
  undetected = remaining;
  return n;
}

}  // namespace detail

inline CountsRecord sample_counts(const DensityMatrix& rho, const Pom& pom, std::int64_t n_total,
                                  std::uint64_t seed) {
  if (n_total < 0) throw InvariantViolation("sample_counts: n_total must be >= 0");
  Rng rng(seed);
  std::int64_t undetected = 0;
  CountsRecord r = CountsRecord::from_counts(
      detail::draw_multinomial(born_probabilities(rho, pom), pom.perfect(), n_total, rng,
                               undetected));
  r.n_undetected = undetected;
  r.seed = seed;
  return r;
}

// ---- process data -----------------------------------------------------------

// Input states rho_l, L of them, each sent N times through the process and
// measured with `pom`. counts[l][m] = n_lm.
struct ProcessDataset {
  std::vector<DensityMatrix> inputs;
  Pom pom;
  std::vector<Counts> counts;
  std::int64_t n_per_input = 0;
  std::vector<std::int64_t> n_undetected;  // per input, empty when unknown
  std::optional<std::uint64_t> seed;
  std::string pom_ref;

  Eigen::Index dim_in() const { return inputs.empty() ? 0 : inputs.front().dim(); }
  Eigen::Index dim_out() const { return pom.dim(); }

  void validate() const {
    if (inputs.empty()) throw InvariantViolation("process dataset: no input states");
    for (const DensityMatrix& r : inputs)
      if (r.dim() != dim_in()) throw DimensionMismatch("process dataset: input dims differ");
    if (counts.size() != inputs.size()) {
      throw DimensionMismatch("process dataset: one counts row per input is required");
    }
    for (const Counts& row : counts) {
      if (row.size() != pom.size()) {
        throw DimensionMismatch("process dataset: counts row length differs from outcome count");
      }
      std::int64_t s = 0;
      for (std::int64_t n : row) {
        if (n < 0) throw InvariantViolation("process dataset: negative count");
        s += n;
      }
      if (pom.perfect() ? s != n_per_input : s > n_per_input) {
        throw InvariantViolation("process dataset: row sum " + std::to_string(s) +
                                 " inconsistent with n_per_input " + std::to_string(n_per_input));
      }
    }
    if (!n_undetected.empty() && n_undetected.size() != inputs.size()) {
      throw DimensionMismatch("process dataset: n_undetected needs one entry per input");
    }
  }
};

// p_lm = (1/L) tr{E (rho_l^T (x) Pi_m)}.
inline std::vector<std::vector<double>> process_probabilities(
    const ChoiOperator& e, const std::vector<DensityMatrix>& inputs, const Pom& pom) {
  if (pom.dim() != e.dim_out()) {
    throw DimensionMismatch("process_probabilities: POM dimension differs from channel output");
  }
  const double inv_l = 1.0 / double(inputs.size());
  std::vector<std::vector<double>> p;
  for (const DensityMatrix& rho : inputs) {
    const ComplexMatrix out = choi_apply_matrix(e, rho.matrix());
    std::vector<double> row(pom.size());
    for (std::size_t m = 0; m < pom.size(); ++m) row[m] = inv_l * trace_inner(out, pom.outcome(m));
    p.push_back(std::move(row));
  }
  return p;
}

// Input l draws from stream l of the seed.
inline ProcessDataset simulate_process_dataset(const ChoiOperator& e,
                                               const std::vector<DensityMatrix>& inputs,
                                               const Pom& pom, std::int64_t n_per_input,
                                               std::uint64_t seed) {
  if (n_per_input < 0) throw InvariantViolation("simulate_process_dataset: N must be >= 0");
  if (inputs.empty()) throw InvariantViolation("simulate_process_dataset: no inputs");
  const auto p = process_probabilities(e, inputs, pom);
  const double l = double(inputs.size());
  ProcessDataset d{inputs, pom, {}, n_per_input, {}, seed, {}};
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    std::vector<double> row = p[i];
    for (double& x : row) x = std::max(0.0, x * l);
    Rng rng(seed, i);
    std::int64_t undetected = 0;
    d.counts.push_back(detail::draw_multinomial(row, pom.perfect() && e.trace_preserving(),
                                                n_per_input, rng, undetected));
    d.n_undetected.push_back(undetected);
  }
  d.validate();
  return d;
}

}  // namespace qtomo
