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

// JSON forms of everything the command-line tool reads or writes. Complex
// numbers are [re, im] pairs, matrices are arrays of rows. Doubles are written
// with round-trip precision, so parse(emit(x)) reproduces x bit for bit.

#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "qtomo/channels.hpp"
#include "qtomo/data_sim.hpp"
#include "qtomo/pom.hpp"
#include "qtomo/process_estimators.hpp"
#include "qtomo/state_estimators.hpp"

namespace qtomo::io {

using Json = nlohmann::json;

// ---- files --------------------------------------------------------------------

inline Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

inline void write_json_file(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

// Runs `f`, turning nlohmann type/range errors into ParseError with context.
template <class F>
auto parsing(const std::string& what, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Json::exception& e) {
    throw ParseError(what + ": " + e.what());
  }
}

inline const Json& require_key(const Json& j, const char* key, const std::string& what) {
  if (!j.is_object()) throw ParseError(what + ": expected a JSON object");
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(what + ": missing \"" + key + "\"");
  return *it;
}

// ---- matrices -----------------------------------------------------------------

inline Json matrix_to_json(const ComplexMatrix& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back({m(r, c).real(), m(r, c).imag()});
    rows.push_back(std::move(row));
  }
  return rows;
}

// Entries may be [re, im] pairs or plain real numbers.
inline ComplexMatrix matrix_from_json(const Json& j, const std::string& what = "matrix") {
  if (!j.is_array() || j.empty()) throw ParseError(what + ": expected a non-empty array of rows");
  const std::size_t cols = j.front().is_array() ? j.front().size() : 0;
  if (cols == 0) throw ParseError(what + ": rows must be non-empty arrays");
  ComplexMatrix m(Eigen::Index(j.size()), Eigen::Index(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    const Json& row = j[r];
    if (!row.is_array() || row.size() != cols) throw ParseError(what + ": ragged rows");
    for (std::size_t c = 0; c < cols; ++c) {
      const Json& x = row[c];
      if (x.is_number()) {
        m(Eigen::Index(r), Eigen::Index(c)) = {x.get<double>(), 0.0};
      } else if (x.is_array() && x.size() == 2 && x[0].is_number() && x[1].is_number()) {
        m(Eigen::Index(r), Eigen::Index(c)) = {x[0].get<double>(), x[1].get<double>()};
      } else {
        throw ParseError(what + ": entry (" + std::to_string(r) + "," + std::to_string(c) +
                         ") is not a number or [re, im] pair");
      }
    }
  }
  return m;
}

inline Json real_vector_to_json(const RealVector& v) {
  return Json(std::vector<double>(v.data(), v.data() + v.size()));
}

// ---- POMs ---------------------------------------------------------------------

inline Json pom_to_json(const Pom& pom) {
  Json outcomes = Json::array();
  for (const ComplexMatrix& o : pom.outcomes()) outcomes.push_back(matrix_to_json(o));
  return {{"dim", pom.dim()}, {"outcomes", outcomes}, {"labels", pom.labels()}};
}

inline Pom pom_from_json(const Json& j) {
  return parsing("POM", [&] {
    const Json& list = require_key(j, "outcomes", "POM");
    if (!list.is_array() || list.empty()) throw ParseError("POM: \"outcomes\" must be a non-empty array");
    std::vector<ComplexMatrix> outcomes;
    for (std::size_t k = 0; k < list.size(); ++k)
      outcomes.push_back(matrix_from_json(list[k], "POM outcome " + std::to_string(k + 1)));
    std::vector<std::string> labels;
    if (auto it = j.find("labels"); it != j.end()) labels = it->get<std::vector<std::string>>();
    if (auto it = j.find("dim"); it != j.end() && it->get<Eigen::Index>() != outcomes.front().rows()) {
      throw DimensionMismatch("POM: \"dim\" differs from the outcome matrices");
    }
    return Pom(std::move(outcomes), std::move(labels));
  });
}

// Names accepted in place of a POM file wherever a pom_ref appears.
inline std::optional<Pom> builtin_pom(const std::string& name) {
  if (name == "builtin:trine") return make_trine();
  if (name == "builtin:six") return make_six();
  if (name == "builtin:qutrit-two-outcome") return make_qutrit_two_outcome();
  const std::string vn = "builtin:computational-";
  if (name.rfind(vn, 0) == 0) {
    const std::string d = name.substr(vn.size());
    if (d.empty() || d.find_first_not_of("0123456789") != std::string::npos || d.size() > 3) {
      throw ParseError("unknown builtin POM " + name);
    }
    return make_computational_von_neumann(std::stoi(d));
  }
  if (name.rfind("builtin:", 0) == 0) throw ParseError("unknown builtin POM " + name);
  return std::nullopt;
}

// A builtin name or a path; relative paths resolve against `base_dir`.
inline Pom resolve_pom_ref(const std::string& ref, const std::filesystem::path& base_dir = {}) {
  if (ref.empty()) throw ParseError("empty pom_ref");
  if (auto p = builtin_pom(ref)) return *p;
  std::filesystem::path path(ref);
  if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
  return pom_from_json(read_json_file(path));
}

inline Json gram_report_to_json(const GramReport& r) {
  return {{"dim", r.dim},
          {"eigenvalues", real_vector_to_json(r.eigenvalues)},
          {"n_positive", r.n_positive},
          {"perfect", r.perfect},
          {"complete", r.complete()},
          {"classification", std::string(to_string(r.classification))}};
}

// ---- states and channels ------------------------------------------------------

inline Json state_to_json(const DensityMatrix& rho) {
  return {{"dim", rho.dim()}, {"matrix", matrix_to_json(rho.matrix())}};
}

// {"matrix": ...} or, for a qubit, {"bloch": [x, y, z]}.
inline DensityMatrix state_from_json(const Json& j) {
  return parsing("state", [&] {
    if (j.is_object() && j.contains("bloch")) {
      const auto s = j.at("bloch").get<std::vector<double>>();
      if (s.size() != 3) throw ParseError("state: \"bloch\" needs three components");
      return bloch_to_rho({s[0], s[1], s[2]});
    }
    DensityMatrix rho(matrix_from_json(require_key(j, "matrix", "state"), "state matrix"));
    if (auto it = j.find("dim"); it != j.end() && it->get<Eigen::Index>() != rho.dim()) {
      throw DimensionMismatch("state: \"dim\" differs from the matrix");
    }
    return rho;
  });
}

inline Json choi_to_json(const ChoiOperator& e) {
  return {{"dim_in", e.dim_in()}, {"dim_out", e.dim_out()}, {"choi", matrix_to_json(e.matrix())}};
}

// {"dim_in", "dim_out", "choi": matrix} or {"kraus": [matrix, ...]}.
inline ChoiOperator channel_from_json(const Json& j) {
  return parsing("channel", [&] {
    if (j.is_object() && j.contains("kraus")) {
      const Json& list = j.at("kraus");
      if (!list.is_array() || list.empty()) throw ParseError("channel: \"kraus\" must be a non-empty array");
      std::vector<ComplexMatrix> ops;
      for (const Json& k : list) ops.push_back(matrix_from_json(k, "Kraus operator"));
      const ChoiOperator e = kraus_to_choi(KrausSet(std::move(ops)));
      if ((j.contains("dim_in") && j.at("dim_in").get<Eigen::Index>() != e.dim_in()) ||
          (j.contains("dim_out") && j.at("dim_out").get<Eigen::Index>() != e.dim_out())) {
        throw DimensionMismatch("channel: declared dimensions differ from the Kraus operators");
      }
      return e;
    }
    return ChoiOperator(require_key(j, "dim_in", "channel").get<Eigen::Index>(),
                        require_key(j, "dim_out", "channel").get<Eigen::Index>(),
                        matrix_from_json(require_key(j, "choi", "channel"), "Choi matrix"));
  });
}

// ---- data ---------------------------------------------------------------------

inline Json counts_to_json(const CountsRecord& c) {
  Json j = {{"pom_ref", c.pom_ref}, {"counts", c.counts}, {"total", c.total}};
  j["n_undetected"] = c.n_undetected ? Json(*c.n_undetected) : Json(nullptr);
  j["seed"] = c.seed ? Json(*c.seed) : Json(nullptr);
  return j;
}

inline CountsRecord counts_from_json(const Json& j) {
  return parsing("counts", [&] {
    CountsRecord c;
    c.counts = require_key(j, "counts", "counts").get<Counts>();
    if (c.counts.empty()) throw ParseError("counts: empty \"counts\" array");
    c.total = j.contains("total") ? j.at("total").get<std::int64_t>()
                                  : std::accumulate(c.counts.begin(), c.counts.end(), std::int64_t{0});
    if (j.contains("pom_ref") && !j.at("pom_ref").is_null()) c.pom_ref = j.at("pom_ref").get<std::string>();
    if (j.contains("n_undetected") && !j.at("n_undetected").is_null()) {
      c.n_undetected = j.at("n_undetected").get<std::int64_t>();
    }
    if (j.contains("seed") && !j.at("seed").is_null()) c.seed = j.at("seed").get<std::uint64_t>();
    c.validate();
    return c;
  });
}

inline Json dataset_to_json(const ProcessDataset& d) {
  Json inputs = Json::array();
  for (const DensityMatrix& rho : d.inputs) inputs.push_back(matrix_to_json(rho.matrix()));
  Json j = {{"dim_in", d.dim_in()},   {"dim_out", d.dim_out()}, {"inputs", inputs},
            {"pom_ref", d.pom_ref},   {"counts", d.counts},     {"n_per_input", d.n_per_input}};
  j["n_undetected"] = d.n_undetected.empty() ? Json(nullptr) : Json(d.n_undetected);
  j["seed"] = d.seed ? Json(*d.seed) : Json(nullptr);
  return j;
}

// The POM comes from pom_ref (builtin name or path relative to `base_dir`).
inline ProcessDataset dataset_from_json(const Json& j, const std::filesystem::path& base_dir = {}) {
  return parsing("dataset", [&] {
    const Json& ref = require_key(j, "pom_ref", "dataset");
    if (!ref.is_string() || ref.get<std::string>().empty()) {
      throw ParseError("dataset: \"pom_ref\" must be a non-empty string");
    }
    const Json& list = require_key(j, "inputs", "dataset");
    if (!list.is_array() || list.empty()) throw ParseError("dataset: \"inputs\" must be a non-empty array");
    std::vector<DensityMatrix> inputs;
    for (const Json& m : list) inputs.emplace_back(matrix_from_json(m, "input state"));
    ProcessDataset d{std::move(inputs),
                     resolve_pom_ref(ref.get<std::string>(), base_dir),
                     require_key(j, "counts", "dataset").get<std::vector<Counts>>(),
                     require_key(j, "n_per_input", "dataset").get<std::int64_t>(),
                     {},
                     std::nullopt,
                     ref.get<std::string>()};
    if (j.contains("n_undetected") && !j.at("n_undetected").is_null()) {
      d.n_undetected = j.at("n_undetected").get<std::vector<std::int64_t>>();
    }
    if (j.contains("seed") && !j.at("seed").is_null()) d.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("dim_in") && j.at("dim_in").get<Eigen::Index>() != d.dim_in()) {
      throw DimensionMismatch("dataset: \"dim_in\" differs from the input states");
    }
    if (j.contains("dim_out") && j.at("dim_out").get<Eigen::Index>() != d.dim_out()) {
      throw DimensionMismatch("dataset: \"dim_out\" differs from the POM dimension");
    }
    d.validate();
    return d;
  });
}

// ---- configuration ------------------------------------------------------------

inline Json config_to_json(const EstimationConfig& c) {
  return {{"epsilon0", c.epsilon0},         {"lambda", c.lambda},
          {"lambda_start", c.lambda_start}, {"lambda_decay", c.lambda_decay},
          {"max_iters", c.max_iters},       {"grad_tol", c.grad_tol},
          {"step_shrink", c.step_shrink},   {"log_floor", c.log_floor}};
}

// Overlays the keys present in `j` onto `base`; unknown keys are an error.
inline EstimationConfig config_from_json(const Json& j, EstimationConfig base = {}) {
  return parsing("config", [&] {
    if (!j.is_object()) throw ParseError("config: expected a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      if (k == "epsilon0") base.epsilon0 = it->get<double>();
      else if (k == "lambda") base.lambda = it->get<double>();
      else if (k == "lambda_start") base.lambda_start = it->get<double>();
      else if (k == "lambda_decay") base.lambda_decay = it->get<double>();
      else if (k == "max_iters") base.max_iters = it->get<int>();
      else if (k == "grad_tol") base.grad_tol = it->get<double>();
      else if (k == "step_shrink") base.step_shrink = it->get<double>();
      else if (k == "log_floor") base.log_floor = it->get<double>();
      else throw ParseError("config: unknown key \"" + k + "\"");
    }
    return base;
  });
}

// ---- reports ------------------------------------------------------------------

inline Json report_to_json(const EstimationReport& r) {
  Json j = {{"kind", "state"},
            {"method", r.method},
            {"dim", r.estimator.dim()},
            {"estimator", matrix_to_json(r.estimator.matrix())},
            {"log_likelihood", r.log_likelihood},
            {"entropy", r.entropy},
            {"iterations", r.iterations},
            {"converged", r.converged},
            {"residual", r.residual},
            {"probabilities", r.probabilities},
            {"n_detected", r.n_detected},
            {"detection_probability", r.detection_probability},
            {"n_estimated", r.n_estimated},
            {"regularizations", r.regularizations},
            {"likelihood_trace", r.likelihood_trace},
            {"objective_trace", r.objective_trace},
            {"config", config_to_json(r.config)}};
  if (r.estimator.dim() == 2) {
    const BlochVector s = rho_to_bloch(r.estimator);
    j["bloch"] = {s.x, s.y, s.z};
  }
  return j;
}

inline EstimationReport state_report_from_json(const Json& j) {
  return parsing("state report", [&] {
    EstimationReport r{j.at("method").get<std::string>(),
                       DensityMatrix(matrix_from_json(j.at("estimator"), "estimator"))};
    r.log_likelihood = j.at("log_likelihood").get<double>();
    r.entropy = j.at("entropy").get<double>();
    r.iterations = j.at("iterations").get<int>();
    r.converged = j.at("converged").get<bool>();
    r.residual = j.at("residual").get<double>();
    r.probabilities = j.at("probabilities").get<std::vector<double>>();
    r.n_detected = j.at("n_detected").get<std::int64_t>();
    r.detection_probability = j.at("detection_probability").get<double>();
    r.n_estimated = j.at("n_estimated").get<double>();
    r.regularizations = j.at("regularizations").get<int>();
    r.likelihood_trace = j.at("likelihood_trace").get<std::vector<double>>();
    r.objective_trace = j.at("objective_trace").get<std::vector<double>>();
    r.config = config_from_json(j.at("config"));
    return r;
  });
}

inline Json report_to_json(const ProcessEstimationReport& r) {
  return {{"kind", "process"},
          {"method", r.method},
          {"dim_in", r.estimator.dim_in()},
          {"dim_out", r.estimator.dim_out()},
          {"estimator", matrix_to_json(r.estimator.matrix())},
          {"log_likelihood", r.log_likelihood},
          {"entropy", r.entropy},
          {"iterations", r.iterations},
          {"converged", r.converged},
          {"residual", r.residual},
          {"max_tp_deviation", r.max_tp_deviation},
          {"regularizations", r.regularizations},
          {"likelihood_trace", r.likelihood_trace},
          {"objective_trace", r.objective_trace},
          {"config", config_to_json(r.config)}};
}

inline ProcessEstimationReport process_report_from_json(const Json& j) {
  return parsing("process report", [&] {
    ProcessEstimationReport r{
        j.at("method").get<std::string>(),
        ChoiOperator(j.at("dim_in").get<Eigen::Index>(), j.at("dim_out").get<Eigen::Index>(),
                     matrix_from_json(j.at("estimator"), "estimator"))};
    r.log_likelihood = j.at("log_likelihood").get<double>();
    r.entropy = j.at("entropy").get<double>();
    r.iterations = j.at("iterations").get<int>();
    r.converged = j.at("converged").get<bool>();
    r.residual = j.at("residual").get<double>();
    r.max_tp_deviation = j.at("max_tp_deviation").get<double>();
    r.regularizations = j.at("regularizations").get<int>();
    r.likelihood_trace = j.at("likelihood_trace").get<std::vector<double>>();
    r.objective_trace = j.at("objective_trace").get<std::vector<double>>();
    r.config = config_from_json(j.at("config"));
    return r;
  });
}

}  // namespace qtomo::io
