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

// qtomo: analyze POMs, simulate counts, estimate states and processes.
//
// Exit codes: 0 success, 2 malformed input, 3 invalid input, 4 estimator did
// not converge (unless --allow-nonconverged), 1 anything else.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qtomo/io.hpp"
#include "qtomo/qtomo.hpp"

namespace fs = std::filesystem;
using namespace qtomo;
using io::Json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitParse = 2;
constexpr int kExitInvalid = 3;
constexpr int kExitNotConverged = 4;

enum class LogLevel { Quiet, Info, Trace };

LogLevel log_level() {
  const char* v = std::getenv("QTOMO_LOG");
  if (v == nullptr || *v == '\0') return LogLevel::Info;
  const std::string s(v);
  if (s == "quiet") return LogLevel::Quiet;
  if (s == "info") return LogLevel::Info;
  if (s == "trace") return LogLevel::Trace;
  throw ParseError("QTOMO_LOG must be quiet, info or trace, got \"" + s + "\"");
}

// info: one line per 1000 accepted steps; trace: every accepted step.
IterationObserver make_observer(LogLevel level) {
  if (level == LogLevel::Quiet) return {};
  const int every = level == LogLevel::Trace ? 1 : 1000;
  return [every](const IterationEvent& e) {
    if (e.iteration % every != 0) return;
    std::cerr << "iter " << e.iteration << " stage " << e.stage << " lambda " << e.lambda
              << " logL " << e.log_likelihood << " defect " << e.defect << " eps " << e.epsilon
              << '\n';
  };
}

fs::path parent_dir(const std::string& file) { return fs::path(file).parent_path(); }

// pom_ref as it should be written into `out`: builtins verbatim, files relative
// to the directory of the file that refers to them.
std::string pom_ref_for(const std::string& pom_arg, const std::string& out) {
  if (pom_arg.rfind("builtin:", 0) == 0 || out.empty()) return pom_arg;
  const fs::path base = fs::absolute(out).parent_path();
  return fs::relative(fs::absolute(pom_arg), base).generic_string();
}

void emit(const std::string& out, const Json& j) {
  if (!out.empty()) io::write_json_file(out, j);
}

// ---- config ---------------------------------------------------------------------

struct ConfigFlags {
  std::string file;
  std::optional<double> lambda;
  std::optional<double> eps;
  std::optional<int> max_iters;
  std::optional<double> tol;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", file, "JSON file with estimation settings")->check(CLI::ExistingFile);
    cmd->add_option("--lambda", lambda, "final entropy multiplier (mlme)");
    cmd->add_option("--eps", eps, "initial step size");
    cmd->add_option("--max-iters", max_iters, "step attempts over all stages");
    cmd->add_option("--tol", tol, "extremal-equation defect for convergence");
  }

  // flag > config file > default
  EstimationConfig resolve() const {
    EstimationConfig c;
    if (!file.empty()) c = io::config_from_json(io::read_json_file(file), c);
    if (lambda) c.lambda = *lambda;
    if (eps) c.epsilon0 = *eps;
    if (max_iters) c.max_iters = *max_iters;
    if (tol) c.grad_tol = *tol;
    c.validate();
    return c;
  }
};

// ---- analyze-pom ----------------------------------------------------------------

struct AnalyzePomArgs {
  std::string pom;
  std::string out;
};

int analyze_pom(const AnalyzePomArgs& a) {
  const Pom pom = io::resolve_pom_ref(a.pom);
  const GramReport r = gram_report(pom);
  std::cout << describe(r.classification) << ", n>0 = " << r.n_positive << '\n';
  std::cout << "dimension " << r.dim << ", " << pom.size() << " outcomes\n";
  std::cout << "Gram eigenvalues:";
  for (Eigen::Index k = 0; k < r.eigenvalues.size(); ++k) std::cout << ' ' << r.eigenvalues(k);
  std::cout << '\n';
  emit(a.out, io::gram_report_to_json(r));
  return kExitOk;
}

// ---- make-pom -------------------------------------------------------------------

struct MakePomArgs {
  std::string kind;
  int dim = 2;
  double mu = 0.0;
  std::optional<double> efficiency;
  std::string out;
};

int make_pom(const MakePomArgs& a) {
  Pom pom = [&] {
    if (a.kind == "trine") return make_trine();
    if (a.kind == "six") return make_six();
    if (a.kind == "qutrit-two-outcome") return make_qutrit_two_outcome();
    if (a.kind == "computational") return make_computational_von_neumann(a.dim);
    if (a.kind == "optical-trine") return optical_trine_outcomes(a.mu);
    throw ParseError("unknown POM kind " + a.kind);
  }();
  if (a.efficiency) pom = apply_uniform_efficiency(pom, *a.efficiency);
  std::cout << a.kind << ": dimension " << pom.dim() << ", " << pom.size() << " outcomes, "
            << (pom.perfect() ? "perfect" : "imperfect") << '\n';
  emit(a.out, io::pom_to_json(pom));
  return kExitOk;
}

// ---- simulate -------------------------------------------------------------------

struct SimulateArgs {
  std::string state;
  std::string channel;
  std::string inputs;
  std::string pom;
  std::int64_t n = 0;
  std::uint64_t seed = 0;
  std::string out;
};

// |0>, |1>, |+>, |+i>: informationally complete for a qubit.
std::vector<DensityMatrix> default_qubit_inputs() {
  return {bloch_to_rho({0, 0, 1}), bloch_to_rho({0, 0, -1}), bloch_to_rho({1, 0, 0}),
          bloch_to_rho({0, 1, 0})};
}

std::vector<DensityMatrix> read_inputs(const std::string& path) {
  const Json j = io::read_json_file(path);
  return io::parsing("inputs", [&] {
    const Json& list = j.is_object() ? io::require_key(j, "inputs", "inputs") : j;
    if (!list.is_array() || list.empty()) throw ParseError("inputs: expected a non-empty array");
    std::vector<DensityMatrix> v;
    for (const Json& s : list)
      v.push_back(s.is_object() ? io::state_from_json(s) : DensityMatrix(io::matrix_from_json(s)));
    return v;
  });
}

int simulate(const SimulateArgs& a) {
  const Pom pom = io::resolve_pom_ref(a.pom);
  const std::string ref = pom_ref_for(a.pom, a.out);
  if (!a.state.empty()) {
    const DensityMatrix rho = io::state_from_json(io::read_json_file(a.state));
    CountsRecord c = sample_counts(rho, pom, a.n, a.seed);
    c.pom_ref = ref;
    std::cout << "counts";
    for (auto n : c.counts) std::cout << ' ' << n;
    std::cout << " (detected " << c.total << ", undetected " << c.n_undetected.value_or(0)
              << ", seed " << a.seed << ")\n";
    emit(a.out, io::counts_to_json(c));
    return kExitOk;
  }
  const ChoiOperator e = io::channel_from_json(io::read_json_file(a.channel));
  std::vector<DensityMatrix> inputs;
  if (!a.inputs.empty()) {
    inputs = read_inputs(a.inputs);
  } else if (e.dim_in() == 2) {
    inputs = default_qubit_inputs();
  } else {
    throw InvariantViolation("simulate: --inputs is required unless the channel input is a qubit");
  }
  ProcessDataset d = simulate_process_dataset(e, inputs, pom, a.n, a.seed);
  d.pom_ref = ref;
  std::cout << "process dataset: " << d.inputs.size() << " inputs, " << pom.size()
            << " outcomes, N = " << a.n << " per input, seed " << a.seed << '\n';
  emit(a.out, io::dataset_to_json(d));
  return kExitOk;
}

// ---- estimate-state -------------------------------------------------------------

struct EstimateStateArgs {
  std::string counts;
  std::string pom;
  std::string method = "ml";
  ConfigFlags flags;
  bool allow_nonconverged = false;
  std::string out;
};

// Eigenbasis of a von Neumann POM (rank-one projectors summing to 1), if it is one.
std::optional<ComplexMatrix> von_neumann_basis(const Pom& pom) {
  if (!pom.perfect() || Eigen::Index(pom.size()) != pom.dim()) return std::nullopt;
  ComplexMatrix basis(pom.dim(), pom.dim());
  for (std::size_t k = 0; k < pom.size(); ++k) {
    const Spectrum s = eigh(pom.outcome(k));
    const Eigen::Index top = s.values.size() - 1;
    if (std::abs(s.values(top) - 1.0) > 1e-10 || (top > 0 && std::abs(s.values(top - 1)) > 1e-10)) {
      return std::nullopt;
    }
    basis.col(Eigen::Index(k)) = s.vectors.col(top);
  }
  return basis;
}

bool is_trine(const Pom& pom) {
  const Pom t = make_trine();
  if (pom.dim() != 2 || pom.size() != 3) return false;
  for (std::size_t k = 0; k < 3; ++k)
    if (max_abs(pom.outcome(k) - t.outcome(k)) > 1e-12) return false;
  return true;
}

EstimationReport closed_form(const Counts& counts, const Pom& pom) {
  require_counts_match(counts, pom);
  std::optional<DensityMatrix> rho;
  if (auto basis = von_neumann_basis(pom)) {
    rho = closed_form_von_neumann_mlme(counts, *basis);
  } else if (is_trine(pom)) {
    rho = closed_form_trine_mlme(counts);
    if (!rho) throw InvariantViolation("closed-form: trine frequencies lie outside the Bloch ball, use --method ml");
  } else {
    throw InvariantViolation("closed-form: only von Neumann and trine measurements have one");
  }
  EstimationReport r{"closed-form", *rho};
  r.log_likelihood = log_likelihood(counts, rho->matrix(), pom);
  r.entropy = von_neumann_entropy(*rho);
  r.converged = true;
  r.probabilities = born_probabilities(*rho, pom);
  r.n_detected = std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
  r.n_estimated = double(r.n_detected);
  r.likelihood_trace = {r.log_likelihood};
  r.objective_trace = {r.log_likelihood / std::max(1.0, double(r.n_detected))};
  r.config.lambda = 0.0;
  return r;
}

int estimate_state(const EstimateStateArgs& a, LogLevel level) {
  const CountsRecord c = io::counts_from_json(io::read_json_file(a.counts));
  Pom pom = [&] {
    if (!a.pom.empty()) return io::resolve_pom_ref(a.pom);
    if (c.pom_ref.empty()) throw ParseError("counts file has no pom_ref and --pom was not given");
    return io::resolve_pom_ref(c.pom_ref, parent_dir(a.counts));
  }();
  require_counts_match(c.counts, pom);
  const EstimationConfig config = a.flags.resolve();
  const IterationObserver observer = make_observer(level);

  EstimationReport r = [&] {
    if (a.method == "closed-form") return closed_form(c.counts, pom);
    if (a.method == "ml") {
      return pom.perfect() ? ml_estimate(c.counts, pom, config, std::nullopt, observer)
                           : extended_ml_estimate(c.counts, pom, config, std::nullopt, observer);
    }
    return pom.perfect() ? mlme_estimate(c.counts, pom, config, observer)
                         : extended_mlme_estimate(c.counts, pom, config, observer);
  }();

  std::cout << r.method << ": logL = " << r.log_likelihood << ", entropy = " << r.entropy
            << ", iterations = " << r.iterations << ", converged = " << std::boolalpha
            << r.converged << ", defect = " << r.residual << '\n';
  if (r.estimator.dim() == 2) {
    const BlochVector s = rho_to_bloch(r.estimator);
    std::cout << "Bloch vector (" << s.x << ", " << s.y << ", " << s.z << ")\n";
  }
  if (!pom.perfect()) {
    std::cout << "detection probability " << r.detection_probability << ", emitted copies ~ "
              << r.n_estimated << '\n';
  }
  emit(a.out, io::report_to_json(r));
  if (!r.converged && !a.allow_nonconverged) {
    std::cerr << "qtomo: estimator did not converge (defect " << r.residual << ")\n";
    return kExitNotConverged;
  }
  return kExitOk;
}

// ---- estimate-process -----------------------------------------------------------

struct EstimateProcessArgs {
  std::string dataset;
  std::string method = "ml";
  std::string reference;
  ConfigFlags flags;
  bool allow_nonconverged = false;
  std::string out;
};

int estimate_process(const EstimateProcessArgs& a, LogLevel level) {
  const ProcessDataset d = io::dataset_from_json(io::read_json_file(a.dataset), parent_dir(a.dataset));
  std::optional<ChoiOperator> reference;
  if (!a.reference.empty()) {
    reference = io::channel_from_json(io::read_json_file(a.reference));
    if (reference->dim_in() != d.dim_in() || reference->dim_out() != d.dim_out()) {
      throw DimensionMismatch("--reference dimensions differ from the dataset");
    }
  }
  const EstimationConfig config = a.flags.resolve();
  const IterationObserver observer = make_observer(level);
  const ProcessEstimationReport r = a.method == "ml"
                                        ? qpt_ml_estimate(d, config, std::nullopt, observer)
                                        : qpt_mlme_estimate(d, config, observer);

  std::cout << "process " << r.method << ": logL = " << r.log_likelihood
            << ", process entropy = " << r.entropy << ", iterations = " << r.iterations
            << ", converged = " << std::boolalpha << r.converged << ", defect = " << r.residual
            << ", max |tr_K E - 1| = " << r.max_tp_deviation << '\n';
  Json j = io::report_to_json(r);
  if (reference) {
    const double hs = hs_process_error(r.estimator, *reference);
    std::cout << "HS error vs reference = " << hs << '\n';
    j["hs_error"] = hs;
  }
  emit(a.out, j);
  if (!r.converged && !a.allow_nonconverged) {
    std::cerr << "qtomo: estimator did not converge (defect " << r.residual << ")\n";
    return kExitNotConverged;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qtomo: likelihood-based quantum state and process estimation"};
  app.require_subcommand(1);

  AnalyzePomArgs analyze;
  auto* c_analyze = app.add_subcommand("analyze-pom", "Gram-matrix analysis of a POM");
  c_analyze->add_option("pom", analyze.pom, "POM file or builtin:NAME")->required();
  c_analyze->add_option("--out", analyze.out, "write the report as JSON");

  MakePomArgs mk;
  auto* c_make = app.add_subcommand("make-pom", "write a standard POM as JSON");
  c_make->add_option("--kind", mk.kind, "trine, six, qutrit-two-outcome, computational, optical-trine")
      ->required();
  c_make->add_option("--dim", mk.dim, "dimension for computational")->check(CLI::Range(1, 64));
  c_make->add_option("--mu", mk.mu, "splitter amplitude for optical-trine");
  c_make->add_option("--efficiency", mk.efficiency, "uniform detector efficiency in (0, 1]");
  c_make->add_option("--out", mk.out, "output file");

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "draw multinomial counts");
  auto* o_state = c_sim->add_option("--state", sim.state, "state file")->check(CLI::ExistingFile);
  auto* o_chan = c_sim->add_option("--channel", sim.channel, "channel file (Kraus or Choi)")
                     ->check(CLI::ExistingFile);
  o_state->excludes(o_chan);
  c_sim->add_option("--inputs", sim.inputs, "input states for --channel")->check(CLI::ExistingFile);
  c_sim->add_option("--pom", sim.pom, "POM file or builtin:NAME")->required();
  c_sim->add_option("-N", sim.n, "copies (per input for a channel)")->required()->check(CLI::NonNegativeNumber);
  c_sim->add_option("--seed", sim.seed, "random seed (default 0)");
  c_sim->add_option("--out", sim.out, "output file");

  EstimateStateArgs est;
  auto* c_est = app.add_subcommand("estimate-state", "ML / MLME state estimation");
  c_est->add_option("--counts", est.counts, "counts file")->required()->check(CLI::ExistingFile);
  c_est->add_option("--pom", est.pom, "POM file or builtin:NAME (default: the counts' pom_ref)");
  c_est->add_option("--method", est.method)->check(CLI::IsMember({"ml", "mlme", "closed-form"}));
  est.flags.attach(c_est);
  c_est->add_flag("--allow-nonconverged", est.allow_nonconverged, "exit 0 even without convergence");
  c_est->add_option("--out", est.out, "report file");

  EstimateProcessArgs proc;
  auto* c_proc = app.add_subcommand("estimate-process", "ML / MLME process estimation");
  c_proc->add_option("--dataset", proc.dataset, "process dataset file")->required()->check(CLI::ExistingFile);
  c_proc->add_option("--method", proc.method)->check(CLI::IsMember({"ml", "mlme"}));
  c_proc->add_option("--reference", proc.reference, "known channel for the HS error")
      ->check(CLI::ExistingFile);
  proc.flags.attach(c_proc);
  c_proc->add_flag("--allow-nonconverged", proc.allow_nonconverged, "exit 0 even without convergence");
  c_proc->add_option("--out", proc.out, "report file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitParse;
  }

  try {
    const LogLevel level = log_level();
    if (c_analyze->parsed()) return analyze_pom(analyze);
    if (c_make->parsed()) return make_pom(mk);
    if (c_sim->parsed()) {
      if (sim.state.empty() == sim.channel.empty()) throw ParseError("simulate: give --state or --channel");
      return simulate(sim);
    }
    if (c_est->parsed()) return estimate_state(est, level);
    if (c_proc->parsed()) return estimate_process(proc, level);
  } catch (const ParseError& e) {
    std::cerr << "qtomo: parse error: " << e.what() << '\n';
    return kExitParse;
  } catch (const InvariantViolation& e) {
    std::cerr << "qtomo: invalid input: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const DimensionMismatch& e) {
    std::cerr << "qtomo: dimension mismatch: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "qtomo: " << e.what() << '\n';
    return kExitOther;
  }
  return kExitOther;
}
