#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dip/bus.hpp"
#include "dip/problem.hpp"

namespace dip {

/// How the Newton step is computed each outer iteration.
enum class StepBackend {
  Decomposed,  // per-agent Schur contributions + decentralized CG
  Direct,      // centralized full-KKT factorization (oracle path)
};

struct SolverOptions {
  double epsilon = 1e-6;      // outer tolerance on |F^0|_inf
  double delta0 = 0.1;        // initial barrier parameter
  double delta_min = 1e-12;   // barrier floor
  double sigma = 0.1;         // centering parameter
  double tau = 0.995;         // fraction-to-boundary
  double kappa_eta = 0.5;     // forcing scale
  double theta_eta = 1.0;     // forcing exponent
  int max_outer = 200;
  int max_inner = 0;          // 0: 20 * n_c
  bool warm_start_cg = true;  // reuse previous delta_lambda as CG start
  StepBackend backend = StepBackend::Decomposed;
  int threads = 1;  // >1 runs agent phases under OpenMP; results are identical

  /// When set, the inner tolerance is this constant instead of the forcing
  /// rule (used to measure what inexactness saves).
  std::optional<double> fixed_inner_tolerance;

  void validate() const;
};

enum class SolveStatus { Converged, IterationLimit, Diverged };

const char* solve_status_name(SolveStatus status);

/// Per-outer-iteration diagnostics; one CSV row each.
struct IterationRecord {
  int k = 0;
  double f0_norm = 0.0;      // |F^0(p^k)|_inf
  double fdelta_norm = 0.0;  // |F^delta(p^k)|_inf
  double consensus = 0.0;    // |sum A_i x_i - b|_inf
  double g_inf = 0.0;        // |g(x^k)|_inf
  double h_plus_inf = 0.0;   // |max(0, h(x^k))|_inf, exact zero when feasible
  std::optional<double> objective_rel_err;  // |f^k - f*| / |f*|
  std::optional<double> x_err_inf;          // |x^k - x*|_inf
  int cg_iterations = 0;
  double delta = 0.0;    // barrier parameter used this iteration
  double alpha_p = 0.0;  // primal stepsize applied
  double alpha_d = 0.0;  // dual stepsize applied
  std::int64_t comm_floats = 0;  // floats moved during this iteration
  bool inner_cap_hit = false;
  double inner_tolerance = 0.0;  // forcing tolerance used this iteration
  double cg_exit_residual = 0.0;
};

/// Reference solution for the error columns (oracle or external).
struct Reference {
  Vector x;        // concatenated in subsystem order
  double f = 0.0;  // objective value (same scale as the problem's evaluators)
};

struct SolveResult {
  std::vector<SubsystemPoint> points;
  Vector lambda;
  SolveStatus status = SolveStatus::IterationLimit;
  std::string message;
  std::vector<IterationRecord> records;

  // State at the returned point.
  double final_f0 = 0.0;
  double final_fdelta = 0.0;
  double final_consensus = 0.0;
  double final_g_inf = 0.0;
  double final_h_plus_inf = 0.0;
  double objective = 0.0;
  double final_delta = 0.0;
  int iterations = 0;
  std::int64_t total_inner_iterations = 0;
  CommReport comm;
};

/// Inner tolerance from the forcing rule
///   tol = kappa_eta * min(1, |F|^theta_eta) * |F|, floored at 1e-14.
double forcing_tolerance(double fdelta_norm, const SolverOptions& options);

/// delta^{k+1} = max(delta_min, min(0.9 * delta_k, candidate)).
double update_barrier(double delta_k, double candidate, const SolverOptions& options);

/// Advances (x, v) by alpha_p and (gamma, mu, lambda) by alpha_d; checks that
/// v and mu stay strictly positive.
void apply_step(std::vector<SubsystemPoint>& points, Vector& lambda,
                const std::vector<Vector>& delta_p, const Vector& delta_lambda, double alpha_p,
                double alpha_d);

/// Default initialization: x as given, v = max(1, -h(x) + 1), mu = delta0 / v,
/// gamma = 0. (lambda = 0 is the driver's default.)
std::vector<SubsystemPoint> initialize_points(const PartitionedNlp& problem,
                                              const std::vector<Vector>& x0,
                                              const SolverOptions& options);

/// Runs the outer interior point loop from the given primal guess (one
/// vector per subsystem).
SolveResult solve(const PartitionedNlp& problem, const SolverOptions& options,
                  const std::vector<Vector>& x0, const Reference* reference = nullptr,
                  MessageBus* external_bus = nullptr);

/// Same, from already-initialized points and lambda.
SolveResult solve_from(const PartitionedNlp& problem, const SolverOptions& options,
                       std::vector<SubsystemPoint> points, Vector lambda,
                       const Reference* reference = nullptr, MessageBus* external_bus = nullptr);

/// CSV header shared by the library writer and consumers. Stable.
std::string iteration_csv_header();

/// One CSV line per record; reference-dependent fields stay empty when absent.
std::string iteration_csv_line(const IterationRecord& record);

std::string records_to_csv(const std::vector<IterationRecord>& records);

/// JSON run summary (status, iterations, final norms, communication totals).
std::string summary_to_json(const SolveResult& result, double objective_scale = 1.0);

}  // namespace dip
