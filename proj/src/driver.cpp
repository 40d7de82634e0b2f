#include "dip/driver.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <optional>
#include <span>

#include "dip/agent.hpp"
#include "dip/dcg.hpp"
#include "dip/oracle.hpp"
#include "dip/parallel.hpp"

namespace dip {

const char* solve_status_name(SolveStatus status) {
  switch (status) {
    case SolveStatus::Converged:
      return "converged";
    case SolveStatus::IterationLimit:
      return "iteration_limit";
    case SolveStatus::Diverged:
      return "diverged";
  }
  return "?";
}

void SolverOptions::validate() const {
  if (epsilon <= 0) throw InstanceError("options: epsilon must be positive");
  if (!(tau > 0 && tau < 1)) throw InstanceError("options: tau must lie in (0, 1)");
  if (!(sigma > 0 && sigma < 1)) throw InstanceError("options: sigma must lie in (0, 1)");
  if (!(delta0 > delta_min && delta_min > 0)) {
    throw InstanceError("options: require delta0 > delta_min > 0");
  }
  if (kappa_eta <= 0 || theta_eta <= 0) throw InstanceError("options: forcing parameters positive");
  if (max_outer < 1) throw InstanceError("options: max_outer must be at least 1");
}

double forcing_tolerance(double fdelta_norm, const SolverOptions& options) {
  if (fdelta_norm < 0) throw InstanceError("forcing_tolerance: negative norm");
  const double tol =
      options.kappa_eta * std::min(1.0, std::pow(fdelta_norm, options.theta_eta)) * fdelta_norm;
  return std::max(tol, 1e-14);
}

double update_barrier(double delta_k, double candidate, const SolverOptions& options) {
  return std::max(options.delta_min, std::min(0.9 * delta_k, candidate));
}

void apply_step(std::vector<SubsystemPoint>& points, Vector& lambda,
                const std::vector<Vector>& delta_p, const Vector& delta_lambda, double alpha_p,
                double alpha_d) {
  if (!(alpha_p > 0 && alpha_p <= 1 && alpha_d > 0 && alpha_d <= 1)) {
    throw InstanceError("apply_step: stepsizes must lie in (0, 1]");
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    SubsystemPoint& p = points[i];
    const Vector& dp = delta_p[i];
    const int n_x = static_cast<int>(p.x.size());
    const int n_h = static_cast<int>(p.v.size());
    const int n_g = static_cast<int>(p.gamma.size());
    p.x += alpha_p * dp.head(n_x);
    p.v += alpha_p * dp.segment(n_x, n_h);
    p.gamma += alpha_d * dp.segment(n_x + n_h, n_g);
    p.mu += alpha_d * dp.tail(n_h);
    if (n_h > 0 && (p.v.minCoeff() <= 0 || p.mu.minCoeff() <= 0)) {
      throw InteriorError("apply_step: slack or multiplier positivity lost in subsystem " +
                          std::to_string(i + 1) + "; fraction-to-boundary was bypassed");
    }
  }
  lambda += alpha_d * delta_lambda;
}

std::vector<SubsystemPoint> initialize_points(const PartitionedNlp& problem,
                                              const std::vector<Vector>& x0,
                                              const SolverOptions& options) {
  if (static_cast<int>(x0.size()) != problem.num_subsystems()) {
    throw InstanceError("initialize_points: need one primal guess per subsystem");
  }
  std::vector<SubsystemPoint> points(problem.num_subsystems());
  for (int i = 0; i < problem.num_subsystems(); ++i) {
    const Subsystem& sub = problem.subsystem(i);
    SubsystemPoint& p = points[i];
    p.x = x0[i];
    const SubsystemEval eval = evaluate(sub, p.x);
    const int n_h = sub.num_ineq();
    p.v = Vector::Ones(n_h).cwiseMax(-eval.h + Vector::Ones(n_h));
    p.mu = options.delta0 * p.v.cwiseInverse();
    p.gamma = Vector::Zero(sub.num_eq());
  }
  return points;
}

namespace {

/// Everything one agent computes and stores during a single outer iteration.
struct AgentScratch {
  SubsystemEval eval;
  SubsystemDerivs derivs;
  Vector newton_f;
  Vector a_times_x;
  double f0_block = 0.0;
  double fdelta_block = 0.0;
  double g_inf = 0.0;
  double h_plus_inf = 0.0;
  LocalKkt kkt;
  SchurContribution schur;
  Vector delta_p;
  double alpha_p = 1.0;
  double alpha_d = 1.0;
  double barrier_candidate = 0.0;
};

}  // namespace

SolveResult solve(const PartitionedNlp& problem, const SolverOptions& options,
                  const std::vector<Vector>& x0, const Reference* reference,
                  MessageBus* external_bus) {
  options.validate();
  std::vector<SubsystemPoint> points = initialize_points(problem, x0, options);
  return solve_from(problem, options, std::move(points), Vector::Zero(problem.coupling_dim()),
                    reference, external_bus);
}

SolveResult solve_from(const PartitionedNlp& problem, const SolverOptions& options,
                       std::vector<SubsystemPoint> points, Vector lambda,
                       const Reference* reference, MessageBus* external_bus) {
  options.validate();
  set_threads(options.threads);
  const bool parallel = options.threads > 1;
  const bool decomposed = options.backend == StepBackend::Decomposed;
  const int n_sub = problem.num_subsystems();
  const int n_c = problem.coupling_dim();

  MessageBus own_bus(n_sub);
  MessageBus& bus = external_bus ? *external_bus : own_bus;

  // The direct (oracle) backend is centralized: reductions stay local and do
  // not touch the bus, so its communication counters remain zero.
  std::vector<double> shares(n_sub);
  auto reduce_max = [&](CommPhase phase) {
    if (decomposed) return bus.global_max(std::span<const double>(shares), phase);
    double m = shares[0];
    for (double v : shares) m = std::max(m, v);
    return m;
  };
  auto reduce_min = [&]() {
    if (decomposed) return bus.global_min(std::span<const double>(shares));
    double m = shares[0];
    for (double v : shares) m = std::min(m, v);
    return m;
  };
  auto reduce_sum = [&]() {
    if (decomposed) return bus.global_sum(std::span<const double>(shares), CommPhase::Reduction);
    double acc = 0;
    for (double v : shares) acc += v;
    return acc;
  };

  SolveResult result;
  result.lambda = lambda;
  double delta = options.delta0;
  Vector warm_dlambda;
  std::vector<AgentScratch> scratch(n_sub);
  std::vector<Vector> delta_ps(n_sub);

  double f0_norm = 0.0, fdelta_norm = 0.0, consensus = 0.0, g_inf = 0.0, h_plus_inf = 0.0;
  double objective = 0.0;

  // Evaluates the problem at the current iterate and refreshes all norms.
  auto refresh_state = [&]() {
    for_each_agent(n_sub, parallel, [&](int i) {
      const Subsystem& sub = problem.subsystem(i);
      AgentScratch& ws = scratch[i];
      const SubsystemPoint& p = points[i];
      ws.eval = evaluate(sub, p.x);
      ws.derivs = evaluate_derivatives(sub, p.x, p.gamma, p.mu);
      ws.newton_f = newton_residual(sub, p, lambda, delta, ws.eval, ws.derivs);
      ws.a_times_x = sub.coupling.apply(p.x);

      const int n_x = sub.num_vars(), n_h = sub.num_ineq();
      const Vector products = p.v.cwiseProduct(p.mu);
      const double stat_inf = inf_norm(ws.newton_f.head(n_x));
      ws.g_inf = inf_norm(ws.eval.g);
      const double hv_inf = n_h > 0 ? inf_norm(ws.eval.h + p.v) : 0.0;
      ws.h_plus_inf = n_h > 0 ? std::max(0.0, ws.eval.h.maxCoeff()) : 0.0;
      const double comp0 = n_h > 0 ? products.cwiseAbs().maxCoeff() : 0.0;
      const double comp_delta =
          n_h > 0 ? (Vector::Constant(n_h, delta) - products).cwiseAbs().maxCoeff() : 0.0;
      ws.f0_block = std::max({stat_inf, comp0, ws.g_inf, hv_inf});
      ws.fdelta_block = std::max({stat_inf, comp_delta, ws.g_inf, hv_inf});
    });

    Vector coupling_res = problem.coupling_rhs();
    if (decomposed) {
      std::vector<Vector> ax(n_sub);
      for (int i = 0; i < n_sub; ++i) ax[i] = scratch[i].a_times_x;
      coupling_res -= bus.global_sum(std::span<const Vector>(ax), CommPhase::Reduction);
    } else {
      for (int i = 0; i < n_sub; ++i) coupling_res -= scratch[i].a_times_x;
    }
    consensus = inf_norm(coupling_res);

    for (int i = 0; i < n_sub; ++i) shares[i] = scratch[i].f0_block;
    f0_norm = std::max(reduce_max(CommPhase::Reduction), consensus);
    for (int i = 0; i < n_sub; ++i) shares[i] = scratch[i].fdelta_block;
    fdelta_norm = std::max(reduce_max(CommPhase::Reduction), consensus);
    for (int i = 0; i < n_sub; ++i) shares[i] = scratch[i].g_inf;
    g_inf = reduce_max(CommPhase::Reduction);
    for (int i = 0; i < n_sub; ++i) shares[i] = scratch[i].h_plus_inf;
    h_plus_inf = reduce_max(CommPhase::Reduction);
    for (int i = 0; i < n_sub; ++i) shares[i] = scratch[i].eval.f;
    objective = reduce_sum();
  };

  auto finalize = [&](SolveStatus status, const std::string& message) {
    result.status = status;
    result.message = message;
    result.points = std::move(points);
    result.lambda = lambda;
    result.final_f0 = f0_norm;
    result.final_fdelta = fdelta_norm;
    result.final_consensus = consensus;
    result.final_g_inf = g_inf;
    result.final_h_plus_inf = h_plus_inf;
    result.objective = objective;
    result.final_delta = delta;
    result.iterations = static_cast<int>(result.records.size());
    result.comm = bus.report();
    return result;
  };

  int k = 0;
  try {
    refresh_state();
    while (k < options.max_outer) {
      if (f0_norm <= options.epsilon) {
        return finalize(SolveStatus::Converged, "");
      }

      IterationRecord record;
      record.k = k;
      record.f0_norm = f0_norm;
      record.fdelta_norm = fdelta_norm;
      record.consensus = consensus;
      record.g_inf = g_inf;
      record.h_plus_inf = h_plus_inf;
      record.delta = delta;
      if (reference) {
        const double denom = std::abs(reference->f) > 0 ? std::abs(reference->f) : 1.0;
        record.objective_rel_err = std::abs(objective - reference->f) / denom;
        record.x_err_inf = inf_norm(concat_x(points) - reference->x);
      }
      const std::int64_t floats_before = bus.report().total_floats();

      Vector step_dlambda;
      if (decomposed) {
        for_each_agent(n_sub, parallel, [&](int i) {
          const Subsystem& sub = problem.subsystem(i);
          AgentScratch& ws = scratch[i];
          ws.kkt = assemble_local_kkt(sub, points[i], delta);
          factorize(ws.kkt, i);
          ws.schur = schur_contribution(ws.kkt, sub.coupling, ws.newton_f, ws.a_times_x,
                                        problem.coupling_rhs(), n_sub);
        });

        const double tol = options.fixed_inner_tolerance
                               ? *options.fixed_inner_tolerance
                               : forcing_tolerance(fdelta_norm, options);
        DcgOptions cg_options;
        cg_options.tol_abs = tol;
        cg_options.max_iterations = options.max_inner > 0 ? options.max_inner : 20 * n_c;
        if (options.warm_start_cg && warm_dlambda.size() == n_c) {
          cg_options.warm_start = warm_dlambda;
        }
        std::vector<SchurContribution> schurs(n_sub);
        for (int i = 0; i < n_sub; ++i) schurs[i] = scratch[i].schur;
        const CgState cg = dcg_solve(std::span<const SchurContribution>(schurs), bus, cg_options);
        warm_dlambda = cg.delta_lambda;
        step_dlambda = cg.delta_lambda;
        record.cg_iterations = cg.iterations;
        record.inner_cap_hit = cg.inexact;
        record.inner_tolerance = tol;
        record.cg_exit_residual = cg.residual_history.back();
        result.total_inner_iterations += cg.iterations;

        for_each_agent(n_sub, parallel, [&](int i) {
          scratch[i].delta_p = back_substitute(scratch[i].kkt, scratch[i].newton_f,
                                               problem.subsystem(i).coupling, step_dlambda);
        });
      } else {
        FullKkt full = assemble_full_kkt(problem, points, lambda, delta);
        NewtonStep step = direct_newton_step(full);
        for (int i = 0; i < n_sub; ++i) scratch[i].delta_p = std::move(step.delta_p[i]);
        step_dlambda = std::move(step.delta_lambda);
      }

      for_each_agent(n_sub, parallel, [&](int i) {
        const auto [ap, ad] = local_fraction_to_boundary(points[i], scratch[i].delta_p, options.tau);
        scratch[i].alpha_p = ap;
        scratch[i].alpha_d = ad;
      });
      for (int i = 0; i < n_sub; ++i) shares[i] = scratch[i].alpha_p;
      const double alpha_p = reduce_min();
      for (int i = 0; i < n_sub; ++i) shares[i] = scratch[i].alpha_d;
      const double alpha_d = reduce_min();

      for (int i = 0; i < n_sub; ++i) delta_ps[i] = scratch[i].delta_p;
      const std::vector<SubsystemPoint> backup_points = points;
      const Vector backup_lambda = lambda;
      apply_step(points, lambda, delta_ps, step_dlambda, alpha_p, alpha_d);

      bool finite = lambda.allFinite();
      for (const SubsystemPoint& p : points) {
        finite = finite && p.x.allFinite() && p.v.allFinite() && p.gamma.allFinite() &&
                 p.mu.allFinite();
      }
      record.alpha_p = alpha_p;
      record.alpha_d = alpha_d;
      if (!finite) {
        record.comm_floats = bus.report().total_floats() - floats_before;
        result.records.push_back(record);
        points = backup_points;
        lambda = backup_lambda;
        return finalize(SolveStatus::Diverged, "iterate became non-finite at iteration " +
                                                   std::to_string(k));
      }

      for_each_agent(n_sub, parallel, [&](int i) {
        scratch[i].barrier_candidate = local_barrier_candidate(points[i], options.sigma);
      });
      for (int i = 0; i < n_sub; ++i) shares[i] = scratch[i].barrier_candidate;
      const double candidate = reduce_max(CommPhase::Reduction);
      delta = update_barrier(delta, candidate, options);

      record.comm_floats = bus.report().total_floats() - floats_before;
      result.records.push_back(record);
      ++k;
      refresh_state();
    }
  } catch (const FactorizationError& e) {
    return finalize(SolveStatus::Diverged, std::string("factorization failure: ") + e.what());
  } catch (const CurvatureError& e) {
    return finalize(SolveStatus::Diverged, std::string("curvature failure: ") + e.what());
  } catch (const EvaluationError& e) {
    return finalize(SolveStatus::Diverged, std::string("evaluation failure: ") + e.what());
  }

  return finalize(SolveStatus::IterationLimit,
                  "outer iteration limit reached before |F^0| <= epsilon");
}

std::string iteration_csv_header() {
  return "k,f0_norm,fdelta_norm,consensus,g_inf,h_plus_inf,obj_rel_err,x_err_inf,cg_iters,delta,"
         "alpha_p,alpha_d,comm_floats";
}

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

std::string iteration_csv_line(const IterationRecord& r) {
  std::string line = std::to_string(r.k);
  line += "," + format_double(r.f0_norm);
  line += "," + format_double(r.fdelta_norm);
  line += "," + format_double(r.consensus);
  line += "," + format_double(r.g_inf);
  line += "," + format_double(r.h_plus_inf);
  line += ",";
  if (r.objective_rel_err) line += format_double(*r.objective_rel_err);
  line += ",";
  if (r.x_err_inf) line += format_double(*r.x_err_inf);
  line += "," + std::to_string(r.cg_iterations);
  line += "," + format_double(r.delta);
  line += "," + format_double(r.alpha_p);
  line += "," + format_double(r.alpha_d);
  line += "," + std::to_string(r.comm_floats);
  return line;
}

std::string records_to_csv(const std::vector<IterationRecord>& records) {
  std::string out = iteration_csv_header() + "\n";
  for (const IterationRecord& r : records) out += iteration_csv_line(r) + "\n";
  return out;
}

std::string summary_to_json(const SolveResult& result, double objective_scale) {
  nlohmann::ordered_json j;
  j["status"] = solve_status_name(result.status);
  if (!result.message.empty()) j["message"] = result.message;
  j["iterations"] = result.iterations;
  j["inner_iterations"] = result.total_inner_iterations;
  j["final"] = {
      {"f0_norm", result.final_f0},
      {"fdelta_norm", result.final_fdelta},
      {"consensus", result.final_consensus},
      {"g_inf", result.final_g_inf},
      {"h_plus_inf", result.final_h_plus_inf},
      {"objective", result.objective},
      {"delta", result.final_delta},
  };
  if (objective_scale != 1.0) {
    j["final"]["objective_unscaled"] = result.objective / objective_scale;
  }
  j["comm"] = {
      {"schur_floats", result.comm.schur_floats},
      {"cg_floats", result.comm.cg_floats},
      {"reduction_floats", result.comm.reduction_floats},
      {"messages", result.comm.messages},
      {"rounds", result.comm.rounds},
  };
  return j.dump(2);
}

}  // namespace dip
