#include "dip/dcg.hpp"

namespace dip {

CgState dcg_solve(std::span<const SchurContribution> agents, MessageBus& bus,
                  const DcgOptions& options) {
  if (agents.empty()) throw InstanceError("dcg_solve: no agents");
  const int n_c = static_cast<int>(agents[0].s.size());
  const int agent_count = static_cast<int>(agents.size());
  const int max_iter = options.max_iterations > 0 ? options.max_iterations : 20 * n_c;

  std::vector<Vector> shares(agent_count);
  std::vector<double> scalar_shares(agent_count);

  // S q realized as the fixed-order sum of local products; one scalar
  // reduction carries the local curvature shares q'S_i q.
  auto matvec = [&](const Vector& q, double* curvature) {
    for (int i = 0; i < agent_count; ++i) {
      shares[i] = agents[i].S * q;
      scalar_shares[i] = q.dot(shares[i]);
    }
    Vector y = bus.global_sum(std::span<const Vector>(shares), CommPhase::Cg);
    if (curvature) *curvature = bus.global_sum(std::span<const double>(scalar_shares), CommPhase::Cg);
    return y;
  };

  for (int i = 0; i < agent_count; ++i) shares[i] = agents[i].s;
  const Vector s = bus.global_sum(std::span<const Vector>(shares), CommPhase::SchurExchange);

  CgState state;
  state.delta_lambda = options.warm_start.size() == n_c ? options.warm_start : Vector::Zero(n_c);
  if (options.warm_start.size() != 0 && options.warm_start.size() != n_c) {
    throw InstanceError("dcg_solve: warm start has wrong length");
  }

  state.residual =
      state.delta_lambda.isZero(0.0) ? s : Vector(s - matvec(state.delta_lambda, nullptr));
  state.residual_history.push_back(state.residual.norm());
  if (options.record_iterates) state.iterate_history.push_back(state.delta_lambda);
  state.direction = state.residual;

  if (state.residual_history.back() <= options.tol_abs) return state;

  Vector q = state.residual;
  double rho = state.residual.squaredNorm();

  while (state.iterations < max_iter) {
    double q_s_q = 0.0;
    const Vector y = matvec(q, &q_s_q);
    if (q_s_q <= 0.0) {
      throw CurvatureError("dcg_solve: nonpositive curvature q'Sq = " + std::to_string(q_s_q) +
                           "; the coupling matrix is not positive semidefinite");
    }
    const double alpha = rho / q_s_q;
    state.delta_lambda += alpha * q;
    state.residual -= alpha * y;
    ++state.iterations;
    state.residual_history.push_back(state.residual.norm());
    if (options.record_iterates) state.iterate_history.push_back(state.delta_lambda);
    if (state.residual_history.back() <= options.tol_abs) return state;

    const double rho_next = state.residual.squaredNorm();
    q = state.residual + (rho_next / rho) * q;
    rho = rho_next;
    state.direction = q;
  }

  state.inexact = true;
  return state;
}

}  // namespace dip
