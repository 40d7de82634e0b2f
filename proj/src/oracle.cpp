#include "dip/oracle.hpp"

#include <Eigen/SparseLU>

#include <cmath>

namespace dip {

FullKkt assemble_full_kkt(const PartitionedNlp& problem, const std::vector<SubsystemPoint>& points,
                          const Vector& lambda, double delta) {
  const int n_sub = problem.num_subsystems();
  const int n_c = problem.coupling_dim();

  FullKkt full;
  full.block_offsets.resize(n_sub);
  full.x_dims.resize(n_sub);
  int order = 0;
  for (int i = 0; i < n_sub; ++i) {
    const Subsystem& sub = problem.subsystem(i);
    full.block_offsets[i] = order;
    full.x_dims[i] = sub.num_vars();
    order += sub.num_vars() + 2 * sub.num_ineq() + sub.num_eq();
  }
  full.coupling_offset = order;
  full.order = order + n_c;
  full.rhs = Vector::Zero(full.order);

  std::vector<Eigen::Triplet<double>> triplets;
  Vector coupling_res = problem.coupling_rhs();

  for (int i = 0; i < n_sub; ++i) {
    const Subsystem& sub = problem.subsystem(i);
    const SubsystemPoint& p = points[i];
    const int off = full.block_offsets[i];

    // Diagonal block: the agents' own assembly, so both paths agree exactly.
    const LocalKkt local = assemble_local_kkt(sub, p, delta);
    local.append_triplets(triplets, off, off);

    // Border: Atilde_i = [A_i 0 0 0] in the bottom row block, transposed in
    // the x columns of block i.
    for (const auto& e : sub.coupling.entries) {
      if (e.value == 0.0) continue;
      triplets.emplace_back(full.coupling_offset + e.row, off + e.col, e.value);
      triplets.emplace_back(off + e.col, full.coupling_offset + e.row, e.value);
    }

    const SubsystemEval eval = evaluate(sub, p.x);
    const SubsystemDerivs derivs = evaluate_derivatives(sub, p.x, p.gamma, p.mu);
    full.rhs.segment(off, local.order()) = -newton_residual(sub, p, lambda, delta, eval, derivs);
    coupling_res -= sub.coupling.apply(p.x);
  }
  full.rhs.tail(n_c) = coupling_res;

  full.matrix.resize(full.order, full.order);
  full.matrix.setFromTriplets(triplets.begin(), triplets.end());
  full.matrix.makeCompressed();
  return full;
}

namespace {

bool try_direct_solve(const Eigen::SparseMatrix<double>& m, const Vector& rhs, Vector& out) {
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  lu.compute(m);
  if (lu.info() != Eigen::Success) return false;
  out = lu.solve(rhs);
  if (!out.allFinite()) return false;
  // Same acceptance rule as the agents: the factorization must reproduce the
  // matrix action up to backward-stable roundoff.
  double max_entry = 0.0;
  for (int c = 0; c < m.outerSize(); ++c) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(m, c); it; ++it) {
      max_entry = std::max(max_entry, std::abs(it.value()));
    }
  }
  const double resid = inf_norm(Vector(m * out - rhs));
  return resid <= 1e-8 * (max_entry * inf_norm(out) * std::sqrt(double(m.rows())) + inf_norm(rhs) + 1.0);
}

}  // namespace

NewtonStep direct_newton_step(FullKkt& kkt) {
  Vector solution;
  if (!try_direct_solve(kkt.matrix, kkt.rhs, solution)) {
    // Agents' policy: escalating Tikhonov shift on the Hessian (x, x)
    // diagonal of every subsystem block.
    bool solved = false;
    for (int j = 0; j <= 8 && !solved; ++j) {
      const double rho = 1e-8 * std::pow(10.0, j);
      Eigen::SparseMatrix<double> shifted = kkt.matrix;
      for (std::size_t i = 0; i < kkt.block_offsets.size(); ++i) {
        for (int d = 0; d < kkt.x_dims[i]; ++d) {
          shifted.coeffRef(kkt.block_offsets[i] + d, kkt.block_offsets[i] + d) += rho;
        }
      }
      shifted.makeCompressed();
      if (try_direct_solve(shifted, kkt.rhs, solution)) {
        kkt.regularization_applied = rho;
        solved = true;
      }
    }
    if (!solved) {
      throw FactorizationError("full KKT matrix is singular after regularization");
    }
  }

  NewtonStep step;
  step.delta_p.resize(kkt.block_offsets.size());
  for (std::size_t i = 0; i < kkt.block_offsets.size(); ++i) {
    const int off = kkt.block_offsets[i];
    const int end = (i + 1 < kkt.block_offsets.size()) ? kkt.block_offsets[i + 1]
                                                       : kkt.coupling_offset;
    step.delta_p[i] = solution.segment(off, end - off);
  }
  step.delta_lambda = solution.tail(kkt.order - kkt.coupling_offset);
  return step;
}

CentralizedSolution solve_centralized_barrier_newton(const PartitionedNlp& problem,
                                                     SolverOptions options,
                                                     const std::vector<Vector>& x0) {
  options.backend = StepBackend::Direct;
  options.threads = 1;
  CentralizedSolution solution;
  solution.result = solve(problem, options, x0);
  solution.x = concat_x(solution.result.points);
  solution.f = solution.result.objective;
  solution.status = solution.result.status;
  return solution;
}

}  // namespace dip
