#pragma once

#include <Eigen/Sparse>

#include <vector>

#include "dip/agent.hpp"
#include "dip/driver.hpp"
#include "dip/problem.hpp"

namespace dip {

/// The complete arrowhead KKT system: block-diagonal local matrices bordered
/// by the coupling rows/columns, plus the stacked right-hand side
/// (-F_i; b - sum A_i x_i).
struct FullKkt {
  Eigen::SparseMatrix<double> matrix;
  Vector rhs;
  std::vector<int> block_offsets;  // start of each subsystem block
  std::vector<int> x_dims;         // n_x of each block, for the inertia shift
  int coupling_offset = 0;
  int order = 0;
  double regularization_applied = 0.0;
};

/// Assembles the full system at (points, lambda, delta). Diagonal blocks are
/// produced by the same assembly code the agents use.
FullKkt assemble_full_kkt(const PartitionedNlp& problem, const std::vector<SubsystemPoint>& points,
                          const Vector& lambda, double delta);

/// Direct sparse solve of the full system under the agents' regularization
/// policy. Returns per-subsystem steps and the coupling step.
struct NewtonStep {
  std::vector<Vector> delta_p;
  Vector delta_lambda;
};
NewtonStep direct_newton_step(FullKkt& kkt);

/// Centralized reference solver: the identical interior point iteration with
/// the Newton system solved directly (no CG, no decomposition).
struct CentralizedSolution {
  Vector x;  // concatenated primal solution
  double f = 0.0;
  SolveStatus status = SolveStatus::IterationLimit;
  SolveResult result;  // full diagnostics of the reference run
};

CentralizedSolution solve_centralized_barrier_newton(const PartitionedNlp& problem,
                                                     SolverOptions options,
                                                     const std::vector<Vector>& x0);

}  // namespace dip
