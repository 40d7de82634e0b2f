#pragma once

#include <span>
#include <vector>

#include "dip/agent.hpp"
#include "dip/bus.hpp"

namespace dip {

/// State of one decentralized-CG solve of  (sum_i S_i) dlambda = sum_i s_i.
struct CgState {
  Vector delta_lambda;  // iterate
  Vector residual;      // r = s - S dlambda at exit
  Vector direction;     // last search direction q
  int iterations = 0;
  std::vector<double> residual_history;  // l2 norms, length iterations + 1
  bool inexact = false;                  // iteration cap hit above tolerance

  /// Iterates per recorded step; filled only when requested.
  std::vector<Vector> iterate_history;
};

struct DcgOptions {
  double tol_abs = 1e-12;  // on |r|_2
  int max_iterations = 0;  // 0: unlimited up to 20 * n_c
  Vector warm_start;       // empty: cold start from zero
  bool record_iterates = false;
};

/// Conjugate gradient on the coupling system where each matrix action
/// S q = sum_i S_i q is realized as a fixed-order global sum of local
/// products, plus one scalar reduction per iteration for the curvature
/// term q'Sq. The right-hand side s = sum_i s_i is summed once up front
/// (Schur-exchange phase).
///
/// Throws CurvatureError when q'Sq <= 0 turns up; returns with the
/// `inexact` flag when the iteration cap is reached above tolerance.
CgState dcg_solve(std::span<const SchurContribution> agents, MessageBus& bus,
                  const DcgOptions& options);

}  // namespace dip
