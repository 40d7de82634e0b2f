#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dip/common.hpp"
#include "dip/coupling.hpp"

namespace dip {

/// Objective/constraint values of one subsystem at a point.
struct SubsystemEval {
  double f = 0.0;
  Vector g;  // equality values, length n_g
  Vector h;  // inequality values, length n_h (feasible when h <= 0)
};

/// First derivatives and the Lagrangian Hessian of one subsystem.
struct SubsystemDerivs {
  Vector grad_f;    // n_x
  Matrix jac_g;     // n_g x n_x
  Matrix jac_h;     // n_h x n_x
  Matrix hess_lag;  // n_x x n_x, symmetric: hessian of f + gamma'g + mu'h
};

/// Callback bundle a subsystem is equipped with. Implementations must be
/// deterministic and reentrant: the same inputs produce identical outputs,
/// and concurrent calls from different agents are safe.
class SubsystemModel {
 public:
  virtual ~SubsystemModel() = default;

  virtual int num_vars() const = 0;
  virtual int num_eq() const = 0;
  virtual int num_ineq() const = 0;

  virtual void eval(const Vector& x, SubsystemEval& out) const = 0;
  virtual void eval_derivs(const Vector& x, const Vector& gamma, const Vector& mu,
                           SubsystemDerivs& out) const = 0;
};

/// One subsystem of the partitioned problem: the evaluator plus its coupling
/// matrix. `index` is the position in the owning problem (0-based).
struct Subsystem {
  std::shared_ptr<const SubsystemModel> model;
  SparseCoupling coupling;  // n_c x n_x
  int index = 0;

  int num_vars() const { return model->num_vars(); }
  int num_eq() const { return model->num_eq(); }
  int num_ineq() const { return model->num_ineq(); }
};

/// A partitioned NLP instance: separable subsystems tied together by the
/// affine coupling constraint  sum_i A_i x_i = b. Immutable after
/// construction and safe to share read-only across concurrent agents.
class PartitionedNlp {
 public:
  PartitionedNlp(std::vector<Subsystem> subsystems, Vector coupling_rhs);

  const std::vector<Subsystem>& subsystems() const { return subsystems_; }
  const Subsystem& subsystem(int i) const { return subsystems_.at(i); }
  int num_subsystems() const { return static_cast<int>(subsystems_.size()); }
  int coupling_dim() const { return static_cast<int>(coupling_rhs_.size()); }
  const Vector& coupling_rhs() const { return coupling_rhs_; }

  int total_vars() const { return total_vars_; }

 private:
  std::vector<Subsystem> subsystems_;
  Vector coupling_rhs_;
  int total_vars_ = 0;
};

/// Per-subsystem primal-dual iterate p_i = (x_i, v_i, gamma_i, mu_i).
/// v and mu stay strictly positive from initialization through every
/// accepted step.
struct SubsystemPoint {
  Vector x;      // n_x
  Vector v;      // n_h, slacks
  Vector gamma;  // n_g, equality multipliers
  Vector mu;     // n_h, inequality multipliers

  int dim() const {
    return static_cast<int>(x.size() + v.size() + gamma.size() + mu.size());
  }
};

/// Residual of the perturbed first-order conditions at a point, stacked per
/// subsystem as (stationarity, complementarity, g, h + v) plus the coupling
/// block b - sum A_i x_i. The complementarity entries are delta - v_j*mu_j,
/// which vanish exactly when V mu = delta*1.
struct KktResidual {
  std::vector<Vector> blocks;  // one per subsystem, length n_x + n_h + n_g + n_h
  Vector coupling;             // length n_c
  double inf_norm = 0.0;
};

/// Plain evaluation with shape and finiteness checks.
SubsystemEval evaluate(const Subsystem& subsystem, const Vector& x);

/// First/second derivatives with shape checks; the Hessian is symmetrized.
SubsystemDerivs evaluate_derivatives(const Subsystem& subsystem, const Vector& x,
                                     const Vector& gamma, const Vector& mu);

/// Report of an analytic-vs-central-finite-difference comparison.
struct DerivativeCheckReport {
  double grad_f_dev = 0.0;
  double jac_g_dev = 0.0;
  double jac_h_dev = 0.0;
  double hess_dev = 0.0;
  double tol = 0.0;
  bool pass = false;

  double max_dev() const {
    return std::max(std::max(grad_f_dev, jac_g_dev), std::max(jac_h_dev, hess_dev));
  }
  std::string summary() const;
};

/// Compares analytic derivatives against central finite differences.
/// Deviations are |analytic - fd|_inf / (1 + |analytic|_inf) per object.
/// First derivatives are differenced from values; the Hessian from the
/// analytic Lagrangian gradient.
DerivativeCheckReport check_derivatives_fd(const Subsystem& subsystem, const Vector& x,
                                           const Vector& gamma, const Vector& mu, double tol);

/// Residual of the perturbed KKT system at (points, lambda) with barrier
/// parameter delta. delta = 0 gives the unperturbed optimality residual used
/// by the outer convergence test.
KktResidual kkt_residual(const PartitionedNlp& problem, const std::vector<SubsystemPoint>& points,
                         const Vector& lambda, double delta);

/// |sum_i A_i x_i - b|_inf for x the concatenation of all x_i.
double consensus_violation(const PartitionedNlp& problem, const Vector& x);

/// Same, from per-subsystem blocks.
double consensus_violation(const PartitionedNlp& problem, const std::vector<SubsystemPoint>& points);

/// Objective value sum_i f_i(x_i).
double total_objective(const PartitionedNlp& problem, const std::vector<SubsystemPoint>& points);

/// Concatenates the x_i blocks in subsystem order.
Vector concat_x(const std::vector<SubsystemPoint>& points);

}  // namespace dip
