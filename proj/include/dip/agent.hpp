#pragma once

#include <Eigen/LU>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <memory>
#include <utility>
#include <vector>

#include "dip/problem.hpp"

namespace dip {

struct SchurContribution;
class LocalKkt;
SchurContribution schur_contribution(const LocalKkt& kkt, const SparseCoupling& coupling,
                                     const Vector& newton_residual, const Vector& a_times_x,
                                     const Vector& coupling_rhs, int num_subsystems);

/// Local KKT matrix of one subsystem with block layout, in variable order
/// (x, v, gamma, mu):
///
///   [ hess_lag   0          jac_g'   jac_h' ]
///   [ 0         -V^{-1} M   0       -I      ]
///   [ jac_g      0          0        0      ]
///   [ jac_h      I          0        0      ]
///
/// The slack row is the exact linearization of the scaled complementarity
/// residual delta*V^{-1}1 - mu after the primal-dual substitution
/// delta*V^{-2} -> V^{-1}M; the matrix is handled unsymmetric and factorized
/// with row/column pivoting. Dense LU below `kSparseOrderThreshold`, sparse
/// LU above.
class LocalKkt {
 public:
  LocalKkt() = default;

  int order() const { return order_; }
  int n_x() const { return n_x_; }
  int n_g() const { return n_g_; }
  int n_h() const { return n_h_; }

  /// Inertia shift actually applied to the (1,1) Hessian block.
  double regularization_applied() const { return regularization_; }

  bool factorized() const { return dense_lu_ != nullptr || sparse_lu_ != nullptr; }

  /// Solves M z = r against the live factorization.
  Vector solve(const Vector& rhs) const;

  /// Number of single right-hand-side solves performed so far, split into
  /// the Schur-column part and everything else.
  long solve_count() const { return solve_count_; }
  long schur_column_solves() const { return schur_column_solves_; }

  /// Dense copy of the assembled (regularized) matrix.
  Matrix dense() const;

  /// M * z without factorization, for residual checks.
  Vector apply(const Vector& z) const;

  /// Triplets of the assembled matrix, offset by (row0, col0); used by the
  /// full-KKT assembly so diagonal blocks match the agent matrices exactly.
  void append_triplets(std::vector<Eigen::Triplet<double>>& out, int row0, int col0) const;

  static constexpr int kSparseOrderThreshold = 500;

  friend LocalKkt assemble_local_kkt(const Subsystem&, const SubsystemPoint&, double);
  friend void factorize(LocalKkt&, int subsystem_index);
  friend SchurContribution schur_contribution(const LocalKkt&, const SparseCoupling&,
                                              const Vector&, const Vector&, const Vector&, int);

 private:
  void build_matrix(double shift);
  bool try_factorize();

  int order_ = 0, n_x_ = 0, n_g_ = 0, n_h_ = 0;
  double regularization_ = 0.0;

  // Assembled blocks (kept for re-assembly under a different shift).
  Matrix hess_, jac_g_, jac_h_;
  Vector v_, mu_;

  // Assembled matrix in triplet form plus the chosen factorization.
  std::vector<Eigen::Triplet<double>> triplets_;
  Eigen::SparseMatrix<double> sparse_;
  std::unique_ptr<Eigen::PartialPivLU<Matrix>> dense_lu_;
  std::unique_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> sparse_lu_;

  mutable long solve_count_ = 0;
  mutable long schur_column_solves_ = 0;
};

/// Dense Schur-complement contribution (S_i, s_i) of one subsystem; the only
/// dense objects that leave an agent.
struct SchurContribution {
  Matrix S;  // n_c x n_c, symmetrized
  Vector s;  // n_c
};

/// Newton-side residual blocks of one subsystem, stacked (stationarity,
/// scaled complementarity delta*V^{-1}1 - mu, g, h + v). This is the F_i
/// the local KKT matrix linearizes; norms for termination and forcing use
/// the product-form complementarity from kkt_residual instead.
Vector newton_residual(const Subsystem& subsystem, const SubsystemPoint& point,
                       const Vector& lambda, double delta, const SubsystemEval& eval,
                       const SubsystemDerivs& derivs);

/// Assembles the local KKT blocks at a strictly interior point.
LocalKkt assemble_local_kkt(const Subsystem& subsystem, const SubsystemPoint& point, double delta);

/// Factorizes in place. On a singular or near-singular matrix, retries with
/// an escalating Tikhonov shift rho*I on the Hessian block,
/// rho = 1e-8 * 10^j for j = 0..8, and records the final shift.
void factorize(LocalKkt& kkt, int subsystem_index = -1);

// schur_contribution (declared above):
//   S_i = Atilde (gradF_i)^{-1} Atilde',  Atilde = [A_i 0 0 0]
//   s_i = A_i x_i - Atilde (gradF_i)^{-1} F_i - b/|S|
// Only the structurally nonzero columns of Atilde' are solved.

/// Delta p_i = -(gradF_i)^{-1} (F_i + Atilde' * delta_lambda).
Vector back_substitute(const LocalKkt& kkt, const Vector& newton_residual,
                       const SparseCoupling& coupling, const Vector& delta_lambda);

/// Fraction-to-boundary stepsizes (primal over v, dual over mu).
std::pair<double, double> local_fraction_to_boundary(const SubsystemPoint& point,
                                                     const Vector& delta_p, double tau);

/// Local barrier surrogate sigma * (v'mu)/n_h; zero when n_h = 0.
double local_barrier_candidate(const SubsystemPoint& point, double sigma);

}  // namespace dip
