#pragma once

#include "dip/problem.hpp"

namespace dip {

/// Quadratic subsystem with affine constraints:
///   f(x) = 1/2 x'Hx + c'x + c0
///   g(x) = G x - g_rhs = 0
///   h(x) = D x - d_rhs <= 0
class QuadraticModel : public SubsystemModel {
 public:
  QuadraticModel(Matrix hessian, Vector linear, double constant = 0.0);

  QuadraticModel& with_equalities(Matrix coeffs, Vector rhs);
  QuadraticModel& with_inequalities(Matrix coeffs, Vector rhs);

  int num_vars() const override { return static_cast<int>(linear_.size()); }
  int num_eq() const override { return static_cast<int>(eq_rhs_.size()); }
  int num_ineq() const override { return static_cast<int>(ineq_rhs_.size()); }

  void eval(const Vector& x, SubsystemEval& out) const override;
  void eval_derivs(const Vector& x, const Vector& gamma, const Vector& mu,
                   SubsystemDerivs& out) const override;

  const Matrix& hessian() const { return hessian_; }
  const Vector& linear() const { return linear_; }
  double constant() const { return constant_; }
  const Matrix& eq_coeffs() const { return eq_coeffs_; }
  const Vector& eq_rhs() const { return eq_rhs_; }
  const Matrix& ineq_coeffs() const { return ineq_coeffs_; }
  const Vector& ineq_rhs() const { return ineq_rhs_; }

 private:
  Matrix hessian_;
  Vector linear_;
  double constant_ = 0.0;
  Matrix eq_coeffs_;    // n_g x n_x
  Vector eq_rhs_;       // n_g
  Matrix ineq_coeffs_;  // n_h x n_x
  Vector ineq_rhs_;     // n_h
};

}  // namespace dip
