#include "dip/quadratic.hpp"

namespace dip {

QuadraticModel::QuadraticModel(Matrix hessian, Vector linear, double constant)
    : hessian_(std::move(hessian)), linear_(std::move(linear)), constant_(constant) {
  const int n = static_cast<int>(linear_.size());
  if (hessian_.rows() != n || hessian_.cols() != n) {
    throw InstanceError("quadratic model: H must be n x n");
  }
  eq_coeffs_.resize(0, n);
  ineq_coeffs_.resize(0, n);
}

QuadraticModel& QuadraticModel::with_equalities(Matrix coeffs, Vector rhs) {
  if (coeffs.rows() != rhs.size() || coeffs.cols() != num_vars()) {
    throw InstanceError("quadratic model: equality block shape mismatch");
  }
  eq_coeffs_ = std::move(coeffs);
  eq_rhs_ = std::move(rhs);
  return *this;
}

QuadraticModel& QuadraticModel::with_inequalities(Matrix coeffs, Vector rhs) {
  if (coeffs.rows() != rhs.size() || coeffs.cols() != num_vars()) {
    throw InstanceError("quadratic model: inequality block shape mismatch");
  }
  ineq_coeffs_ = std::move(coeffs);
  ineq_rhs_ = std::move(rhs);
  return *this;
}

void QuadraticModel::eval(const Vector& x, SubsystemEval& out) const {
  out.f = 0.5 * x.dot(hessian_ * x) + linear_.dot(x) + constant_;
  out.g = num_eq() > 0 ? Vector(eq_coeffs_ * x - eq_rhs_) : Vector(0);
  out.h = num_ineq() > 0 ? Vector(ineq_coeffs_ * x - ineq_rhs_) : Vector(0);
}

void QuadraticModel::eval_derivs(const Vector& x, const Vector&, const Vector&,
                                 SubsystemDerivs& out) const {
  out.grad_f = hessian_ * x + linear_;
  out.jac_g = eq_coeffs_;
  out.jac_h = ineq_coeffs_;
  out.hess_lag = hessian_;  // constraints are affine
}

}  // namespace dip
