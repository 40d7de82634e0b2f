#include "dip/problem.hpp"

#include <cstdio>
#include <sstream>

namespace dip {

PartitionedNlp::PartitionedNlp(std::vector<Subsystem> subsystems, Vector coupling_rhs)
    : subsystems_(std::move(subsystems)), coupling_rhs_(std::move(coupling_rhs)) {
  const int n_c = static_cast<int>(coupling_rhs_.size());
  if (n_c < 1) {
    throw InstanceError(
        "coupling dimension must be at least 1: a fully separable instance has "
        "nothing to coordinate and is rejected");
  }
  if (subsystems_.empty()) throw InstanceError("a partitioned problem needs subsystems");
  for (std::size_t i = 0; i < subsystems_.size(); ++i) {
    Subsystem& sub = subsystems_[i];
    sub.index = static_cast<int>(i);
    if (!sub.model) throw InstanceError("subsystem " + std::to_string(i + 1) + " has no evaluator");
    sub.coupling.validate();
    if (sub.coupling.rows != n_c) {
      throw InstanceError("subsystem " + std::to_string(i + 1) + ": coupling matrix has " +
                          std::to_string(sub.coupling.rows) + " rows, expected " +
                          std::to_string(n_c));
    }
    if (sub.coupling.cols != sub.model->num_vars()) {
      throw InstanceError("subsystem " + std::to_string(i + 1) + ": coupling matrix has " +
                          std::to_string(sub.coupling.cols) + " columns for " +
                          std::to_string(sub.model->num_vars()) + " variables");
    }
    total_vars_ += sub.model->num_vars();
  }
}

namespace {

void check_shapes(const Subsystem& sub, const SubsystemEval& eval) {
  if (eval.g.size() != sub.num_eq() || eval.h.size() != sub.num_ineq()) {
    throw InstanceError("subsystem " + std::to_string(sub.index + 1) +
                        ": evaluator returned g/h of lengths " + std::to_string(eval.g.size()) +
                        "/" + std::to_string(eval.h.size()) + ", expected " +
                        std::to_string(sub.num_eq()) + "/" + std::to_string(sub.num_ineq()));
  }
}

void check_shapes(const Subsystem& sub, const SubsystemDerivs& d) {
  const int n = sub.num_vars();
  if (d.grad_f.size() != n || d.hess_lag.rows() != n || d.hess_lag.cols() != n ||
      d.jac_g.rows() != sub.num_eq() || d.jac_g.cols() != n || d.jac_h.rows() != sub.num_ineq() ||
      d.jac_h.cols() != n) {
    throw InstanceError("subsystem " + std::to_string(sub.index + 1) +
                        ": derivative shapes do not match reported dimensions");
  }
}

}  // namespace

SubsystemEval evaluate(const Subsystem& subsystem, const Vector& x) {
  if (x.size() != subsystem.num_vars()) {
    throw InstanceError("subsystem " + std::to_string(subsystem.index + 1) + ": point length " +
                        std::to_string(x.size()) + " does not match n_x = " +
                        std::to_string(subsystem.num_vars()));
  }
  SubsystemEval eval;
  subsystem.model->eval(x, eval);
  check_shapes(subsystem, eval);
  if (!std::isfinite(eval.f) || !all_finite(eval.g) || !all_finite(eval.h)) {
    throw EvaluationError("subsystem " + std::to_string(subsystem.index + 1) +
                              ": evaluator produced non-finite values",
                          subsystem.index);
  }
  return eval;
}

SubsystemDerivs evaluate_derivatives(const Subsystem& subsystem, const Vector& x,
                                     const Vector& gamma, const Vector& mu) {
  if (x.size() != subsystem.num_vars() || gamma.size() != subsystem.num_eq() ||
      mu.size() != subsystem.num_ineq()) {
    throw InstanceError("subsystem " + std::to_string(subsystem.index + 1) +
                        ": derivative point has mismatched dimensions");
  }
  SubsystemDerivs derivs;
  subsystem.model->eval_derivs(x, gamma, mu, derivs);
  check_shapes(subsystem, derivs);
  if (!all_finite(derivs.grad_f) || !all_finite(derivs.jac_g) || !all_finite(derivs.jac_h) ||
      !all_finite(derivs.hess_lag)) {
    throw EvaluationError("subsystem " + std::to_string(subsystem.index + 1) +
                              ": evaluator produced non-finite derivatives",
                          subsystem.index);
  }
  derivs.hess_lag = ((derivs.hess_lag + derivs.hess_lag.transpose()) * 0.5).eval();
  return derivs;
}

std::string DerivativeCheckReport::summary() const {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "%s  grad_f %.3e  jac_g %.3e  jac_h %.3e  hess_lag %.3e  (tol %.1e)",
                pass ? "PASS" : "FAIL", grad_f_dev, jac_g_dev, jac_h_dev, hess_dev, tol);
  return buf;
}

DerivativeCheckReport check_derivatives_fd(const Subsystem& subsystem, const Vector& x,
                                           const Vector& gamma, const Vector& mu, double tol) {
  if (tol <= 0) throw InstanceError("derivative check tolerance must be positive");
  const int n = subsystem.num_vars();
  const SubsystemDerivs exact = evaluate_derivatives(subsystem, x, gamma, mu);

  Vector fd_grad(n);
  Matrix fd_jac_g(subsystem.num_eq(), n);
  Matrix fd_jac_h(subsystem.num_ineq(), n);
  Matrix fd_hess(n, n);

  auto lagrangian_grad = [&](const Vector& xx) {
    SubsystemDerivs d = evaluate_derivatives(subsystem, xx, gamma, mu);
    Vector g = d.grad_f;
    if (subsystem.num_eq() > 0) g += d.jac_g.transpose() * gamma;
    if (subsystem.num_ineq() > 0) g += d.jac_h.transpose() * mu;
    return g;
  };

  for (int j = 0; j < n; ++j) {
    const double h = 1e-7 * (1.0 + std::abs(x[j]));
    Vector xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    const SubsystemEval ep = evaluate(subsystem, xp);
    const SubsystemEval em = evaluate(subsystem, xm);
    fd_grad[j] = (ep.f - em.f) / (2 * h);
    if (subsystem.num_eq() > 0) fd_jac_g.col(j) = (ep.g - em.g) / (2 * h);
    if (subsystem.num_ineq() > 0) fd_jac_h.col(j) = (ep.h - em.h) / (2 * h);
    fd_hess.col(j) = (lagrangian_grad(xp) - lagrangian_grad(xm)) / (2 * h);
  }

  auto deviation = [](const Matrix& a, const Matrix& b) {
    if (a.size() == 0) return 0.0;
    const double scale = 1.0 + a.cwiseAbs().maxCoeff();
    return (a - b).cwiseAbs().maxCoeff() / scale;
  };

  DerivativeCheckReport report;
  report.tol = tol;
  report.grad_f_dev = deviation(exact.grad_f, fd_grad);
  report.jac_g_dev = deviation(exact.jac_g, fd_jac_g);
  report.jac_h_dev = deviation(exact.jac_h, fd_jac_h);
  report.hess_dev = deviation(exact.hess_lag, (fd_hess + fd_hess.transpose()) * 0.5);
  report.pass = report.max_dev() <= tol;
  return report;
}

KktResidual kkt_residual(const PartitionedNlp& problem, const std::vector<SubsystemPoint>& points,
                         const Vector& lambda, double delta) {
  if (static_cast<int>(points.size()) != problem.num_subsystems()) {
    throw InstanceError("kkt_residual: point count does not match subsystem count");
  }
  if (lambda.size() != problem.coupling_dim()) {
    throw InstanceError("kkt_residual: lambda has wrong length");
  }
  if (delta < 0) throw InstanceError("kkt_residual: delta must be nonnegative");

  KktResidual res;
  res.blocks.reserve(points.size());
  Vector coupling = problem.coupling_rhs();
  double worst = 0.0;

  for (int i = 0; i < problem.num_subsystems(); ++i) {
    const Subsystem& sub = problem.subsystem(i);
    const SubsystemPoint& p = points[i];
    const int n_x = sub.num_vars(), n_g = sub.num_eq(), n_h = sub.num_ineq();
    if ((n_h > 0 && (p.v.minCoeff() <= 0 || p.mu.minCoeff() <= 0))) {
      throw InteriorError("kkt_residual: subsystem " + std::to_string(i + 1) +
                          " violates the strict interior (v > 0, mu > 0)");
    }
    const SubsystemEval eval = evaluate(sub, p.x);
    const SubsystemDerivs derivs = evaluate_derivatives(sub, p.x, p.gamma, p.mu);

    Vector block(n_x + n_h + n_g + n_h);
    Vector stationarity = derivs.grad_f + sub.coupling.apply_transpose(lambda);
    if (n_g > 0) stationarity += derivs.jac_g.transpose() * p.gamma;
    if (n_h > 0) stationarity += derivs.jac_h.transpose() * p.mu;
    block.head(n_x) = stationarity;
    // Complementarity in product form: delta - v_j mu_j.
    block.segment(n_x, n_h) = Vector::Constant(n_h, delta) - p.v.cwiseProduct(p.mu);
    block.segment(n_x + n_h, n_g) = eval.g;
    block.tail(n_h) = eval.h + p.v;

    worst = std::max(worst, inf_norm(block));
    res.blocks.push_back(std::move(block));
    coupling -= sub.coupling.apply(p.x);
  }

  res.coupling = std::move(coupling);
  res.inf_norm = std::max(worst, inf_norm(res.coupling));
  return res;
}

double consensus_violation(const PartitionedNlp& problem, const Vector& x) {
  if (x.size() != problem.total_vars()) {
    throw InstanceError("consensus_violation: concatenated point has length " +
                        std::to_string(x.size()) + ", expected " +
                        std::to_string(problem.total_vars()));
  }
  Vector acc = -problem.coupling_rhs();
  int offset = 0;
  for (const Subsystem& sub : problem.subsystems()) {
    acc += sub.coupling.apply(x.segment(offset, sub.num_vars()));
    offset += sub.num_vars();
  }
  return inf_norm(acc);
}

double consensus_violation(const PartitionedNlp& problem,
                           const std::vector<SubsystemPoint>& points) {
  return consensus_violation(problem, concat_x(points));
}

double total_objective(const PartitionedNlp& problem, const std::vector<SubsystemPoint>& points) {
  double f = 0.0;
  for (int i = 0; i < problem.num_subsystems(); ++i) {
    f += evaluate(problem.subsystem(i), points[i].x).f;
  }
  return f;
}

Vector concat_x(const std::vector<SubsystemPoint>& points) {
  int total = 0;
  for (const SubsystemPoint& p : points) total += static_cast<int>(p.x.size());
  Vector x(total);
  int offset = 0;
  for (const SubsystemPoint& p : points) {
    x.segment(offset, p.x.size()) = p.x;
    offset += static_cast<int>(p.x.size());
  }
  return x;
}

}  // namespace dip
