#include "dip/agent.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace dip {

namespace {

// Deterministic probe vector; keeps the near-singularity check reproducible.
Vector probe_vector(int n) {
  Vector p(n);
  std::uint64_t state = 0x9e3779b97f4a7c15ull + static_cast<std::uint64_t>(n);
  for (int i = 0; i < n; ++i) {
    state = state * 6364136223846793005ull + 1442695040888963407ull;
    p[i] = 2.0 * (static_cast<double>(state >> 11) / 9007199254740992.0) - 1.0;
  }
  return p;
}

}  // namespace

Vector newton_residual(const Subsystem& subsystem, const SubsystemPoint& point,
                       const Vector& lambda, double delta, const SubsystemEval& eval,
                       const SubsystemDerivs& derivs) {
  const int n_x = subsystem.num_vars(), n_g = subsystem.num_eq(), n_h = subsystem.num_ineq();
  Vector f(n_x + n_h + n_g + n_h);
  Vector stationarity = derivs.grad_f + subsystem.coupling.apply_transpose(lambda);
  if (n_g > 0) stationarity += derivs.jac_g.transpose() * point.gamma;
  if (n_h > 0) stationarity += derivs.jac_h.transpose() * point.mu;
  f.head(n_x) = stationarity;
  // Scaled complementarity delta * V^{-1}1 - mu; its exact linearization under
  // the substitution delta*V^{-2} -> V^{-1}M is the assembled slack row.
  f.segment(n_x, n_h) = delta * point.v.cwiseInverse() - point.mu;
  f.segment(n_x + n_h, n_g) = eval.g;
  f.tail(n_h) = eval.h + point.v;
  return f;
}

LocalKkt assemble_local_kkt(const Subsystem& subsystem, const SubsystemPoint& point, double delta) {
  (void)delta;  // the primal-dual substitution removes delta from the matrix
  const int n_x = subsystem.num_vars(), n_g = subsystem.num_eq(), n_h = subsystem.num_ineq();
  if (n_h > 0 && (point.v.minCoeff() <= 0 || point.mu.minCoeff() <= 0)) {
    throw InteriorError("assemble_local_kkt: subsystem " + std::to_string(subsystem.index + 1) +
                        " violates the strict interior");
  }
  const SubsystemDerivs derivs = evaluate_derivatives(subsystem, point.x, point.gamma, point.mu);

  LocalKkt kkt;
  kkt.n_x_ = n_x;
  kkt.n_g_ = n_g;
  kkt.n_h_ = n_h;
  kkt.order_ = n_x + n_h + n_g + n_h;
  kkt.hess_ = derivs.hess_lag;
  kkt.jac_g_ = derivs.jac_g;
  kkt.jac_h_ = derivs.jac_h;
  kkt.v_ = point.v;
  kkt.mu_ = point.mu;
  kkt.build_matrix(0.0);
  return kkt;
}

void LocalKkt::build_matrix(double shift) {
  const int off_v = n_x_;
  const int off_g = n_x_ + n_h_;
  const int off_m = n_x_ + n_h_ + n_g_;

  triplets_.clear();
  triplets_.reserve(static_cast<std::size_t>(n_x_) * 8 + 4 * n_h_ + 1);

  for (int j = 0; j < n_x_; ++j) {
    for (int i = 0; i < n_x_; ++i) {
      double val = hess_(i, j);
      if (i == j) val += shift;
      if (val != 0.0) triplets_.emplace_back(i, j, val);
    }
  }
  for (int r = 0; r < n_g_; ++r) {
    for (int j = 0; j < n_x_; ++j) {
      const double val = jac_g_(r, j);
      if (val != 0.0) {
        triplets_.emplace_back(off_g + r, j, val);  // row 3: jac_g
        triplets_.emplace_back(j, off_g + r, val);  // row 1: jac_g'
      }
    }
  }
  for (int r = 0; r < n_h_; ++r) {
    for (int j = 0; j < n_x_; ++j) {
      const double val = jac_h_(r, j);
      if (val != 0.0) {
        triplets_.emplace_back(off_m + r, j, val);  // row 4: jac_h
        triplets_.emplace_back(j, off_m + r, val);  // row 1: jac_h'
      }
    }
    triplets_.emplace_back(off_v + r, off_v + r, -mu_[r] / v_[r]);  // -V^{-1}M
    triplets_.emplace_back(off_v + r, off_m + r, -1.0);             // slack row: -I
    triplets_.emplace_back(off_m + r, off_v + r, 1.0);              // h + v row: +I
  }

  regularization_ = shift;
  dense_lu_.reset();
  sparse_lu_.reset();
}

Matrix LocalKkt::dense() const {
  Matrix m = Matrix::Zero(order_, order_);
  for (const auto& t : triplets_) m(t.row(), t.col()) += t.value();
  return m;
}

Vector LocalKkt::apply(const Vector& z) const {
  Vector y = Vector::Zero(order_);
  for (const auto& t : triplets_) y[t.row()] += t.value() * z[t.col()];
  return y;
}

void LocalKkt::append_triplets(std::vector<Eigen::Triplet<double>>& out, int row0, int col0) const {
  for (const auto& t : triplets_) out.emplace_back(row0 + t.row(), col0 + t.col(), t.value());
}

bool LocalKkt::try_factorize() {
  if (order_ == 0) return true;
  const bool use_dense = order_ <= kSparseOrderThreshold;
  if (use_dense) {
    dense_lu_ = std::make_unique<Eigen::PartialPivLU<Matrix>>(dense());
    const Vector diag = dense_lu_->matrixLU().diagonal();
    const double max_pivot = diag.cwiseAbs().maxCoeff();
    if (max_pivot == 0.0 || diag.cwiseAbs().minCoeff() < 1e-12 * max_pivot) {
      dense_lu_.reset();
      return false;
    }
  } else {
    sparse_.resize(order_, order_);
    sparse_.setFromTriplets(triplets_.begin(), triplets_.end());
    sparse_.makeCompressed();
    sparse_lu_ = std::make_unique<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
    sparse_lu_->compute(sparse_);
    if (sparse_lu_->info() != Eigen::Success) {
      sparse_lu_.reset();
      return false;
    }
  }

  // Reject factorizations that do not reproduce the matrix action.
  Vector row_norm = Vector::Zero(order_);
  for (const auto& t : triplets_) row_norm[t.row()] += std::abs(t.value());
  const double m_norm = row_norm.maxCoeff();
  const Vector r = probe_vector(order_);
  const Vector z = solve(r);
  --solve_count_;  // the probe is bookkeeping, not work done for a caller
  if (!all_finite(z)) return false;
  const double resid = inf_norm(apply(z) - r);
  if (resid > 1e-8 * (m_norm * inf_norm(z) + inf_norm(r))) {
    dense_lu_.reset();
    sparse_lu_.reset();
    return false;
  }
  return true;
}

void factorize(LocalKkt& kkt, int subsystem_index) {
  if (kkt.try_factorize()) return;
  for (int j = 0; j <= 8; ++j) {
    const double rho = 1e-8 * std::pow(10.0, j);
    kkt.build_matrix(rho);
    if (kkt.try_factorize()) return;
  }
  throw FactorizationError("local KKT matrix of subsystem " +
                               std::to_string(subsystem_index + 1) +
                               " is singular after regularization",
                           subsystem_index);
}

Vector LocalKkt::solve(const Vector& rhs) const {
  if (!factorized()) throw FactorizationError("solve called before factorize");
  ++solve_count_;
  if (dense_lu_) return dense_lu_->solve(rhs);
  return sparse_lu_->solve(rhs);
}

SchurContribution schur_contribution(const LocalKkt& kkt, const SparseCoupling& coupling,
                                     const Vector& newton_residual, const Vector& a_times_x,
                                     const Vector& coupling_rhs, int num_subsystems) {
  if (!kkt.factorized()) throw FactorizationError("schur_contribution needs a factorized KKT");
  const int n_c = coupling.rows;

  // Columns of Atilde' grouped by coupling row; only structurally nonzero
  // rows of A_i produce work.
  std::map<int, std::vector<std::pair<int, double>>> columns;
  for (const auto& e : coupling.entries) {
    if (e.value != 0.0) columns[e.row].push_back({e.col, e.value});
  }

  SchurContribution out;
  out.S = Matrix::Zero(n_c, n_c);
  for (const auto& [row, cols] : columns) {
    Vector rhs = Vector::Zero(kkt.order());
    for (const auto& [col, val] : cols) rhs[col] += val;
    const Vector z = kkt.solve(rhs);
    ++kkt.schur_column_solves_;
    out.S.col(row) = coupling.apply(z.head(kkt.n_x()));
  }
  out.S = ((out.S + out.S.transpose()) * 0.5).eval();

  const Vector z_f = kkt.solve(newton_residual);
  out.s = a_times_x - coupling.apply(z_f.head(kkt.n_x())) -
          coupling_rhs / static_cast<double>(num_subsystems);
  if (!all_finite(out.S) || !all_finite(out.s)) {
    throw EvaluationError("non-finite Schur contribution", -1);
  }
  return out;
}

Vector back_substitute(const LocalKkt& kkt, const Vector& newton_residual,
                       const SparseCoupling& coupling, const Vector& delta_lambda) {
  Vector rhs = newton_residual;
  rhs.head(kkt.n_x()) += coupling.apply_transpose(delta_lambda);
  return -kkt.solve(rhs);
}

std::pair<double, double> local_fraction_to_boundary(const SubsystemPoint& point,
                                                     const Vector& delta_p, double tau) {
  const int n_x = static_cast<int>(point.x.size());
  const int n_h = static_cast<int>(point.v.size());
  const int n_g = static_cast<int>(point.gamma.size());
  auto boundary = [tau](const Vector& value, const Vector& step) {
    double alpha = 1.0;
    for (int j = 0; j < value.size(); ++j) {
      if (step[j] < 0.0) alpha = std::min(alpha, tau * (-value[j] / step[j]));
    }
    return alpha;
  };
  const double alpha_p = boundary(point.v, delta_p.segment(n_x, n_h));
  const double alpha_d = boundary(point.mu, delta_p.tail(n_h));
  (void)n_g;
  return {alpha_p, alpha_d};
}

double local_barrier_candidate(const SubsystemPoint& point, double sigma) {
  const int n_h = static_cast<int>(point.v.size());
  if (n_h == 0) return 0.0;
  return sigma * point.v.dot(point.mu) / n_h;
}

}  // namespace dip
