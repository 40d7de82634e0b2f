#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <random>

#include "dip/agent.hpp"
#include "dip/oracle.hpp"
#include "dip/quadratic.hpp"
#include "support/oracles.hpp"

using namespace dip;

namespace {

Subsystem make_subsystem(std::shared_ptr<QuadraticModel> model, SparseCoupling coupling) {
  return {std::move(model), std::move(coupling)};
}

SubsystemPoint interior_point(const Subsystem& sub, Vector x, double v_value, double mu_value) {
  SubsystemPoint p;
  p.x = std::move(x);
  p.v = Vector::Constant(sub.num_ineq(), v_value);
  p.mu = Vector::Constant(sub.num_ineq(), mu_value);
  p.gamma = Vector::Zero(sub.num_eq());
  return p;
}

}  // namespace

TEST_CASE("local KKT blocks for a scalar subsystem with one inequality") {
  auto model = std::make_shared<QuadraticModel>(Matrix::Identity(1, 1), Vector::Zero(1));
  model->with_inequalities(Matrix::Identity(1, 1), Vector::Zero(1));  // h(x) = x
  Subsystem sub = make_subsystem(model, SparseCoupling(1, 1));
  SubsystemPoint p = interior_point(sub, Vector::Constant(1, 0.3), 1.0, 0.5);

  const LocalKkt kkt = assemble_local_kkt(sub, p, 0.1);
  const Matrix m = kkt.dense();
  REQUIRE(m.rows() == 3);
  // Order (x, v, mu). The slack row is the exact linearization of
  // delta/v - mu, so its identity block carries a minus sign.
  Matrix expected(3, 3);
  expected << 1, 0, 1,  //
      0, -0.5, -1,      //
      1, 1, 0;
  CHECK((m - expected).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("local KKT blocks for a scalar subsystem with one equality") {
  auto model = std::make_shared<QuadraticModel>(Matrix::Identity(1, 1), Vector::Zero(1));
  model->with_equalities(Matrix::Identity(1, 1), Vector::Constant(1, 1.0));  // g(x) = x - 1
  Subsystem sub = make_subsystem(model, SparseCoupling(1, 1));
  SubsystemPoint p = interior_point(sub, Vector::Zero(1), 0.0, 0.0);

  const Matrix m = assemble_local_kkt(sub, p, 0.1).dense();
  Matrix expected(2, 2);
  expected << 1, 1, 1, 0;
  CHECK((m - expected).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("assemble rejects interior violations") {
  auto model = std::make_shared<QuadraticModel>(Matrix::Identity(1, 1), Vector::Zero(1));
  model->with_inequalities(Matrix::Identity(1, 1), Vector::Zero(1));
  Subsystem sub = make_subsystem(model, SparseCoupling(1, 1));
  SubsystemPoint p = interior_point(sub, Vector::Zero(1), 0.0, 0.5);
  CHECK_THROWS_AS(assemble_local_kkt(sub, p, 0.1), InteriorError);
}

TEST_CASE("factorize: regular, indefinite and singular matrices") {
  SUBCASE("identity factorizes without a shift") {
    auto model = std::make_shared<QuadraticModel>(Matrix::Identity(2, 2), Vector::Zero(2));
    Subsystem sub = make_subsystem(model, SparseCoupling(1, 2));
    SubsystemPoint p = interior_point(sub, Vector::Zero(2), 0, 0);
    LocalKkt kkt = assemble_local_kkt(sub, p, 0.0);
    factorize(kkt);
    CHECK(kkt.regularization_applied() == 0.0);
    Vector r(2);
    r << 1.0, -2.0;
    CHECK((kkt.solve(r) - r).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  }

  SUBCASE("indefinite but invertible succeeds without a shift") {
    Matrix h(2, 2);
    h << 0, 1, 1, 0;
    auto model = std::make_shared<QuadraticModel>(h, Vector::Zero(2));
    Subsystem sub = make_subsystem(model, SparseCoupling(1, 2));
    SubsystemPoint p = interior_point(sub, Vector::Zero(2), 0, 0);
    LocalKkt kkt = assemble_local_kkt(sub, p, 0.0);
    factorize(kkt);
    CHECK(kkt.regularization_applied() == 0.0);
  }

  SUBCASE("zero matrix escalates to rho > 0 and solves r / rho") {
    auto model = std::make_shared<QuadraticModel>(Matrix::Zero(1, 1), Vector::Zero(1));
    Subsystem sub = make_subsystem(model, SparseCoupling(1, 1));
    SubsystemPoint p = interior_point(sub, Vector::Zero(1), 0, 0);
    LocalKkt kkt = assemble_local_kkt(sub, p, 0.0);
    factorize(kkt);
    CHECK(kkt.regularization_applied() > 0.0);
    const Vector r = Vector::Constant(1, 3.0);
    CHECK(kkt.solve(r)[0] == doctest::Approx(3.0 / kkt.regularization_applied()));
  }
}

TEST_CASE("factorization reproduces the matrix action on random instances") {
  std::mt19937 rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    test::RandomQp qp = test::make_random_qp(rng, 2, 3, 10);
    for (int i = 0; i < qp.problem.num_subsystems(); ++i) {
      LocalKkt kkt = assemble_local_kkt(qp.problem.subsystem(i), qp.interior[i], qp.delta);
      factorize(kkt, i);
      std::uniform_real_distribution<double> unit(-1.0, 1.0);
      Vector r(kkt.order());
      for (int j = 0; j < r.size(); ++j) r[j] = unit(rng);
      const Vector z = kkt.solve(r);
      CHECK(inf_norm(kkt.apply(z) - r) <= 1e-10 * (1.0 + inf_norm(r)));
    }
  }
}

TEST_CASE("assembled matrix equals the finite-difference Jacobian") {
  std::mt19937 rng(99);
  test::RandomQp qp = test::make_random_qp(rng, 2, 3, 6);
  for (int i = 0; i < qp.problem.num_subsystems(); ++i) {
    const Subsystem& sub = qp.problem.subsystem(i);
    const SubsystemPoint& p = qp.interior[i];
    const LocalKkt kkt = assemble_local_kkt(sub, p, qp.delta);
    Matrix fd = test::fd_newton_jacobian(sub, p, qp.lambda, qp.delta);

    // The slack-row diagonal carries -delta/v^2 in the exact Jacobian; the
    // assembled matrix substitutes -mu/v. Check the FD entries against the
    // exact form, then substitute before the full comparison.
    const int n_x = sub.num_vars();
    for (int j = 0; j < sub.num_ineq(); ++j) {
      const double exact = -qp.delta / (p.v[j] * p.v[j]);
      CHECK(fd(n_x + j, n_x + j) == doctest::Approx(exact).epsilon(1e-5));
      fd(n_x + j, n_x + j) = -p.mu[j] / p.v[j];
    }
    CHECK((kkt.dense() - fd).cwiseAbs().maxCoeff() <= 1e-5);
  }
}

TEST_CASE("schur contribution identities for identity systems") {
  const int n = 3;
  SparseCoupling eye(n, n);
  for (int j = 0; j < n; ++j) eye.add(j, j, 1.0);

  SUBCASE("gradF = I gives S = I") {
    auto model = std::make_shared<QuadraticModel>(Matrix::Identity(n, n), Vector::Zero(n));
    Subsystem sub = make_subsystem(model, eye);
    SubsystemPoint p = interior_point(sub, Vector::Zero(n), 0, 0);
    LocalKkt kkt = assemble_local_kkt(sub, p, 0.0);
    factorize(kkt);
    const Vector f = Vector::Zero(n);
    const SchurContribution sc =
        schur_contribution(kkt, sub.coupling, f, sub.coupling.apply(p.x), Vector::Zero(n), 1);
    CHECK((sc.S - Matrix::Identity(n, n)).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  }

  SUBCASE("gradF = 2I gives S = I/2") {
    auto model = std::make_shared<QuadraticModel>(2.0 * Matrix::Identity(n, n), Vector::Zero(n));
    Subsystem sub = make_subsystem(model, eye);
    SubsystemPoint p = interior_point(sub, Vector::Zero(n), 0, 0);
    LocalKkt kkt = assemble_local_kkt(sub, p, 0.0);
    factorize(kkt);
    const SchurContribution sc = schur_contribution(kkt, sub.coupling, Vector::Zero(n),
                                                    sub.coupling.apply(p.x), Vector::Zero(n), 1);
    CHECK((sc.S - 0.5 * Matrix::Identity(n, n)).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  }
}

namespace {

struct SchurSums {
  Matrix S;
  Vector s;
  std::vector<LocalKkt> kkts;
  std::vector<Vector> residuals;
};

SchurSums schur_sums(const test::RandomQp& qp) {
  const PartitionedNlp& problem = qp.problem;
  const int n_c = problem.coupling_dim();
  SchurSums sums;
  sums.S = Matrix::Zero(n_c, n_c);
  sums.s = Vector::Zero(n_c);
  for (int i = 0; i < problem.num_subsystems(); ++i) {
    const Subsystem& sub = problem.subsystem(i);
    const SubsystemPoint& p = qp.interior[i];
    LocalKkt kkt = assemble_local_kkt(sub, p, qp.delta);
    factorize(kkt, i);
    const SubsystemEval eval = evaluate(sub, p.x);
    const SubsystemDerivs derivs = evaluate_derivatives(sub, p.x, p.gamma, p.mu);
    const Vector f = newton_residual(sub, p, qp.lambda, qp.delta, eval, derivs);
    const SchurContribution sc = schur_contribution(kkt, sub.coupling, f, sub.coupling.apply(p.x),
                                                    problem.coupling_rhs(),
                                                    problem.num_subsystems());
    sums.S += sc.S;
    sums.s += sc.s;
    sums.kkts.push_back(std::move(kkt));
    sums.residuals.push_back(f);
  }
  return sums;
}

}  // namespace

TEST_CASE("sum of Schur contributions matches dense elimination of the full KKT") {
  std::mt19937 rng(2024);
  for (int trial = 0; trial < 8; ++trial) {
    test::RandomQp qp = test::make_random_qp(rng, 3, 4, 8);
    const SchurSums sums = schur_sums(qp);

    const FullKkt full = assemble_full_kkt(qp.problem, qp.interior, qp.lambda, qp.delta);
    const Matrix dense = Matrix(full.matrix);
    const int n_c = qp.problem.coupling_dim();
    const int m = full.coupling_offset;
    const Matrix diag = dense.topLeftCorner(m, m);
    const Matrix border = dense.bottomLeftCorner(n_c, m);
    const Matrix border_t = dense.topRightCorner(m, n_c);
    // Eliminating the block-diagonal part leaves  -B K^{-1} B' and the
    // reduced right-hand side; compare against sum S_i and sum s_i.
    const Matrix s_direct = border * diag.partialPivLu().solve(border_t);
    CHECK((sums.S - s_direct).cwiseAbs().maxCoeff() <= 1e-10 * (1.0 + s_direct.cwiseAbs().maxCoeff()));

    const Vector f_stacked = -full.rhs.head(m);
    const Vector s_rhs_direct =
        -full.rhs.tail(n_c) + qp.problem.coupling_rhs() -
        border * diag.partialPivLu().solve(f_stacked) - qp.problem.coupling_rhs();
    CHECK((sums.s - s_rhs_direct).cwiseAbs().maxCoeff() <=
          1e-10 * (1.0 + s_rhs_direct.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("sum of s_i is independent of the b split") {
  std::mt19937 rng(11);
  test::RandomQp qp = test::make_random_qp(rng, 3, 3, 6);
  const SchurSums sums = schur_sums(qp);

  // Direct formula without the per-agent split: sum A_i x_i - sum Atilde
  // K^{-1} F_i - b.
  Vector direct = -qp.problem.coupling_rhs();
  for (int i = 0; i < qp.problem.num_subsystems(); ++i) {
    const Subsystem& sub = qp.problem.subsystem(i);
    direct += sub.coupling.apply(qp.interior[i].x);
    const Vector z = sums.kkts[i].solve(sums.residuals[i]);
    direct -= sub.coupling.apply(z.head(sub.num_vars()));
  }
  CHECK((sums.s - direct).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + inf_norm(direct)));
}

TEST_CASE("sum of Schur contributions is symmetric positive semidefinite on convex instances") {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    test::RandomQp qp = test::make_random_qp(rng, 3, 5, 8);
    const SchurSums sums = schur_sums(qp);
    CHECK((sums.S - sums.S.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    Eigen::SelfAdjointEigenSolver<Matrix> eigs(sums.S);
    CHECK(eigs.eigenvalues().minCoeff() >= -1e-10);
  }
}

TEST_CASE("schur solves only the structurally coupled columns") {
  std::mt19937 rng(3);
  test::RandomQp qp = test::make_random_qp(rng, 2, 6, 8);
  // Blank out every entry of two coupling rows in subsystem 0.
  Subsystem sub = qp.problem.subsystem(0);
  SparseCoupling pruned(sub.coupling.rows, sub.coupling.cols);
  for (const auto& e : sub.coupling.entries) {
    if (e.row != 1 && e.row != 3) pruned.add(e.row, e.col, e.value);
  }
  sub.coupling = pruned;

  LocalKkt kkt = assemble_local_kkt(sub, qp.interior[0], qp.delta);
  factorize(kkt);
  const SubsystemEval eval = evaluate(sub, qp.interior[0].x);
  const SubsystemDerivs derivs =
      evaluate_derivatives(sub, qp.interior[0].x, qp.interior[0].gamma, qp.interior[0].mu);
  const Vector f = newton_residual(sub, qp.interior[0], qp.lambda, qp.delta, eval, derivs);
  const SchurContribution sc =
      schur_contribution(kkt, sub.coupling, f, sub.coupling.apply(qp.interior[0].x),
                         qp.problem.coupling_rhs(), 2);
  CHECK(kkt.schur_column_solves() == static_cast<long>(sub.coupling.nonzero_rows().size()));
  CHECK(sc.S.col(1).cwiseAbs().maxCoeff() == 0.0);
  CHECK(sc.S.row(1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("back substitution identities") {
  const int n = 2;
  auto model = std::make_shared<QuadraticModel>(Matrix::Identity(n, n), Vector::Zero(n));
  SparseCoupling coupling(n, n);
  for (int j = 0; j < n; ++j) coupling.add(j, j, 1.0);
  Subsystem sub = make_subsystem(model, coupling);
  SubsystemPoint p = interior_point(sub, Vector::Zero(n), 0, 0);
  LocalKkt kkt = assemble_local_kkt(sub, p, 0.0);
  factorize(kkt);

  Vector f(n);
  f << 1.0, -2.0;
  CHECK((back_substitute(kkt, f, sub.coupling, Vector::Zero(n)) + f).cwiseAbs().maxCoeff() ==
        doctest::Approx(0.0));

  Vector dl(n);
  dl << 0.5, 0.25;
  CHECK((back_substitute(kkt, Vector::Zero(n), sub.coupling, dl) + dl).cwiseAbs().maxCoeff() ==
        doctest::Approx(0.0));
}

TEST_CASE("fraction to the boundary") {
  SubsystemPoint p;
  p.x = Vector::Zero(1);
  p.gamma = Vector(0);

  SUBCASE("primal cap from the steepest slack decrease") {
    p.v = Vector(2);
    p.v << 1.0, 2.0;
    p.mu = Vector::Constant(2, 1.0);
    Vector dp(5);  // (x, v1, v2, mu1, mu2)
    dp << 0.0, -2.0, 1.0, 0.0, 0.0;
    const auto [ap, ad] = local_fraction_to_boundary(p, dp, 0.995);
    CHECK(ap == doctest::Approx(0.4975));
    CHECK(ad == doctest::Approx(1.0));
  }
  SUBCASE("nonnegative steps leave alpha at one") {
    p.v = Vector::Constant(2, 1.0);
    p.mu = Vector::Constant(2, 1.0);
    Vector dp = Vector::Zero(5);
    dp[1] = 0.3;
    const auto [ap, ad] = local_fraction_to_boundary(p, dp, 0.995);
    CHECK(ap == 1.0);
    CHECK(ad == 1.0);
  }
  SUBCASE("dual cap") {
    p.v = Vector::Constant(1, 1.0);
    p.mu = Vector::Constant(1, 0.1);
    Vector dp = Vector::Zero(3);
    dp[2] = -0.1;
    const auto [ap, ad] = local_fraction_to_boundary(p, dp, 0.995);
    CHECK(ap == 1.0);
    CHECK(ad == doctest::Approx(0.995));
  }
}

TEST_CASE("fraction to the boundary preserves strict positivity") {
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> unit(-2.0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n_h = 4;
    SubsystemPoint p;
    p.x = Vector::Zero(1);
    p.gamma = Vector(0);
    p.v = Vector(n_h);
    p.mu = Vector(n_h);
    Vector dp = Vector::Zero(1 + 2 * n_h);
    for (int j = 0; j < n_h; ++j) {
      p.v[j] = 0.1 + std::abs(unit(rng));
      p.mu[j] = 0.1 + std::abs(unit(rng));
      dp[1 + j] = unit(rng);
      dp[1 + n_h + j] = unit(rng);
    }
    const double tau = 0.995;
    const auto [ap, ad] = local_fraction_to_boundary(p, dp, tau);
    const Vector v_next = p.v + ap * dp.segment(1, n_h);
    const Vector mu_next = p.mu + ad * dp.tail(n_h);
    for (int j = 0; j < n_h; ++j) {
      CHECK(v_next[j] >= (1 - tau) * p.v[j] - 1e-15);
      CHECK(mu_next[j] > 0.0);
    }
  }
}

TEST_CASE("local barrier candidate") {
  SubsystemPoint p;
  p.x = Vector::Zero(1);
  p.gamma = Vector(0);
  p.v = Vector::Constant(2, 1.0);
  p.mu = Vector::Constant(2, 1.0);
  CHECK(local_barrier_candidate(p, 0.1) == doctest::Approx(0.1));

  p.v = Vector(0);
  p.mu = Vector(0);
  CHECK(local_barrier_candidate(p, 0.1) == 0.0);

  p.v = Vector::Constant(1, 2.0);
  p.mu = Vector::Constant(1, 0.5);
  CHECK(local_barrier_candidate(p, 0.2) == doctest::Approx(0.2));
}
