#include <doctest.h>

#include <random>

#include "dip/opf.hpp"
#include "support/oracles.hpp"

using namespace dip;
using namespace dip::opf;

namespace {

const char* kLoadedTwoBus = R"(function mpc = case2
mpc.baseMVA = 100;
mpc.bus = [
  1 3 0   0  0 0 1 1 0 138 1 1.1 0.9;
  2 1 50 20  0 0 1 1 0 138 1 1.1 0.9;
];
mpc.gen = [
  1 0 0 80 -80 1 100 1 150 0;
];
mpc.branch = [
  1 2 0.02 0.1 0 0 0 0 0 0 1;
];
mpc.gencost = [
  2 0 0 3 0.02 30 10;
];
)";

const char* kIdleTwoBus = R"(function mpc = idle
mpc.baseMVA = 100;
mpc.bus = [
  1 3 0 0 0 0 1 1 0 138 1 1.1 0.9;
  2 1 0 0 0 0 1 1 0 138 1 1.1 0.9;
];
mpc.gen = [
  1 0 0 0 0 1 100 1 0 0;
];
mpc.branch = [
  1 2 0.02 0.1 0 0 0 0 0 0 1;
];
mpc.gencost = [
  2 0 0 3 0.02 30 0;
];
)";

Subsystem as_subsystem(std::shared_ptr<const SubsystemModel> model) {
  const int n = model->num_vars();
  return {std::move(model), SparseCoupling(1, n)};
}

}  // namespace

TEST_CASE("flat start with zero demand and idle generation is exactly balanced") {
  const OpfCase c = parse_matpower_case(kIdleTwoBus);
  const CentralizedOpf opf = build_opf_nlp(c);
  const Vector x = opf.model->flat_start_x();
  SubsystemEval eval;
  opf.model->eval(x, eval);
  CHECK(inf_norm(eval.g) == 0.0);
  CHECK(eval.f == doctest::Approx(0.0));
}

TEST_CASE("flat-start equalities are the negated power mismatches") {
  const OpfCase c = load_matpower_file(test::fixture_path("case118.m"));
  const CentralizedOpf opf = build_opf_nlp(c);
  const Vector x = opf.model->flat_start_x();
  SubsystemEval eval;
  opf.model->eval(x, eval);

  const auto& layout = opf.model->layout();
  std::vector<std::complex<double>> v(c.buses.size(), {1.0, 0.0});
  std::vector<double> gen_p, gen_q;
  for (int j = 0; j < layout.n_gen(); ++j) {
    gen_p.push_back(x[layout.p_index(j)]);
    gen_q.push_back(x[layout.q_index(j)]);
  }
  const auto mismatch = test::power_mismatch_oracle(c, v, gen_p, gen_q);
  const int n = static_cast<int>(c.buses.size());
  for (int i = 0; i < n; ++i) {
    CHECK(eval.g[i] == doctest::Approx(-mismatch[i].real()).epsilon(1e-10));
    CHECK(eval.g[n + i] == doctest::Approx(-mismatch[i].imag()).epsilon(1e-10));
  }
}

TEST_CASE("equalities vanish at the power-flow oracle solution") {
  const OpfCase c = parse_matpower_case(kLoadedTwoBus);
  // Start from zero generator output; the oracle reports the slack injection.
  auto pf = test::solve_power_flow_oracle(c, {0.0}, {0.0});
  REQUIRE(pf.converged);

  const CentralizedOpf opf = build_opf_nlp(c);
  const auto& layout = opf.model->layout();
  Vector x = Vector::Zero(opf.model->num_vars());
  for (std::size_t i = 0; i < c.buses.size(); ++i) {
    x[layout.e_index(static_cast<int>(i))] = pf.v[i].real();
    x[layout.f_index(static_cast<int>(i))] = pf.v[i].imag();
  }
  x[layout.p_index(0)] = pf.slack_injection.real();
  x[layout.q_index(0)] = pf.slack_injection.imag();

  SubsystemEval eval;
  opf.model->eval(x, eval);
  CHECK(inf_norm(eval.g) <= 1e-8);
}

TEST_CASE("power balance: injections minus demands equal nonnegative losses") {
  const OpfCase c = parse_matpower_case(kLoadedTwoBus);
  auto pf = test::solve_power_flow_oracle(c, {0.0}, {0.0});
  REQUIRE(pf.converged);

  // losses = sum of real bus powers re(v_n conj((Y v)_n)).
  const ComplexSparse y = build_admittance(c);
  Eigen::VectorXcd v(c.buses.size());
  for (std::size_t i = 0; i < c.buses.size(); ++i) v[static_cast<int>(i)] = pf.v[i];
  const Eigen::VectorXcd current = y * v;
  double losses = 0.0;
  for (int i = 0; i < v.size(); ++i) losses += (v[i] * std::conj(current[i])).real();

  const double injections = pf.slack_injection.real();
  double demands = 0.0;
  for (const auto& bus : c.buses) demands += bus.p_demand;
  CHECK(losses >= 0.0);
  CHECK(injections - demands == doctest::Approx(losses).epsilon(1e-8));
}

TEST_CASE("objective: internal scale against the raw dollar formula") {
  const OpfCase c = parse_matpower_case(kLoadedTwoBus);
  const CentralizedOpf opf = build_opf_nlp(c);
  Vector x = opf.model->flat_start_x();
  const auto& layout = opf.model->layout();
  x[layout.p_index(0)] = 0.6;  // 60 MW

  const double raw = opf.model->raw_objective(x);
  CHECK(raw == doctest::Approx(0.02 * 60.0 * 60.0 + 30.0 * 60.0 + 10.0));
  SubsystemEval eval;
  opf.model->eval(x, eval);
  CHECK(eval.f == doctest::Approx(raw * opf.objective_scale));
  CHECK(opf.objective_scale == doctest::Approx(1e-4));
}

TEST_CASE("voltage and generator bound rows at flat start") {
  const OpfCase c = parse_matpower_case(kLoadedTwoBus);
  const CentralizedOpf opf = build_opf_nlp(c);
  const Vector x = opf.model->flat_start_x();
  SubsystemEval eval;
  opf.model->eval(x, eval);
  // Bounds [0.9, 1.1]: both squared-magnitude rows strictly negative at 1.0.
  const int ng = opf.model->layout().n_gen();
  for (int r = 0; r < opf.model->layout().n_own(); ++r) {
    CHECK(eval.h[4 * ng + 2 * r] == doctest::Approx(0.81 - 1.0));
    CHECK(eval.h[4 * ng + 2 * r + 1] == doctest::Approx(1.0 - 1.21));
  }
  // Generator at midpoint: p rows symmetric.
  CHECK(eval.h[0] == doctest::Approx(-0.75));
  CHECK(eval.h[1] == doctest::Approx(-0.75));
}

TEST_CASE("analytic derivatives match finite differences at random interior points") {
  const OpfCase c = parse_matpower_case(kLoadedTwoBus);
  const CentralizedOpf opf = build_opf_nlp(c);
  Subsystem sub = as_subsystem(opf.model);

  std::mt19937 rng(71);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    Vector x = opf.model->flat_start_x();
    for (int j = 0; j < x.size(); ++j) x[j] += 0.1 * unit(rng);
    Vector gamma(sub.num_eq());
    for (int j = 0; j < gamma.size(); ++j) gamma[j] = unit(rng);
    Vector mu(sub.num_ineq());
    for (int j = 0; j < mu.size(); ++j) mu[j] = 0.3 + 0.3 * std::abs(unit(rng));
    const DerivativeCheckReport report = check_derivatives_fd(sub, x, gamma, mu, 1e-6);
    CHECK(report.pass);
  }
}

TEST_CASE("118-bus derivative check passes") {
  const OpfCase c = load_matpower_file(test::fixture_path("case118.m"));
  const CentralizedOpf opf = build_opf_nlp(c);
  Subsystem sub = as_subsystem(opf.model);

  std::mt19937 rng(13);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  Vector x = opf.model->flat_start_x();
  for (int j = 0; j < x.size(); ++j) x[j] += 0.05 * unit(rng);
  Vector gamma(sub.num_eq());
  for (int j = 0; j < gamma.size(); ++j) gamma[j] = unit(rng);
  Vector mu(sub.num_ineq());
  for (int j = 0; j < mu.size(); ++j) mu[j] = 0.2 + 0.4 * std::abs(unit(rng));
  const DerivativeCheckReport report = check_derivatives_fd(sub, x, gamma, mu, 1e-6);
  CHECK(report.pass);
}

TEST_CASE("disconnected buses are rejected by the builder") {
  OpfCase c = parse_matpower_case(kLoadedTwoBus);
  c.branches[0].in_service = false;
  CHECK_THROWS_AS(build_opf_nlp(c), InstanceError);
}
