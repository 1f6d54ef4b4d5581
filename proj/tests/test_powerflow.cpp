#include "doctest.h"
#include "support.hpp"

#include "stochflow/error.hpp"
#include "stochflow/grid.hpp"
#include "stochflow/powerflow.hpp"

#include <cmath>

using namespace stochflow;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using cplx = std::complex<double>;

namespace {

grid::GridCase bare_case(int n) {
  grid::GridCase g;
  for (int i = 1; i <= n; ++i) {
    grid::Bus b;
    b.id = i;
    b.kind = i == 1 ? grid::BusKind::Slack : grid::BusKind::PQ;
    g.buses.push_back(b);
  }
  return g;
}

} // namespace

TEST_CASE("ybus of a single lossless branch") {
  auto g = bare_case(2);
  g.branches.push_back({1, 2, 0.0, 0.1, 0.0, 1.0});
  g.output = {1, 2};
  g.validate();
  const auto y = powerflow::build_ybus(g);
  CHECK(std::abs(y(0, 1) - cplx(0.0, 10.0)) < 1e-12);
  CHECK(std::abs(y(1, 0) - cplx(0.0, 10.0)) < 1e-12);
  CHECK(std::abs(y(0, 0) - cplx(0.0, -10.0)) < 1e-12);
  CHECK(std::abs(y(1, 1) - cplx(0.0, -10.0)) < 1e-12);
}

TEST_CASE("ybus with no branches is zero") {
  const auto g = bare_case(3);
  CHECK(powerflow::build_ybus(g).norm() == 0.0);
}

TEST_CASE("ybus row sums of an equal-branch ring are the shunt terms") {
  auto g = bare_case(3);
  const double b = 0.04;
  g.branches = {{1, 2, 0.01, 0.1, b, 1.0}, {2, 3, 0.01, 0.1, b, 1.0}, {3, 1, 0.01, 0.1, b, 1.0}};
  g.output = {1, 2};
  g.validate();
  const auto y = powerflow::build_ybus(g);
  for (Eigen::Index i = 0; i < 3; ++i) CHECK(std::abs(y.row(i).sum() - cplx(0.0, b)) < 1e-12);
  CHECK((y - y.transpose()).norm() < 1e-12);
  // hand value of one diagonal entry: two series admittances plus two half-chargings
  const cplx ys = 1.0 / cplx(0.01, 0.1);
  CHECK(std::abs(y(0, 0) - (2.0 * ys + cplx(0.0, b))) < 1e-12);
}

TEST_CASE("ybus puts the tap on the from side") {
  auto g = bare_case(2);
  g.branches.push_back({1, 2, 0.0, 0.2, 0.0, 0.9});
  g.output = {1, 2};
  g.validate();
  const auto y = powerflow::build_ybus(g);
  const cplx ys(0.0, -5.0);
  CHECK(std::abs(y(0, 0) - ys / 0.81) < 1e-12);
  CHECK(std::abs(y(1, 1) - ys) < 1e-12);
  CHECK(std::abs(y(0, 1) + ys / 0.9) < 1e-12);
}

TEST_CASE("zero-impedance branch is singular") {
  auto g = bare_case(2);
  g.branches.push_back({1, 2, 0.0, 0.0, 0.0, 1.0});
  CHECK_THROWS_AS(powerflow::build_ybus(g), SingularBranch);
}

TEST_CASE("unloaded case stays at the flat start") {
  auto doc = testing::small_case_json(4, 0.0);
  for (auto& b : doc["buses"]) b["q_load"] = 0.0;
  for (auto& br : doc["branches"]) br["b_shunt"] = 0.0;
  doc["buses"][0]["v_mag"] = 1.0;
  const auto g = grid::parse_case(doc);
  const auto sol = powerflow::solve(g);
  CHECK(sol.iterations <= 1);
  for (Eigen::Index i = 0; i < 4; ++i) {
    CHECK(sol.v_mag(i) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(sol.v_ang(i)) < 1e-12);
  }
  for (std::size_t b = 0; b < g.branches.size(); ++b) CHECK(std::abs(powerflow::branch_flow(g, sol, b, false)) < 1e-12);
}

TEST_CASE("two-bus lossless case matches the closed form") {
  // P = V sin(delta) / x and Q = 0 give V = cos(delta), sin(2 delta) = 2 P x.
  auto g = grid::load_case(testing::data_path("cases/two_bus.json"));
  const auto sol = powerflow::solve(g);
  const double delta = 0.5 * std::asin(2.0 * 0.5 * 0.1);
  CHECK(sol.v_mag(1) == doctest::Approx(std::cos(delta)).epsilon(1e-9));
  CHECK(sol.v_ang(1) == doctest::Approx(-delta).epsilon(1e-9));
  CHECK(sol.v_ang(0) == 0.0);
  CHECK(sol.max_mismatch < 1e-8);

  CHECK(powerflow::extract_output(g, sol) == doctest::Approx(0.5).epsilon(1e-9));
  g.output = {2, 1, grid::OutputUnits::PerUnit};
  CHECK(powerflow::extract_output(g, sol) == doctest::Approx(-0.5).epsilon(1e-9));
  g.output = {1, 2, grid::OutputUnits::Megawatt};
  CHECK(powerflow::extract_output(g, sol) == doctest::Approx(50.0).epsilon(1e-9));
}

TEST_CASE("six-bus base case converges and reproduces its injections") {
  const auto g = grid::load_case(testing::data_path("cases/case6.json"));
  const auto sol = powerflow::solve(g);
  CHECK(sol.iterations <= 10);
  CHECK(sol.max_mismatch < 1e-8);
  const auto inj = powerflow::compute_injections(powerflow::build_ybus(g), sol.v_mag, sol.v_ang);
  for (std::size_t i = 0; i < g.bus_count(); ++i) {
    const auto& b = g.buses[i];
    const auto k = static_cast<Eigen::Index>(i);
    if (b.kind == grid::BusKind::Slack) {
      CHECK(sol.v_mag(k) == *b.v_setpoint);
      continue;
    }
    CHECK(std::abs(inj.p(k) - (b.p_gen - b.p_load)) < 1e-8);
    if (b.kind == grid::BusKind::PQ) CHECK(std::abs(inj.q(k) - (b.q_gen - b.q_load)) < 1e-8);
    else CHECK(sol.v_mag(k) == *b.v_setpoint);
  }
  CHECK(std::abs(testing::balance_residual(g, sol)) < 1e-8);
}

TEST_CASE("warm start from a nearby solution needs fewer iterations") {
  const auto g = grid::load_case(testing::data_path("cases/case30.json"));
  const auto base = powerflow::solve(g);
  const std::vector<double> xi(g.dimension(), 0.5);
  const auto h = grid::apply_parameters(g, xi);
  const auto cold = powerflow::solve(h);
  powerflow::SolveOptions opt;
  opt.warm_start = base;
  const auto warm = powerflow::solve(h, opt);
  CHECK(warm.iterations < cold.iterations);
  CHECK((warm.v_mag - cold.v_mag).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("infeasible loading raises NonConvergence") {
  auto doc = testing::small_case_json(2, 20.0);
  const auto g = grid::parse_case(doc);
  CHECK_THROWS_AS(powerflow::solve(g), NonConvergence);
  powerflow::SolveOptions opt;
  opt.tol = 0.0;
  CHECK_THROWS_AS(powerflow::solve(grid::parse_case(testing::small_case_json(2)), opt), ValidationError);
}

TEST_CASE("solution JSON round-trip") {
  const auto g = grid::load_case(testing::data_path("cases/case6.json"));
  const auto sol = powerflow::solve(g);
  const auto back = powerflow::solution_from_json(powerflow::to_json(sol));
  CHECK(back.v_mag == sol.v_mag);
  CHECK(back.v_ang == sol.v_ang);
  CHECK(back.iterations == sol.iterations);
}

TEST_CASE("analytic Jacobian matches finite differences on random cases") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> jitter(-0.1, 0.1);
  for (int trial = 0; trial < 30; ++trial) {
    const auto g = grid::parse_case(testing::random_case_json(rng));
    const powerflow::MismatchModel model(g);
    VectorXd vm = model.fixed_v_mag(), va = model.fixed_v_ang();
    for (Eigen::Index i = 0; i < vm.size(); ++i) {
      vm(i) += jitter(rng);
      va(i) += jitter(rng);
    }
    const VectorXd x = model.pack(vm, va);
    const MatrixXd analytic = model.jacobian(x);
    const MatrixXd numeric = testing::fd_jacobian(model, x);
    CAPTURE(trial);
    for (Eigen::Index r = 0; r < x.size(); ++r)
      for (Eigen::Index c = 0; c < x.size(); ++c)
        CHECK(std::abs(analytic(r, c) - numeric(r, c)) < 1e-5 * std::max(1.0, std::abs(analytic(r, c))));
  }
}

TEST_CASE("power balance and PQ injections hold on random converged cases") {
  std::mt19937_64 rng(99);
  int solved = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const auto g = grid::parse_case(testing::random_case_json(rng));
    powerflow::PowerFlowSolution sol;
    try {
      sol = powerflow::solve(g);
    } catch (const NonConvergence&) {
      continue;
    }
    ++solved;
    CAPTURE(trial);
    CHECK(std::abs(testing::balance_residual(g, sol)) < 1e-8);
    CHECK(sol.v_ang(static_cast<Eigen::Index>(g.slack_index())) == doctest::Approx(g.buses[g.slack_index()].v_ang_init));
  }
  CHECK(solved >= 30);
}
