#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "cfurllc/gp.hpp"
#include "gp_oracle.hpp"

using namespace cfurllc::gp;

namespace {

Program min_x() {
  Program p;
  const int x = p.add_variable("x");
  p.set_objective(Monomial::variable(x));
  p.add_constraint(Monomial::variable(x, -1.0));
  return p;
}

Program min_x_plus_y() {
  Program p;
  const int x = p.add_variable("x");
  const int y = p.add_variable("y");
  p.set_objective(Posynomial(Monomial::variable(x)) + Monomial::variable(y));
  p.add_constraint(Monomial::variable(x, -1.0) * Monomial::variable(y, -1.0));
  return p;
}

}  // namespace

TEST_CASE("monomial algebra") {
  const Monomial m = Monomial::constant(3.0) * Monomial::variable(0, 2.0) * Monomial::variable(1, -1.0);
  const std::vector<double> x{2.0, 4.0};
  CHECK(m.eval(x) == doctest::Approx(3.0));
  CHECK(m.inverse().eval(x) == doctest::Approx(1.0 / 3.0));
  CHECK((m * Monomial::variable(1)).exponents.size() == 1);
  CHECK_THROWS_AS(Monomial::constant(0.0), std::invalid_argument);
  const Posynomial p = Posynomial(m) + Monomial::constant(1.0);
  CHECK((p * p).terms.size() == 4);
  CHECK((p * p).eval(x) == doctest::Approx(16.0));
}

TEST_CASE("program validation") {
  Program p;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p.add_variable("x");
  p.set_objective(Monomial::variable(3));
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  CHECK_THROWS_AS(p.add_variable("bad", 2.0, 1.0), std::invalid_argument);
}

TEST_CASE("min x s.t. 1/x <= 1") {
  const auto sol = solve(min_x());
  REQUIRE(sol.status == Status::kOptimal);
  CHECK(std::abs(sol.x[0] - 1.0) <= 1e-8);
  CHECK(std::abs(sol.objective - 1.0) <= 1e-8);
  CHECK(sol.kkt.passed);
}

TEST_CASE("min x + y s.t. 1/(xy) <= 1") {
  const auto sol = solve(min_x_plus_y());
  REQUIRE(sol.status == Status::kOptimal);
  CHECK(std::abs(sol.x[0] - 1.0) <= 1e-8);
  CHECK(std::abs(sol.x[1] - 1.0) <= 1e-8);
  CHECK(std::abs(sol.objective - 2.0) <= 1e-8);
}

TEST_CASE("dual of a/x <= 1 is one") {
  for (double a : {0.01, 0.5, 3.0, 1e4}) {
    Program p;
    const int x = p.add_variable("x");
    p.set_objective(Monomial::variable(x));
    p.add_constraint(Monomial::variable(x, -1.0).scaled(a));
    const auto sol = solve(p);
    REQUIRE(sol.status == Status::kOptimal);
    CHECK(sol.x[0] == doctest::Approx(a).epsilon(1e-8));
    CHECK(sol.kkt.duals[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(sol.duals[0] == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("perturbed optimum fails the KKT check") {
  const Program p = min_x_plus_y();
  const auto sol = solve(p);
  REQUIRE(sol.status == Status::kOptimal);
  auto x = sol.x;
  x[0] *= 1.1;
  const auto rep = check_kkt(p, x, 1e-8);
  CHECK_FALSE(rep.passed);
  CHECK(rep.stationarity > 1e-3);
}

TEST_CASE("infeasible and unbounded programs") {
  Program inf;
  const int x = inf.add_variable("x");
  inf.set_objective(Monomial::variable(x));
  inf.add_constraint(Monomial::variable(x).scaled(2.0));
  inf.add_constraint(Monomial::variable(x, -1.0));
  CHECK(solve(inf).status == Status::kInfeasible);

  Program unb;
  const int u = unb.add_variable("u");
  unb.set_objective(Monomial::variable(u));
  unb.add_constraint(Monomial::variable(u).scaled(0.5));
  CHECK(solve(unb).status == Status::kUnbounded);
}

TEST_CASE("random GPs agree with a refined grid search") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 10; ++trial) {
    const Program prog = cfurllc::testing::random_gp(rng);
    const auto sol = solve(prog);
    REQUIRE(sol.status == Status::kOptimal);
    const auto grid = cfurllc::testing::grid_search(prog, 60);
    CAPTURE(trial);
    CHECK(std::abs(sol.objective - grid.objective) / grid.objective <= 1e-4);
    for (const auto& c : prog.constraints()) CHECK(c.eval(sol.x) <= 1.0 + 1e-8);
  }
}

TEST_CASE("argmin is invariant to objective scaling") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    const Program prog = cfurllc::testing::random_gp(rng);
    Program scaled = prog;
    Posynomial obj = prog.objective();
    obj *= Monomial::constant(37.5);
    scaled.set_objective(obj);
    const auto a = solve(prog);
    const auto b = solve(scaled);
    REQUIRE(a.status == Status::kOptimal);
    REQUIRE(b.status == Status::kOptimal);
    for (int j = 0; j < 3; ++j) CHECK(std::abs(std::log(a.x[j] / b.x[j])) <= 1e-6);
  }
}

TEST_CASE("log-domain objective is midpoint convex") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    const Program prog = cfurllc::testing::random_gp(rng);
    std::vector<double> y1(3), y2(3), mid(3), x1(3), x2(3), xm(3);
    for (int j = 0; j < 3; ++j) {
      y1[j] = u(rng);
      y2[j] = u(rng);
      mid[j] = 0.5 * (y1[j] + y2[j]);
      x1[j] = std::exp(y1[j]);
      x2[j] = std::exp(y2[j]);
      xm[j] = std::exp(mid[j]);
    }
    const double f1 = std::log(prog.objective().eval(x1));
    const double f2 = std::log(prog.objective().eval(x2));
    const double fm = std::log(prog.objective().eval(xm));
    CHECK(fm <= 0.5 * (f1 + f2) + 1e-12);
  }
}

TEST_CASE("solve output passes its own KKT check") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const Program prog = cfurllc::testing::random_gp(rng);
    const auto sol = solve(prog);
    REQUIRE(sol.status == Status::kOptimal);
    CHECK(check_kkt(prog, sol.x, 1e-8).passed);
  }
}
