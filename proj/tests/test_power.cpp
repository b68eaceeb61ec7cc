#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "cfurllc/pilot.hpp"
#include "cfurllc/power.hpp"
#include "test_support.hpp"

using namespace cfurllc;

namespace {

// Printed rate function, evaluated directly in SINR form.
double rate_shape(double chi, double alpha) {
  return std::log1p(chi) - alpha * std::sqrt(1.0 - 1.0 / ((1.0 + chi) * (1.0 + chi)));
}

// Smallest chi with rate_shape(chi) = target, by plain bisection on the
// increasing branch.
double threshold_bisect(double target, double alpha) {
  double lo = 1e-9, hi = 1e6;
  for (int i = 0; i < 300; ++i) {
    const double mid = std::sqrt(lo * hi);
    (rate_shape(mid, alpha) < target ? lo : hi) = mid;
  }
  return hi;
}

double single_sinr(double N, double beta, int tau, double pp, double pd) {
  const double lambda = tau * pp * beta * beta / (tau * pp * beta + 1.0);
  return N * pd * lambda / (pd * beta + 1.0);
}

struct Scenario {
  NetworkInstance inst;
  PilotGroups groups;
  PowerProfile point;
  int tau = 0;
};

Scenario random_scenario(std::mt19937_64& rng, int M, int K, int cap) {
  Scenario s;
  s.inst = instance_from_gains(testing::random_gains(rng, M, K), 4, 0.75);
  s.groups = testing::random_groups(rng, K, cap);
  s.point = testing::random_profile(rng, s.inst);
  s.tau = static_cast<int>(s.groups.size());
  return s;
}

}  // namespace

TEST_CASE("sinr thresholds") {
  const auto q = QosSpec::uniform(3, 1e-7, 0.75, 100, 10);
  CHECK(sinr_threshold(q, 0) == doctest::Approx(1.986315125902006).epsilon(1e-9));
  CHECK(sinr_threshold(q, 0) ==
        doctest::Approx(threshold_bisect(0.75 * std::numbers::ln2 / 0.9, q.alpha(0)))
            .epsilon(1e-9));

  const auto zero = QosSpec::uniform(1, 1e-7, 0.0, 100, 10);
  CHECK(sinr_threshold(zero, 0) == doctest::Approx(0.5067536750946936).epsilon(1e-9));
  CHECK(sinr_threshold(zero, 0) == doctest::Approx(1.0 / g_inverse(zero.alpha(0))).epsilon(1e-12));

  // alpha = 0, eta = 0: log2(1 + chi) = 1
  QosSpec shannon = QosSpec::uniform(1, 0.5, 1.0, 100, 1);
  shannon.blocklength = 1000000000;
  CHECK(shannon.alpha(0) == 0.0);
  CHECK(sinr_threshold(shannon, 0) == doctest::Approx(1.0).epsilon(1e-8));

  QosSpec shannon_zero = QosSpec::uniform(1, 0.5, 0.0, 100, 1);
  CHECK(sinr_threshold(shannon_zero, 0) == 0.0);

  const auto hopeless = QosSpec::uniform(2, 1e-7, 1e4, 100, 10);
  CHECK_THROWS_AS(sinr_threshold(hopeless, 1), FeasibilityError);
  try {
    sinr_threshold(hopeless, 1);
  } catch (const FeasibilityError& e) {
    CHECK(std::string(e.what()).find("device 1") != std::string::npos);
  }
}

TEST_CASE("tangent coefficients at chi = 1") {
  const auto t = tangent_coeffs(1.0, 0.3, 0.8, 0.1);
  CHECK(t.rho == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(t.delta == doctest::Approx(std::numbers::ln2).epsilon(1e-15));
  CHECK(t.rho_hat == doctest::Approx(0.1443375672974064).epsilon(1e-13));
  CHECK(t.delta_hat == doctest::Approx(0.8660254037844386).epsilon(1e-13));
  CHECK(t.w_tilde == doctest::Approx(0.8 * 0.9 / std::numbers::ln2));
  CHECK(t.w_hat == doctest::Approx(t.w_tilde * (0.5 - 0.3 * t.rho_hat)));
  CHECK_THROWS_AS(tangent_coeffs(0.0, 0.3, 1.0, 0.1), std::domain_error);
}

TEST_CASE("tangent lines bound the log and the dispersion term") {
  for (double c0 : {0.1, 1.0, 10.0}) {
    const auto t = tangent_coeffs(c0, 0.0, 1.0, 0.0);
    const double lc0 = std::log(c0);
    CHECK(t.rho * lc0 + t.delta == doctest::Approx(std::log1p(c0)).epsilon(1e-12));
    const double G0 = std::sqrt(1.0 - 1.0 / ((1.0 + c0) * (1.0 + c0)));
    CHECK(t.rho_hat * lc0 + t.delta_hat == doctest::Approx(G0).epsilon(1e-12));
    for (int i = 0; i < 200; ++i) {
      const double chi = std::pow(10.0, -3.0 + 6.0 * i / 199.0);
      const double lc = std::log(chi);
      CHECK(std::log1p(chi) >= t.rho * lc + t.delta - 1e-12);
      const double G = std::sqrt(1.0 - 1.0 / ((1.0 + chi) * (1.0 + chi)));
      if (chi >= 2.0) CHECK(G <= t.rho_hat * lc + t.delta_hat + 1e-12);
    }
  }
  // G behaves like sqrt(2 chi) near zero, convex in log chi, so the tangent
  // drops below it far to the left of the expansion point.
  for (double c0 : {0.1, 1.0}) {
    const auto t = tangent_coeffs(c0, 0.0, 1.0, 0.0);
    const double chi = 1e-3;
    const double G = std::sqrt(1.0 - 1.0 / ((1.0 + chi) * (1.0 + chi)));
    CHECK(G > t.rho_hat * std::log(chi) + t.delta_hat);
  }
}

TEST_CASE("signal product agrees with the rewrite terms") {
  std::mt19937_64 rng(101);
  for (int rep = 0; rep < 20; ++rep) {
    const auto s = random_scenario(rng, 5, 6, 3);
    for (int k = 0; k < 6; ++k) {
      const auto terms = sinr_rewrite_terms(s.inst, s.point, s.groups, s.tau, k);
      double expected = terms.varphi;
      for (const auto& [kp, th] : terms.theta) {
        if (kp != k) expected *= th;
      }
      CHECK(log_signal_product(s.inst, s.point, s.groups, s.tau, k) ==
            doctest::Approx(std::log(expected)).epsilon(1e-11));
    }
  }
}

TEST_CASE("condensation is tight, conservative and first-order exact") {
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> logscale(-std::log(10.0), std::log(10.0));
  for (int rep = 0; rep < 8; ++rep) {
    const auto s = random_scenario(rng, 6, 7, 4);
    for (int k = 0; k < 7; ++k) {
      const auto c = condensation_coeffs(s.inst, s.point, s.groups, s.tau, k);
      const double exact = log_signal_product(s.inst, s.point, s.groups, s.tau, k);
      CHECK(c.log_value(s.inst, s.point, s.tau) == doctest::Approx(exact).epsilon(1e-12));

      for (int trial = 0; trial < 100; ++trial) {
        PowerProfile p = s.point;
        for (int i = 0; i < 7; ++i) p.pilot(i) *= std::exp(logscale(rng));
        for (int i = 0; i < 7; ++i)
          for (int m : s.inst.serving_aps[static_cast<std::size_t>(i)])
            p.downlink(m, i) *= std::exp(logscale(rng));
        CHECK(log_signal_product(s.inst, p, s.groups, s.tau, k) - c.log_value(s.inst, p, s.tau) >=
              -1e-12);
      }

      const double h = 1e-5;
      for (const auto& [m, a] : c.a) {
        PowerProfile up = s.point, dn = s.point;
        up.downlink(m, k) *= std::exp(h);
        dn.downlink(m, k) *= std::exp(-h);
        const double fd = (log_signal_product(s.inst, up, s.groups, s.tau, k) -
                           log_signal_product(s.inst, dn, s.groups, s.tau, k)) /
                          (2.0 * h);
        CHECK(std::abs(fd - a) <= 1e-6);
      }
      for (const auto& [i, b] : c.b) {
        PowerProfile up = s.point, dn = s.point;
        up.pilot(i) *= std::exp(h);
        dn.pilot(i) *= std::exp(-h);
        const double fd = (log_signal_product(s.inst, up, s.groups, s.tau, k) -
                           log_signal_product(s.inst, dn, s.groups, s.tau, k)) /
                          (2.0 * h);
        CHECK(std::abs(fd - b) <= 1e-6);
      }
    }
  }
}

TEST_CASE("condensation rejects zero expansion powers") {
  std::mt19937_64 rng(5);
  auto s = random_scenario(rng, 3, 3, 3);
  s.point.pilot(0) = 0.0;
  const auto lookup = group_lookup(s.groups, 3);
  for (int k = 0; k < 3; ++k) {
    if (lookup[static_cast<std::size_t>(k)] == lookup[0]) {
      CHECK_THROWS_AS(condensation_coeffs(s.inst, s.point, s.groups, s.tau, k), std::domain_error);
    }
  }
}

TEST_CASE("subproblem contains its expansion point and reproduces the denominator") {
  std::mt19937_64 rng(303);
  for (int rep = 0; rep < 10; ++rep) {
    const int M = 5, K = 6;
    auto s = random_scenario(rng, M, K, 3);
    auto qos = QosSpec::with_random_weights(rep, K, 1e-5, 0.01, 100, s.tau);
    const auto limits = PowerLimits::uniform(M, K, 0.1, 1.0);
    const auto state = make_sca_state(s.inst, qos, s.groups, s.point);
    for (bool fix : {false, true}) {
      const auto gpp = build_wsr_gp(s.inst, qos, s.groups, limits, state, {fix, 1e-6});
      const auto x = gpp.point(s.inst, s.groups, s.tau, s.point, state.chi);
      const auto& prog = gpp.program;
      const auto chi_min = sinr_thresholds(qos);
      std::vector<bool> skip(prog.constraints().size(), false);
      for (int k = 0; k < K; ++k) {
        // frozen at a threshold the point itself misses
        const int c = gpp.sinr_constraint[static_cast<std::size_t>(k)];
        if (c >= 0 && gpp.chi_var[static_cast<std::size_t>(k)] < 0 && state.chi(k) < chi_min(k)) {
          skip[static_cast<std::size_t>(c)] = true;
        }
      }
      for (std::size_t i = 0; i < prog.constraints().size(); ++i) {
        if (skip[i]) continue;
        INFO(prog.labels()[i]);
        CHECK(prog.constraints()[i].eval(x) <= 1.0 + 1e-9);
      }
      for (int k = 0; k < K; ++k) {
        const auto terms = sinr_rewrite_terms(s.inst, s.point, s.groups, s.tau, k);
        CHECK(gpp.denominator[static_cast<std::size_t>(k)].eval(x) ==
              doctest::Approx(terms.denominator).epsilon(1e-9));
        const int c = gpp.sinr_constraint[static_cast<std::size_t>(k)];
        if (gpp.chi_var[static_cast<std::size_t>(k)] >= 0) {
          REQUIRE(c >= 0);
          CHECK(prog.constraints()[static_cast<std::size_t>(c)].eval(x) ==
                doctest::Approx(1.0).epsilon(1e-9));
        }
      }
      const auto back = gpp.extract(s.inst, x, s.point.pilot);
      CHECK((back.pilot - s.point.pilot).norm() == 0.0);
      CHECK((back.downlink - s.point.downlink).norm() == 0.0);
    }
  }
}

TEST_CASE("single device on a single AP ends at both caps") {
  const double beta = 50.0, N = 4.0;
  const auto inst = instance_from_gains(Eigen::MatrixXd::Constant(1, 1, beta), 4, 0.75);
  const PilotGroups groups{{0}};
  const auto qos = QosSpec::uniform(1, 1e-5, 0.5, 100, 1);
  const auto limits = PowerLimits::uniform(1, 1, 0.1, 0.2);
  const auto res = maximize_wsr(inst, qos, groups, limits);
  REQUIRE(res.status == WsrStatus::kConverged);
  CHECK(res.powers.pilot(0) == doctest::Approx(0.1).epsilon(1e-6));
  CHECK(res.powers.downlink(0, 0) == doctest::Approx(0.2).epsilon(1e-6));
  const double at_caps = single_sinr(N, beta, 1, 0.1, 0.2);
  CHECK(res.chi(0) == doctest::Approx(at_caps).epsilon(1e-6));

  // Grid oracle over (p^p, p^d): the closed form peaks at the corner.
  double best = 0.0;
  for (int i = 1; i <= 60; ++i)
    for (int j = 1; j <= 60; ++j) best = std::max(best, single_sinr(N, beta, 1, 0.1 * i / 60, 0.2 * j / 60));
  CHECK(best == doctest::Approx(at_caps).epsilon(1e-12));
  CHECK(res.wsr == doctest::Approx(evaluate_wsr(inst, qos, groups, res.powers)));
}

TEST_CASE("feasibility initializer") {
  const double beta = 1e3;
  const auto inst = instance_from_gains(Eigen::MatrixXd::Constant(1, 1, beta), 9, 0.75);
  const PilotGroups groups{{0}};
  const auto limits = PowerLimits::uniform(1, 1, 0.1, 0.2);

  SUBCASE("single device with generous caps") {
    const auto big = instance_from_gains(Eigen::MatrixXd::Constant(1, 1, beta), 1000, 0.75);
    const auto qos = QosSpec::uniform(1, 1e-7, 0.75, 100, 1);
    const auto r = feasibility_init(big, qos, groups, limits);
    const double expected = single_sinr(1000, beta, 1, 0.1, 0.2) / sinr_threshold(qos, 0);
    CHECK(r.feasible);
    CHECK(r.rho > 100.0);
    CHECK(r.rho == doctest::Approx(expected).epsilon(1e-6));
    CHECK(r.min_ratio == doctest::Approx(expected).epsilon(1e-6));
  }
  SUBCASE("zero thresholds hit the internal cap") {
    const auto qos = QosSpec::uniform(1, 0.5, 0.0, 100, 1);
    const auto r = feasibility_init(inst, qos, groups, limits);
    CHECK(r.feasible);
    CHECK(r.rho == doctest::Approx(kRhoCap).epsilon(1e-6));
  }
  SUBCASE("vanishing AP power") {
    const auto qos = QosSpec::uniform(1, 1e-7, 0.75, 100, 1);
    const auto tiny = PowerLimits::uniform(1, 1, 0.1, 1e-9);
    const auto r = feasibility_init(inst, qos, groups, tiny);
    CHECK_FALSE(r.feasible);
    CHECK(r.rho < 1.0);
    const auto w = maximize_wsr(inst, qos, groups, tiny);
    CHECK(w.status == WsrStatus::kInfeasible);
    CHECK(w.history.empty());
  }
}

TEST_CASE("weighted sum rate iterations on generated deployments") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    InstanceConfig cfg;
    cfg.num_devices = 8;
    const auto inst = generate_instance(seed, cfg);
    const auto limits = PowerLimits::uniform(16, 8, 0.1, 0.2);
    const auto base = QosSpec::with_random_weights(seed, 8, 1e-7, 0.5, 100, 1);
    const auto pilots = assign_pilots_iterative(inst, base, limits);
    const auto& groups = pilots.best.groups;
    const auto qos = base.with_pilot_length(static_cast<int>(groups.size()));
    const auto chi_min = sinr_thresholds(qos);

    for (bool fix : {false, true}) {
      PowerOptions opts;
      opts.fix_pilot = fix;
      const auto res = maximize_wsr(inst, qos, groups, limits, opts);
      REQUIRE(res.status != WsrStatus::kInfeasible);
      REQUIRE(!res.history.empty());
      for (std::size_t i = 1; i < res.history.size(); ++i) {
        CHECK(res.history[i] >= res.history[i - 1] - 1e-6);
      }
      CHECK(res.history.back() == doctest::Approx(res.wsr));
      CHECK(res.wsr >= res.history.front());
      const auto gamma = sinr_lb(inst, qos.pilot_length, res.powers, groups);
      for (int k = 0; k < 8; ++k) {
        CHECK(gamma(k) >= chi_min(k) * (1.0 - 1e-6));
        CHECK(res.powers.pilot(k) <= limits.pilot_max(k) + 1e-9);
        if (fix) CHECK(res.powers.pilot(k) == limits.pilot_max(k));
      }
      for (int m = 0; m < 16; ++m) {
        CHECK(res.powers.downlink.row(m).sum() <= limits.ap_max(m) + 1e-9);
      }
      CHECK((res.chi - gamma).norm() == 0.0);
    }
  }
}

TEST_CASE("dense pilot reuse keeps every subproblem solvable") {
  // 28 devices on ~10 pilots: ~500 barrier terms, expansion points on the
  // constraint boundary.
  InstanceConfig cfg;
  cfg.num_devices = 28;
  const auto inst = generate_instance(1, cfg);
  const auto limits = PowerLimits::uniform(16, 28, 0.1, 0.2);
  const auto base = QosSpec::with_random_weights(1, 28, 1e-7, 0.5, 100, 1);
  const auto groups = assign_pilots_iterative(inst, base, limits).best.groups;
  const auto qos = base.with_pilot_length(static_cast<int>(groups.size()));
  WsrResult res;
  CHECK_NOTHROW(res = maximize_wsr(inst, qos, groups, limits));
  CHECK(res.status != WsrStatus::kInfeasible);
  CHECK(res.iterations >= 2);
}
