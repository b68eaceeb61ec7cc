#include <doctest.h>

#include <cmath>
#include <random>

#include "cfurllc/fcbl_rate.hpp"
#include "cfurllc/mc_oracle.hpp"
#include "test_support.hpp"

using namespace cfurllc;

namespace {

struct Setup {
  NetworkInstance inst;
  PilotGroups groups;
  PowerProfile powers;
  int tau = 0;
};

Setup small_setup(std::uint64_t seed, int M = 4, int K = 5, int N = 2) {
  std::mt19937_64 rng(seed);
  Setup s;
  s.inst = instance_from_gains(testing::random_gains(rng, M, K), N, 0.75);
  s.groups = testing::random_groups(rng, K, 3);
  s.powers = testing::random_profile(rng, s.inst);
  s.tau = static_cast<int>(s.groups.size());
  return s;
}

}  // namespace

TEST_CASE("fading draws have unit variance") {
  auto draw = make_draw(4, 5, 8, 2);
  std::mt19937_64 rng(1);
  double re2 = 0.0, im2 = 0.0, cross = 0.0;
  std::size_t n = 0;
  for (int r = 0; r < 200; ++r) {
    redraw(draw, rng);
    for (std::size_t i = 0; i < draw.h_re.size(); ++i) {
      re2 += draw.h_re[i] * draw.h_re[i];
      im2 += draw.h_im[i] * draw.h_im[i];
      cross += draw.h_re[i] * draw.h_im[i];
      ++n;
    }
  }
  CHECK(re2 / n == doctest::Approx(0.5).epsilon(0.02));
  CHECK(im2 / n == doctest::Approx(0.5).epsilon(0.02));
  CHECK(std::abs(cross / n) < 0.01);
}

TEST_CASE("noise-free single-device estimate is a shrunk copy") {
  const auto inst = instance_from_gains(Eigen::MatrixXd::Constant(1, 1, 40.0), 3, 0.75);
  Eigen::VectorXd pilot(1);
  pilot << 0.05;
  auto draw = make_draw(1, 1, 3, 1);
  std::mt19937_64 rng(3);
  redraw(draw, rng);
  std::fill(draw.noise_re.begin(), draw.noise_re.end(), 0.0);
  std::fill(draw.noise_im.begin(), draw.noise_im.end(), 0.0);
  const auto est = estimate_channels(draw, inst, 2, pilot, {{0}});
  const double tpb = 2 * 0.05 * 40.0;
  for (int n = 0; n < 3; ++n) {
    CHECK(est.est_re[n] == doctest::Approx(tpb / (tpb + 1) * est.g_re[n]).epsilon(1e-12));
    CHECK(est.est_im[n] == doctest::Approx(tpb / (tpb + 1) * est.g_im[n]).epsilon(1e-12));
  }
}

TEST_CASE("estimate covariance matches lambda and the error is orthogonal") {
  const auto s = small_setup(11, 3, 4, 2);
  const Eigen::MatrixXd lambda = lambda_gain(s.tau, s.powers.pilot, s.inst.beta, s.groups);
  const int M = 3, K = 4, N = 2;
  auto draw = make_draw(M, K, N, static_cast<int>(s.groups.size()));
  std::mt19937_64 rng(5);
  Eigen::MatrixXd power = Eigen::MatrixXd::Zero(M, K), err = power, cross_re = power, cross_im = power;
  const int samples = 100000;
  for (int r = 0; r < samples; ++r) {
    redraw(draw, rng);
    const auto est = estimate_channels(draw, s.inst, s.tau, s.powers.pilot, s.groups);
    for (int m = 0; m < M; ++m)
      for (int k = 0; k < K; ++k)
        for (int n = 0; n < N; ++n) {
          const auto i = draw.h_index(m, k, n);
          const double er = est.g_re[i] - est.est_re[i], ei = est.g_im[i] - est.est_im[i];
          power(m, k) += est.est_re[i] * est.est_re[i] + est.est_im[i] * est.est_im[i];
          err(m, k) += er * er + ei * ei;
          cross_re(m, k) += est.est_re[i] * er + est.est_im[i] * ei;
          cross_im(m, k) += est.est_re[i] * ei - est.est_im[i] * er;
        }
  }
  for (int m = 0; m < M; ++m)
    for (int k = 0; k < K; ++k) {
      const double per_entry = power(m, k) / (static_cast<double>(samples) * N);
      CHECK(per_entry == doctest::Approx(lambda(m, k)).epsilon(0.02));
      const double cov = std::hypot(cross_re(m, k), cross_im(m, k));
      CHECK(cov / std::sqrt(power(m, k) * err(m, k)) < 0.02);
    }
}

TEST_CASE("interference and leakage moments match closed forms") {
  for (std::uint64_t seed : {21u, 22u}) {
    const auto s = small_setup(seed);
    const Eigen::MatrixXd lambda = lambda_gain(s.tau, s.powers.pilot, s.inst.beta, s.groups);
    const auto mc = term_moments_mc(s.inst, s.powers, s.tau, s.groups, 20000, seed);
    const auto ui = testing::inter_second_moment(s.inst, s.powers, lambda, s.groups);
    const auto ls = testing::leakage_second_moment(s.inst, s.powers);
    for (int k = 0; k < s.inst.num_devices(); ++k) {
      CHECK(std::abs(mc.leakage_mean(k) - ls(k)) <= 3.0 * mc.leakage_stderr(k));
      for (int kp = 0; kp < s.inst.num_devices(); ++kp) {
        if (kp == k) continue;
        CHECK(std::abs(mc.inter_mean(k, kp) - ui(k, kp)) <= 3.0 * mc.inter_stderr(k, kp));
      }
    }
  }
}

TEST_CASE("monte-carlo rate dominates the closed-form bound") {
  for (std::uint64_t seed = 40; seed < 46; ++seed) {
    const auto s = small_setup(seed, 4, 5, 4);
    const auto qos = QosSpec::uniform(5, 1e-7, 0.0, 100, s.tau);
    const Eigen::VectorXd lb = lb_rate(sinr_lb(s.inst, s.tau, s.powers, s.groups), qos);
    const auto mc = ergodic_rate_mc(s.inst, s.powers, qos, s.groups, 1000, seed);
    for (int k = 0; k < 5; ++k) CHECK(mc.mean(k) >= lb(k) - 3.0 * mc.stderr_(k));
  }
}

TEST_CASE("zero downlink power gives zero sinr and zero rate") {
  auto s = small_setup(8);
  s.powers.downlink.setZero();
  const Eigen::MatrixXd lambda = lambda_gain(s.tau, s.powers.pilot, s.inst.beta, s.groups);
  auto draw = make_draw(4, 5, 2, static_cast<int>(s.groups.size()));
  std::mt19937_64 rng(2);
  redraw(draw, rng);
  const auto est = estimate_channels(draw, s.inst, s.tau, s.powers.pilot, s.groups);
  CHECK(instantaneous_sinr(est, s.inst, s.powers, lambda).cwiseAbs().maxCoeff() == 0.0);
  const auto qos = QosSpec::uniform(5, 1e-7, 0.0, 100, s.tau);
  const auto mc = ergodic_rate_mc(s.inst, s.powers, qos, s.groups, 200, 1);
  CHECK(mc.mean.cwiseAbs().maxCoeff() == 0.0);
  CHECK(mc.stderr_.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("monte-carlo estimates are deterministic and chunking-invariant") {
  const auto s = small_setup(9);
  const auto qos = QosSpec::uniform(5, 1e-7, 0.0, 100, s.tau);
  const auto a = ergodic_rate_mc(s.inst, s.powers, qos, s.groups, 1000, 77);
  const auto b = ergodic_rate_mc(s.inst, s.powers, qos, s.groups, 1000, 77);
  const auto c = ergodic_rate_mc(s.inst, s.powers, qos, s.groups, 1000, 77, {250, 3});
  CHECK(a.mean == b.mean);
  CHECK(a.mean == c.mean);
  CHECK(a.stderr_ == c.stderr_);
  const auto d = ergodic_rate_mc(s.inst, s.powers, qos, s.groups, 1000, 78);
  CHECK(a.mean != d.mean);
  CHECK_THROWS_AS(ergodic_rate_mc(s.inst, s.powers, qos, s.groups, 50, 1), std::invalid_argument);
}
