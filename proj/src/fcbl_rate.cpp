#include "cfurllc/fcbl_rate.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "cfurllc/rng.hpp"

namespace cfurllc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTinyX = 1e-300;
constexpr double kHugeX = 1e300;
constexpr double kRelTol = 1e-13;

// Geometric bisection for a decreasing function h on [lo, hi] with
// h(lo) >= 0 >= h(hi).
template <typename F>
double bisect_decreasing(F&& h, double lo, double hi, const char* who) {
  for (int it = 0; it < kMaxBisectionIters; ++it) {
    if (hi - lo <= kRelTol * hi) return 0.5 * (lo + hi);
    const double mid = (lo > 0.0 && hi / lo > 4.0) ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
    const double v = h(mid);
    if (v == 0.0) return mid;
    if (v > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  throw ConvergenceError(std::string(who) + ": bisection did not converge");
}

}  // namespace

double QosSpec::alpha(int k) const {
  if (pilot_length >= blocklength) {
    throw std::domain_error("pilot length must be shorter than the blocklength");
  }
  const double payload = blocklength * (1.0 - eta());
  return q_inverse(epsilon[static_cast<std::size_t>(k)]) / std::sqrt(payload);
}

QosSpec QosSpec::with_pilot_length(int tau) const {
  QosSpec copy = *this;
  copy.pilot_length = tau;
  return copy;
}

QosSpec QosSpec::uniform(int num_devices, double epsilon, double rate_req,
                         int blocklength, int pilot_length) {
  QosSpec q;
  q.epsilon.assign(static_cast<std::size_t>(num_devices), epsilon);
  q.rate_req.assign(static_cast<std::size_t>(num_devices), rate_req);
  q.weight.assign(static_cast<std::size_t>(num_devices), 1.0);
  q.blocklength = blocklength;
  q.pilot_length = pilot_length;
  return q;
}

QosSpec QosSpec::with_random_weights(std::uint64_t seed, int num_devices,
                                     double epsilon, double rate_req,
                                     int blocklength, int pilot_length) {
  auto q = uniform(num_devices, epsilon, rate_req, blocklength, pilot_length);
  auto rng = make_engine(seed, Stream::kWeights);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& w : q.weight) w = u(rng);
  return q;
}

double q_function(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

double q_inverse(double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw std::domain_error("q_inverse: probability must lie in (0, 1)");
  }
  if (epsilon == 0.5) return 0.0;
  if (epsilon > 0.5) return -q_inverse(1.0 - epsilon);

  // Safeguarded Newton on [0, 40]: Q'(x) = -phi(x).
  double lo = 0.0;
  double hi = 40.0;
  double x = 1.0;
  for (int it = 0; it < kMaxBisectionIters; ++it) {
    const double residual = q_function(x) - epsilon;
    if (residual > 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    double next = x + residual / pdf;
    if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
    if (std::abs(next - x) < 1e-13 || hi - lo < 1e-13) return next;
    x = next;
  }
  throw ConvergenceError("q_inverse did not converge");
}

double g_func(double x) {
  if (!(x > 0.0)) throw std::domain_error("g_func: argument must be positive");
  return (x + 1.0) * std::log1p(1.0 / x) / std::sqrt(2.0 * x + 1.0);
}

double g_inverse(double y) {
  if (y < 0.0 || std::isnan(y)) {
    throw FeasibilityError("g_inverse: g is positive, no solution for y < 0", 0.0);
  }
  if (y == 0.0) return kInf;
  double lo = 1.0;
  while (g_func(lo) < y) {
    lo *= 1e-3;
    if (lo < kTinyX) throw FeasibilityError("g_inverse: value beyond representable range", 0.0);
  }
  double hi = 1.0;
  while (g_func(hi) > y) {
    hi *= 1e3;
    if (hi > kHugeX) return kInf;
  }
  return bisect_decreasing([y](double x) { return g_func(x) - y; }, lo, hi, "g_inverse");
}

double f_raw(double x, double alpha) {
  return std::log1p(1.0 / x) - alpha * std::sqrt(2.0 * x + 1.0) / (x + 1.0);
}

double f_func(double x, double alpha) {
  const double boundary = g_inverse(alpha);
  if (!(x > 0.0) || x > boundary * (1.0 + 1e-12)) {
    throw FeasibilityError("f_func: argument outside the non-negative-rate region",
                           boundary);
  }
  return f_raw(x, alpha);
}

double f_inverse(double target, double alpha) {
  const double boundary = g_inverse(alpha);
  if (target < 0.0 || std::isnan(target)) {
    throw FeasibilityError("f_inverse: negative rate target", boundary);
  }
  if (target == 0.0) return boundary;
  double hi = std::isfinite(boundary) ? boundary : 1.0;
  if (!std::isfinite(boundary)) {
    while (f_raw(hi, alpha) > target) {
      hi *= 1e3;
      if (hi > kHugeX) return kInf;
    }
  }
  double lo = std::min(hi, 1.0);
  while (f_raw(lo, alpha) < target) {
    lo *= 1e-3;
    if (lo < kTinyX) {
      throw FeasibilityError("f_inverse: rate target unreachable", boundary);
    }
  }
  return bisect_decreasing([&](double x) { return f_raw(x, alpha) - target; }, lo, hi,
                           "f_inverse");
}

double pilot_load(const NetworkInstance& inst, const Eigen::VectorXd& pilot,
                  const std::vector<int>& group, int tau, int ap) {
  double s = 1.0;
  for (int i : group) s += tau * pilot(i) * inst.beta(ap, i);
  return s;
}

Eigen::MatrixXd lambda_gain(int tau, const Eigen::VectorXd& pilot_powers,
                            const Eigen::MatrixXd& beta, const PilotGroups& groups) {
  const Eigen::Index M = beta.rows();
  const Eigen::Index K = beta.cols();
  Eigen::MatrixXd lambda = Eigen::MatrixXd::Zero(M, K);
  for (const auto& group : groups) {
    for (Eigen::Index m = 0; m < M; ++m) {
      double load = 1.0;
      for (int i : group) load += tau * pilot_powers(i) * beta(m, i);
      for (int k : group) {
        lambda(m, k) = tau * pilot_powers(k) * beta(m, k) * beta(m, k) / load;
      }
    }
  }
  return lambda;
}

Eigen::VectorXd sinr_lb(const NetworkInstance& inst, const Eigen::MatrixXd& lambda,
                        const PowerProfile& powers, const PilotGroups& groups) {
  const int K = inst.num_devices();
  const double N = inst.antennas;
  const auto lookup = group_lookup(groups, K);
  const auto& pd = powers.downlink;

  // Received power at every AP-device pair from all served streams:
  // sum_{k'} sum_{m in M_k'} p_{m,k'} beta_{m,k}.
  Eigen::VectorXd ap_total = Eigen::VectorXd::Zero(inst.num_aps());
  for (int kp = 0; kp < K; ++kp) {
    for (int m : inst.serving_aps[static_cast<std::size_t>(kp)]) ap_total(m) += pd(m, kp);
  }

  Eigen::VectorXd gamma(K);
  for (int k = 0; k < K; ++k) {
    double signal = 0.0;
    for (int m : inst.serving_aps[static_cast<std::size_t>(k)]) {
      signal += std::sqrt(N * pd(m, k) * lambda(m, k));
    }
    double interference = ap_total.dot(inst.beta.col(k));
    double contamination = 0.0;
    const int g = lookup[static_cast<std::size_t>(k)];
    if (g >= 0) {
      for (int kp : groups[static_cast<std::size_t>(g)]) {
        if (kp == k) continue;
        double s = 0.0;
        for (int m : inst.serving_aps[static_cast<std::size_t>(kp)]) {
          s += std::sqrt(pd(m, kp) * lambda(m, k));
        }
        contamination += s * s;
      }
    }
    gamma(k) = signal * signal / (interference + N * contamination + 1.0);
  }
  return gamma;
}

Eigen::VectorXd sinr_lb(const NetworkInstance& inst, int tau,
                        const PowerProfile& powers, const PilotGroups& groups) {
  return sinr_lb(inst, lambda_gain(tau, powers.pilot, inst.beta, groups), powers,
                 groups);
}

Eigen::VectorXd lb_rate(const Eigen::VectorXd& gamma, const QosSpec& qos) {
  const double scale = (1.0 - qos.eta()) / std::numbers::ln2;
  Eigen::VectorXd rate(gamma.size());
  for (Eigen::Index k = 0; k < gamma.size(); ++k) {
    if (!(gamma(k) > 0.0)) {
      rate(k) = 0.0;
      continue;
    }
    rate(k) = std::max(0.0, scale * f_raw(1.0 / gamma(k), qos.alpha(static_cast<int>(k))));
  }
  return rate;
}

SinrTerms sinr_rewrite_terms(const NetworkInstance& inst, const PowerProfile& powers,
                             const PilotGroups& groups, int tau, int k) {
  const int K = inst.num_devices();
  const double N = inst.antennas;
  const auto lookup = group_lookup(groups, K);
  const auto& group = groups.at(static_cast<std::size_t>(lookup.at(static_cast<std::size_t>(k))));
  const auto& pp = powers.pilot;
  const auto& pd = powers.downlink;

  std::vector<double> load(static_cast<std::size_t>(inst.num_aps()));
  for (int m = 0; m < inst.num_aps(); ++m) {
    load[static_cast<std::size_t>(m)] = pilot_load(inst, pp, group, tau, m);
  }

  // sum_{m in aps} sqrt(tau p_k p_{m,owner} beta_{m,k}^2 prod_{n in aps \ m} load_n)
  auto product_sum = [&](int owner) {
    const auto& aps = inst.serving_aps[static_cast<std::size_t>(owner)];
    double total = 0.0;
    for (int m : aps) {
      double prod = tau * pp(k) * pd(m, owner) * inst.beta(m, k) * inst.beta(m, k);
      for (int n : aps) {
        if (n != m) prod *= load[static_cast<std::size_t>(n)];
      }
      total += std::sqrt(prod);
    }
    return total;
  };

  SinrTerms t;
  t.varphi = product_sum(k);
  for (int kp : group) {
    double th = 1.0;
    for (int m : inst.serving_aps[static_cast<std::size_t>(kp)]) {
      th *= std::sqrt(load[static_cast<std::size_t>(m)]);
    }
    t.theta[kp] = th;
    if (kp != k) t.phi[kp] = product_sum(kp);
  }

  double theta_all_sq = 1.0;
  double theta_others_sq = 1.0;
  for (const auto& [kp, th] : t.theta) {
    theta_all_sq *= th * th;
    if (kp != k) theta_others_sq *= th * th;
  }

  double interference = 0.0;
  for (int kp = 0; kp < K; ++kp) {
    for (int m : inst.serving_aps[static_cast<std::size_t>(kp)]) {
      interference += pd(m, kp) * inst.beta(m, k);
    }
  }

  double contamination = 0.0;
  for (const auto& [kp, phi] : t.phi) {
    double prod = phi;
    for (const auto& [j, th] : t.theta) {
      if (j != k && j != kp) prod *= th;
    }
    contamination += prod * prod;
  }
  const double theta_kk = t.theta.at(k);

  t.denominator = theta_all_sq * interference + N * theta_kk * theta_kk * contamination +
                  theta_all_sq;
  t.gamma = N * t.varphi * t.varphi * theta_others_sq / t.denominator;
  return t;
}

double weighted_sum_rate(const Eigen::VectorXd& rates, const QosSpec& qos) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < rates.size(); ++k) {
    s += qos.weight[static_cast<std::size_t>(k)] * rates(k);
  }
  return s;
}

}  // namespace cfurllc
