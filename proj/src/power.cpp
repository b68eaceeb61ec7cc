#include "cfurllc/power.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "cfurllc/pilot.hpp"

namespace cfurllc {
namespace {

using gp::Monomial;
using gp::Posynomial;

std::size_t idx(int i) { return static_cast<std::size_t>(i); }

double log_sum_exp(const std::vector<double>& v) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double x : v) hi = std::max(hi, x);
  if (!std::isfinite(hi)) return hi;
  double s = 0.0;
  for (double x : v) s += std::exp(x - hi);
  return hi + std::log(s);
}

const std::vector<int>& group_of(const PilotGroups& groups, const std::vector<int>& lookup,
                                 int k) {
  const int g = lookup.at(idx(k));
  if (g < 0) throw std::invalid_argument("device " + std::to_string(k) + " has no pilot group");
  return groups[idx(g)];
}

// APs serving any member of the group, ascending.
std::vector<int> group_aps(const NetworkInstance& inst, const std::vector<int>& group) {
  std::vector<int> aps;
  for (int i : group) {
    for (int m : inst.serving_aps[idx(i)]) aps.push_back(m);
  }
  std::sort(aps.begin(), aps.end());
  aps.erase(std::unique(aps.begin(), aps.end()), aps.end());
  return aps;
}

double clamp_floor(double v, double floor) { return std::max(v, floor); }

}  // namespace

double sinr_threshold(const QosSpec& qos, int k) {
  const double target = qos.rate_req.at(idx(k)) * std::numbers::ln2 / (1.0 - qos.eta());
  double x = 0.0;
  try {
    x = f_inverse(target, qos.alpha(k));
  } catch (const FeasibilityError& e) {
    throw FeasibilityError("device " + std::to_string(k) + ": rate requirement unreachable (" +
                               e.what() + ")",
                           e.boundary());
  }
  if (!std::isfinite(x)) return 0.0;
  return 1.0 / x;
}

Eigen::VectorXd sinr_thresholds(const QosSpec& qos) {
  Eigen::VectorXd chi(qos.num_devices());
  for (int k = 0; k < qos.num_devices(); ++k) chi(k) = sinr_threshold(qos, k);
  return chi;
}

TangentCoeffs tangent_coeffs(double chi, double alpha, double weight, double eta) {
  if (!(chi > 0.0)) throw std::domain_error("tangent_coeffs: chi must be positive");
  TangentCoeffs t;
  const double lc = std::log(chi);
  const double root = std::sqrt(chi * chi + 2.0 * chi);
  const double op = 1.0 + chi;
  t.rho = chi / op;
  t.delta = std::log1p(chi) - t.rho * lc;
  t.rho_hat = chi / root - chi * root / (op * op);
  t.delta_hat = std::sqrt(1.0 - 1.0 / (op * op)) - t.rho_hat * lc;
  t.w_tilde = weight * (1.0 - eta) / std::numbers::ln2;
  t.w_hat = t.w_tilde * (t.rho - alpha * t.rho_hat);
  return t;
}

double Condensation::log_value(const NetworkInstance& inst, const PowerProfile& powers,
                               int tau) const {
  double v = log_c;
  for (const auto& [m, e] : a) {
    v += e * (std::log(powers.downlink(m, device)) + 2.0 * std::log(inst.beta(m, device)));
  }
  for (const auto& [i, e] : b) v += e * std::log(tau * powers.pilot(i));
  return v;
}

double log_signal_product(const NetworkInstance& inst, const PowerProfile& powers,
                          const PilotGroups& groups, int tau, int k) {
  const auto lookup = group_lookup(groups, inst.num_devices());
  const auto& group = group_of(groups, lookup, k);
  auto log_load = [&](int m) { return std::log(pilot_load(inst, powers.pilot, group, tau, m)); };

  const auto& aps = inst.serving_aps[idx(k)];
  std::vector<double> log_t;
  double sum_all = 0.0;
  for (int n : aps) sum_all += log_load(n);
  for (int m : aps) {
    const double lb = std::log(tau * powers.pilot(k)) + std::log(powers.downlink(m, k)) +
                      2.0 * std::log(inst.beta(m, k));
    log_t.push_back(0.5 * (lb + sum_all - log_load(m)));
  }
  double v = log_sum_exp(log_t);
  for (int kp : group) {
    if (kp == k) continue;
    for (int m : inst.serving_aps[idx(kp)]) v += 0.5 * log_load(m);
  }
  return v;
}

Condensation condensation_coeffs(const NetworkInstance& inst, const PowerProfile& point,
                                 const PilotGroups& groups, int tau, int k) {
  const auto lookup = group_lookup(groups, inst.num_devices());
  const auto& group = group_of(groups, lookup, k);
  for (int i : group) {
    if (!(point.pilot(i) > 0.0)) {
      throw std::domain_error("condensation: zero pilot power for device " + std::to_string(i));
    }
  }
  const auto& aps = inst.serving_aps[idx(k)];
  for (int m : aps) {
    if (!(point.downlink(m, k) > 0.0)) {
      throw std::domain_error("condensation: zero downlink power at AP " + std::to_string(m) +
                              " for device " + std::to_string(k));
    }
  }

  const int M = inst.num_aps();
  std::vector<double> load(idx(M));
  for (int m = 0; m < M; ++m) load[idx(m)] = pilot_load(inst, point.pilot, group, tau, m);
  // share(n, i) = tau p_i beta_{n,i} / load_n
  auto share = [&](int n, int i) { return tau * point.pilot(i) * inst.beta(n, i) / load[idx(n)]; };

  double sum_all = 0.0;
  for (int n : aps) sum_all += std::log(load[idx(n)]);
  std::vector<double> log_t;
  for (int m : aps) {
    const double lb = std::log(tau * point.pilot(k)) + std::log(point.downlink(m, k)) +
                      2.0 * std::log(inst.beta(m, k));
    log_t.push_back(0.5 * (lb + sum_all - std::log(load[idx(m)])));
  }
  const double log_phi = log_sum_exp(log_t);
  std::vector<double> weight(log_t.size());
  for (std::size_t j = 0; j < log_t.size(); ++j) weight[j] = std::exp(log_t[j] - log_phi);

  Condensation c;
  c.device = k;
  for (std::size_t j = 0; j < aps.size(); ++j) c.a.emplace_back(aps[j], 0.5 * weight[j]);

  for (int i : group) {
    double e = 0.0;
    for (std::size_t j = 0; j < aps.size(); ++j) {
      double inner = (i == k) ? 0.5 : 0.0;
      for (int n : aps) {
        if (n != aps[j]) inner += 0.5 * share(n, i);
      }
      e += weight[j] * inner;
    }
    for (int kp : group) {
      if (kp == k) continue;
      for (int m : inst.serving_aps[idx(kp)]) e += 0.5 * share(m, i);
    }
    c.b.emplace_back(i, e);
  }

  c.log_c = 0.0;
  const double log_f = log_signal_product(inst, point, groups, tau, k);
  c.log_c = log_f - c.log_value(inst, point, tau);
  return c;
}

ScaState make_sca_state(const NetworkInstance& inst, const QosSpec& qos,
                        const PilotGroups& groups, const PowerProfile& point) {
  const int tau = qos.pilot_length;
  ScaState s;
  s.point = point;
  s.chi = sinr_lb(inst, tau, point, groups);
  for (int k = 0; k < inst.num_devices(); ++k) {
    s.tangent.push_back(
        tangent_coeffs(s.chi(k), qos.alpha(k), qos.weight[idx(k)], qos.eta()));
    s.condensation.push_back(condensation_coeffs(inst, point, groups, tau, k));
  }
  return s;
}

PowerProfile PowerGp::extract(const NetworkInstance& inst, const std::vector<double>& x,
                              const Eigen::VectorXd& fixed_pilot) const {
  PowerProfile p;
  p.pilot = fixed_pilot;
  for (std::size_t k = 0; k < pilot_var.size(); ++k) {
    if (pilot_var[k] >= 0) p.pilot(static_cast<Eigen::Index>(k)) = x[idx(pilot_var[k])];
  }
  p.downlink = Eigen::MatrixXd::Zero(inst.num_aps(), inst.num_devices());
  for (const auto& [mk, id] : downlink_var) p.downlink(mk.first, mk.second) = x[idx(id)];
  return p;
}

std::vector<double> PowerGp::point(const NetworkInstance& inst, const PilotGroups& groups,
                                   int tau, const PowerProfile& powers,
                                   const Eigen::VectorXd& chi, double rho) const {
  std::vector<double> x(idx(program.num_variables()), 1.0);
  for (std::size_t k = 0; k < pilot_var.size(); ++k) {
    if (pilot_var[k] >= 0) x[idx(pilot_var[k])] = powers.pilot(static_cast<Eigen::Index>(k));
  }
  for (const auto& [mk, id] : downlink_var) x[idx(id)] = powers.downlink(mk.first, mk.second);
  for (std::size_t k = 0; k < chi_var.size(); ++k) {
    if (chi_var[k] >= 0) x[idx(chi_var[k])] = chi(static_cast<Eigen::Index>(k));
  }
  for (const auto& [gm, id] : load_var) {
    x[idx(id)] = pilot_load(inst, powers.pilot, groups[idx(gm.first)], tau, gm.second);
  }
  if (rho_var >= 0) x[idx(rho_var)] = rho;
  return x;
}

namespace {

enum class Mode { kWsr, kFeasibility };

PowerGp assemble(const NetworkInstance& inst, const QosSpec& qos, const PilotGroups& groups,
                 const PowerLimits& limits, const PowerProfile& point,
                 const std::vector<Condensation>& condensation,
                 const std::vector<TangentCoeffs>* tangent, const Eigen::VectorXd& chi_min,
                 const GpBuildOptions& options, Mode mode) {
  const int K = inst.num_devices();
  const int tau = qos.pilot_length;
  const double N = inst.antennas;
  const auto lookup = group_lookup(groups, K);
  PowerGp out;
  auto& prog = out.program;

  out.pilot_var.assign(idx(K), -1);
  std::vector<Monomial> pilot(idx(K));
  for (int k = 0; k < K; ++k) {
    const double cap = limits.pilot_max(k);
    if (options.fix_pilot) {
      pilot[idx(k)] = Monomial::constant(point.pilot(k));
    } else {
      const int id = prog.add_variable("pp[" + std::to_string(k) + "]",
                                       options.floor_fraction * cap, cap);
      out.pilot_var[idx(k)] = id;
      pilot[idx(k)] = Monomial::variable(id);
    }
  }

  for (int k = 0; k < K; ++k) {
    for (int m : inst.serving_aps[idx(k)]) {
      out.downlink_var[{m, k}] =
          prog.add_variable("pd[" + std::to_string(m) + "," + std::to_string(k) + "]",
                            options.floor_fraction * limits.ap_max(m));
    }
  }
  auto pd = [&](int m, int k) { return Monomial::variable(out.downlink_var.at({m, k})); };

  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (int m : group_aps(inst, groups[g])) {
      double top = 1.0;
      for (int i : groups[g]) top += tau * limits.pilot_max(i) * inst.beta(m, i);
      out.load_var[{static_cast<int>(g), m}] = prog.add_variable(
          "u[" + std::to_string(g) + "," + std::to_string(m) + "]", 0.0, 2.0 * top);
    }
  }
  auto u = [&](int g, int m, double power = 1.0) {
    return Monomial::variable(out.load_var.at({g, m}), power);
  };

  out.chi_var.assign(idx(K), -1);
  Monomial objective = Monomial::constant(1.0);
  std::vector<Monomial> target(idx(K));
  if (mode == Mode::kWsr) {
    for (int k = 0; k < K; ++k) {
      const double w = (*tangent)[idx(k)].w_hat;
      if (w > 0.0) {
        const int id = prog.add_variable("chi[" + std::to_string(k) + "]", chi_min(k));
        out.chi_var[idx(k)] = id;
        target[idx(k)] = Monomial::variable(id);
        objective *= Monomial::variable(id, -w);
      } else {
        target[idx(k)] = Monomial::constant(chi_min(k));
      }
    }
  } else {
    out.rho_var = prog.add_variable("rho", kRhoFloor, kRhoCap);
    objective = Monomial::variable(out.rho_var, -1.0);
    for (int k = 0; k < K; ++k) {
      if (chi_min(k) > 0.0) target[idx(k)] = Monomial::variable(out.rho_var).scaled(chi_min(k));
    }
  }
  prog.set_objective(objective);

  // (a) chi_k De_k / (N mon_k^2) <= 1
  out.denominator.resize(idx(K));
  out.sinr_constraint.assign(idx(K), -1);
  for (int k = 0; k < K; ++k) {
    const int g = lookup[idx(k)];
    const auto& group = groups[idx(g)];
    auto theta_sq = [&](int j) {
      Monomial t = Monomial::constant(1.0);
      for (int m : inst.serving_aps[idx(j)]) t *= u(g, m);
      return t;
    };
    Monomial theta_all = Monomial::constant(1.0);
    for (int j : group) theta_all *= theta_sq(j);

    Posynomial inner = Monomial::constant(1.0);
    for (int kp = 0; kp < K; ++kp) {
      for (int m : inst.serving_aps[idx(kp)]) {
        const double b = inst.beta(m, k);
        if (b > 0.0) inner += pd(m, kp).scaled(b);
      }
    }
    Posynomial de = inner * theta_all;

    for (int kp : group) {
      if (kp == k) continue;
      Posynomial phi;
      const auto& aps = inst.serving_aps[idx(kp)];
      for (int m : aps) {
        const double b = inst.beta(m, k);
        if (!(b > 0.0)) continue;
        Monomial t = pilot[idx(k)] * pd(m, kp);
        t = t.scaled(tau * b * b);
        for (int n : aps) {
          if (n != m) t *= u(g, n);
        }
        phi += t.pow(0.5);
      }
      if (phi.terms.empty()) continue;
      Monomial pre = theta_sq(k).scaled(N);
      for (int j : group) {
        if (j != k && j != kp) pre *= theta_sq(j);
      }
      de += (phi * phi) * pre;
    }
    out.denominator[idx(k)] = de;

    if (!(chi_min(k) > 0.0) && (mode == Mode::kFeasibility || out.chi_var[idx(k)] < 0)) continue;

    const auto& cond = condensation[idx(k)];
    Monomial mon = Monomial::constant(1.0);
    mon.log_coeff = cond.log_c;
    for (const auto& [m, e] : cond.a) {
      mon *= pd(m, k).scaled(inst.beta(m, k) * inst.beta(m, k)).pow(e);
    }
    for (const auto& [i, e] : cond.b) mon *= pilot[idx(i)].scaled(tau).pow(e);
    Monomial scale = (mon.pow(2.0).scaled(N)).inverse() * target[idx(k)];
    out.sinr_constraint[idx(k)] = static_cast<int>(prog.constraints().size());
    prog.add_constraint(de * scale, "sinr[" + std::to_string(k) + "]");
  }

  // (b) (sum_{i in group} tau p_i beta_{m,i} + 1) / u <= 1
  for (const auto& [gm, id] : out.load_var) {
    Posynomial load = Monomial::constant(1.0);
    for (int i : groups[idx(gm.first)]) {
      const double b = inst.beta(gm.second, i);
      if (b > 0.0) load += pilot[idx(i)].scaled(tau * b);
    }
    prog.add_constraint(load * Monomial::variable(id, -1.0),
                        "load[" + std::to_string(gm.first) + "," + std::to_string(gm.second) +
                            "]");
  }

  // (e) per-AP budget
  for (int m = 0; m < inst.num_aps(); ++m) {
    const auto& users = inst.served_devices[idx(m)];
    if (users.empty()) continue;
    Posynomial budget;
    for (int k : users) budget += pd(m, k).scaled(1.0 / limits.ap_max(m));
    prog.add_constraint(budget, "ap[" + std::to_string(m) + "]");
  }
  return out;
}

std::vector<Condensation> condense_all(const NetworkInstance& inst, const PilotGroups& groups,
                                       int tau, const PowerProfile& point) {
  std::vector<Condensation> c;
  for (int k = 0; k < inst.num_devices(); ++k) {
    c.push_back(condensation_coeffs(inst, point, groups, tau, k));
  }
  return c;
}

PowerProfile floored(const NetworkInstance& inst, const PowerLimits& limits,
                     const PowerProfile& p, double fraction) {
  PowerProfile out = p;
  for (int k = 0; k < inst.num_devices(); ++k) {
    out.pilot(k) = std::min(clamp_floor(p.pilot(k), fraction * limits.pilot_max(k)),
                            limits.pilot_max(k));
    for (int m : inst.serving_aps[idx(k)]) {
      out.downlink(m, k) = clamp_floor(p.downlink(m, k), fraction * limits.ap_max(m));
    }
  }
  return out;
}

bool solution_usable(const gp::Program& prog, const gp::Solution& sol) {
  if (sol.status == gp::Status::kOptimal) return true;
  if (sol.status != gp::Status::kMaxIter || sol.x.empty()) return false;
  for (const auto& c : prog.constraints()) {
    if (!(c.eval(sol.x) <= 1.0 + 1e-9)) return false;
  }
  return true;
}

// Slightly interior version of `x`: loads inflated, downlink shares shrunk.
std::vector<double> interior(const PowerGp& gpp, std::vector<double> x) {
  for (const auto& [gm, id] : gpp.load_var) x[idx(id)] *= 1.0 + 1e-6;
  for (const auto& [mk, id] : gpp.downlink_var) x[idx(id)] *= 1.0 - 1e-6;
  return x;
}

double min_ratio(const Eigen::VectorXd& gamma, const Eigen::VectorXd& chi_min) {
  double r = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < gamma.size(); ++k) {
    if (chi_min(k) > 0.0) r = std::min(r, gamma(k) / chi_min(k));
  }
  return std::isfinite(r) ? r : kRhoCap;
}

}  // namespace

PowerGp build_wsr_gp(const NetworkInstance& inst, const QosSpec& qos, const PilotGroups& groups,
                     const PowerLimits& limits, const ScaState& state,
                     const GpBuildOptions& options) {
  return assemble(inst, qos, groups, limits, state.point, state.condensation, &state.tangent,
                  sinr_thresholds(qos), options, Mode::kWsr);
}

PowerGp build_feasibility_gp(const NetworkInstance& inst, const QosSpec& qos,
                             const PilotGroups& groups, const PowerLimits& limits,
                             const PowerProfile& point, const GpBuildOptions& options) {
  return assemble(inst, qos, groups, limits, point,
                  condense_all(inst, groups, qos.pilot_length, point), nullptr,
                  sinr_thresholds(qos), options, Mode::kFeasibility);
}

FeasibilityResult feasibility_init(const NetworkInstance& inst, const QosSpec& qos,
                                   const PilotGroups& groups, const PowerLimits& limits,
                                   const PowerOptions& options) {
  const int tau = qos.pilot_length;
  const Eigen::VectorXd chi_min = sinr_thresholds(qos);
  const GpBuildOptions build{options.fix_pilot, options.floor_fraction};

  FeasibilityResult res;
  res.powers = floored(inst, limits, fixed_power_profile(inst, limits), options.floor_fraction);
  res.min_ratio = min_ratio(sinr_lb(inst, tau, res.powers, groups), chi_min);
  res.rho = res.min_ratio;
  double prev = std::numeric_limits<double>::quiet_NaN();
  for (int round = 0; round < options.feasibility_rounds; ++round) {
    const PowerGp gpp = build_feasibility_gp(inst, qos, groups, limits, res.powers, build);
    gp::Options o = options.gp;
    const double start = std::clamp(0.5 * res.min_ratio, 2.0 * kRhoFloor, 0.5 * kRhoCap);
    o.initial = interior(gpp, gpp.point(inst, groups, tau, res.powers, chi_min, start));
    const gp::Solution sol = gp::solve(gpp.program, o);
    ++res.rounds;
    if (sol.status == gp::Status::kInfeasible) break;
    if (!solution_usable(gpp.program, sol)) {
      throw PowerAllocationError(
          std::string("feasibility subproblem failed: ") + gp::to_string(sol.status), round,
          res.powers);
    }
    res.powers = floored(inst, limits, gpp.extract(inst, sol.x, res.powers.pilot),
                         options.floor_fraction);
    res.rho = sol.x[idx(gpp.rho_var)];
    res.min_ratio = min_ratio(sinr_lb(inst, tau, res.powers, groups), chi_min);
    if (options.stop_when_feasible && res.min_ratio >= 1.0) break;
    if (std::isfinite(prev) &&
        std::abs(res.rho - prev) < options.feasibility_tol * std::max(1.0, res.rho)) {
      break;
    }
    prev = res.rho;
  }
  res.feasible = res.min_ratio >= 1.0;
  return res;
}

const char* to_string(WsrStatus s) {
  switch (s) {
    case WsrStatus::kConverged: return "converged";
    case WsrStatus::kMaxIterations: return "max_iterations";
    case WsrStatus::kInfeasible: return "infeasible";
  }
  return "unknown";
}

double evaluate_wsr(const NetworkInstance& inst, const QosSpec& qos, const PilotGroups& groups,
                    const PowerProfile& powers) {
  return weighted_sum_rate(lb_rate(sinr_lb(inst, qos.pilot_length, powers, groups), qos), qos);
}

WsrResult maximize_wsr(const NetworkInstance& inst, const QosSpec& qos, const PilotGroups& groups,
                       const PowerLimits& limits, const PowerOptions& options) {
  const int tau = qos.pilot_length;
  WsrResult res;
  Eigen::VectorXd chi_min;
  try {
    chi_min = sinr_thresholds(qos);
  } catch (const FeasibilityError&) {
    res.powers = fixed_power_profile(inst, limits);
    res.chi = sinr_lb(inst, tau, res.powers, groups);
    res.wsr = evaluate_wsr(inst, qos, groups, res.powers);
    return res;
  }

  PowerOptions init_opts = options;
  init_opts.stop_when_feasible = true;
  res.init = feasibility_init(inst, qos, groups, limits, init_opts);
  res.powers = res.init.powers;
  res.chi = sinr_lb(inst, tau, res.powers, groups);
  res.wsr = evaluate_wsr(inst, qos, groups, res.powers);
  if (!res.init.feasible) {
    res.status = WsrStatus::kInfeasible;
    return res;
  }
  res.history.push_back(res.wsr);

  const GpBuildOptions build{options.fix_pilot, options.floor_fraction};
  res.status = WsrStatus::kMaxIterations;
  for (int it = 0; it < options.max_iters; ++it) {
    const ScaState state = make_sca_state(inst, qos, groups, res.powers);
    const PowerGp gpp = build_wsr_gp(inst, qos, groups, limits, state, build);
    if (std::none_of(gpp.chi_var.begin(), gpp.chi_var.end(), [](int v) { return v >= 0; })) {
      res.status = WsrStatus::kConverged;
      break;
    }
    gp::Options o = options.gp;
    Eigen::VectorXd start = state.chi;
    for (Eigen::Index k = 0; k < start.size(); ++k) {
      start(k) = std::sqrt(std::max(state.chi(k), chi_min(k)) * std::max(chi_min(k), 1e-300));
    }
    o.initial = interior(gpp, gpp.point(inst, groups, tau, res.powers, start));
    const gp::Solution sol = gp::solve(gpp.program, o);
    ++res.iterations;
    if (!solution_usable(gpp.program, sol)) {
      throw PowerAllocationError(
          std::string("power subproblem failed: ") + gp::to_string(sol.status), it, res.powers);
    }
    PowerProfile next = gpp.extract(inst, sol.x, res.powers.pilot);
    const double wsr = evaluate_wsr(inst, qos, groups, next);
    const Eigen::VectorXd gamma = sinr_lb(inst, tau, next, groups);
    bool qos_ok = true;
    for (Eigen::Index k = 0; k < gamma.size(); ++k) {
      if (gamma(k) < chi_min(k) * (1.0 - 1e-9)) qos_ok = false;
    }
    if (!qos_ok || wsr < res.wsr) {
      res.status = WsrStatus::kConverged;
      break;
    }
    const double gain = wsr - res.wsr;
    const double base = res.wsr;
    res.powers = std::move(next);
    res.chi = gamma;
    res.wsr = wsr;
    res.history.push_back(wsr);
    if (gain < options.zeta * base || gain <= 0.0) {
      res.status = WsrStatus::kConverged;
      break;
    }
  }
  return res;
}

}  // namespace cfurllc
