#pragma once

#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cfurllc/fcbl_rate.hpp"
#include "cfurllc/gp.hpp"
#include "cfurllc/model.hpp"
#include "cfurllc/types.hpp"

namespace cfurllc {

/// chi_min,k = 1 / f^{-1}(R_k ln2 / (1 - eta), alpha_k). Throws
/// FeasibilityError naming the device when the requirement is unreachable.
double sinr_threshold(const QosSpec& qos, int k);
Eigen::VectorXd sinr_thresholds(const QosSpec& qos);

/// Log-domain tangents of ln(1+chi) (lower) and G(chi) = sqrt(1-(1+chi)^-2)
/// (upper) at `chi`, with the weighted objective exponent.
struct TangentCoeffs {
  double rho = 0.0;
  double delta = 0.0;
  double rho_hat = 0.0;
  double delta_hat = 0.0;
  double w_hat = 0.0;
  double w_tilde = 0.0;
};

TangentCoeffs tangent_coeffs(double chi, double alpha, double weight, double eta);

/// Monomial lower bound c * prod_m (p_{m,k} beta_{m,k}^2)^{a_m} * prod_i (tau p_i)^{b_i}
/// of varphi_k * prod_{k' in Q_k \ k} theta_{k,k'}, tight at the expansion point.
struct Condensation {
  int device = -1;
  double log_c = 0.0;
  std::vector<std::pair<int, double>> a;  // (AP m in M_k, a_{m,k})
  std::vector<std::pair<int, double>> b;  // (device i in Q_k, b_i)

  double log_value(const NetworkInstance& inst, const PowerProfile& powers, int tau) const;
};

/// log(varphi_k * prod_{k' in Q_k \ k} theta_{k,k'}), evaluated in log space.
double log_signal_product(const NetworkInstance& inst, const PowerProfile& powers,
                          const PilotGroups& groups, int tau, int k);

/// Throws std::domain_error if any expansion power of device k's terms is zero.
Condensation condensation_coeffs(const NetworkInstance& inst, const PowerProfile& point,
                                 const PilotGroups& groups, int tau, int k);

/// Current linearization for one outer iteration.
struct ScaState {
  PowerProfile point;               // expansion powers
  Eigen::VectorXd chi;              // chi_k at the point (the exact bound)
  std::vector<TangentCoeffs> tangent;
  std::vector<Condensation> condensation;
};

ScaState make_sca_state(const NetworkInstance& inst, const QosSpec& qos,
                        const PilotGroups& groups, const PowerProfile& point);

struct GpBuildOptions {
  bool fix_pilot = false;        // pilot powers held at the expansion point
  double floor_fraction = 1e-6;  // power variables >= floor_fraction * cap
};

/// Assembled subproblem plus the variable layout needed to map solutions back.
struct PowerGp {
  gp::Program program;
  std::vector<int> pilot_var;              // -1 when fixed
  std::map<std::pair<int, int>, int> downlink_var;  // (m, k) -> id
  std::vector<int> chi_var;                // -1 when frozen or in feasibility mode
  std::map<std::pair<int, int>, int> load_var;      // (group, m) -> id
  int rho_var = -1;
  std::vector<gp::Posynomial> denominator;  // De_k in terms of the GP variables
  std::vector<int> sinr_constraint;         // index of constraint (a) per device, -1 if absent

  PowerProfile extract(const NetworkInstance& inst, const std::vector<double>& x,
                       const Eigen::VectorXd& fixed_pilot) const;
  /// Variable vector at `powers` with tight loads, chi as given and rho.
  std::vector<double> point(const NetworkInstance& inst, const PilotGroups& groups, int tau,
                            const PowerProfile& powers, const Eigen::VectorXd& chi,
                            double rho = 1.0) const;
};

/// GP subproblem maximizing prod chi_k^{w_hat_k}.
PowerGp build_wsr_gp(const NetworkInstance& inst, const QosSpec& qos, const PilotGroups& groups,
                     const PowerLimits& limits, const ScaState& state,
                     const GpBuildOptions& options = {});

/// GP maximizing rho with targets rho * chi_min,k.
PowerGp build_feasibility_gp(const NetworkInstance& inst, const QosSpec& qos,
                             const PilotGroups& groups, const PowerLimits& limits,
                             const PowerProfile& point, const GpBuildOptions& options = {});

inline constexpr double kRhoCap = 1e6;
inline constexpr double kRhoFloor = 1e-12;

struct FeasibilityResult {
  PowerProfile powers;
  double rho = 0.0;        // last GP optimum
  double min_ratio = 0.0;  // min_k exact gamma_k / chi_min,k at `powers`
  int rounds = 0;
  bool feasible = false;   // min_ratio >= 1
};

struct PowerOptions {
  double zeta = 0.01;
  int max_iters = 30;
  int feasibility_rounds = 20;
  double feasibility_tol = 1e-4;
  bool stop_when_feasible = false;  // feasibility_init returns once the exact ratio reaches 1
  bool fix_pilot = false;
  double floor_fraction = 1e-6;
  gp::Options gp;
};

FeasibilityResult feasibility_init(const NetworkInstance& inst, const QosSpec& qos,
                                   const PilotGroups& groups, const PowerLimits& limits,
                                   const PowerOptions& options = {});

enum class WsrStatus { kConverged, kMaxIterations, kInfeasible };
const char* to_string(WsrStatus s);

struct WsrResult {
  WsrStatus status = WsrStatus::kInfeasible;
  PowerProfile powers;
  Eigen::VectorXd chi;          // exact SINR bound at `powers`
  double wsr = 0.0;
  std::vector<double> history;  // Obj(1), Obj(2), ...
  int iterations = 0;           // GP subproblems solved
  FeasibilityResult init;
};

class PowerAllocationError : public std::runtime_error {
 public:
  PowerAllocationError(const std::string& what, int iteration, PowerProfile last)
      : std::runtime_error(what), iteration_(iteration), last_(std::move(last)) {}
  int iteration() const noexcept { return iteration_; }
  const PowerProfile& last_iterate() const noexcept { return last_; }

 private:
  int iteration_;
  PowerProfile last_;
};

/// Successive GP approximation of the weighted-sum-rate problem. The pilot
/// length is qos.pilot_length.
WsrResult maximize_wsr(const NetworkInstance& inst, const QosSpec& qos, const PilotGroups& groups,
                       const PowerLimits& limits, const PowerOptions& options = {});

/// Exact weighted sum of rate bounds at `powers`.
double evaluate_wsr(const NetworkInstance& inst, const QosSpec& qos, const PilotGroups& groups,
                    const PowerProfile& powers);

}  // namespace cfurllc
