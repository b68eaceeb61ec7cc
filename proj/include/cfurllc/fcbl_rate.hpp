#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "cfurllc/model.hpp"
#include "cfurllc/types.hpp"

namespace cfurllc {

/// Raised when an argument falls outside the region where a rate function is
/// defined. `boundary()` carries the edge of the admissible region.
class FeasibilityError : public std::domain_error {
 public:
  FeasibilityError(const std::string& what, double boundary)
      : std::domain_error(what), boundary_(boundary) {}
  double boundary() const noexcept { return boundary_; }

 private:
  double boundary_;
};

/// A bisection or Newton loop hit its iteration cap.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kMaxBisectionIters = 200;

/// Per-device QoS and blocklength split.
struct QosSpec {
  std::vector<double> epsilon;   // decoding error probability, (0, 0.5)
  std::vector<double> rate_req;  // bit/s/Hz
  std::vector<double> weight;    // >= 0
  int blocklength = 100;         // L
  int pilot_length = 1;          // tau, 1 <= tau < L

  int num_devices() const { return static_cast<int>(epsilon.size()); }
  double eta() const { return static_cast<double>(pilot_length) / blocklength; }
  /// Q^{-1}(eps_k) / sqrt(L (1 - eta)). Throws if tau >= L.
  double alpha(int k) const;
  QosSpec with_pilot_length(int tau) const;

  static QosSpec uniform(int num_devices, double epsilon, double rate_req,
                         int blocklength, int pilot_length);
  /// Uniform QoS with weights drawn U[0,1] from the weights sub-stream.
  static QosSpec with_random_weights(std::uint64_t seed, int num_devices,
                                     double epsilon, double rate_req,
                                     int blocklength, int pilot_length);
};

/// Gaussian tail Q(x).
double q_function(double x);

/// Inverse of Q on (0, 1), absolute tolerance 1e-10.
double q_inverse(double epsilon);

/// g(x) = (x+1) ln(1 + 1/x) / sqrt(2x+1), strictly decreasing on x > 0.
double g_func(double x);

/// Solves g(x) = y. Returns +inf for y == 0 (g never reaches 0).
/// Throws FeasibilityError for y < 0.
double g_inverse(double y);

/// f(x) = ln(1 + 1/x) - alpha * sqrt(2x+1) / (x+1) on 0 < x <= g^{-1}(alpha).
/// Throws FeasibilityError (boundary = g^{-1}(alpha)) outside that region.
double f_func(double x, double alpha);

/// Unchecked evaluation of f; may be negative beyond the zero-rate boundary.
double f_raw(double x, double alpha);

/// Solves f(x) = target on (0, g^{-1}(alpha)]. Throws FeasibilityError if no
/// representable x reaches the target.
double f_inverse(double target, double alpha);

/// lambda_{m,k} for the given pilot groups and pilot powers (M x K).
Eigen::MatrixXd lambda_gain(int tau, const Eigen::VectorXd& pilot_powers,
                            const Eigen::MatrixXd& beta, const PilotGroups& groups);

/// Closed-form lower bound on the effective downlink SINR for every device.
Eigen::VectorXd sinr_lb(const NetworkInstance& inst, const Eigen::MatrixXd& lambda,
                        const PowerProfile& powers, const PilotGroups& groups);

/// Convenience overload computing lambda from the profile's pilot powers.
Eigen::VectorXd sinr_lb(const NetworkInstance& inst, int tau,
                        const PowerProfile& powers, const PilotGroups& groups);

/// Rate lower bound ((1-eta)/ln 2) f_k(1/gamma), clamped at zero.
Eigen::VectorXd lb_rate(const Eigen::VectorXd& gamma, const QosSpec& qos);

/// Product-form terms of the SINR bound for one device.
struct SinrTerms {
  double varphi = 0.0;             // signal term
  std::map<int, double> phi;       // k' in Q_k \ k
  std::map<int, double> theta;     // k' in Q_k (includes k)
  double denominator = 0.0;        // De_k
  double gamma = 0.0;              // N varphi^2 prod theta_{k,k'}^2 / De_k
};

SinrTerms sinr_rewrite_terms(const NetworkInstance& inst, const PowerProfile& powers,
                             const PilotGroups& groups, int tau, int k);

/// Pilot contamination sum S_{m,k} + 1 = sum_{i in Q_k} tau p_i beta_{m,i} + 1.
double pilot_load(const NetworkInstance& inst, const Eigen::VectorXd& pilot,
                  const std::vector<int>& group, int tau, int ap);

/// Weighted sum of rate lower bounds.
double weighted_sum_rate(const Eigen::VectorXd& rates, const QosSpec& qos);

}  // namespace cfurllc
