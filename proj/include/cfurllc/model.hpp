#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace cfurllc {

struct Point2 {
  double x = 0.0;  // km
  double y = 0.0;  // km
};

inline constexpr double kBoltzmann = 1.381e-23;
inline constexpr double kNoiseTemperatureK = 290.0;
inline constexpr double kNoiseFigureDb = 9.0;
inline constexpr double kPathLossConstantDb = 140.7;
inline constexpr double kBreakpointNearKm = 0.01;
inline constexpr double kBreakpointFarKm = 0.05;
inline constexpr double kMinDistanceKm = 0.001;

/// Three-slope path loss in dB for a horizontal distance in km.
/// Throws std::domain_error for d <= 0.
double path_loss_db(double distance_km);

/// Thermal noise power in watts over `bandwidth_hz`, including a 9 dB noise
/// figure. Throws std::domain_error for bandwidth <= 0.
double noise_power_watts(double bandwidth_hz);

/// User-centric AP selection: the shortest prefix of the gain list sorted in
/// descending order (ties by lower index) whose share of the total gain
/// reaches `threshold`. Returned indices are in selection order.
std::vector<int> select_aps(std::span<const double> gains, double threshold);

/// A deployment: geometry, noise-normalized large-scale gains and the
/// user-centric service sets. Immutable once built.
struct NetworkInstance {
  std::vector<Point2> ap_positions;
  std::vector<Point2> device_positions;
  int antennas = 1;
  Eigen::MatrixXd beta;                         // M x K, divided by P_n
  std::vector<std::vector<int>> serving_aps;    // M_k, ascending
  std::vector<std::vector<int>> served_devices; // U_m, ascending
  double threshold = 0.75;

  int num_aps() const { return static_cast<int>(beta.rows()); }
  int num_devices() const { return static_cast<int>(beta.cols()); }
  bool serves(int ap, int device) const;
};

struct InstanceConfig {
  int num_aps = 16;
  int num_devices = 20;
  int antennas = 9;
  double area_km = 0.2;
  double threshold = 0.75;
  double bandwidth_hz = 1e6;
  /// Log-normal shadowing standard deviation in dB; 0 disables it.
  double shadowing_std_db = 0.0;
};

/// Square AP grid: side = sqrt(M) cells of width area/side, one AP at each
/// cell centre. Throws std::invalid_argument if M is not a perfect square.
std::vector<Point2> grid_positions(int num_aps, double area_km);

/// Random instance. Device positions, shadowing and weights come from
/// independent sub-streams of `seed` (see rng.hpp).
NetworkInstance generate_instance(std::uint64_t seed, const InstanceConfig& cfg);

/// Instance from explicit positions.
NetworkInstance make_instance(std::vector<Point2> aps, std::vector<Point2> devices,
                              int antennas, double threshold,
                              double bandwidth_hz = 1e6);

/// Instance from an explicit gain matrix; positions are left empty.
NetworkInstance instance_from_gains(Eigen::MatrixXd beta, int antennas,
                                    double threshold);

/// Instance with caller-provided service sets (used by tests that need a
/// specific conflict pattern). U_m is derived from M_k.
NetworkInstance instance_with_service(Eigen::MatrixXd beta, int antennas,
                                      std::vector<std::vector<int>> serving_aps);

}  // namespace cfurllc
