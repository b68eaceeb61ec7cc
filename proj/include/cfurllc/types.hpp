#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

namespace cfurllc {

/// Device index sets sharing one pilot sequence each (Q_1..Q_tau).
using PilotGroups = std::vector<std::vector<int>>;

/// Maps each device to the index of its pilot group; -1 if unassigned.
std::vector<int> group_lookup(const PilotGroups& groups, int num_devices);

/// True when `groups` is a partition of {0..num_devices-1}.
bool is_partition(const PilotGroups& groups, int num_devices);

PilotGroups orthogonal_groups(int num_devices);

/// Per-device pilot caps and per-AP downlink budgets, in watts.
struct PowerLimits {
  Eigen::VectorXd pilot_max;  // P_k^{max,p}
  Eigen::VectorXd ap_max;     // P_m

  static PowerLimits uniform(int num_aps, int num_devices, double pilot_max_w,
                             double ap_max_w);
};

/// Pilot powers p_k^p and downlink powers p_{m,k}^d. The downlink matrix is
/// M x K and is zero outside the user-centric service pattern.
struct PowerProfile {
  Eigen::VectorXd pilot;
  Eigen::MatrixXd downlink;
};

}  // namespace cfurllc
