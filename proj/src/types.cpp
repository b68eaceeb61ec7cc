#include "cfurllc/types.hpp"

namespace cfurllc {

std::vector<int> group_lookup(const PilotGroups& groups, int num_devices) {
  std::vector<int> lookup(static_cast<std::size_t>(num_devices), -1);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    for (int k : groups[g]) {
      if (k >= 0 && k < num_devices) lookup[static_cast<std::size_t>(k)] = static_cast<int>(g);
    }
  }
  return lookup;
}

bool is_partition(const PilotGroups& groups, int num_devices) {
  std::vector<int> seen(static_cast<std::size_t>(num_devices), 0);
  for (const auto& group : groups) {
    if (group.empty()) return false;
    for (int k : group) {
      if (k < 0 || k >= num_devices) return false;
      if (seen[static_cast<std::size_t>(k)]++ != 0) return false;
    }
  }
  for (int s : seen) {
    if (s != 1) return false;
  }
  return true;
}

PilotGroups orthogonal_groups(int num_devices) {
  PilotGroups groups;
  groups.reserve(static_cast<std::size_t>(num_devices));
  for (int k = 0; k < num_devices; ++k) groups.push_back({k});
  return groups;
}

PowerLimits PowerLimits::uniform(int num_aps, int num_devices, double pilot_max_w,
                                 double ap_max_w) {
  return {Eigen::VectorXd::Constant(num_devices, pilot_max_w),
          Eigen::VectorXd::Constant(num_aps, ap_max_w)};
}

}  // namespace cfurllc
