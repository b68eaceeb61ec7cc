#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "cfurllc/fcbl_rate.hpp"
#include "cfurllc/model.hpp"
#include "cfurllc/types.hpp"

namespace cfurllc {

/// Symmetric 0/1 matrix: 1 means the two devices may not share a pilot.
class ConflictMatrix {
 public:
  explicit ConflictMatrix(int num_devices = 0)
      : n_(num_devices), b_(static_cast<std::size_t>(num_devices) * num_devices, 0) {}

  int size() const { return n_; }
  bool operator()(int i, int j) const { return b_[index(i, j)] != 0; }
  void connect(int i, int j);
  int degree(int i) const;
  int num_edges() const;
  /// True when every edge of `other` is also an edge here.
  bool contains(const ConflictMatrix& other) const;
  bool operator==(const ConflictMatrix& other) const = default;

 private:
  std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * n_ + j; }
  int n_;
  std::vector<std::uint8_t> b_;
};

/// b_{k,k'} = 1 iff k != k' and the two devices share a serving AP.
ConflictMatrix build_conflict_matrix(const NetworkInstance& inst);

struct PilotAssignment {
  PilotGroups groups;
  int n_max = 0;

  int tau() const { return static_cast<int>(groups.size()); }
};

/// Capped Dsatur. Groups are listed in colour order, members ascending.
PilotAssignment dsatur_color(const ConflictMatrix& conflict, int n_max);

/// Proper colouring, occupancy cap and partition all hold.
bool is_valid_assignment(const ConflictMatrix& conflict, const PilotAssignment& a);

/// Maximum pilot power and equal split of each AP budget over U_m.
PowerProfile fixed_power_profile(const NetworkInstance& inst, const PowerLimits& limits);

struct Admission {
  std::vector<int> admitted;  // ascending
  Eigen::VectorXd rates;      // lower-bound rates under the fixed power rule
  bool degenerate = false;    // tau >= L, nothing left for payload
};

/// Devices whose rate bound meets the requirement when pilots follow
/// `groups` and the pilot length is the number of groups.
Admission admitted_set(const NetworkInstance& inst, const PilotGroups& groups,
                       const QosSpec& qos, const PowerLimits& limits);

struct PilotOptions {
  int n_max = 4;
  int iota = 4;
  int max_iters = 20;
};

struct PilotResult {
  PilotAssignment best;
  ConflictMatrix best_conflict;   // matrix the best assignment was coloured under
  ConflictMatrix final_conflict;  // matrix after the last edge insertion
  PilotAssignment dsatur;
  int dsatur_admitted = 0;
  std::vector<int> history;       // a^(r), r = 0..iterations
  int iterations = 0;
  Admission admission;            // for `best`
};

/// Iterative refinement of the Dsatur baseline that adds conflict edges
/// between failing devices and their strongest pilot-sharing interferer.
PilotResult assign_pilots_iterative(const NetworkInstance& inst, const QosSpec& qos,
                                    const PowerLimits& limits, const PilotOptions& options = {});

}  // namespace cfurllc
