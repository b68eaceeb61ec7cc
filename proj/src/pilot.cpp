#include "cfurllc/pilot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cfurllc {

void ConflictMatrix::connect(int i, int j) {
  if (i == j) throw std::invalid_argument("a device cannot conflict with itself");
  b_[index(i, j)] = 1;
  b_[index(j, i)] = 1;
}

int ConflictMatrix::degree(int i) const {
  int d = 0;
  for (int j = 0; j < n_; ++j) d += b_[index(i, j)];
  return d;
}

int ConflictMatrix::num_edges() const {
  int e = 0;
  for (auto v : b_) e += v;
  return e / 2;
}

bool ConflictMatrix::contains(const ConflictMatrix& other) const {
  if (other.n_ != n_) return false;
  for (std::size_t i = 0; i < b_.size(); ++i) {
    if (other.b_[i] && !b_[i]) return false;
  }
  return true;
}

ConflictMatrix build_conflict_matrix(const NetworkInstance& inst) {
  const int K = inst.num_devices();
  ConflictMatrix b(K);
  for (const auto& devices : inst.served_devices) {
    for (std::size_t a = 0; a < devices.size(); ++a) {
      for (std::size_t c = a + 1; c < devices.size(); ++c) b.connect(devices[a], devices[c]);
    }
  }
  return b;
}

PilotAssignment dsatur_color(const ConflictMatrix& conflict, int n_max) {
  if (n_max < 1) throw std::invalid_argument("n_max must be at least 1");
  const int K = conflict.size();
  std::vector<int> color(static_cast<std::size_t>(K), -1);
  std::vector<int> degree(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) degree[static_cast<std::size_t>(k)] = conflict.degree(k);
  // neighbour_colors[k][c] counts neighbours of k holding colour c
  std::vector<std::vector<int>> neighbour_colors(static_cast<std::size_t>(K));
  std::vector<int> saturation(static_cast<std::size_t>(K), 0);
  std::vector<int> occupancy;

  for (int step = 0; step < K; ++step) {
    int pick = -1;
    for (int k = 0; k < K; ++k) {
      if (color[static_cast<std::size_t>(k)] >= 0) continue;
      if (pick < 0) {
        pick = k;
        continue;
      }
      const auto ku = static_cast<std::size_t>(k), pu = static_cast<std::size_t>(pick);
      if (saturation[ku] > saturation[pu] ||
          (saturation[ku] == saturation[pu] && degree[ku] > degree[pu])) {
        pick = k;
      }
    }
    const auto pu = static_cast<std::size_t>(pick);
    int chosen = -1;
    for (std::size_t c = 0; c < occupancy.size(); ++c) {
      const bool used_by_neighbour =
          c < neighbour_colors[pu].size() && neighbour_colors[pu][c] > 0;
      if (!used_by_neighbour && occupancy[c] < n_max) {
        chosen = static_cast<int>(c);
        break;
      }
    }
    if (chosen < 0) {
      chosen = static_cast<int>(occupancy.size());
      occupancy.push_back(0);
    }
    color[pu] = chosen;
    ++occupancy[static_cast<std::size_t>(chosen)];
    for (int j = 0; j < K; ++j) {
      if (!conflict(pick, j) || color[static_cast<std::size_t>(j)] >= 0) continue;
      auto& counts = neighbour_colors[static_cast<std::size_t>(j)];
      if (counts.size() <= static_cast<std::size_t>(chosen)) counts.resize(static_cast<std::size_t>(chosen) + 1, 0);
      if (counts[static_cast<std::size_t>(chosen)]++ == 0) ++saturation[static_cast<std::size_t>(j)];
    }
  }

  PilotAssignment out;
  out.n_max = n_max;
  out.groups.resize(occupancy.size());
  for (int k = 0; k < K; ++k) out.groups[static_cast<std::size_t>(color[static_cast<std::size_t>(k)])].push_back(k);
  return out;
}

bool is_valid_assignment(const ConflictMatrix& conflict, const PilotAssignment& a) {
  if (!is_partition(a.groups, conflict.size())) return false;
  for (const auto& group : a.groups) {
    if (static_cast<int>(group.size()) > a.n_max) return false;
    for (std::size_t i = 0; i < group.size(); ++i) {
      for (std::size_t j = i + 1; j < group.size(); ++j) {
        if (conflict(group[i], group[j])) return false;
      }
    }
  }
  return true;
}

PowerProfile fixed_power_profile(const NetworkInstance& inst, const PowerLimits& limits) {
  PowerProfile p;
  p.pilot = limits.pilot_max;
  p.downlink = Eigen::MatrixXd::Zero(inst.num_aps(), inst.num_devices());
  for (int m = 0; m < inst.num_aps(); ++m) {
    const auto& users = inst.served_devices[static_cast<std::size_t>(m)];
    for (int k : users) p.downlink(m, k) = limits.ap_max(m) / static_cast<double>(users.size());
  }
  return p;
}

Admission admitted_set(const NetworkInstance& inst, const PilotGroups& groups,
                       const QosSpec& qos, const PowerLimits& limits) {
  const int K = inst.num_devices();
  const int tau = static_cast<int>(groups.size());
  Admission out;
  if (tau >= qos.blocklength) {
    out.degenerate = true;
    out.rates = Eigen::VectorXd::Zero(K);
    return out;
  }
  const QosSpec q = qos.with_pilot_length(tau);
  const auto powers = fixed_power_profile(inst, limits);
  out.rates = lb_rate(sinr_lb(inst, tau, powers, groups), q);
  for (int k = 0; k < K; ++k) {
    if (out.rates(k) >= q.rate_req[static_cast<std::size_t>(k)]) out.admitted.push_back(k);
  }
  return out;
}

PilotResult assign_pilots_iterative(const NetworkInstance& inst, const QosSpec& qos,
                                    const PowerLimits& limits, const PilotOptions& options) {
  if (options.iota < 0) throw std::invalid_argument("iota must be non-negative");
  if (options.max_iters < 1) throw std::invalid_argument("max_iters must be at least 1");
  const int K = inst.num_devices();

  PilotResult res;
  ConflictMatrix b = build_conflict_matrix(inst);
  res.dsatur = dsatur_color(b, options.n_max);
  Admission adm = admitted_set(inst, res.dsatur.groups, qos, limits);
  res.dsatur_admitted = static_cast<int>(adm.admitted.size());
  res.best = res.dsatur;
  res.best_conflict = b;
  res.admission = adm;
  res.history.push_back(res.dsatur_admitted);
  if (res.dsatur_admitted == K) {
    res.final_conflict = b;
    return res;
  }

  const int tau_dsa = res.dsatur.tau();
  const auto powers = fixed_power_profile(inst, limits);
  PilotAssignment current = res.dsatur;
  int r = 0;
  while (current.tau() - tau_dsa < options.iota && r < options.max_iters) {
    const Eigen::MatrixXd lambda = lambda_gain(current.tau(), powers.pilot, inst.beta, current.groups);
    bool added = false;
    for (const auto& group : current.groups) {
      if (group.size() < 2) continue;
      int worst = -1;
      double worst_gap = 0.0;
      for (int k : group) {
        const double gap = adm.rates(k) - qos.rate_req[static_cast<std::size_t>(k)];
        if (gap < 0.0 && (worst < 0 || gap < worst_gap)) {
          worst = k;
          worst_gap = gap;
        }
      }
      if (worst < 0) continue;
      int culprit = -1;
      double strongest = -1.0;
      for (int j : group) {
        if (j == worst) continue;
        double score = 0.0;
        for (int m : inst.serving_aps[static_cast<std::size_t>(j)]) {
          score += std::sqrt(powers.downlink(m, j) * lambda(m, worst));
        }
        if (score > strongest) {
          strongest = score;
          culprit = j;
        }
      }
      if (!b(worst, culprit)) {
        b.connect(worst, culprit);
        added = true;
      }
    }
    if (!added) break;

    ++r;
    current = dsatur_color(b, options.n_max);
    adm = admitted_set(inst, current.groups, qos, limits);
    const int count = static_cast<int>(adm.admitted.size());
    if (count > res.history.back()) {
      res.history.push_back(count);
      res.best = current;
      res.best_conflict = b;
      res.admission = adm;
    } else {
      res.history.push_back(res.history.back());
    }
  }
  res.iterations = r;
  res.final_conflict = b;
  return res;
}

}  // namespace cfurllc
