#include "cfurllc/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "cfurllc/rng.hpp"

namespace cfurllc {

double path_loss_db(double distance_km) {
  if (!(distance_km > 0.0)) {
    throw std::domain_error("path_loss_db: distance must be positive");
  }
  if (distance_km > kBreakpointFarKm) {
    return kPathLossConstantDb + 35.0 * std::log10(distance_km);
  }
  const double far_term = 15.0 * std::log10(kBreakpointFarKm);
  if (distance_km > kBreakpointNearKm) {
    return kPathLossConstantDb + far_term + 20.0 * std::log10(distance_km);
  }
  return kPathLossConstantDb + far_term + 20.0 * std::log10(kBreakpointNearKm);
}

double noise_power_watts(double bandwidth_hz) {
  if (!(bandwidth_hz > 0.0)) {
    throw std::domain_error("noise_power_watts: bandwidth must be positive");
  }
  return bandwidth_hz * kBoltzmann * kNoiseTemperatureK *
         std::pow(10.0, kNoiseFigureDb / 10.0);
}

std::vector<int> select_aps(std::span<const double> gains, double threshold) {
  if (gains.empty()) return {};
  std::vector<int> order(gains.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return gains[a] > gains[b]; });
  const double total = std::accumulate(gains.begin(), gains.end(), 0.0);
  std::vector<int> selected;
  double running = 0.0;
  for (int m : order) {
    selected.push_back(m);
    running += gains[static_cast<std::size_t>(m)];
    if (running >= threshold * total) break;
  }
  return selected;
}

bool NetworkInstance::serves(int ap, int device) const {
  const auto& aps = serving_aps[static_cast<std::size_t>(device)];
  return std::binary_search(aps.begin(), aps.end(), ap);
}

namespace {

void build_service_sets(NetworkInstance& inst) {
  const int M = inst.num_aps();
  const int K = inst.num_devices();
  inst.serving_aps.assign(static_cast<std::size_t>(K), {});
  inst.served_devices.assign(static_cast<std::size_t>(M), {});
  std::vector<double> column(static_cast<std::size_t>(M));
  for (int k = 0; k < K; ++k) {
    for (int m = 0; m < M; ++m) column[static_cast<std::size_t>(m)] = inst.beta(m, k);
    auto chosen = select_aps(column, inst.threshold);
    std::sort(chosen.begin(), chosen.end());
    inst.serving_aps[static_cast<std::size_t>(k)] = std::move(chosen);
  }
  for (int k = 0; k < K; ++k) {
    for (int m : inst.serving_aps[static_cast<std::size_t>(k)]) {
      inst.served_devices[static_cast<std::size_t>(m)].push_back(k);
    }
  }
}

void validate_gains(const Eigen::MatrixXd& beta) {
  if (beta.rows() == 0 || beta.cols() == 0) {
    throw std::invalid_argument("instance needs at least one AP and one device");
  }
  if (!(beta.array() > 0.0).all() || !beta.allFinite()) {
    throw std::invalid_argument("large-scale gains must be positive and finite");
  }
}

}  // namespace

std::vector<Point2> grid_positions(int num_aps, double area_km) {
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(num_aps))));
  if (num_aps <= 0 || side * side != num_aps) {
    throw std::invalid_argument("AP count must be a positive perfect square, got " +
                                std::to_string(num_aps));
  }
  const double spacing = area_km / side;
  std::vector<Point2> pts;
  pts.reserve(static_cast<std::size_t>(num_aps));
  for (int row = 0; row < side; ++row) {
    for (int col = 0; col < side; ++col) {
      pts.push_back({(col + 0.5) * spacing, (row + 0.5) * spacing});
    }
  }
  return pts;
}

NetworkInstance make_instance(std::vector<Point2> aps, std::vector<Point2> devices,
                              int antennas, double threshold, double bandwidth_hz) {
  if (antennas < 1) throw std::invalid_argument("antennas per AP must be >= 1");
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw std::invalid_argument("AP selection threshold must lie in (0, 1]");
  }
  const double noise = noise_power_watts(bandwidth_hz);
  NetworkInstance inst;
  inst.antennas = antennas;
  inst.threshold = threshold;
  inst.beta.resize(static_cast<Eigen::Index>(aps.size()),
                   static_cast<Eigen::Index>(devices.size()));
  for (std::size_t m = 0; m < aps.size(); ++m) {
    for (std::size_t k = 0; k < devices.size(); ++k) {
      const double d = std::max(
          std::hypot(aps[m].x - devices[k].x, aps[m].y - devices[k].y), kMinDistanceKm);
      inst.beta(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)) =
          std::pow(10.0, -path_loss_db(d) / 10.0) / noise;
    }
  }
  validate_gains(inst.beta);
  inst.ap_positions = std::move(aps);
  inst.device_positions = std::move(devices);
  build_service_sets(inst);
  return inst;
}

NetworkInstance generate_instance(std::uint64_t seed, const InstanceConfig& cfg) {
  if (cfg.num_devices < 1) throw std::invalid_argument("K must be >= 1");
  auto aps = grid_positions(cfg.num_aps, cfg.area_km);

  auto dev_rng = make_engine(seed, Stream::kDevicePositions);
  std::uniform_real_distribution<double> coord(0.0, cfg.area_km);
  std::vector<Point2> devices(static_cast<std::size_t>(cfg.num_devices));
  for (auto& p : devices) {
    p.x = coord(dev_rng);
    p.y = coord(dev_rng);
  }

  auto inst = make_instance(std::move(aps), std::move(devices), cfg.antennas,
                            cfg.threshold, cfg.bandwidth_hz);
  if (cfg.shadowing_std_db > 0.0) {
    auto sh_rng = make_engine(seed, Stream::kShadowing);
    std::normal_distribution<double> z(0.0, cfg.shadowing_std_db);
    for (Eigen::Index k = 0; k < inst.beta.cols(); ++k) {
      for (Eigen::Index m = 0; m < inst.beta.rows(); ++m) {
        inst.beta(m, k) *= std::pow(10.0, z(sh_rng) / 10.0);
      }
    }
    build_service_sets(inst);
  }
  return inst;
}

NetworkInstance instance_from_gains(Eigen::MatrixXd beta, int antennas,
                                    double threshold) {
  validate_gains(beta);
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw std::invalid_argument("AP selection threshold must lie in (0, 1]");
  }
  NetworkInstance inst;
  inst.antennas = antennas;
  inst.threshold = threshold;
  inst.beta = std::move(beta);
  build_service_sets(inst);
  return inst;
}

NetworkInstance instance_with_service(Eigen::MatrixXd beta, int antennas,
                                      std::vector<std::vector<int>> serving_aps) {
  validate_gains(beta);
  if (static_cast<Eigen::Index>(serving_aps.size()) != beta.cols()) {
    throw std::invalid_argument("one serving set per device required");
  }
  NetworkInstance inst;
  inst.antennas = antennas;
  inst.threshold = 1.0;
  inst.beta = std::move(beta);
  inst.served_devices.assign(static_cast<std::size_t>(inst.beta.rows()), {});
  for (std::size_t k = 0; k < serving_aps.size(); ++k) {
    auto& aps = serving_aps[k];
    std::sort(aps.begin(), aps.end());
    if (aps.empty()) throw std::invalid_argument("serving set must be non-empty");
    for (int m : aps) {
      if (m < 0 || m >= inst.num_aps()) throw std::invalid_argument("AP index out of range");
      inst.served_devices[static_cast<std::size_t>(m)].push_back(static_cast<int>(k));
    }
  }
  inst.serving_aps = std::move(serving_aps);
  return inst;
}

}  // namespace cfurllc
