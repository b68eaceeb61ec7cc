#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cfurllc/fcbl_rate.hpp"
#include "cfurllc/model.hpp"
#include "cfurllc/pilot.hpp"
#include "cfurllc/power.hpp"

namespace cfurllc {

/// Sweep description plus the physical defaults of the evaluation.
struct ExperimentConfig {
  std::string experiment = "custom";  // fig3..fig8, baselines, custom
  std::vector<int> devices{20};       // K sweep
  std::vector<std::pair<int, int>> mn{{16, 9}};  // (M, N) sweep
  int seeds = 100;
  std::uint64_t seed_base = 1;

  double bandwidth_hz = 1e6;
  double area_km = 0.2;
  double threshold = 0.75;
  double shadowing_std_db = 0.0;
  int blocklength = 100;
  double epsilon = 1e-7;
  double rate_req = 0.75;

  int n_max = 4;
  int iota = 4;
  int pilot_iters = 20;
  double ap_power = 0.2;     // P_m, W
  double pilot_power = 0.1;  // P_k^{max,p}, W

  int mc_samples = 1000;
  double zeta = 0.01;
  int sca_iters = 30;

  int threads = 1;
  std::string output_dir = "results";

  /// Defaults for a figure id; throws std::invalid_argument for unknown ids.
  static ExperimentConfig preset(const std::string& id);

  nlohmann::json to_json() const;
  /// Fields missing from `j` keep the values of `base`.
  static ExperimentConfig from_json(const nlohmann::json& j, ExperimentConfig base);
  static ExperimentConfig from_json(const nlohmann::json& j);
  /// Throws std::invalid_argument on out-of-range values.
  void validate() const;
  /// FNV-1a of the canonical JSON without output_dir and threads.
  std::string hash() const;
};

struct ResultRow {
  std::string experiment;
  std::uint64_t seed = 0;
  std::string sweep_name;
  double sweep_value = 0.0;
  std::string metric;
  double value = 0.0;
  std::string status;  // ok | infeasible | zeroed | padded | error
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
  nlohmann::json manifest;
  int runs = 0;
  int infeasible_runs = 0;
  int error_runs = 0;
};

inline constexpr const char* kCsvHeader = "experiment,seed,sweep_name,sweep_value,metric,value,status";

std::string format_row(const ResultRow& r);

/// Runs every (sweep point, seed) job on `threads` workers and merges rows in
/// (sweep point, seed) order.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Writes <output_dir>/<experiment>.csv and <experiment>_manifest.json.
void write_outputs(const ExperimentConfig& cfg, const ExperimentResult& result);

/// Shared per-run helpers.
NetworkInstance experiment_instance(const ExperimentConfig& cfg, int aps, int antennas,
                                    int devices, std::uint64_t seed);
QosSpec experiment_qos(const ExperimentConfig& cfg, int devices, std::uint64_t seed);
PowerLimits experiment_limits(const ExperimentConfig& cfg, int aps, int devices);

/// WSR of one scheme under the zero rule: 0 unless every device meets its
/// requirement. `fixed_pilot` holds pilots at the cap.
struct SchemeOutcome {
  double wsr = 0.0;
  bool feasible = false;
  int iterations = 0;
  int pilot_length = 0;
  std::vector<double> history;
};

SchemeOutcome run_power_scheme(const NetworkInstance& inst, const QosSpec& base_qos,
                               const PilotGroups& groups, const PowerLimits& limits,
                               bool fixed_pilot, const ExperimentConfig& cfg);

}  // namespace cfurllc
