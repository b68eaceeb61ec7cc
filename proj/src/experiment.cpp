#include "cfurllc/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <tuple>

#include "cfurllc/mc_oracle.hpp"
#include "cfurllc/version.hpp"

namespace cfurllc {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const std::vector<std::string>& known_ids() {
  static const std::vector<std::string> ids{"fig3", "fig4", "fig5", "fig6",
                                            "fig7", "fig8", "baselines", "custom"};
  return ids;
}

}  // namespace

ExperimentConfig ExperimentConfig::preset(const std::string& id) {
  ExperimentConfig c;
  c.experiment = id;
  if (id == "fig3") {
    c.devices = {5, 10};
    c.mn = {{16, 1}, {16, 4}, {16, 9}};
  } else if (id == "fig4" || id == "fig5") {
    c.devices = {10, 15, 20, 25, 30, 35, 40};
  } else if (id == "fig6") {
    c.devices = {10, 20};
    c.seeds = 50;
  } else if (id == "fig7") {
    c.devices = {10, 20};
    c.rate_req = 0.5;
  } else if (id == "fig8") {
    c.devices = {4, 8, 12, 16, 20, 24, 28, 32};
    c.rate_req = 0.5;
    c.seeds = 30;
  } else if (id == "baselines") {
    c.devices = {10, 20};
    c.rate_req = 0.5;
    c.seeds = 30;
  } else if (id != "custom") {
    throw std::invalid_argument("unknown experiment id '" + id + "'");
  }
  return c;
}

json ExperimentConfig::to_json() const {
  json pairs = json::array();
  for (const auto& [m, n] : mn) pairs.push_back({m, n});
  return json{{"experiment", experiment},
              {"devices", devices},
              {"mn", pairs},
              {"seeds", seeds},
              {"seed_base", seed_base},
              {"bandwidth_hz", bandwidth_hz},
              {"area_km", area_km},
              {"threshold", threshold},
              {"shadowing_std_db", shadowing_std_db},
              {"blocklength", blocklength},
              {"epsilon", epsilon},
              {"rate_req", rate_req},
              {"n_max", n_max},
              {"iota", iota},
              {"pilot_iters", pilot_iters},
              {"ap_power", ap_power},
              {"pilot_power", pilot_power},
              {"mc_samples", mc_samples},
              {"zeta", zeta},
              {"sca_iters", sca_iters},
              {"threads", threads},
              {"output_dir", output_dir}};
}

ExperimentConfig ExperimentConfig::from_json(const json& j, ExperimentConfig c) {
  if (!j.is_object()) throw std::invalid_argument("experiment config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!c.to_json().contains(key)) throw std::invalid_argument("unknown config key '" + key + "'");
  }
  try {
    if (j.contains("experiment")) {
      const auto id = j.at("experiment").get<std::string>();
      if (id != c.experiment) c = preset(id);
    }
    auto set = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
    };
    set("devices", c.devices);
    if (j.contains("mn")) {
      c.mn.clear();
      for (const auto& p : j.at("mn")) c.mn.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
    }
    set("seeds", c.seeds);
    set("seed_base", c.seed_base);
    set("bandwidth_hz", c.bandwidth_hz);
    set("area_km", c.area_km);
    set("threshold", c.threshold);
    set("shadowing_std_db", c.shadowing_std_db);
    set("blocklength", c.blocklength);
    set("epsilon", c.epsilon);
    set("rate_req", c.rate_req);
    set("n_max", c.n_max);
    set("iota", c.iota);
    set("pilot_iters", c.pilot_iters);
    set("ap_power", c.ap_power);
    set("pilot_power", c.pilot_power);
    set("mc_samples", c.mc_samples);
    set("zeta", c.zeta);
    set("sca_iters", c.sca_iters);
    set("threads", c.threads);
    set("output_dir", c.output_dir);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("bad config value: ") + e.what());
  }
  return c;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  return from_json(j, ExperimentConfig{});
}

void ExperimentConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
  };
  require(std::find(known_ids().begin(), known_ids().end(), experiment) != known_ids().end(),
          "unknown experiment id '" + experiment + "'");
  require(!devices.empty(), "devices list is empty");
  for (int k : devices) require(k >= 1, "device counts must be >= 1");
  require(!mn.empty(), "mn list is empty");
  for (const auto& [m, n] : mn) {
    const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(m))));
    require(m >= 1 && side * side == m, "M must be a perfect square");
    require(n >= 1, "N must be >= 1");
  }
  require(seeds >= 1, "seeds must be >= 1");
  require(bandwidth_hz > 0.0 && area_km > 0.0, "bandwidth and area must be positive");
  require(threshold > 0.0 && threshold <= 1.0, "threshold must lie in (0, 1]");
  require(shadowing_std_db >= 0.0, "shadowing must be >= 0");
  require(blocklength >= 2, "blocklength must be >= 2");
  require(epsilon > 0.0 && epsilon < 0.5, "epsilon must lie in (0, 0.5)");
  require(rate_req >= 0.0, "rate_req must be >= 0");
  require(n_max >= 1 && iota >= 0 && pilot_iters >= 0, "bad pilot search parameters");
  require(ap_power > 0.0 && pilot_power > 0.0, "powers must be positive");
  require(mc_samples >= 100, "mc_samples must be >= 100");
  require(zeta > 0.0 && sca_iters >= 1, "bad SCA parameters");
  require(threads >= 1, "threads must be >= 1");
}

std::string ExperimentConfig::hash() const {
  json j = to_json();
  j.erase("output_dir");
  j.erase("threads");
  const std::string s = j.dump();
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string format_row(const ResultRow& r) {
  char value[40];
  char sweep[40];
  std::snprintf(value, sizeof value, "%.17g", r.value);
  std::snprintf(sweep, sizeof sweep, "%.17g", r.sweep_value);
  return r.experiment + "," + std::to_string(r.seed) + "," + r.sweep_name + "," + sweep + "," +
         r.metric + "," + value + "," + r.status;
}

NetworkInstance experiment_instance(const ExperimentConfig& cfg, int aps, int antennas,
                                    int devices, std::uint64_t seed) {
  InstanceConfig ic;
  ic.num_aps = aps;
  ic.num_devices = devices;
  ic.antennas = antennas;
  ic.area_km = cfg.area_km;
  ic.threshold = cfg.threshold;
  ic.bandwidth_hz = cfg.bandwidth_hz;
  ic.shadowing_std_db = cfg.shadowing_std_db;
  return generate_instance(seed, ic);
}

QosSpec experiment_qos(const ExperimentConfig& cfg, int devices, std::uint64_t seed) {
  return QosSpec::with_random_weights(seed, devices, cfg.epsilon, cfg.rate_req, cfg.blocklength, 1);
}

PowerLimits experiment_limits(const ExperimentConfig& cfg, int aps, int devices) {
  return PowerLimits::uniform(aps, devices, cfg.pilot_power, cfg.ap_power);
}

SchemeOutcome run_power_scheme(const NetworkInstance& inst, const QosSpec& base_qos,
                               const PilotGroups& groups, const PowerLimits& limits,
                               bool fixed_pilot, const ExperimentConfig& cfg) {
  SchemeOutcome out;
  out.pilot_length = static_cast<int>(groups.size());
  if (out.pilot_length >= base_qos.blocklength) return out;
  const QosSpec qos = base_qos.with_pilot_length(out.pilot_length);
  PowerOptions opts;
  opts.zeta = cfg.zeta;
  opts.max_iters = cfg.sca_iters;
  opts.fix_pilot = fixed_pilot;
  const WsrResult r = maximize_wsr(inst, qos, groups, limits, opts);
  out.iterations = r.iterations;
  out.history = r.history;
  if (r.status == WsrStatus::kInfeasible) return out;
  const Eigen::VectorXd rates = lb_rate(r.chi, qos);
  out.feasible = true;
  for (int k = 0; k < inst.num_devices(); ++k) {
    if (rates(k) < qos.rate_req[static_cast<std::size_t>(k)] * (1.0 - 1e-6)) out.feasible = false;
  }
  if (out.feasible) out.wsr = r.wsr;
  return out;
}

namespace {

struct SweepPoint {
  int aps = 16;
  int antennas = 9;
  int devices = 20;
  std::string name;
  double value = 0.0;
};

struct Metric {
  std::string name;
  double value = 0.0;
  std::string status = "ok";
};

std::vector<SweepPoint> sweep_points(const ExperimentConfig& cfg) {
  std::vector<SweepPoint> pts;
  for (const auto& [m, n] : cfg.mn) {
    for (int k : cfg.devices) {
      SweepPoint p{m, n, k, "", 0.0};
      if (cfg.experiment == "fig3") {
        p.name = cfg.devices.size() == 1 ? "MN" : "MN@K=" + std::to_string(k);
        p.value = m * n;
      } else {
        p.name = cfg.mn.size() == 1 ? "K"
                                    : "K@MN=" + std::to_string(m) + "x" + std::to_string(n);
        p.value = k;
      }
      pts.push_back(std::move(p));
    }
  }
  return pts;
}

PilotOptions pilot_options(const ExperimentConfig& cfg) {
  PilotOptions o;
  o.n_max = cfg.n_max;
  o.iota = cfg.iota;
  o.max_iters = cfg.pilot_iters;
  return o;
}

std::vector<Metric> run_fig3(const ExperimentConfig& cfg, const SweepPoint& pt,
                             std::uint64_t seed) {
  const auto inst = experiment_instance(cfg, pt.aps, pt.antennas, pt.devices, seed);
  const auto limits = experiment_limits(cfg, pt.aps, pt.devices);
  const auto groups = orthogonal_groups(pt.devices);
  if (pt.devices >= cfg.blocklength) {
    return {{"wsr_lb", kNaN, "infeasible"}, {"wsr_mc", kNaN, "infeasible"},
            {"wsr_mc_stderr", kNaN, "infeasible"}, {"rel_gap", kNaN, "infeasible"}};
  }
  const auto qos = experiment_qos(cfg, pt.devices, seed).with_pilot_length(pt.devices);
  const auto powers = fixed_power_profile(inst, limits);
  const double lb = weighted_sum_rate(lb_rate(sinr_lb(inst, qos.pilot_length, powers, groups), qos), qos);
  const auto mc = ergodic_rate_mc(inst, powers, qos, groups, cfg.mc_samples, seed);
  double wsr_mc = 0.0, var = 0.0;
  for (int k = 0; k < pt.devices; ++k) {
    const double w = qos.weight[static_cast<std::size_t>(k)];
    wsr_mc += w * mc.mean(k);
    var += w * w * mc.stderr_(k) * mc.stderr_(k);
  }
  const double gap = wsr_mc > 0.0 ? (wsr_mc - lb) / wsr_mc : kNaN;
  return {{"wsr_lb", lb}, {"wsr_mc", wsr_mc}, {"wsr_mc_stderr", std::sqrt(var)}, {"rel_gap", gap}};
}

std::vector<Metric> run_pilot_study(const ExperimentConfig& cfg, const SweepPoint& pt,
                                    std::uint64_t seed, bool lengths) {
  const auto inst = experiment_instance(cfg, pt.aps, pt.antennas, pt.devices, seed);
  const auto limits = experiment_limits(cfg, pt.aps, pt.devices);
  const auto qos = experiment_qos(cfg, pt.devices, seed);
  const auto pr = assign_pilots_iterative(inst, qos, limits, pilot_options(cfg));
  const auto orth = admitted_set(inst, orthogonal_groups(pt.devices), qos, limits);
  const double K = pt.devices;
  if (lengths) {
    return {{"pilot_length_proposed", static_cast<double>(pr.best.tau())},
            {"pilot_length_dsatur", static_cast<double>(pr.dsatur.tau())},
            {"pilot_length_orthogonal", K}};
  }
  return {{"admitted_prob_proposed", static_cast<double>(pr.admission.admitted.size()) / K},
          {"admitted_prob_dsatur", pr.dsatur_admitted / K},
          {"admitted_prob_orthogonal", static_cast<double>(orth.admitted.size()) / K}};
}

std::vector<Metric> run_fig6(const ExperimentConfig& cfg, const SweepPoint& pt,
                             std::uint64_t seed) {
  const auto inst = experiment_instance(cfg, pt.aps, pt.antennas, pt.devices, seed);
  const auto limits = experiment_limits(cfg, pt.aps, pt.devices);
  const auto qos = experiment_qos(cfg, pt.devices, seed);
  const auto pr = assign_pilots_iterative(inst, qos, limits, pilot_options(cfg));
  const auto out = run_power_scheme(inst, qos, pr.best.groups, limits, false, cfg);
  std::vector<Metric> m;
  const std::string st = out.feasible ? "ok" : "infeasible";
  m.push_back({"iterations", out.feasible ? out.iterations : kNaN, st});
  for (int i = 0; i <= cfg.sca_iters; ++i) {
    const auto n = static_cast<std::size_t>(i);
    Metric row{"wsr_iter_" + std::to_string(i), kNaN, st};
    if (out.feasible) {
      row.value = n < out.history.size() ? out.history[n] : out.history.back();
      if (n >= out.history.size()) row.status = "padded";
    }
    m.push_back(std::move(row));
  }
  return m;
}

Metric scheme_metric(const std::string& name, const SchemeOutcome& o, bool zero_rule) {
  if (o.feasible) return {name, o.wsr, "ok"};
  return zero_rule ? Metric{name, 0.0, "zeroed"} : Metric{name, kNaN, "infeasible"};
}

std::vector<Metric> run_schemes(const ExperimentConfig& cfg, const SweepPoint& pt,
                                std::uint64_t seed) {
  const auto inst = experiment_instance(cfg, pt.aps, pt.antennas, pt.devices, seed);
  const auto limits = experiment_limits(cfg, pt.aps, pt.devices);
  const auto qos = experiment_qos(cfg, pt.devices, seed);
  const auto pr = assign_pilots_iterative(inst, qos, limits, pilot_options(cfg));
  const auto orth = orthogonal_groups(pt.devices);

  if (cfg.experiment == "fig7") {
    return {scheme_metric("wsr_proposed", run_power_scheme(inst, qos, pr.best.groups, limits, false, cfg), false),
            scheme_metric("wsr_orthogonal", run_power_scheme(inst, qos, orth, limits, false, cfg), false)};
  }
  if (cfg.experiment == "fig8") {
    return {scheme_metric("wsr_proposed", run_power_scheme(inst, qos, pr.best.groups, limits, false, cfg), true),
            scheme_metric("wsr_proposed_fixed_pilot", run_power_scheme(inst, qos, pr.best.groups, limits, true, cfg), true),
            scheme_metric("wsr_orthogonal", run_power_scheme(inst, qos, orth, limits, false, cfg), true),
            scheme_metric("wsr_orthogonal_fixed_pilot", run_power_scheme(inst, qos, orth, limits, true, cfg), true)};
  }
  // baselines
  const auto proposed = scheme_metric("wsr_proposed", run_power_scheme(inst, qos, pr.best.groups, limits, false, cfg), true);
  const auto fixed = scheme_metric("wsr_fixed_max_pilot", run_power_scheme(inst, qos, pr.best.groups, limits, true, cfg), true);
  const auto orthogonal = scheme_metric("wsr_orthogonal", run_power_scheme(inst, qos, orth, limits, false, cfg), true);
  const auto dsatur = scheme_metric("wsr_dsatur_only", run_power_scheme(inst, qos, pr.dsatur.groups, limits, false, cfg), true);
  std::vector<Metric> m{proposed, fixed, orthogonal, dsatur};
  for (const auto& other : {fixed, orthogonal, dsatur}) {
    m.push_back({"diff_vs_" + other.name.substr(4), proposed.value - other.value, "ok"});
  }
  return m;
}

std::vector<Metric> run_job(const ExperimentConfig& cfg, const SweepPoint& pt, std::uint64_t seed) {
  const auto& id = cfg.experiment;
  if (id == "fig3") return run_fig3(cfg, pt, seed);
  if (id == "fig4") return run_pilot_study(cfg, pt, seed, false);
  if (id == "fig5") return run_pilot_study(cfg, pt, seed, true);
  if (id == "fig6" || id == "custom") return run_fig6(cfg, pt, seed);
  return run_schemes(cfg, pt, seed);
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto points = sweep_points(cfg);
  const std::size_t njobs = points.size() * static_cast<std::size_t>(cfg.seeds);
  std::vector<std::vector<Metric>> out(njobs);
  std::vector<std::string> errors(njobs);
  std::vector<double> seconds(njobs, 0.0);

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= njobs) return;
      const auto& pt = points[j / static_cast<std::size_t>(cfg.seeds)];
      const std::uint64_t seed = cfg.seed_base + j % static_cast<std::size_t>(cfg.seeds);
      const auto t0 = std::chrono::steady_clock::now();
      try {
        out[j] = run_job(cfg, pt, seed);
      } catch (const std::exception& e) {
        errors[j] = e.what();
      }
      seconds[j] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  };
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::thread> pool;
  const int nthreads = std::min<int>(cfg.threads, static_cast<int>(std::max<std::size_t>(njobs, 1)));
  for (int i = 1; i < nthreads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  ExperimentResult res;
  std::map<std::string, std::vector<std::string>> metric_names;
  json per_point = json::array();
  for (std::size_t p = 0; p < points.size(); ++p) {
    std::map<std::string, std::tuple<double, double, int>> sums;
    std::vector<std::string> order;
    double point_seconds = 0.0;
    for (int s = 0; s < cfg.seeds; ++s) {
      const std::size_t j = p * static_cast<std::size_t>(cfg.seeds) + static_cast<std::size_t>(s);
      const std::uint64_t seed = cfg.seed_base + static_cast<std::uint64_t>(s);
      point_seconds += seconds[j];
      ++res.runs;
      if (!errors[j].empty()) {
        ++res.error_runs;
        res.rows.push_back({cfg.experiment, seed, points[p].name, points[p].value, "error", kNaN, "error"});
        continue;
      }
      bool infeasible = false;
      for (const auto& m : out[j]) {
        res.rows.push_back({cfg.experiment, seed, points[p].name, points[p].value, m.name, m.value, m.status});
        if (m.status == "infeasible" || m.status == "zeroed") infeasible = true;
        if (!sums.count(m.name)) order.push_back(m.name);
        auto& [sum, sq, n] = sums[m.name];
        if (std::isfinite(m.value)) {
          sum += m.value;
          sq += m.value * m.value;
          ++n;
        }
      }
      if (infeasible) ++res.infeasible_runs;
    }
    json means = json::object();
    json stderrs = json::object();
    for (const auto& name : order) {
      const auto& [sum, sq, n] = sums[name];
      means[name] = n > 0 ? json(sum / n) : json(nullptr);
      if (n > 1) {
        const double mean = sum / n;
        const double var = std::max(0.0, (sq - n * mean * mean) / (n - 1));
        stderrs[name] = std::sqrt(var / n);
      } else {
        stderrs[name] = nullptr;
      }
    }
    per_point.push_back({{"sweep_name", points[p].name}, {"sweep_value", points[p].value},
                         {"M", points[p].aps}, {"N", points[p].antennas}, {"K", points[p].devices},
                         {"means", means}, {"stderr", stderrs}, {"runtime_s", point_seconds}});
  }
  std::vector<std::string> messages;
  for (const auto& e : errors) {
    if (!e.empty() && std::find(messages.begin(), messages.end(), e) == messages.end()) messages.push_back(e);
  }
  res.manifest = json{{"experiment", cfg.experiment},
                      {"config", cfg.to_json()},
                      {"config_hash", cfg.hash()},
                      {"versions", {{"cfurllc", kVersion}, {"schema", 1}}},
                      {"csv", cfg.experiment + ".csv"},
                      {"rows", res.rows.size()},
                      {"runs", res.runs},
                      {"infeasible_runs", res.infeasible_runs},
                      {"error_runs", res.error_runs},
                      {"errors", messages},
                      {"runtime_s", total},
                      {"sweep", per_point}};
  return res;
}

void write_outputs(const ExperimentConfig& cfg, const ExperimentResult& result) {
  std::filesystem::create_directories(cfg.output_dir);
  const auto base = std::filesystem::path(cfg.output_dir);
  {
    std::ofstream csv(base / (cfg.experiment + ".csv"));
    if (!csv) throw std::runtime_error("cannot write CSV under " + cfg.output_dir);
    csv << kCsvHeader << '\n';
    for (const auto& r : result.rows) csv << format_row(r) << '\n';
  }
  std::ofstream man(base / (cfg.experiment + "_manifest.json"));
  if (!man) throw std::runtime_error("cannot write manifest under " + cfg.output_dir);
  man << result.manifest.dump(2) << '\n';
}

}  // namespace cfurllc
