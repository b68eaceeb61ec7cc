#include <CLI11.hpp>

#include <cstdio>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

#include "cfurllc/experiment.hpp"
#include "cfurllc/io.hpp"
#include "cfurllc/version.hpp"

using namespace cfurllc;
using io::json;

namespace {

constexpr int kOk = 0;
constexpr int kError = 1;
constexpr int kInfeasible = 2;

void emit(const std::string& path, const json& doc) {
  if (path.empty() || path == "-") {
    std::cout << doc.dump(2) << '\n';
  } else {
    io::write_file(path, doc);
  }
}

struct Scenario {
  NetworkInstance inst;
  QosSpec qos;
  PowerLimits limits;
};

Scenario load_scenario(const std::string& path) {
  const json doc = io::read_file(path);
  const json& d = io::unwrap(doc, "scenario");
  return {io::instance_from_json(d.at("instance")), io::qos_from_json(d.at("qos")),
          io::limits_from_json(d.at("limits"))};
}

// Flags override the preset and the config file; only flags actually given apply.
class ConfigFlags {
 public:
  explicit ConfigFlags(CLI::App* app) : app_(app) {
    add("--devices", &ExperimentConfig::devices, "device counts K to sweep");
    app_->add_option("--mn", mn_, "(M, N) pairs to sweep, written MxN, e.g. 16x9");
    add("--seeds", &ExperimentConfig::seeds, "seeded replications per sweep point");
    add("--seed-base", &ExperimentConfig::seed_base, "first seed");
    add("--bandwidth", &ExperimentConfig::bandwidth_hz, "bandwidth in Hz");
    add("--area", &ExperimentConfig::area_km, "side of the square area in km");
    add("--threshold", &ExperimentConfig::threshold, "AP selection threshold T_h");
    add("--shadowing", &ExperimentConfig::shadowing_std_db, "shadowing std in dB (0 = off)");
    add("--blocklength", &ExperimentConfig::blocklength, "blocklength L");
    add("--epsilon", &ExperimentConfig::epsilon, "decoding error probability");
    add("--rate-req", &ExperimentConfig::rate_req, "rate requirement in bit/s/Hz");
    add("--n-max", &ExperimentConfig::n_max, "max devices per pilot");
    add("--iota", &ExperimentConfig::iota, "interferer search region");
    add("--pilot-iters", &ExperimentConfig::pilot_iters, "pilot refinement iterations");
    add("--ap-power", &ExperimentConfig::ap_power, "per-AP power budget in W");
    add("--pilot-power", &ExperimentConfig::pilot_power, "pilot power cap in W");
    add("--mc-samples", &ExperimentConfig::mc_samples, "Monte Carlo channel draws");
    add("--zeta", &ExperimentConfig::zeta, "relative WSR gain stop");
    add("--sca-iters", &ExperimentConfig::sca_iters, "max power iterations");
    add("--threads", &ExperimentConfig::threads, "worker threads");
    add("--output-dir,-o", &ExperimentConfig::output_dir, "output directory");
  }

  void apply(ExperimentConfig& c) const {
    for (const auto& f : setters_) f(c);
    if (!mn_.empty()) {
      c.mn.clear();
      for (const auto& s : mn_) {
        const auto x = s.find_first_of("xX");
        if (x == std::string::npos) throw std::invalid_argument("bad --mn value '" + s + "'");
        c.mn.emplace_back(std::stoi(s.substr(0, x)), std::stoi(s.substr(x + 1)));
      }
    }
  }

 private:
  template <class T>
  void add(const std::string& name, T ExperimentConfig::*field, const std::string& help) {
    CLI::Option* opt = app_->add_option(name, store_.*field, help);
    setters_.push_back([this, opt, field](ExperimentConfig& c) {
      if (opt->count() > 0) c.*field = store_.*field;
    });
  }

  CLI::App* app_;
  ExperimentConfig store_;
  std::vector<std::string> mn_;
  std::vector<std::function<void(ExperimentConfig&)>> setters_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cell-free massive MIMO URLLC pilot and power optimisation"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "generate a random deployment scenario");
  std::uint64_t gen_seed = 1;
  InstanceConfig ic;
  double gen_eps = 1e-7, gen_rate = 0.75, gen_pp = 0.1, gen_ap = 0.2;
  int gen_L = 100;
  std::string gen_out;
  gen->add_option("--seed", gen_seed, "instance seed");
  gen->add_option("--aps", ic.num_aps, "number of APs (perfect square)");
  gen->add_option("--antennas", ic.antennas, "antennas per AP");
  gen->add_option("--devices", ic.num_devices, "number of devices");
  gen->add_option("--area", ic.area_km, "side of the square area in km");
  gen->add_option("--threshold", ic.threshold, "AP selection threshold");
  gen->add_option("--bandwidth", ic.bandwidth_hz, "bandwidth in Hz");
  gen->add_option("--shadowing", ic.shadowing_std_db, "shadowing std in dB");
  gen->add_option("--epsilon", gen_eps, "decoding error probability");
  gen->add_option("--rate-req", gen_rate, "rate requirement in bit/s/Hz");
  gen->add_option("--blocklength", gen_L, "blocklength L");
  gen->add_option("--pilot-power", gen_pp, "pilot power cap in W");
  gen->add_option("--ap-power", gen_ap, "per-AP budget in W");
  gen->add_option("--out", gen_out, "output file (default stdout)");

  // pilot
  auto* pilot = app.add_subcommand("pilot", "assign pilots for a scenario");
  std::string pilot_in, pilot_out;
  PilotOptions popts;
  pilot->add_option("scenario", pilot_in, "scenario file")->required()->check(CLI::ExistingFile);
  pilot->add_option("--n-max", popts.n_max, "max devices per pilot");
  pilot->add_option("--iota", popts.iota, "interferer search region");
  pilot->add_option("--pilot-iters", popts.max_iters, "refinement iterations");
  pilot->add_option("--out", pilot_out, "output file (default stdout)");

  // power
  auto* power = app.add_subcommand("power", "optimise powers for a scenario");
  std::string power_in, power_pilots, power_out;
  bool power_orth = false, power_fix = false;
  PowerOptions wopts;
  power->add_option("scenario", power_in, "scenario file")->required()->check(CLI::ExistingFile);
  auto* pilots_opt = power->add_option("--pilots", power_pilots, "pilot result file (default: run pilot assignment)")
                         ->check(CLI::ExistingFile);
  power->add_flag("--orthogonal", power_orth, "one pilot per device")->excludes(pilots_opt);
  power->add_flag("--fix-pilot", power_fix, "hold pilot powers at the cap");
  power->add_option("--zeta", wopts.zeta, "relative WSR gain stop");
  power->add_option("--sca-iters", wopts.max_iters, "max iterations");
  power->add_option("--out", power_out, "output file (default stdout)");

  // experiment
  auto* exper = app.add_subcommand("experiment", "run a seeded sweep and write CSV + manifest");
  std::string exp_id = "custom", exp_config;
  exper->add_option("id", exp_id, "fig3|fig4|fig5|fig6|fig7|fig8|baselines|custom");
  exper->add_option("--config", exp_config, "JSON config file")->check(CLI::ExistingFile);
  bool exp_dry = false;
  exper->add_flag("--dry-run", exp_dry, "print the resolved config and exit");
  ConfigFlags flags(exper);

  // validate
  auto* val = app.add_subcommand("validate", "check config or scenario files");
  std::vector<std::string> val_files;
  val->add_option("files", val_files, "experiment config or cfurllc documents")
      ->required()
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kError;
  }

  try {
    if (*gen) {
      const auto inst = generate_instance(gen_seed, ic);
      const auto qos = QosSpec::with_random_weights(gen_seed, ic.num_devices, gen_eps, gen_rate, gen_L, 1);
      const auto limits = PowerLimits::uniform(ic.num_aps, ic.num_devices, gen_pp, gen_ap);
      emit(gen_out, io::wrap("scenario", {{"seed", gen_seed},
                                          {"instance", io::to_json(inst)},
                                          {"qos", io::to_json(qos)},
                                          {"limits", io::to_json(limits)}}));
      return kOk;
    }
    if (*pilot) {
      const auto s = load_scenario(pilot_in);
      const auto r = assign_pilots_iterative(s.inst, s.qos, s.limits, popts);
      emit(pilot_out, io::wrap("pilot_result", io::to_json(r)));
      return kOk;
    }
    if (*power) {
      const auto s = load_scenario(power_in);
      PilotGroups groups;
      if (power_orth) {
        groups = orthogonal_groups(s.inst.num_devices());
      } else if (!power_pilots.empty()) {
        const json doc = io::read_file(power_pilots);
        groups = io::groups_from_json(io::unwrap(doc, "pilot_result").at("groups"));
      } else {
        groups = assign_pilots_iterative(s.inst, s.qos, s.limits).best.groups;
      }
      const int tau = static_cast<int>(groups.size());
      if (tau >= s.qos.blocklength) {
        std::cerr << "pilot length " << tau << " leaves no payload symbols\n";
        return kInfeasible;
      }
      wopts.fix_pilot = power_fix;
      const auto r = maximize_wsr(s.inst, s.qos.with_pilot_length(tau), groups, s.limits, wopts);
      json data = io::to_json(r);
      data["groups"] = io::groups_to_json(groups);
      emit(power_out, io::wrap("power_result", data));
      return r.status == WsrStatus::kInfeasible ? kInfeasible : kOk;
    }
    if (*exper) {
      ExperimentConfig cfg = ExperimentConfig::preset(exp_id);
      if (!exp_config.empty()) cfg = ExperimentConfig::from_json(io::read_file(exp_config), cfg);
      flags.apply(cfg);
      cfg.validate();
      if (exp_dry) {
        std::cout << cfg.to_json().dump(2) << "\nhash " << cfg.hash() << '\n';
        return kOk;
      }
      const auto res = run_experiment(cfg);
      write_outputs(cfg, res);
      std::fprintf(stderr, "%s: %d runs, %d infeasible, %d errors -> %s\n", cfg.experiment.c_str(),
                   res.runs, res.infeasible_runs, res.error_runs, cfg.output_dir.c_str());
      if (res.error_runs > 0) return kError;
      return res.infeasible_runs == res.runs ? kInfeasible : kOk;
    }
    if (*val) {
      int rc = kOk;
      for (const auto& f : val_files) {
        try {
          const json doc = io::read_file(f);
          if (doc.contains("format")) {
            const std::string kind = doc.value("kind", "");
            if (kind == "scenario") {
              load_scenario(f);
            } else if (kind == "program") {
              io::program_from_json(io::unwrap(doc, kind));
            } else {
              io::unwrap(doc, kind);
            }
            std::cout << f << ": ok (" << kind << ")\n";
          } else {
            ExperimentConfig::from_json(doc, ExperimentConfig::preset(doc.value("experiment", "custom")))
                .validate();
            std::cout << f << ": ok (experiment config)\n";
          }
        } catch (const std::exception& e) {
          std::cout << f << ": invalid: " << e.what() << '\n';
          rc = kError;
        }
      }
      return rc;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kError;
  }
  return kOk;
}
