#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "cfurllc/experiment.hpp"

using namespace cfurllc;

namespace {

ExperimentConfig small(const std::string& id) {
  auto c = ExperimentConfig::preset(id);
  c.seeds = 3;
  c.devices = {6, 10};
  c.mc_samples = 200;
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("presets carry the evaluation defaults") {
  for (const char* id : {"fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "baselines", "custom"}) {
    const auto c = ExperimentConfig::preset(id);
    CHECK(c.experiment == id);
    CHECK(c.bandwidth_hz == 1e6);
    CHECK(c.blocklength == 100);
    CHECK(c.epsilon == 1e-7);
    CHECK(c.threshold == 0.75);
    CHECK(c.area_km == 0.2);
    CHECK(c.n_max == 4);
    CHECK(c.iota == 4);
    CHECK(c.pilot_iters == 20);
    CHECK_NOTHROW(c.validate());
  }
  CHECK(ExperimentConfig::preset("fig7").rate_req == 0.5);
  CHECK(ExperimentConfig::preset("fig8").rate_req == 0.5);
  CHECK(ExperimentConfig::preset("fig6").rate_req == 0.75);
  CHECK_THROWS_AS(ExperimentConfig::preset("fig9"), std::invalid_argument);
}

TEST_CASE("config json round trip, overrides and hash") {
  auto c = ExperimentConfig::preset("fig8");
  c.mn = {{4, 2}, {16, 9}};
  c.seed_base = 77;
  const auto back = ExperimentConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(back.hash() == c.hash());

  auto d = c;
  d.threads = 8;
  d.output_dir = "elsewhere";
  CHECK(d.hash() == c.hash());
  d.seeds += 1;
  CHECK(d.hash() != c.hash());

  const auto over = ExperimentConfig::from_json(nlohmann::json{{"seeds", 5}}, c);
  CHECK(over.seeds == 5);
  CHECK(over.rate_req == c.rate_req);
  CHECK(over.mn == c.mn);

  CHECK_THROWS_AS(ExperimentConfig::from_json(nlohmann::json{{"sedes", 5}}), std::invalid_argument);
  CHECK_THROWS_AS(ExperimentConfig::from_json(nlohmann::json{{"seeds", "many"}}), std::invalid_argument);
  CHECK_THROWS_AS(ExperimentConfig::from_json(nlohmann::json::array()), std::invalid_argument);
}

TEST_CASE("validation rejects bad values") {
  auto bad = [](auto edit) {
    auto c = ExperimentConfig::preset("custom");
    edit(c);
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  };
  bad([](ExperimentConfig& c) { c.seeds = 0; });
  bad([](ExperimentConfig& c) { c.devices.clear(); });
  bad([](ExperimentConfig& c) { c.mn = {{15, 9}}; });
  bad([](ExperimentConfig& c) { c.epsilon = 0.7; });
  bad([](ExperimentConfig& c) { c.mc_samples = 10; });
  bad([](ExperimentConfig& c) { c.threads = 0; });
  bad([](ExperimentConfig& c) { c.experiment = "nope"; });
}

TEST_CASE("csv rows use round-trip formatting") {
  const ResultRow r{"fig6", 3, "K", 20, "wsr", 0.1, "ok"};
  CHECK(format_row(r) == "fig6,3,K,20,wsr,0.10000000000000001,ok");
}

TEST_CASE("row count and status on every row") {
  for (const char* id : {"fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "baselines"}) {
    const auto c = small(id);
    const auto res = run_experiment(c);
    const int points = static_cast<int>(c.mn.size() * c.devices.size());
    CHECK(res.runs == 3 * points);
    CHECK(res.error_runs == 0);
    std::set<std::string> metrics;
    for (const auto& r : res.rows) {
      metrics.insert(r.metric);
      CHECK(!r.status.empty());
      CHECK(r.experiment == id);
    }
    CHECK(res.rows.size() == static_cast<std::size_t>(res.runs) * metrics.size());
    CHECK(res.manifest.at("config_hash") == c.hash());
    CHECK(res.manifest.at("sweep").size() == static_cast<std::size_t>(points));
  }
}

TEST_CASE("orthogonal pilot length equals the device count") {
  const auto res = run_experiment(small("fig5"));
  int seen = 0;
  for (const auto& r : res.rows) {
    if (r.metric != "pilot_length_orthogonal") continue;
    CHECK(r.value == r.sweep_value);
    ++seen;
  }
  CHECK(seen == 6);
}

TEST_CASE("fig6 history is padded to a fixed length") {
  auto c = small("fig6");
  c.sca_iters = 8;
  const auto res = run_experiment(c);
  int per_run = 0;
  for (const auto& r : res.rows) {
    if (r.seed == 1 && r.sweep_value == 6 && r.metric.rfind("wsr_iter_", 0) == 0) ++per_run;
  }
  CHECK(per_run == 9);
}

TEST_CASE("infeasible runs are recorded, zeroed only under the zero rule") {
  auto c7 = small("fig7");
  c7.ap_power = 1e-12;
  const auto r7 = run_experiment(c7);
  CHECK(r7.infeasible_runs == r7.runs);
  for (const auto& r : r7.rows) {
    CHECK(r.status == "infeasible");
    CHECK(std::isnan(r.value));
  }
  auto c8 = small("fig8");
  c8.ap_power = 1e-12;
  const auto r8 = run_experiment(c8);
  CHECK(r8.infeasible_runs == r8.runs);
  for (const auto& r : r8.rows) {
    CHECK(r.status == "zeroed");
    CHECK(r.value == 0.0);
  }
}

TEST_CASE("outputs are byte-identical across reruns and thread counts") {
  const auto dir = std::filesystem::temp_directory_path() / "cfurllc_exp_test";
  std::filesystem::remove_all(dir);
  auto c = small("baselines");
  c.output_dir = (dir / "a").string();
  write_outputs(c, run_experiment(c));
  c.output_dir = (dir / "b").string();
  c.threads = 3;
  write_outputs(c, run_experiment(c));
  const auto a = slurp(dir / "a" / "baselines.csv");
  CHECK(!a.empty());
  CHECK(a == slurp(dir / "b" / "baselines.csv"));
  CHECK(a.rfind(std::string(kCsvHeader) + "\n", 0) == 0);
  const auto man = nlohmann::json::parse(slurp(dir / "a" / "baselines_manifest.json"));
  CHECK(man.at("config_hash") == c.hash());
  CHECK(man.contains("runtime_s"));
  CHECK(man.at("versions").contains("cfurllc"));
  std::filesystem::remove_all(dir);
}
