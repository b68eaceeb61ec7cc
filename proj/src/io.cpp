#include "cfurllc/io.hpp"

#include <fstream>
#include <limits>

namespace cfurllc::io {

json wrap(const std::string& kind, json data) {
  return json{{"format", "cfurllc"}, {"version", kSchemaVersion}, {"kind", kind},
              {"data", std::move(data)}};
}

const json& unwrap(const json& doc, const std::string& kind) {
  if (!doc.is_object() || doc.value("format", "") != "cfurllc") {
    throw FormatError("not a cfurllc document");
  }
  if (doc.value("version", -1) != kSchemaVersion) {
    throw FormatError("unsupported schema version " + doc.value("version", json(-1)).dump());
  }
  if (doc.value("kind", "") != kind) {
    throw FormatError("expected a '" + kind + "' document, got '" + doc.value("kind", "") + "'");
  }
  if (!doc.contains("data")) throw FormatError("document has no data");
  return doc.at("data");
}

json to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = rows > 0 ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j.at(static_cast<std::size_t>(r));
    if (static_cast<Eigen::Index>(row.size()) != cols) throw FormatError("ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

json to_json(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vector_from_json(const json& j) {
  const auto xs = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

namespace {

json points_to_json(const std::vector<Point2>& pts) {
  json a = json::array();
  for (const auto& p : pts) a.push_back({p.x, p.y});
  return a;
}

std::vector<Point2> points_from_json(const json& j) {
  std::vector<Point2> pts;
  for (const auto& p : j) pts.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  return pts;
}

}  // namespace

json to_json(const NetworkInstance& inst) {
  return json{{"ap_positions_km", points_to_json(inst.ap_positions)},
              {"device_positions_km", points_to_json(inst.device_positions)},
              {"antennas", inst.antennas},
              {"threshold", inst.threshold},
              {"beta", to_json(inst.beta)},
              {"serving_aps", inst.serving_aps}};
}

NetworkInstance instance_from_json(const json& j) {
  try {
    auto inst = instance_with_service(matrix_from_json(j.at("beta")), j.at("antennas").get<int>(),
                                      j.at("serving_aps").get<std::vector<std::vector<int>>>());
    inst.threshold = j.at("threshold").get<double>();
    inst.ap_positions = points_from_json(j.value("ap_positions_km", json::array()));
    inst.device_positions = points_from_json(j.value("device_positions_km", json::array()));
    return inst;
  } catch (const json::exception& e) {
    throw FormatError(std::string("instance: ") + e.what());
  }
}

json to_json(const QosSpec& qos) {
  return json{{"epsilon", qos.epsilon},       {"rate_req", qos.rate_req},
              {"weight", qos.weight},         {"blocklength", qos.blocklength},
              {"pilot_length", qos.pilot_length}};
}

QosSpec qos_from_json(const json& j) {
  try {
    QosSpec q;
    q.epsilon = j.at("epsilon").get<std::vector<double>>();
    q.rate_req = j.at("rate_req").get<std::vector<double>>();
    q.weight = j.at("weight").get<std::vector<double>>();
    q.blocklength = j.at("blocklength").get<int>();
    q.pilot_length = j.at("pilot_length").get<int>();
    return q;
  } catch (const json::exception& e) {
    throw FormatError(std::string("qos: ") + e.what());
  }
}

json to_json(const PowerLimits& limits) {
  return json{{"pilot_max", to_json(limits.pilot_max)}, {"ap_max", to_json(limits.ap_max)}};
}

PowerLimits limits_from_json(const json& j) {
  return PowerLimits{vector_from_json(j.at("pilot_max")), vector_from_json(j.at("ap_max"))};
}

json to_json(const PowerProfile& p) {
  return json{{"pilot", to_json(p.pilot)}, {"downlink", to_json(p.downlink)}};
}

PowerProfile profile_from_json(const json& j) {
  return PowerProfile{vector_from_json(j.at("pilot")), matrix_from_json(j.at("downlink"))};
}

json groups_to_json(const PilotGroups& groups) { return json(groups); }

PilotGroups groups_from_json(const json& j) { return j.get<PilotGroups>(); }

json to_json(const PilotResult& r) {
  return json{{"groups", groups_to_json(r.best.groups)},
              {"tau", r.best.tau()},
              {"n_max", r.best.n_max},
              {"admitted", r.admission.admitted},
              {"rates", to_json(r.admission.rates)},
              {"history", r.history},
              {"iterations", r.iterations},
              {"dsatur_groups", groups_to_json(r.dsatur.groups)},
              {"dsatur_admitted", r.dsatur_admitted}};
}

json to_json(const WsrResult& r) {
  return json{{"status", to_string(r.status)},
              {"wsr", r.wsr},
              {"history", r.history},
              {"iterations", r.iterations},
              {"chi", to_json(r.chi)},
              {"powers", to_json(r.powers)},
              {"feasibility", {{"rho", r.init.rho},
                               {"min_ratio", r.init.min_ratio},
                               {"rounds", r.init.rounds},
                               {"feasible", r.init.feasible}}}};
}

namespace {

json monomial_to_json(const gp::Monomial& m) {
  json e = json::array();
  for (const auto& [id, a] : m.exponents) e.push_back({id, a});
  return json{{"log_coeff", m.log_coeff}, {"exponents", e}};
}

gp::Monomial monomial_from_json(const json& j) {
  gp::Monomial m;
  m.log_coeff = j.at("log_coeff").get<double>();
  for (const auto& e : j.at("exponents")) {
    m *= gp::Monomial::variable(e.at(0).get<int>(), e.at(1).get<double>());
  }
  return m;
}

json posy_to_json(const gp::Posynomial& p) {
  json a = json::array();
  for (const auto& t : p.terms) a.push_back(monomial_to_json(t));
  return a;
}

gp::Posynomial posy_from_json(const json& j) {
  gp::Posynomial p;
  for (const auto& t : j) p.terms.push_back(monomial_from_json(t));
  return p;
}

}  // namespace

json to_json(const gp::Program& prog) {
  json vars = json::array();
  for (const auto& v : prog.variables()) {
    json jv{{"name", v.name}, {"lower", v.lower}};
    jv["upper"] = std::isfinite(v.upper) ? json(v.upper) : json(nullptr);
    vars.push_back(std::move(jv));
  }
  json cons = json::array();
  for (std::size_t i = 0; i < prog.constraints().size(); ++i) {
    cons.push_back({{"label", prog.labels()[i]}, {"terms", posy_to_json(prog.constraints()[i])}});
  }
  return json{{"variables", vars}, {"objective", posy_to_json(prog.objective())},
              {"constraints", cons}};
}

gp::Program program_from_json(const json& j) {
  try {
    gp::Program prog;
    for (const auto& v : j.at("variables")) {
      const auto& up = v.at("upper");
      prog.add_variable(v.at("name").get<std::string>(), v.at("lower").get<double>(),
                        up.is_null() ? std::numeric_limits<double>::infinity() : up.get<double>());
    }
    prog.set_objective(posy_from_json(j.at("objective")));
    for (const auto& c : j.at("constraints")) {
      prog.add_constraint(posy_from_json(c.at("terms")), c.value("label", ""));
    }
    prog.validate();
    return prog;
  } catch (const json::exception& e) {
    throw FormatError(std::string("program: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("program: ") + e.what());
  }
}

json read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

void write_file(const std::string& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << doc.dump(2) << '\n';
}

}  // namespace cfurllc::io
