#pragma once

#include <string>

#include <json.hpp>

#include "cfurllc/fcbl_rate.hpp"
#include "cfurllc/gp.hpp"
#include "cfurllc/model.hpp"
#include "cfurllc/pilot.hpp"
#include "cfurllc/power.hpp"
#include "cfurllc/types.hpp"

namespace cfurllc::io {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Malformed document, wrong kind or unsupported version.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// {"format": "cfurllc", "version": 1, "kind": kind, "data": data}
json wrap(const std::string& kind, json data);
/// Returns the payload; throws FormatError on mismatch.
const json& unwrap(const json& doc, const std::string& kind);

json to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const json& j);
json to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const json& j);

json to_json(const NetworkInstance& inst);
NetworkInstance instance_from_json(const json& j);

json to_json(const QosSpec& qos);
QosSpec qos_from_json(const json& j);

json to_json(const PowerLimits& limits);
PowerLimits limits_from_json(const json& j);

json to_json(const PowerProfile& p);
PowerProfile profile_from_json(const json& j);

json groups_to_json(const PilotGroups& groups);
PilotGroups groups_from_json(const json& j);

/// Groups, tau, per-round admitted counts and the Dsatur baseline.
json to_json(const PilotResult& r);

json to_json(const WsrResult& r);

json to_json(const gp::Program& prog);
gp::Program program_from_json(const json& j);

json read_file(const std::string& path);
void write_file(const std::string& path, const json& doc);

}  // namespace cfurllc::io
