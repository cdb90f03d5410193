#include "nsub/io/records.hpp"

#include <json.hpp>

#include "nsub/errors.hpp"

namespace nsub {

using nlohmann::json;

namespace {

json vec_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

}  // namespace

std::string telemetry_line(const TelemetryRecord& r) {
  const json j = {{"step", r.step},
                  {"loss", r.loss},
                  {"potential", r.potential},
                  {"penalty", r.penalty},
                  {"log_ratio_median", r.log_ratio_median},
                  {"rho", r.rho},
                  {"lr", r.learning_rate},
                  {"energy_clamps", r.energy_clamps}};
  return j.dump();
}

std::string state_line(long step, const Vec& z, const Vec* q) {
  json j = {{"step", step}, {"z", vec_json(z)}};
  if (q) j["q"] = vec_json(*q);
  return j.dump();
}

JsonLinesWriter::JsonLinesWriter(const std::filesystem::path& path) : path_(path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::trunc);
  if (!out_) throw ConfigError("cannot write '" + path.string() + "'");
}

void JsonLinesWriter::write(const std::string& line) {
  out_ << line << '\n';
  out_.flush();
  if (!out_) throw ConfigError("failed writing '" + path_.string() + "'");
}

void write_trajectory(const std::filesystem::path& path, const Trajectory& traj, bool with_q) {
  JsonLinesWriter w(path);
  for (std::size_t t = 0; t < traj.z.size(); ++t) {
    w.write(state_line(static_cast<long>(t), traj.z[t], with_q ? &traj.q[t] : nullptr));
  }
}

}  // namespace nsub
