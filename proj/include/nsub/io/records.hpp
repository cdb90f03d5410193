#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "nsub/latent_sim.hpp"
#include "nsub/subspace_fit.hpp"

namespace nsub {

// One JSON object per line.
std::string telemetry_line(const TelemetryRecord& r);
std::string state_line(long step, const Vec& z, const Vec* q);

class JsonLinesWriter {
 public:
  explicit JsonLinesWriter(const std::filesystem::path& path);
  void write(const std::string& line);

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

// Writes one line per trajectory state: {"step", "z", "q"?}.
void write_trajectory(const std::filesystem::path& path, const Trajectory& traj, bool with_q);

}  // namespace nsub
