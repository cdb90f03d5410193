#pragma once

#include <yaml-cpp/yaml.h>

#include <cstdint>
#include <filesystem>
#include <string>

#include "nsub/latent_sim.hpp"
#include "nsub/subspace_fit.hpp"
#include "nsub/systems.hpp"

namespace nsub {

struct ModesOptions {
  int latent_dim = 0;  // 0: use train.latent_dim
  double sigma = 0.0;  // 0: use train.sigma
};

struct SimulateOptions {
  double h = 1.0 / 60.0;
  long steps = 300;
  LbfgsOptions lbfgs;
  bool write_q = true;
};

struct SampleOptions {
  long count = 100;
  double latent_stddev = 1.0;
  bool sinusoidal = false;
};

struct InterpolateOptions {
  int samples_per_segment = 30;
  bool cyclic = true;
};

struct DiagnoseOptions {
  long pairs = 1000;
};

struct RunSpec {
  std::filesystem::path base_dir;  // relative paths inside `system` resolve here
  YAML::Node system;
  TrainConfig train;
  std::filesystem::path output_dir = "out";
  ModesOptions modes;
  SimulateOptions simulate;
  SampleOptions sample;
  InterpolateOptions interpolate;
  DiagnoseOptions diagnose;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

RunSpec parse_run_spec(const std::filesystem::path& path);
RunSpec parse_run_spec_text(const std::string& text, const std::filesystem::path& base_dir = {});

// Every field written out, defaults included. Parsing the result gives the
// same spec back.
std::string serialize_run_spec(const RunSpec& spec);

// Writes <dir>/effective_config.yaml and returns its path. Relative mesh
// paths are rewritten so the file can be rerun from any directory.
std::filesystem::path write_effective_config(const RunSpec& spec, const std::filesystem::path& dir);

SystemDef build_system(const RunSpec& spec);

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

// Hash of the system description and training settings, stored in model
// fingerprints.
std::uint64_t config_hash(const RunSpec& spec);

}  // namespace nsub
