#include "nsub/io/fixtures.hpp"

#include <yaml-cpp/yaml.h>

#include <random>

#include "nsub/io/sampling.hpp"
#include "nsub/io/web_export.hpp"

namespace nsub {

namespace {

nlohmann::json to_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

nlohmann::json web_forward_fixture() {
  const SystemDef system = build_system(YAML::Load(R"(
name: fixture
kind: abstract
n: 12
conditions: [{name: stiffness, min: 0.5, max: 2.0}]
terms: [{type: quadratic, stiffness: [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12]}]
)"));
  SubspaceModel model;
  model.d = 2;
  model.m = 1;
  model.sigma = 0.1;
  model.mlp = init_mlp(std::vector<int>{3, 32, 32, 12}, 2024);
  // Nonzero biases push some units into the negative ELU branch.
  std::mt19937_64 rng(7);
  std::normal_distribution<double> noise(0.0, 0.5);
  for (Vec& b : model.mlp.biases) {
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = noise(rng);
  }
  model.fingerprint.system_name = system.name;

  nlohmann::json doc;
  doc["model"] = web_export_json(model, system);
  std::uniform_real_distribution<double> cond(0.5, 2.0);
  for (int i = 0; i < 10; ++i) {
    Vec z(2);
    z << 2.0 * noise(rng), 2.0 * noise(rng);
    Vec c(1);
    c << cond(rng);
    doc["latents"].push_back(to_json(z));
    doc["conditions"].push_back(to_json(c));
    doc["outputs"].push_back(to_json(model.evaluate(z, view(c))));
  }
  return doc;
}

nlohmann::json spline_fixture() {
  std::vector<Vec> keys(5, Vec(3));
  keys[0] << 0.0, 0.0, 0.0;
  keys[1] << 1.0, 0.5, -0.25;
  keys[2] << 1.5, 2.0, 0.75;
  keys[3] << -0.5, 1.25, 1.0;
  keys[4] << -1.0, -0.75, 0.5;
  constexpr int sps = 7;
  nlohmann::json doc;
  for (const Vec& k : keys) doc["keyframes"].push_back(to_json(k));
  doc["samples_per_segment"] = sps;
  for (const Vec& p : catmull_rom_path(keys, sps, true)) doc["cyclic"].push_back(to_json(p));
  for (const Vec& p : catmull_rom_path(keys, sps, false)) doc["clamped"].push_back(to_json(p));
  return doc;
}

}  // namespace nsub
