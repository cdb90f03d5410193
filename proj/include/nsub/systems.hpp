#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "nsub/mesh.hpp"

namespace YAML {
class Node;
}

namespace nsub {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using ConditionView = std::span<const double>;

inline ConditionView view(const Vec& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

// One additive contribution to the potential energy. Conditional parameters
// reach a term through `c`; terms without condition bindings ignore it.
class EnergyTerm {
 public:
  virtual ~EnergyTerm() = default;

  virtual std::string_view name() const = 0;
  virtual double energy(const Vec& q, ConditionView c) const = 0;
  // Returns the energy and adds its gradient into `grad`.
  virtual double accumulate_gradient(const Vec& q, ConditionView c, Vec& grad) const = 0;
};

struct ConditionRange {
  std::string name;
  double min = 0.0;
  double max = 0.0;
};

// Rendering data carried along for export: a triangle mesh over the
// configuration vertices, or template meshes attached to rigid bodies.
struct BodyShape {
  std::string shape;            // "box", "sphere", "capsule"
  Eigen::Vector3d size;         // half extents / radius / (radius, half length, -)
  TriMesh mesh;                 // template in body coordinates
};

struct SystemGeometry {
  enum class Kind { Abstract, Mesh, RigidBodies };
  Kind kind = Kind::Abstract;
  TriMesh surface;               // Mesh: rest vertices + render triangles
  std::vector<BodyShape> bodies;  // RigidBodies
};

struct SystemDef {
  std::string name;
  int n = 0;
  Vec mass_diag;
  Vec q_seed;
  std::vector<ConditionRange> conditions;
  std::vector<std::shared_ptr<const EnergyTerm>> terms;
  SystemGeometry geometry;

  int condition_dim() const { return static_cast<int>(conditions.size()); }

  // Uniform over the declared ranges; empty when there are no conditions.
  Vec sample_condition(std::mt19937_64& rng) const;
  // Midpoint of every declared range.
  Vec default_condition() const;

  double energy(const Vec& q, ConditionView c = {}) const;
  double energy_and_gradient(const Vec& q, ConditionView c, Vec& grad) const;

  // Throws ConfigError on any broken invariant (sizes, positive mass, finite
  // seed energy).
  void validate() const;
};

Vec energy_gradient(const SystemDef& system, const Vec& q, ConditionView c = {});

inline constexpr int kDenseHessianCap = 2000;

// Central differences of the analytic gradient, symmetrized.
Mat energy_hessian(const SystemDef& system, const Vec& q, ConditionView c = {},
                   double step = 1e-5, int dense_cap = kDenseHessianCap);

// Assembles a system from its declarative description (the `system` table of
// a run spec). Relative mesh paths resolve against `base_dir`.
SystemDef build_system(const YAML::Node& desc, const std::filesystem::path& base_dir = {});

}  // namespace nsub
