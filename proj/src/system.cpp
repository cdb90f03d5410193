#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "nsub/energies.hpp"
#include "nsub/errors.hpp"
#include "nsub/systems.hpp"

namespace nsub {

Vec SystemDef::sample_condition(std::mt19937_64& rng) const {
  Vec c(condition_dim());
  for (int k = 0; k < condition_dim(); ++k) {
    std::uniform_real_distribution<double> dist(conditions[k].min, conditions[k].max);
    c[k] = dist(rng);
  }
  return c;
}

Vec SystemDef::default_condition() const {
  Vec c(condition_dim());
  for (int k = 0; k < condition_dim(); ++k) c[k] = 0.5 * (conditions[k].min + conditions[k].max);
  return c;
}

double SystemDef::energy(const Vec& q, ConditionView c) const {
  double total = 0.0;
  for (const auto& term : terms) total += term->energy(q, c);
  return total;
}

double SystemDef::energy_and_gradient(const Vec& q, ConditionView c, Vec& grad) const {
  grad.setZero(n);
  double total = 0.0;
  for (const auto& term : terms) total += term->accumulate_gradient(q, c, grad);
  return total;
}

void SystemDef::validate() const {
  if (n <= 0) throw ConfigError("system '" + name + "': configuration dimension must be positive");
  if (terms.empty()) throw ConfigError("system '" + name + "': no energy terms");
  if (mass_diag.size() != n) throw ConfigError("system '" + name + "': mass size mismatch");
  if (!(mass_diag.minCoeff() > 0.0) || !mass_diag.allFinite()) {
    throw ConfigError("system '" + name + "': masses must be positive");
  }
  if (q_seed.size() != n) throw ConfigError("system '" + name + "': seed size mismatch");
  for (const auto& c : conditions) {
    if (!(c.max >= c.min)) throw ConfigError("condition '" + c.name + "': max < min");
  }
  const Vec c = default_condition();
  if (!std::isfinite(energy(q_seed, view(c)))) {
    throw ConfigError("system '" + name + "': energy at the seed is not finite");
  }
}

Vec energy_gradient(const SystemDef& system, const Vec& q, ConditionView c) {
  Vec g;
  system.energy_and_gradient(q, c, g);
  return g;
}

Mat energy_hessian(const SystemDef& system, const Vec& q, ConditionView c, double step,
                   int dense_cap) {
  if (system.n > dense_cap) {
    throw ConfigError("energy_hessian: n = " + std::to_string(system.n) + " exceeds the dense cap of " +
                      std::to_string(dense_cap) + "; skip the modal baseline for this system");
  }
  Mat h(system.n, system.n);
  Vec qp = q;
  Vec gp;
  Vec gm;
  for (int i = 0; i < system.n; ++i) {
    const double h_i = step * std::max(1.0, std::abs(q[i]));
    qp[i] = q[i] + h_i;
    system.energy_and_gradient(qp, c, gp);
    qp[i] = q[i] - h_i;
    system.energy_and_gradient(qp, c, gm);
    qp[i] = q[i];
    h.col(i) = (gp - gm) / (2.0 * h_i);
  }
  return 0.5 * (h + h.transpose());
}

// ---------------------------------------------------------------------------
// Declarative construction.

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

YAML::Node child(const YAML::Node& node, const std::string& key) {
  if (!node || !node.IsMap()) return YAML::Node(YAML::NodeType::Undefined);
  return node[key];
}

template <typename T>
T scalar_as(const YAML::Node& node, const std::string& path) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("'" + path + "' has the wrong type");
  }
}

template <typename T>
T required(const YAML::Node& node, const std::string& key, const std::string& path) {
  const YAML::Node v = child(node, key);
  if (!v) throw ConfigError("missing required field '" + join(path, key) + "'");
  return scalar_as<T>(v, join(path, key));
}

template <typename T>
T optional(const YAML::Node& node, const std::string& key, T fallback, const std::string& path) {
  const YAML::Node v = child(node, key);
  if (!v) return fallback;
  return scalar_as<T>(v, join(path, key));
}

Vec vector_field(const YAML::Node& v, const std::string& path) {
  if (!v.IsSequence()) throw ConfigError("'" + path + "' must be a list of numbers");
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = scalar_as<double>(v[i], path);
  }
  return out;
}

Eigen::Vector3d vec3_field(const YAML::Node& node, const std::string& key,
                           const Eigen::Vector3d& fallback, const std::string& path) {
  const YAML::Node v = child(node, key);
  if (!v) return fallback;
  const Vec raw = vector_field(v, join(path, key));
  if (raw.size() < 1 || raw.size() > 3) throw ConfigError("'" + join(path, key) + "' needs 1-3 entries");
  Eigen::Vector3d out = Eigen::Vector3d::Zero();
  out.head(raw.size()) = raw;
  return out;
}

void require_positive(double value, const std::string& path) {
  if (!(value > 0.0)) throw ConfigError("'" + path + "' must be > 0");
}

int condition_index(const SystemDef& sys, const YAML::Node& node, const std::string& key,
                    const std::string& path) {
  const YAML::Node v = child(node, key);
  if (!v) return -1;
  const auto name = scalar_as<std::string>(v, join(path, key));
  for (int k = 0; k < sys.condition_dim(); ++k) {
    if (sys.conditions[k].name == name) return k;
  }
  throw ConfigError("'" + join(path, key) + "' names unknown condition '" + name + "'");
}

Material parse_material(const YAML::Node& node, const std::string& path) {
  Material m;
  m.youngs_modulus = optional(node, "youngs_modulus", m.youngs_modulus, path);
  m.poisson_ratio = optional(node, "poisson_ratio", m.poisson_ratio, path);
  m.density = optional(node, "density", m.density, path);
  m.bend_stiffness = optional(node, "bend_stiffness", m.bend_stiffness, path);
  m.stretch_stiffness = optional(node, "stretch_stiffness", m.stretch_stiffness, path);
  require_positive(m.youngs_modulus, join(path, "youngs_modulus"));
  if (!(m.poisson_ratio > 0.0 && m.poisson_ratio < 0.5)) {
    throw ConfigError("'" + join(path, "poisson_ratio") + "' must lie in (0, 0.5)");
  }
  require_positive(m.density, join(path, "density"));
  require_positive(m.stretch_stiffness, join(path, "stretch_stiffness"));
  if (!(m.bend_stiffness >= 0.0)) throw ConfigError("'" + join(path, "bend_stiffness") + "' must be >= 0");
  return m;
}

// Mesh-based systems: FEM (triangles or tets) and cloth.
struct MeshData {
  VertexMatrix rest;
  std::vector<std::array<int, 3>> triangles;
  std::vector<std::array<int, 4>> tets;
  int dim = 3;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

MeshData load_mesh(const YAML::Node& node, const std::filesystem::path& base_dir, bool cloth,
                   const std::string& path) {
  if (!node) throw ConfigError("missing required field '" + join(path, "") + "'");
  MeshData out;
  if (const YAML::Node gen = child(node, "generate")) {
    const auto kind = scalar_as<std::string>(gen, join(path, "generate"));
    if (kind == "grid2d") {
      TriMesh m = make_grid_2d(required<int>(node, "nx", path), required<int>(node, "ny", path),
                               required<double>(node, "width", path),
                               required<double>(node, "height", path));
      out.rest = m.vertices;
      out.triangles = m.triangles;
      out.dim = 2;
    } else if (kind == "sheet") {
      TriMesh m = make_sheet(required<int>(node, "nx", path), required<int>(node, "nz", path),
                             required<double>(node, "width", path),
                             required<double>(node, "depth", path));
      out.rest = m.vertices;
      out.triangles = m.triangles;
    } else if (kind == "tetbox") {
      const Eigen::Vector3d size = vec3_field(node, "size", Eigen::Vector3d::Ones(), path);
      TetMesh m = make_tet_box(required<int>(node, "nx", path), required<int>(node, "ny", path),
                               required<int>(node, "nz", path), size.x(), size.y(), size.z());
      out.rest = m.vertices;
      out.tets = m.tets;
    } else {
      throw ConfigError("'" + join(path, "generate") + "' must be grid2d, sheet or tetbox");
    }
  } else {
    const YAML::Node p = child(node, "path");
    if (!p) throw ConfigError("missing required field '" + join(path, "path") + "'");
    const auto file = resolve(base_dir, scalar_as<std::string>(p, join(path, "path")));
    if (!std::filesystem::exists(file)) {
      throw ConfigError("'" + join(path, "path") + "' refers to missing file '" + file.string() + "'");
    }
    const bool planar = optional(node, "planar", false, path);
    if (file.extension() == ".tet") {
      TetMesh m = load_tet(file);
      out.rest = m.vertices;
      out.tets = m.tets;
    } else {
      TriMesh m = load_obj(file, planar);
      out.rest = m.vertices;
      out.triangles = m.triangles;
      out.dim = m.dim();
    }
  }
  if (cloth && (!out.tets.empty() || out.dim != 3)) {
    throw ConfigError("'" + path + "' must be a 3D triangle mesh for cloth systems");
  }
  return out;
}

std::vector<int> select_vertices(const YAML::Node& term, const MeshData& mesh,
                                 const std::string& path) {
  std::vector<int> ids;
  if (const YAML::Node list = child(term, "vertices")) {
    for (std::size_t i = 0; i < list.size(); ++i) {
      const int v = scalar_as<int>(list[i], join(path, "vertices"));
      if (v < 0 || v >= mesh.rest.rows()) throw ConfigError("'" + join(path, "vertices") + "' index out of range");
      ids.push_back(v);
    }
    return ids;
  }
  const YAML::Node sel = child(term, "select");
  if (!sel) throw ConfigError("'" + path + "' needs 'vertices' or 'select'");
  const std::string sp = join(path, "select");
  const int axis = required<int>(sel, "axis", sp);
  if (axis < 0 || axis >= mesh.dim) throw ConfigError("'" + join(sp, "axis") + "' out of range");
  const auto side = required<std::string>(sel, "side", sp);
  const double tol = optional(sel, "tol", 1e-9, sp);
  const double target = side == "min"   ? mesh.rest.col(axis).minCoeff()
                        : side == "max" ? mesh.rest.col(axis).maxCoeff()
                                        : throw ConfigError("'" + join(sp, "side") + "' must be min or max");
  for (Eigen::Index i = 0; i < mesh.rest.rows(); ++i) {
    if (std::abs(mesh.rest(i, axis) - target) <= tol) ids.push_back(static_cast<int>(i));
  }
  if (ids.empty()) throw ConfigError("'" + sp + "' selects no vertices");
  return ids;
}

Collider parse_collider(const YAML::Node& node, int body_count, const std::string& path) {
  Collider c;
  const auto shape = required<std::string>(node, "shape", path);
  if (shape == "sphere") {
    c.shape = Collider::Shape::Sphere;
    c.size = Eigen::Vector3d::Constant(required<double>(node, "radius", path));
  } else if (shape == "box") {
    c.shape = Collider::Shape::Box;
    c.size = vec3_field(node, "half_extents", Eigen::Vector3d::Ones(), path);
  } else if (shape == "capsule") {
    c.shape = Collider::Shape::Capsule;
    c.size = {required<double>(node, "radius", path), required<double>(node, "half_length", path), 0.0};
  } else if (shape == "plane") {
    c.shape = Collider::Shape::Plane;
    c.normal = vec3_field(node, "normal", Eigen::Vector3d::UnitY(), path);
    c.size = Eigen::Vector3d::Constant(optional(node, "offset", 0.0, path));
    if (!(c.normal.norm() > 0.0)) throw ConfigError("'" + join(path, "normal") + "' must be nonzero");
  } else {
    throw ConfigError("'" + join(path, "shape") + "' must be sphere, box, capsule or plane");
  }
  c.center = vec3_field(node, "center", Eigen::Vector3d::Zero(), path);
  c.body = optional(node, "body", -1, path);
  if (c.body >= body_count) throw ConfigError("'" + join(path, "body") + "' out of range");
  return c;
}

// Rigid bodies ----------------------------------------------------------------

struct BodyDef {
  BodyShape shape;
  std::vector<Eigen::Vector3d> points;  // collision samples, body frame
  Eigen::Vector3d position;
  Eigen::Vector3d second_moment;        // <x_j^2> over the body volume
  double mass;
};

TriMesh ring_mesh(double radius, double half_length, int rings_per_cap, int segments) {
  // Revolved profile along y: a sphere when half_length = 0, a capsule otherwise.
  std::vector<Eigen::Vector2d> profile;  // (radial, y)
  for (int k = 0; k <= rings_per_cap; ++k) {
    const double a = -std::numbers::pi / 2 + std::numbers::pi / 2 * k / rings_per_cap;
    profile.emplace_back(radius * std::cos(a), radius * std::sin(a) - half_length);
  }
  for (int k = 0; k <= rings_per_cap; ++k) {
    const double a = std::numbers::pi / 2 * k / rings_per_cap;
    profile.emplace_back(radius * std::cos(a), radius * std::sin(a) + half_length);
  }
  TriMesh mesh;
  std::vector<Eigen::Vector3d> verts;
  verts.emplace_back(0.0, profile.front().y(), 0.0);
  for (std::size_t r = 1; r + 1 < profile.size(); ++r) {
    for (int s = 0; s < segments; ++s) {
      const double phi = 2.0 * std::numbers::pi * s / segments;
      verts.emplace_back(profile[r].x() * std::cos(phi), profile[r].y(), profile[r].x() * std::sin(phi));
    }
  }
  verts.emplace_back(0.0, profile.back().y(), 0.0);
  const int rings = static_cast<int>(profile.size()) - 2;
  auto id = [&](int r, int s) { return 1 + r * segments + (s % segments); };
  for (int s = 0; s < segments; ++s) mesh.triangles.push_back({0, id(0, s), id(0, s + 1)});
  for (int r = 0; r + 1 < rings; ++r) {
    for (int s = 0; s < segments; ++s) {
      mesh.triangles.push_back({id(r, s), id(r + 1, s), id(r + 1, s + 1)});
      mesh.triangles.push_back({id(r, s), id(r + 1, s + 1), id(r, s + 1)});
    }
  }
  const int top = static_cast<int>(verts.size()) - 1;
  for (int s = 0; s < segments; ++s) mesh.triangles.push_back({top, id(rings - 1, s + 1), id(rings - 1, s)});
  mesh.vertices.resize(static_cast<Eigen::Index>(verts.size()), 3);
  for (std::size_t i = 0; i < verts.size(); ++i) mesh.vertices.row(static_cast<Eigen::Index>(i)) = verts[i].transpose();
  return mesh;
}

TriMesh box_mesh(const Eigen::Vector3d& h) {
  TriMesh mesh;
  mesh.vertices.resize(8, 3);
  for (int i = 0; i < 8; ++i) {
    mesh.vertices.row(i) << (i & 1 ? h.x() : -h.x()), (i & 2 ? h.y() : -h.y()), (i & 4 ? h.z() : -h.z());
  }
  mesh.triangles = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
                    {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
  return mesh;
}

BodyDef make_body(const std::string& shape, const Eigen::Vector3d& size, const Eigen::Vector3d& position,
                  double mass, const std::string& path) {
  BodyDef b;
  b.shape.shape = shape;
  b.shape.size = size;
  b.position = position;
  b.mass = mass;
  require_positive(mass, join(path, "mass"));
  if (shape == "box") {
    for (int k = 0; k < 3; ++k) require_positive(size[k], join(path, "half_extents"));
    b.shape.mesh = box_mesh(size);
    b.second_moment = size.cwiseProduct(size) / 3.0;
  } else if (shape == "sphere") {
    require_positive(size.x(), join(path, "radius"));
    b.shape.mesh = ring_mesh(size.x(), 0.0, 3, 8);
    b.second_moment = Eigen::Vector3d::Constant(size.x() * size.x() / 5.0);
  } else if (shape == "capsule") {
    require_positive(size.x(), join(path, "radius"));
    require_positive(size.y(), join(path, "half_length"));
    b.shape.mesh = ring_mesh(size.x(), size.y(), 2, 8);
    const double r2 = size.x() * size.x();
    b.second_moment = {r2 / 4.0, size.y() * size.y() / 3.0 + r2 / 4.0, r2 / 4.0};
  } else {
    throw ConfigError("'" + join(path, "shape") + "' must be box, sphere or capsule");
  }
  for (Eigen::Index i = 0; i < b.shape.mesh.vertices.rows(); ++i) {
    b.points.push_back(b.shape.mesh.vertices.row(i).transpose());
  }
  return b;
}

std::vector<BodyDef> parse_bodies(const YAML::Node& node, const std::string& path) {
  if (!node) throw ConfigError("missing required field '" + path + "'");
  std::vector<BodyDef> bodies;
  if (node.IsMap()) {
    const auto kind = required<std::string>(node, "generate", path);
    if (kind != "chain") throw ConfigError("'" + join(path, "generate") + "' must be chain");
    const int count = required<int>(node, "count", path);
    if (count < 1) throw ConfigError("'" + join(path, "count") + "' must be >= 1");
    const double radius = optional(node, "radius", 0.05, path);
    const double half = optional(node, "half_length", 0.1, path);
    const double mass = optional(node, "mass", 1.0, path);
    const Eigen::Vector3d top = vec3_field(node, "top", Eigen::Vector3d::Zero(), path);
    for (int i = 0; i < count; ++i) {
      const Eigen::Vector3d pos = top - Eigen::Vector3d::UnitY() * (half * (2 * i + 1));
      bodies.push_back(make_body("capsule", {radius, half, 0.0}, pos, mass, path));
    }
    return bodies;
  }
  if (!node.IsSequence() || node.size() == 0) throw ConfigError("'" + path + "' must be a non-empty list or a generator");
  for (std::size_t i = 0; i < node.size(); ++i) {
    const std::string bp = path + "[" + std::to_string(i) + "]";
    const YAML::Node b = node[i];
    const auto shape = required<std::string>(b, "shape", bp);
    Eigen::Vector3d size;
    if (shape == "box") {
      size = vec3_field(b, "half_extents", Eigen::Vector3d::Constant(0.5), bp);
    } else if (shape == "sphere") {
      size = Eigen::Vector3d::Constant(required<double>(b, "radius", bp));
    } else {
      size = {required<double>(b, "radius", bp), required<double>(b, "half_length", bp), 0.0};
    }
    bodies.push_back(make_body(shape, size, vec3_field(b, "position", Eigen::Vector3d::Zero(), bp),
                               optional(b, "mass", 1.0, bp), bp));
  }
  return bodies;
}

void parse_conditions(SystemDef& sys, const YAML::Node& node, const std::string& path) {
  if (!node) return;
  if (!node.IsSequence()) throw ConfigError("'" + path + "' must be a list");
  for (std::size_t i = 0; i < node.size(); ++i) {
    const std::string cp = path + "[" + std::to_string(i) + "]";
    ConditionRange c;
    c.name = required<std::string>(node[i], "name", cp);
    c.min = required<double>(node[i], "min", cp);
    c.max = required<double>(node[i], "max", cp);
    if (!(c.max >= c.min)) throw ConfigError("'" + cp + "': max must be >= min");
    sys.conditions.push_back(c);
  }
}

Vec seed_from_rest(const MeshData& mesh, const YAML::Node& seed, const std::string& path) {
  Eigen::Vector3d scale = Eigen::Vector3d::Ones();
  Eigen::Vector3d translate = Eigen::Vector3d::Zero();
  Eigen::Vector3d about = Eigen::Vector3d::Zero();
  if (seed) {
    scale = vec3_field(seed, "scale", scale, path);
    translate = vec3_field(seed, "translate", translate, path);
    // Scaling is about the rest bounding-box center unless given.
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    for (int k = 0; k < mesh.dim; ++k) {
      center[k] = 0.5 * (mesh.rest.col(k).minCoeff() + mesh.rest.col(k).maxCoeff());
    }
    about = vec3_field(seed, "about", center, path);
  }
  Vec q(mesh.rest.rows() * mesh.dim);
  for (Eigen::Index i = 0; i < mesh.rest.rows(); ++i) {
    for (int k = 0; k < mesh.dim; ++k) {
      q[mesh.dim * i + k] = about[k] + scale[k] * (mesh.rest(i, k) - about[k]) + translate[k];
    }
  }
  return q;
}

void build_abstract(SystemDef& sys, const YAML::Node& desc) {
  sys.n = required<int>(desc, "n", "system");
  if (sys.n <= 0) throw ConfigError("'system.n' must be positive");
  const YAML::Node mass = desc["mass"];
  if (!mass) {
    sys.mass_diag = Vec::Ones(sys.n);
  } else if (mass.IsSequence()) {
    sys.mass_diag = vector_field(mass, "system.mass");
    if (sys.mass_diag.size() != sys.n) throw ConfigError("'system.mass' must have n entries");
  } else {
    sys.mass_diag = Vec::Constant(sys.n, scalar_as<double>(mass, "system.mass"));
  }
  if (!(sys.mass_diag.minCoeff() > 0.0)) throw ConfigError("'system.mass' must be positive");
  sys.q_seed = desc["seed"] ? vector_field(desc["seed"], "system.seed") : Vec::Zero(sys.n);
  if (sys.q_seed.size() != sys.n) throw ConfigError("'system.seed' must have n entries");
  const YAML::Node terms = desc["terms"];
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const std::string tp = "system.terms[" + std::to_string(i) + "]";
    const YAML::Node t = terms[i];
    const auto type = required<std::string>(t, "type", tp);
    if (type == "quadratic") {
      Mat k;
      if (const YAML::Node m = t["matrix"]) {
        k.resize(sys.n, sys.n);
        if (m.size() != static_cast<std::size_t>(sys.n)) throw ConfigError("'" + tp + ".matrix' must be n x n");
        for (int r = 0; r < sys.n; ++r) {
          const Vec row = vector_field(m[r], tp + ".matrix");
          if (row.size() != sys.n) throw ConfigError("'" + tp + ".matrix' must be n x n");
          k.row(r) = row.transpose();
        }
      } else {
        const Vec diag = vector_field(t["stiffness"] ? t["stiffness"] : YAML::Node(YAML::NodeType::Sequence),
                                      tp + ".stiffness");
        if (diag.size() != sys.n) throw ConfigError("'" + tp + ".stiffness' must have n entries");
        k = diag.asDiagonal();
      }
      const Vec rest = t["rest"] ? vector_field(t["rest"], tp + ".rest") : Vec::Zero(sys.n);
      if (rest.size() != sys.n) throw ConfigError("'" + tp + ".rest' must have n entries");
      sys.terms.push_back(std::make_shared<QuadraticTerm>(k, rest));
    } else if (type == "linear") {
      const Vec coeffs = vector_field(t["coefficients"], tp + ".coefficients");
      if (coeffs.size() != sys.n) throw ConfigError("'" + tp + ".coefficients' must have n entries");
      sys.terms.push_back(std::make_shared<LinearTerm>("linear", coeffs));
    } else {
      throw ConfigError("'" + tp + ".type': unknown term '" + type + "' for abstract systems");
    }
  }
}

void build_mesh_system(SystemDef& sys, const YAML::Node& desc, const std::filesystem::path& base_dir,
                       bool cloth) {
  const MeshData mesh = load_mesh(desc["mesh"], base_dir, cloth, "system.mesh");
  const Material material = parse_material(desc["material"], "system.material");
  sys.n = static_cast<int>(mesh.rest.rows()) * mesh.dim;
  sys.q_seed = seed_from_rest(mesh, desc["seed"], "system.seed");

  sys.geometry.kind = SystemGeometry::Kind::Mesh;
  sys.geometry.surface.vertices = mesh.rest;
  if (!mesh.tets.empty()) {
    TetMesh tm{mesh.rest, mesh.tets};
    sys.geometry.surface.triangles = boundary_faces(tm);
  } else {
    sys.geometry.surface.triangles = mesh.triangles;
  }

  // Mass comes from the elastic discretization.
  Vec vertex_mass;
  if (cloth) {
    vertex_mass = ClothTerm(mesh.rest, mesh.triangles, material).vertex_masses();
  } else if (!mesh.tets.empty()) {
    vertex_mass = NeoHookeanTerm<3>(mesh.rest, mesh.tets, material).vertex_masses();
  } else {
    std::vector<std::array<int, 3>> tris = mesh.triangles;
    vertex_mass = NeoHookeanTerm<2>(mesh.rest, tris, material).vertex_masses();
  }
  if (!(vertex_mass.minCoeff() > 0.0)) throw ConfigError("system.mesh: unreferenced vertex has zero mass");
  sys.mass_diag.resize(sys.n);
  for (Eigen::Index i = 0; i < vertex_mass.size(); ++i) {
    sys.mass_diag.segment(mesh.dim * i, mesh.dim).setConstant(vertex_mass[i]);
  }

  const YAML::Node terms = desc["terms"];
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const std::string tp = "system.terms[" + std::to_string(i) + "]";
    const YAML::Node t = terms[i];
    const auto type = required<std::string>(t, "type", tp);
    if (type == "neohookean") {
      if (cloth) throw ConfigError("'" + tp + "': neohookean needs a volumetric or planar mesh");
      StiffnessRegion region;
      region.condition_index = condition_index(sys, t, "stiffness_condition", tp);
      if (const YAML::Node r = t["region"]) {
        region.axis = required<int>(r, "axis", tp + ".region");
        region.threshold = required<double>(r, "above", tp + ".region");
      }
      if (!mesh.tets.empty()) {
        sys.terms.push_back(std::make_shared<NeoHookeanTerm<3>>(mesh.rest, mesh.tets, material, region));
      } else {
        std::vector<std::array<int, 3>> tris = mesh.triangles;
        sys.terms.push_back(std::make_shared<NeoHookeanTerm<2>>(mesh.rest, tris, material, region));
      }
    } else if (type == "cloth") {
      if (!cloth) throw ConfigError("'" + tp + "': cloth term needs kind: cloth");
      sys.terms.push_back(std::make_shared<ClothTerm>(mesh.rest, mesh.triangles, material));
    } else if (type == "gravity") {
      const Vec g = vector_field(t["g"], tp + ".g");
      sys.terms.push_back(std::make_shared<LinearTerm>("gravity", gravity_coefficients(vertex_mass, mesh.dim, g)));
    } else if (type == "load") {
      const Vec f = vector_field(t["force"], tp + ".force");
      if (f.size() != mesh.dim) throw ConfigError("'" + tp + ".force' must match the mesh dimension");
      Vec coeffs = Vec::Zero(sys.n);
      const auto ids = select_vertices(t, mesh, tp);
      for (int v : ids) coeffs.segment(mesh.dim * v, mesh.dim) -= f / static_cast<double>(ids.size());
      sys.terms.push_back(std::make_shared<LinearTerm>("load", coeffs));
    } else if (type == "pin") {
      const double w = required<double>(t, "weight", tp);
      require_positive(w, tp + ".weight");
      const int cond = condition_index(sys, t, "offset_condition", tp);
      const int axis = optional(t, "offset_axis", 0, tp);
      std::vector<std::shared_ptr<const Constraint>> eq;
      for (int v : select_vertices(t, mesh, tp)) {
        Eigen::Vector3d target = Eigen::Vector3d::Zero();
        target.head(mesh.dim) = sys.q_seed.segment(mesh.dim * v, mesh.dim);
        // Offsets move only the pins on the far side of the bounding box center.
        int c = cond;
        if (cond >= 0 && t["offset_side"]) {
          const auto side = scalar_as<std::string>(t["offset_side"], tp + ".offset_side");
          const double mid = 0.5 * (mesh.rest.col(axis).minCoeff() + mesh.rest.col(axis).maxCoeff());
          const bool above = mesh.rest(v, axis) > mid;
          if ((side == "max") != above) c = -1;
        }
        eq.push_back(std::make_shared<PointMatchConstraint>(PointRef::vertex(v, mesh.dim),
                                                            PointRef::world(target), mesh.dim, c, axis));
      }
      sys.terms.push_back(std::make_shared<PenaltyTerm>("pin", w, 0.0, eq,
                                                        std::vector<std::shared_ptr<const Constraint>>{}));
    } else if (type == "collision") {
      const double w = required<double>(t, "weight", tp);
      require_positive(w, tp + ".weight");
      std::vector<Collider> colliders;
      const YAML::Node cs = t["colliders"];
      if (!cs || !cs.IsSequence() || cs.size() == 0) throw ConfigError("'" + tp + ".colliders' must be a non-empty list");
      for (std::size_t k = 0; k < cs.size(); ++k) {
        colliders.push_back(parse_collider(cs[k], 0, tp + ".colliders[" + std::to_string(k) + "]"));
      }
      std::vector<PointRef> points;
      for (Eigen::Index v = 0; v < mesh.rest.rows(); ++v) points.push_back(PointRef::vertex(static_cast<int>(v), mesh.dim));
      auto con = std::make_shared<SdfConstraint>(points, colliders);
      sys.terms.push_back(std::make_shared<PenaltyTerm>(
          "collision", 1.0, w, std::vector<std::shared_ptr<const Constraint>>{},
          std::vector<std::shared_ptr<const Constraint>>{con}));
    } else {
      throw ConfigError("'" + tp + ".type': unknown term '" + type + "'");
    }
  }
}

void build_rigid_system(SystemDef& sys, const YAML::Node& desc) {
  const std::vector<BodyDef> bodies = parse_bodies(desc["bodies"], "system.bodies");
  const int count = static_cast<int>(bodies.size());
  sys.n = kRigidCoeffs * count;
  sys.q_seed = Vec::Zero(sys.n);
  sys.mass_diag = Vec::Zero(sys.n);
  sys.geometry.kind = SystemGeometry::Kind::RigidBodies;
  for (int b = 0; b < count; ++b) {
    const BodyDef& body = bodies[b];
    for (int i = 0; i < 3; ++i) {
      sys.q_seed[kRigidCoeffs * b + 4 * i + i] = 1.0;
      sys.q_seed[kRigidCoeffs * b + 4 * i + 3] = body.position[i];
      for (int j = 0; j < 3; ++j) {
        // Kinetic energy of int |R x + t|^2 dm with principal axes aligned.
        sys.mass_diag[kRigidCoeffs * b + 4 * i + j] = body.mass * std::max(body.second_moment[j], 1e-8);
      }
      sys.mass_diag[kRigidCoeffs * b + 4 * i + 3] = body.mass;
    }
    sys.geometry.bodies.push_back(body.shape);
  }

  const YAML::Node terms = desc["terms"];
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const std::string tp = "system.terms[" + std::to_string(i) + "]";
    const YAML::Node t = terms[i];
    const auto type = required<std::string>(t, "type", tp);
    if (type == "orthogonality") {
      sys.terms.push_back(std::make_shared<RigidOrthogonalityTerm>(count, required<double>(t, "stiffness", tp)));
    } else if (type == "gravity") {
      const Vec g = vector_field(t["g"], tp + ".g");
      if (g.size() != 3) throw ConfigError("'" + tp + ".g' must have 3 entries");
      Vec coeffs = Vec::Zero(sys.n);
      for (int b = 0; b < count; ++b) {
        for (int k = 0; k < 3; ++k) coeffs[kRigidCoeffs * b + 4 * k + 3] = -bodies[b].mass * g[k];
      }
      sys.terms.push_back(std::make_shared<LinearTerm>("gravity", coeffs));
    } else if (type == "joints") {
      const double w = required<double>(t, "weight", tp);
      require_positive(w, tp + ".weight");
      std::vector<std::shared_ptr<const Constraint>> eq;
      const YAML::Node js = t["joints"];
      if (!js || !js.IsSequence()) throw ConfigError("'" + tp + ".joints' must be a list");
      for (std::size_t k = 0; k < js.size(); ++k) {
        const std::string jp = tp + ".joints[" + std::to_string(k) + "]";
        const int a = required<int>(js[k], "a", jp);
        if (a < 0 || a >= count) throw ConfigError("'" + jp + ".a' out of range");
        const Eigen::Vector3d anchor_a = vec3_field(js[k], "anchor_a", Eigen::Vector3d::Zero(), jp);
        const Eigen::Vector3d anchor_b = vec3_field(js[k], "anchor_b", Eigen::Vector3d::Zero(), jp);
        const auto b_name = required<std::string>(js[k], "b", jp);
        PointRef pb;
        if (b_name == "world") {
          pb = PointRef::world(anchor_b);
        } else {
          const int b = scalar_as<int>(js[k]["b"], jp + ".b");
          if (b < 0 || b >= count) throw ConfigError("'" + jp + ".b' out of range");
          pb = PointRef::body(b, anchor_b);
        }
        eq.push_back(std::make_shared<PointMatchConstraint>(PointRef::body(a, anchor_a), pb, 3));
      }
      sys.terms.push_back(std::make_shared<PenaltyTerm>("joints", w, 0.0, eq,
                                                        std::vector<std::shared_ptr<const Constraint>>{}));
    } else if (type == "collision") {
      const double w = required<double>(t, "weight", tp);
      require_positive(w, tp + ".weight");
      const YAML::Node cs = t["colliders"];
      if (!cs || !cs.IsSequence() || cs.size() == 0) throw ConfigError("'" + tp + ".colliders' must be a non-empty list");
      std::vector<std::shared_ptr<const Constraint>> ineq;
      for (std::size_t k = 0; k < cs.size(); ++k) {
        const std::string cp = tp + ".colliders[" + std::to_string(k) + "]";
        const Collider col = parse_collider(cs[k], count, cp);
        std::vector<int> against;
        if (const YAML::Node list = cs[k]["against"]) {
          for (std::size_t j = 0; j < list.size(); ++j) {
            const int b = scalar_as<int>(list[j], cp + ".against");
            if (b < 0 || b >= count) throw ConfigError("'" + cp + ".against' out of range");
            against.push_back(b);
          }
        } else {
          for (int b = 0; b < count; ++b) {
            if (b != col.body) against.push_back(b);
          }
        }
        std::vector<PointRef> points;
        for (int b : against) {
          for (const auto& p : bodies[b].points) points.push_back(PointRef::body(b, p));
        }
        ineq.push_back(std::make_shared<SdfConstraint>(points, std::vector<Collider>{col}));
      }
      sys.terms.push_back(std::make_shared<PenaltyTerm>("collision", 1.0, w,
                                                        std::vector<std::shared_ptr<const Constraint>>{}, ineq));
    } else {
      throw ConfigError("'" + tp + ".type': unknown term '" + type + "' for rigid systems");
    }
  }
}

}  // namespace

SystemDef build_system(const YAML::Node& desc, const std::filesystem::path& base_dir) {
  if (!desc || !desc.IsMap()) throw ConfigError("missing required table 'system'");
  SystemDef sys;
  sys.name = optional<std::string>(desc, "name", "system", "system");
  const auto kind = required<std::string>(desc, "kind", "system");
  parse_conditions(sys, desc["conditions"], "system.conditions");
  const YAML::Node terms = desc["terms"];
  if (!terms || !terms.IsSequence() || terms.size() == 0) {
    throw ConfigError("'system.terms' must be a non-empty list");
  }
  if (kind == "abstract") {
    build_abstract(sys, desc);
  } else if (kind == "fem") {
    build_mesh_system(sys, desc, base_dir, false);
  } else if (kind == "cloth") {
    build_mesh_system(sys, desc, base_dir, true);
  } else if (kind == "rigid") {
    build_rigid_system(sys, desc);
  } else {
    throw ConfigError("'system.kind' must be abstract, fem, cloth or rigid");
  }
  sys.validate();
  return sys;
}

}  // namespace nsub
