#include <doctest.h>
#include <yaml-cpp/yaml.h>

#include <cmath>
#include <numbers>
#include <random>

#include "nsub/energies.hpp"
#include "nsub/errors.hpp"
#include "nsub/mesh.hpp"
#include "nsub/systems.hpp"
#include "oracles.hpp"

using namespace nsub;
using nsub::testing::finite_difference_gradient;
using nsub::testing::random_rotation;
using nsub::testing::random_vector;
using nsub::testing::relative_error;

namespace {

Vec flat(const VertexMatrix& v) {
  return Eigen::Map<const Vec>(v.data(), v.size());
}

double term_gradient_error(const EnergyTerm& term, const Vec& q, const Vec& c = Vec()) {
  Vec g = Vec::Zero(q.size());
  term.accumulate_gradient(q, view(c), g);
  auto f = [&](const Vec& x) { return term.energy(x, view(c)); };
  return relative_error(g, finite_difference_gradient(f, q, 1e-6));
}

TetMesh twenty_tets() {
  TetMesh box = make_tet_box(3, 3, 2, 1.0, 1.0, 0.5);
  box.tets.resize(20);
  return box;
}

Material soft() {
  Material m;
  m.youngs_modulus = 50.0;
  m.poisson_ratio = 0.35;
  m.bend_stiffness = 0.5;
  m.stretch_stiffness = 20.0;
  return m;
}

}  // namespace

TEST_CASE("neo-Hookean 3D energy at rest is zero") {
  const TetMesh box = make_tet_box(3, 3, 3, 1.0, 1.0, 1.0);
  const NeoHookeanTerm<3> term(box.vertices, box.tets, soft());
  CHECK(std::abs(term.energy(flat(box.vertices), {})) < 1e-12);
  Vec g = Vec::Zero(box.vertices.size());
  term.accumulate_gradient(flat(box.vertices), {}, g);
  CHECK(g.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("neo-Hookean 2D energy at rest is zero") {
  const TriMesh grid = make_grid_2d(4, 3, 2.0, 1.0);
  const NeoHookeanTerm<2> term(grid.vertices, grid.triangles, soft());
  CHECK(std::abs(term.energy(flat(grid.vertices), {})) < 1e-12);
  Vec g = Vec::Zero(grid.vertices.size());
  term.accumulate_gradient(flat(grid.vertices), {}, g);
  CHECK(g.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("neo-Hookean unit tet under uniform scaling matches hand evaluation") {
  VertexMatrix rest(4, 3);
  rest << 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1;
  Material mat;
  mat.youngs_modulus = 1000.0;
  mat.poisson_ratio = 0.3;
  const NeoHookeanTerm<3> term(rest, {{0, 1, 2, 3}}, mat);
  const double s = 1.1;
  const VertexMatrix scaled = rest * s;

  const double E = 1000.0, nu = 0.3;
  const double mu = E / (2.0 * (1.0 + nu));
  const double lambda = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
  const double alpha = 1.0 + mu / lambda - mu / (4.0 * lambda);
  auto psi = [&](double ic, double j) {
    return mu / 2.0 * (ic - 3.0) + lambda / 2.0 * (j - alpha) * (j - alpha) - mu / 2.0 * std::log(ic + 1.0);
  };
  const double expected = (psi(3.0 * s * s, s * s * s) - psi(3.0, 1.0)) / 6.0;
  CHECK(term.energy(flat(scaled), {}) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("neo-Hookean 3D gradient matches finite differences on a 20-tet mesh") {
  const TetMesh mesh = twenty_tets();
  const NeoHookeanTerm<3> term(mesh.vertices, mesh.tets, soft());
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec q = flat(mesh.vertices) + random_vector(rng, mesh.vertices.size(), 0.05);
    CHECK(term_gradient_error(term, q) < 1e-5);
  }
}

TEST_CASE("neo-Hookean 2D gradient matches finite differences, including inverted elements") {
  const TriMesh grid = make_grid_2d(4, 4, 1.0, 1.0);
  const NeoHookeanTerm<2> term(grid.vertices, grid.triangles, soft());
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    const double scale = trial < 10 ? 0.05 : 0.5;  // large perturbations invert elements
    const Vec q = flat(grid.vertices) + random_vector(rng, grid.vertices.size(), scale);
    CHECK(term_gradient_error(term, q) < 1e-5);
  }
}

TEST_CASE("neo-Hookean stiffness region scales by the bound condition") {
  const TriMesh grid = make_grid_2d(5, 2, 4.0, 1.0);
  StiffnessRegion region{0, 0, 2.0};
  const NeoHookeanTerm<2> scaled(grid.vertices, grid.triangles, soft(), region);
  const NeoHookeanTerm<2> plain(grid.vertices, grid.triangles, soft());
  std::mt19937_64 rng(3);
  const Vec q = flat(grid.vertices) + random_vector(rng, grid.vertices.size(), 0.05);
  Vec one(1);
  one << 1.0;
  CHECK(scaled.energy(q, view(one)) == doctest::Approx(plain.energy(q, {})).epsilon(1e-12));
  Vec three(1);
  three << 3.0;
  CHECK(scaled.energy(q, view(three)) > plain.energy(q, {}));
  CHECK(term_gradient_error(scaled, q, three) < 1e-5);
}

TEST_CASE("degenerate rest element is rejected") {
  VertexMatrix rest(3, 2);
  rest << 0, 0, 1, 0, 2, 0;
  CHECK_THROWS_AS(NeoHookeanTerm<2>(rest, {{0, 1, 2}}, Material{}), ConfigError);
}

TEST_CASE("cloth energy at flat rest is zero") {
  const TriMesh sheet = make_sheet(5, 5, 1.0, 1.0);
  const ClothTerm term(sheet.vertices, sheet.triangles, soft());
  CHECK(std::abs(term.energy(flat(sheet.vertices), {})) < 1e-14);
}

TEST_CASE("cloth hinge folded to a right angle matches the hinge formula") {
  VertexMatrix rest(4, 3);
  rest << 0, 0, 0,  //
      1, 0, 0,      //
      0, 0, 1,      //
      1, 0, -1;
  const std::vector<std::array<int, 3>> tris = {{0, 1, 2}, {1, 0, 3}};
  Material mat = soft();
  const ClothTerm term(rest, tris, mat);
  REQUIRE(term.hinge_weights().size() == 1);
  // |e|^2 / (A1 + A2) with |e| = 1 and two half-unit triangles.
  CHECK(term.hinge_weights()[0] == doctest::Approx(1.0));

  for (double sign : {1.0, -1.0}) {
    VertexMatrix folded = rest;
    folded.row(3) << 1, sign, 0;  // second face rotated a quarter turn about the x axis
    const double expected = mat.bend_stiffness * 1.0 * std::pow(std::numbers::pi / 2.0, 2);
    CHECK(term.bending_energy(flat(folded)) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(std::abs(term.stretch_energy(flat(folded))) < 1e-12);
    CHECK(std::abs(hinge_angle(folded.row(0), folded.row(1), folded.row(2), folded.row(3))) ==
          doctest::Approx(std::numbers::pi / 2.0));
  }
}

TEST_CASE("cloth gradient matches finite differences on a 5x5 grid") {
  const TriMesh sheet = make_sheet(5, 5, 1.0, 1.0);
  const ClothTerm term(sheet.vertices, sheet.triangles, soft());
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec q = flat(sheet.vertices) + random_vector(rng, sheet.vertices.size(), 0.08);
    CHECK(term_gradient_error(term, q) < 1e-5);
  }
}

TEST_CASE("cloth bending gradient alone matches finite differences") {
  Material mat = soft();
  mat.stretch_stiffness = 1e-12;
  mat.bend_stiffness = 2.0;
  const TriMesh sheet = make_sheet(4, 4, 1.0, 1.0);
  const ClothTerm term(sheet.vertices, sheet.triangles, mat);
  std::mt19937_64 rng(24);
  for (int trial = 0; trial < 10; ++trial) {
    const Vec q = flat(sheet.vertices) + random_vector(rng, sheet.vertices.size(), 0.15);
    Vec g = Vec::Zero(q.size());
    term.accumulate_gradient(q, {}, g);
    auto f = [&](const Vec& x) { return term.bending_energy(x); };
    const Vec fd = finite_difference_gradient(f, q, 1e-6);
    // Stretch is negligible at this stiffness; compare against bending alone.
    CHECK(relative_error(g, fd) < 1e-5);
  }
}

TEST_CASE("rigid orthogonality energy") {
  std::mt19937_64 rng(25);
  Vec q = Vec::Zero(2 * kRigidCoeffs);
  for (int b = 0; b < 2; ++b) {
    const Eigen::Matrix3d r = random_rotation(rng);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) q[kRigidCoeffs * b + 4 * i + j] = r(i, j);
  }
  CHECK(std::abs(rigid_orthogonality_energy(q, 10.0)) < 1e-24 + 1e-12);

  Vec two = Vec::Zero(kRigidCoeffs);
  for (int i = 0; i < 3; ++i) two[4 * i + i] = 2.0;
  CHECK(rigid_orthogonality_energy(two, 1.0) == doctest::Approx(27.0));
  CHECK(RigidOrthogonalityTerm(1, 1.0).energy(two, {}) == doctest::Approx(27.0));
}

TEST_CASE("rigid orthogonality is invariant under right rotation") {
  std::mt19937_64 rng(26);
  for (int trial = 0; trial < 20; ++trial) {
    Vec q = random_vector(rng, kRigidCoeffs);
    const Eigen::Matrix3d r = body_rotation(q, 0);
    const Eigen::Matrix3d rr = r * random_rotation(rng);
    Vec q2 = q;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) q2[4 * i + j] = rr(i, j);
    const double e1 = rigid_orthogonality_energy(q, 1.0);
    CHECK(std::abs(rigid_orthogonality_energy(q2, 1.0) - e1) < 1e-12 * std::max(1.0, e1));
  }
}

TEST_CASE("rigid orthogonality gradient matches finite differences") {
  const RigidOrthogonalityTerm term(3, 7.0);
  std::mt19937_64 rng(27);
  for (int trial = 0; trial < 20; ++trial) {
    CHECK(term_gradient_error(term, random_vector(rng, 3 * kRigidCoeffs)) < 1e-5);
  }
}

TEST_CASE("penalty energy hand values") {
  using Cons = std::vector<std::shared_ptr<const Constraint>>;
  Vec q(1);
  q << 0.5;
  auto c = std::make_shared<PointMatchConstraint>(PointRef::vertex(0, 1), PointRef::world(Eigen::Vector3d::Zero()), 1);
  CHECK(penalty_energy(q, {}, Cons{c}, Cons{}, 10.0, 0.0) == doctest::Approx(2.5));
  q << -0.2;
  CHECK(penalty_energy(q, {}, Cons{}, Cons{c}, 0.0, 100.0) == doctest::Approx(4.0));
  q << 0.3;
  CHECK(penalty_energy(q, {}, Cons{}, Cons{c}, 0.0, 100.0) == 0.0);
  q << 0.0;
  CHECK(penalty_energy(q, {}, Cons{c}, Cons{c}, 10.0, 100.0) == 0.0);
}

TEST_CASE("pin offset follows the bound condition") {
  auto c = std::make_shared<PointMatchConstraint>(PointRef::vertex(0, 2), PointRef::world({1.0, 2.0, 0.0}), 2, 0, 0);
  const PenaltyTerm term("pin", 3.0, 0.0, {c}, {});
  Vec q(2);
  q << 1.5, 2.0;
  Vec cond(1);
  cond << 0.5;
  CHECK(term.energy(q, view(cond)) == doctest::Approx(0.0));
  cond << 0.0;
  CHECK(term.energy(q, view(cond)) == doctest::Approx(3.0 * 0.25));
}

TEST_CASE("sdf collision hand value and zero outside") {
  const std::vector<PointRef> pts = {PointRef::vertex(0, 3)};
  const std::vector<Collider> sphere = {Collider{}};
  Vec q(3);
  q << 0.9, 0.0, 0.0;
  CHECK(sdf_collision_energy(q, pts, sphere, 100.0) == doctest::Approx(1.0));
  q << 0.0, 1.5, 0.0;
  CHECK(sdf_collision_energy(q, pts, sphere, 100.0) == 0.0);
}

TEST_CASE("sdf collision energy is continuous across the surface") {
  const std::vector<PointRef> pts = {PointRef::vertex(0, 3)};
  const std::vector<Collider> sphere = {Collider{}};
  Vec q(3);
  for (double d : {1e-2, 1e-3, 1e-4}) {
    q << 0.0, 0.0, 1.0 - d;
    const double inside = sdf_collision_energy(q, pts, sphere, 100.0);
    q << 0.0, 0.0, 1.0 + d;
    const double outside = sdf_collision_energy(q, pts, sphere, 100.0);
    CHECK(std::abs(inside - outside) <= 100.0 * d * d * (1.0 + 1e-9));
  }
}

TEST_CASE("collider shapes give exact signed distances") {
  Collider box;
  box.shape = Collider::Shape::Box;
  box.size = {1.0, 2.0, 3.0};
  CHECK(box.local_distance({2.0, 0.0, 0.0}, nullptr) == doctest::Approx(1.0));
  CHECK(box.local_distance({0.5, 0.0, 0.0}, nullptr) == doctest::Approx(-0.5));
  CHECK(box.local_distance({2.0, 3.0, 0.0}, nullptr) == doctest::Approx(std::sqrt(2.0)));
  Collider capsule;
  capsule.shape = Collider::Shape::Capsule;
  capsule.size = {0.5, 1.0, 0.0};
  CHECK(capsule.local_distance({0.0, 3.0, 0.0}, nullptr) == doctest::Approx(1.5));
  CHECK(capsule.local_distance({1.0, 0.3, 0.0}, nullptr) == doctest::Approx(0.5));
  Collider plane;
  plane.shape = Collider::Shape::Plane;
  plane.size = Eigen::Vector3d::Constant(-1.0);
  CHECK(plane.local_distance({4.0, 0.5, 0.0}, nullptr) == doctest::Approx(1.5));
}

TEST_CASE("penalty and sdf gradients match finite differences, including body-attached colliders") {
  std::mt19937_64 rng(28);
  // Two rigid bodies: a jointed pair with a box collider on body 1 tested
  // against points on body 0, plus a world plane and sphere.
  std::vector<PointRef> pts;
  for (int k = 0; k < 6; ++k) pts.push_back(PointRef::body(0, random_vector(rng, 3, 0.4)));
  Collider box;
  box.shape = Collider::Shape::Box;
  box.size = {0.3, 0.5, 0.4};
  box.center = {0.1, 0.0, 0.0};
  box.body = 1;
  Collider capsule;
  capsule.shape = Collider::Shape::Capsule;
  capsule.size = {0.3, 0.4, 0.0};
  capsule.body = 1;
  Collider plane;
  plane.shape = Collider::Shape::Plane;
  plane.normal = Eigen::Vector3d(0.2, 1.0, 0.1).normalized();
  plane.size = Eigen::Vector3d::Constant(0.3);
  Collider sphere;
  sphere.size = Eigen::Vector3d::Constant(0.7);
  auto sdf = std::make_shared<SdfConstraint>(pts, std::vector<Collider>{box, capsule, plane, sphere});
  auto joint = std::make_shared<PointMatchConstraint>(PointRef::body(0, {0.2, 0.1, 0.0}),
                                                      PointRef::body(1, {-0.2, 0.0, 0.1}), 3);
  auto pin = std::make_shared<PointMatchConstraint>(PointRef::body(0, {0.0, 0.3, 0.0}),
                                                    PointRef::world({0.0, 1.0, 0.0}), 3);
  const PenaltyTerm term("mixed", 50.0, 200.0, {joint, pin}, {sdf});

  int active = 0;
  for (int trial = 0; trial < 20; ++trial) {
    Vec q = Vec::Zero(2 * kRigidCoeffs);
    for (int b = 0; b < 2; ++b) {
      const Eigen::Matrix3d r = random_rotation(rng) + 0.1 * Eigen::Matrix3d::Random();
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) q[kRigidCoeffs * b + 4 * i + j] = r(i, j);
        q[kRigidCoeffs * b + 4 * i + 3] = 0.3 * std::normal_distribution<double>()(rng);
      }
    }
    if (sdf_collision_energy(q, pts, {box, capsule, plane, sphere}, 1.0) > 0.0) ++active;
    CHECK(term_gradient_error(term, q) < 1e-5);
  }
  CHECK(active > 5);
}

TEST_CASE("vertex sdf gradient matches finite differences") {
  std::mt19937_64 rng(29);
  std::vector<PointRef> pts;
  for (int v = 0; v < 8; ++v) pts.push_back(PointRef::vertex(v, 3));
  Collider sphere;
  sphere.size = Eigen::Vector3d::Constant(0.8);
  sphere.center = {0.1, -0.1, 0.0};
  auto sdf = std::make_shared<SdfConstraint>(pts, std::vector<Collider>{sphere});
  const PenaltyTerm term("collision", 1.0, 300.0, {}, {sdf});
  for (int trial = 0; trial < 20; ++trial) {
    CHECK(term_gradient_error(term, random_vector(rng, 24, 0.6)) < 1e-5);
  }
}

TEST_CASE("elastic energies are translation invariant") {
  std::mt19937_64 rng(30);
  const TetMesh box = make_tet_box(3, 2, 2, 1.0, 0.5, 0.5);
  const NeoHookeanTerm<3> fem(box.vertices, box.tets, soft());
  const TriMesh sheet = make_sheet(4, 4, 1.0, 1.0);
  const ClothTerm cloth(sheet.vertices, sheet.triangles, soft());
  for (int trial = 0; trial < 10; ++trial) {
    const Vec q = flat(box.vertices) + random_vector(rng, box.vertices.size(), 0.1);
    const Eigen::Vector3d t = random_vector(rng, 3, 5.0);
    Vec qt = q;
    for (Eigen::Index v = 0; v < box.vertices.rows(); ++v) qt.segment<3>(3 * v) += t;
    const double e = fem.energy(q, {});
    CHECK(std::abs(fem.energy(qt, {}) - e) < 1e-10 * std::max(1.0, std::abs(e)));

    const Vec p = flat(sheet.vertices) + random_vector(rng, sheet.vertices.size(), 0.1);
    Vec pt = p;
    for (Eigen::Index v = 0; v < sheet.vertices.rows(); ++v) pt.segment<3>(3 * v) += t;
    const double ec = cloth.energy(p, {});
    CHECK(std::abs(cloth.energy(pt, {}) - ec) < 1e-10 * std::max(1.0, std::abs(ec)));
  }
}

TEST_CASE("energies stay finite for extreme configurations") {
  const TetMesh box = make_tet_box(2, 2, 2, 1.0, 1.0, 1.0);
  const NeoHookeanTerm<3> fem(box.vertices, box.tets, soft());
  const TriMesh sheet = make_sheet(3, 3, 1.0, 1.0);
  const ClothTerm cloth(sheet.vertices, sheet.triangles, soft());
  CHECK(std::isfinite(fem.energy(Vec::Zero(box.vertices.size()), {})));
  CHECK(std::isfinite(fem.energy(-flat(box.vertices), {})));
  CHECK(std::isfinite(cloth.energy(Vec::Zero(sheet.vertices.size()), {})));
  Vec g = Vec::Zero(sheet.vertices.size());
  cloth.accumulate_gradient(Vec::Zero(sheet.vertices.size()), {}, g);
  CHECK(g.allFinite());
}

namespace {

SystemDef composite_system() {
  const char* text = R"(
kind: fem
name: composite
conditions:
  - {name: stiff, min: 1.0, max: 3.0}
  - {name: shift, min: -0.2, max: 0.2}
mesh: {generate: grid2d, nx: 6, ny: 3, width: 2.0, height: 0.5}
material: {youngs_modulus: 80.0, poisson_ratio: 0.3}
terms:
  - {type: neohookean, stiffness_condition: stiff, region: {axis: 0, above: 1.0}}
  - {type: gravity, g: [0.0, -9.8]}
  - {type: load, force: [0.5, 0.0], select: {axis: 0, side: max}}
  - {type: pin, weight: 1000.0, select: {axis: 0, side: min}}
  - {type: pin, weight: 500.0, select: {axis: 0, side: max}, offset_condition: shift, offset_axis: 0}
  - {type: collision, weight: 300.0, colliders: [{shape: plane, normal: [0, 1, 0], offset: -0.1}]}
)";
  return build_system(YAML::Load(text));
}

}  // namespace

TEST_CASE("composite system gradient matches finite differences") {
  const SystemDef sys = composite_system();
  CHECK(sys.n == 36);
  CHECK(sys.condition_dim() == 2);
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec c = sys.sample_condition(rng);
    const Vec q = sys.q_seed + random_vector(rng, sys.n, 0.08);
    const Vec g = energy_gradient(sys, q, view(c));
    auto f = [&](const Vec& x) { return sys.energy(x, view(c)); };
    CHECK(relative_error(g, finite_difference_gradient(f, q, 1e-6)) < 1e-5);
  }
}

TEST_CASE("gradient of a sum is the sum of gradients") {
  const SystemDef sys = composite_system();
  std::mt19937_64 rng(32);
  const Vec c = sys.default_condition();
  const Vec q = sys.q_seed + random_vector(rng, sys.n, 0.05);
  Vec sum = Vec::Zero(sys.n);
  double esum = 0.0;
  for (const auto& t : sys.terms) {
    Vec g = Vec::Zero(sys.n);
    esum += t->accumulate_gradient(q, view(c), g);
    sum += g;
  }
  Vec total;
  const double e = sys.energy_and_gradient(q, view(c), total);
  CHECK(e == doctest::Approx(esum).epsilon(1e-12));
  CHECK((total - sum).cwiseAbs().maxCoeff() < 1e-10 * (1.0 + sum.cwiseAbs().maxCoeff()));
}

TEST_CASE("mass is positive and does not depend on q") {
  const SystemDef sys = composite_system();
  CHECK(sys.mass_diag.minCoeff() > 0.0);
  CHECK(std::abs(sys.mass_diag.sum() - 2.0 * 0.5 * 2.0) < 1e-12);  // area * density per axis
}

TEST_CASE("condition sampling stays in declared ranges") {
  const SystemDef sys = composite_system();
  std::mt19937_64 rng(33);
  for (int k = 0; k < 200; ++k) {
    const Vec c = sys.sample_condition(rng);
    CHECK(c[0] >= 1.0);
    CHECK(c[0] <= 3.0);
    CHECK(c[1] >= -0.2);
    CHECK(c[1] <= 0.2);
  }
  CHECK(sys.default_condition()[0] == 2.0);
}

TEST_CASE("build_system rejects an empty term list") {
  CHECK_THROWS_AS(build_system(YAML::Load("{kind: abstract, n: 2, terms: []}")), ConfigError);
}

TEST_CASE("build_system names a missing mesh path") {
  try {
    build_system(YAML::Load("{kind: fem, mesh: {planar: true}, terms: [{type: neohookean}]}"));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("system.mesh.path") != std::string::npos);
  }
}

TEST_CASE("build_system builds cloth and rigid systems") {
  const SystemDef cloth = build_system(YAML::Load(R"(
kind: cloth
mesh: {generate: sheet, nx: 4, nz: 4, width: 1.0, depth: 1.0}
terms:
  - {type: cloth}
  - {type: gravity, g: [0, -9.8, 0]}
  - {type: collision, weight: 100.0, colliders: [{shape: sphere, radius: 0.3, center: [0.5, -0.5, 0.5]}]}
)"));
  CHECK(cloth.n == 48);
  CHECK(cloth.geometry.kind == SystemGeometry::Kind::Mesh);

  const SystemDef chain = build_system(YAML::Load(R"(
kind: rigid
bodies: {generate: chain, count: 3}
terms:
  - {type: orthogonality, stiffness: 100.0}
  - {type: gravity, g: [0, -9.8, 0]}
  - type: joints
    weight: 1000.0
    joints:
      - {a: 0, b: world, anchor_a: [0, 0.1, 0]}
      - {a: 1, b: 0, anchor_a: [0, 0.1, 0], anchor_b: [0, -0.1, 0]}
  - type: collision
    weight: 100.0
    colliders: [{shape: capsule, radius: 0.05, half_length: 0.1, body: 0, against: [2]}]
)"));
  CHECK(chain.n == 36);
  CHECK(chain.geometry.bodies.size() == 3);
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 5; ++trial) {
    const Vec q = chain.q_seed + random_vector(rng, chain.n, 0.05);
    const Vec g = energy_gradient(chain, q);
    auto f = [&](const Vec& x) { return chain.energy(x); };
    CHECK(relative_error(g, finite_difference_gradient(f, q, 1e-6)) < 1e-5);
  }
}

TEST_CASE("finite-difference Hessian of quadratic energies") {
  const SystemDef spring = build_system(YAML::Load("{kind: abstract, n: 1, terms: [{type: quadratic, stiffness: [4.0]}]}"));
  const Mat h1 = energy_hessian(spring, Vec::Constant(1, 0.3));
  CHECK(h1(0, 0) == doctest::Approx(4.0).epsilon(1e-9));

  const SystemDef quad = build_system(YAML::Load(R"(
kind: abstract
n: 3
terms:
  - type: quadratic
    matrix: [[4, 1, 0], [1, 3, 0.5], [0, 0.5, 2]]
)"));
  Mat k(3, 3);
  k << 4, 1, 0, 1, 3, 0.5, 0, 0.5, 2;
  const Mat h = energy_hessian(quad, Vec::Constant(3, 0.7));
  CHECK((h - k).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("finite-difference Hessian is symmetric on a nonlinear system") {
  const SystemDef sys = composite_system();
  std::mt19937_64 rng(35);
  const Vec q = sys.q_seed + random_vector(rng, sys.n, 0.05);
  const Vec c = sys.default_condition();
  const Mat h = energy_hessian(sys, q, view(c));
  CHECK((h - h.transpose()).cwiseAbs().maxCoeff() < 1e-6 * h.cwiseAbs().maxCoeff());
  CHECK_THROWS_AS(energy_hessian(sys, q, view(c), 1e-5, 10), ConfigError);
}
