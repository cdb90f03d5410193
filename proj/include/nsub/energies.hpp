#pragma once

#include <Eigen/Dense>

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "nsub/mesh.hpp"
#include "nsub/systems.hpp"

namespace nsub {

struct Material {
  double youngs_modulus = 1.0e4;
  double poisson_ratio = 0.3;
  double density = 1.0;
  double bend_stiffness = 1.0e-3;     // cloth hinges
  double stretch_stiffness = 1.0e3;   // cloth membrane, replaces youngs_modulus

  void validate() const;
};

struct Lame {
  double mu;
  double lambda;
};

Lame lame_from_youngs(double youngs_modulus, double poisson_ratio);
// Plane-stress constants for membranes.
Lame lame_plane_stress(double stiffness, double poisson_ratio);

// Stable neo-Hookean energy density, shifted so that psi(I) = 0:
//   mu/2 (I_C - D) + lambda/2 (J - alpha)^2 - mu/2 log(I_C + 1) - psi_rest,
//   alpha = 1 + mu/lambda - mu/((D + 1) lambda).
template <int D>
double snh_density(const Eigen::Matrix<double, D, D>& F, const Lame& lame);

// d psi / d F.
template <int D>
Eigen::Matrix<double, D, D> snh_stress(const Eigen::Matrix<double, D, D>& F, const Lame& lame);

// Elements whose rest centroid coordinate along `axis` exceeds `threshold`
// get their Lame parameters multiplied by c[condition_index].
struct StiffnessRegion {
  int condition_index = -1;
  int axis = 0;
  double threshold = 0.0;
};

// Stable neo-Hookean finite elements: triangles (D = 2) or tetrahedra (D = 3).
template <int D>
class NeoHookeanTerm final : public EnergyTerm {
 public:
  using Element = std::array<int, D + 1>;

  NeoHookeanTerm(const VertexMatrix& rest, std::vector<Element> elements, const Material& material,
                 StiffnessRegion region = {});

  std::string_view name() const override { return "neohookean"; }
  double energy(const Vec& q, ConditionView c) const override;
  double accumulate_gradient(const Vec& q, ConditionView c, Vec& grad) const override;

  // Per-vertex lumped mass: element mass split equally among its vertices.
  Vec vertex_masses() const;

 private:
  using MatD = Eigen::Matrix<double, D, D>;

  MatD deformation_gradient(const Vec& q, std::size_t e) const;
  double stiffness_scale(std::size_t e, ConditionView c) const;

  std::vector<Element> elements_;
  std::vector<MatD> rest_inverse_;
  std::vector<double> rest_volume_;
  std::vector<bool> in_region_;
  int vertex_count_;
  Lame lame_;
  double density_;
  StiffnessRegion region_;
};

// E = coeffs^T q. Gravity and constant external loads.
class LinearTerm final : public EnergyTerm {
 public:
  LinearTerm(std::string name, Vec coeffs);

  std::string_view name() const override { return name_; }
  double energy(const Vec& q, ConditionView c) const override;
  double accumulate_gradient(const Vec& q, ConditionView c, Vec& grad) const override;

 private:
  std::string name_;
  Vec coeffs_;
};

// Gravity coefficients for point masses (-m_i g . x_i).
Vec gravity_coefficients(const Vec& vertex_masses, int dim, const Eigen::VectorXd& g);

// E = 1/2 (q - rest)^T K (q - rest).
class QuadraticTerm final : public EnergyTerm {
 public:
  QuadraticTerm(Mat stiffness, Vec rest);

  std::string_view name() const override { return "quadratic"; }
  double energy(const Vec& q, ConditionView c) const override;
  double accumulate_gradient(const Vec& q, ConditionView c, Vec& grad) const override;

 private:
  Mat stiffness_;
  Vec rest_;
};

// Cloth: constant-strain StVK membrane on faces plus discrete hinge bending
// k_bend * (theta - theta_rest)^2 * |e|^2 / (A1 + A2) on interior edges.
class ClothTerm final : public EnergyTerm {
 public:
  ClothTerm(const VertexMatrix& rest, std::vector<std::array<int, 3>> triangles,
            const Material& material);

  std::string_view name() const override { return "cloth"; }
  double energy(const Vec& q, ConditionView c) const override;
  double accumulate_gradient(const Vec& q, ConditionView c, Vec& grad) const override;

  double stretch_energy(const Vec& q) const;
  double bending_energy(const Vec& q) const;
  Vec vertex_masses() const;
  const std::vector<double>& hinge_weights() const { return hinge_weight_; }

 private:
  std::vector<std::array<int, 3>> triangles_;
  std::vector<Eigen::Matrix2d> rest_inverse_;
  std::vector<double> rest_area_;
  std::vector<Hinge> hinges_;
  std::vector<double> rest_angle_;
  std::vector<double> hinge_weight_;
  int vertex_count_;
  Lame lame_;
  double bend_stiffness_;
  double density_;
};

// Signed dihedral angle at hinge (x0, x1) between faces (x0, x1, x2) and
// (x1, x0, x3); zero when flat.
double hinge_angle(const Eigen::Vector3d& x0, const Eigen::Vector3d& x1, const Eigen::Vector3d& x2,
                   const Eigen::Vector3d& x3);

// Rigid body layout: 12 coefficients per body, row-major [R | t].
inline constexpr int kRigidCoeffs = 12;

Eigen::Matrix3d body_rotation(const Vec& q, int body);
Eigen::Vector3d body_translation(const Vec& q, int body);

// stiffness * sum_b |R_b^T R_b - I|_F^2.
class RigidOrthogonalityTerm final : public EnergyTerm {
 public:
  RigidOrthogonalityTerm(int body_count, double stiffness);

  std::string_view name() const override { return "orthogonality"; }
  double energy(const Vec& q, ConditionView c) const override;
  double accumulate_gradient(const Vec& q, ConditionView c, Vec& grad) const override;

 private:
  int body_count_;
  double stiffness_;
};

// A point whose world position is an affine function of q: a mesh vertex, a
// point fixed in a rigid body frame, or a fixed world point.
struct PointRef {
  enum class Kind { Vertex, Body, World };
  Kind kind = Kind::World;
  int index = 0;  // vertex or body index
  int dim = 3;    // vertex dimension (2 or 3)
  Eigen::Vector3d local = Eigen::Vector3d::Zero();

  static PointRef vertex(int i, int dim);
  static PointRef body(int b, const Eigen::Vector3d& local);
  static PointRef world(const Eigen::Vector3d& p);

  Eigen::Vector3d position(const Vec& q) const;
  // grad += (d position / d q)^T dir
  void add_gradient(const Eigen::Vector3d& dir, Vec& grad) const;
};

// Vector-valued constraint function C(q, c).
class Constraint {
 public:
  virtual ~Constraint() = default;
  virtual int size() const = 0;
  virtual void evaluate(const Vec& q, ConditionView c, double* out) const = 0;
  // grad += (dC/dq)^T w
  virtual void add_vjp(const Vec& q, ConditionView c, const double* w, Vec& grad) const = 0;
};

// C = p_a - p_b - offset, with offset = c[offset_condition] along
// offset_axis (zero when unbound). Pins and joints.
class PointMatchConstraint final : public Constraint {
 public:
  PointMatchConstraint(PointRef a, PointRef b, int components, int offset_condition = -1,
                       int offset_axis = 0);

  int size() const override { return components_; }
  void evaluate(const Vec& q, ConditionView c, double* out) const override;
  void add_vjp(const Vec& q, ConditionView c, const double* w, Vec& grad) const override;

 private:
  PointRef a_;
  PointRef b_;
  int components_;
  int offset_condition_;
  int offset_axis_;
};

// Analytic signed distance primitive, optionally attached to a rigid body.
struct Collider {
  enum class Shape { Sphere, Box, Capsule, Plane };
  Shape shape = Shape::Sphere;
  Eigen::Vector3d size = Eigen::Vector3d::Ones();  // radius | half extents | (radius, half length)
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d normal = Eigen::Vector3d::UnitY();  // plane only; offset = size.x()
  int body = -1;

  // Signed distance in the collider frame, with its gradient.
  double local_distance(const Eigen::Vector3d& p, Eigen::Vector3d* grad) const;
  // Signed distance of a world point, with gradients wrt the point and (if
  // attached) the body coefficients added into `grad`, scaled by `w`.
  double distance(const Vec& q, const Eigen::Vector3d& p) const;
  void add_distance_gradient(const Vec& q, const Eigen::Vector3d& p, double w,
                             Eigen::Vector3d& point_grad, Vec& grad) const;
};

// One inequality per (point, collider): signed distance >= 0.
class SdfConstraint final : public Constraint {
 public:
  SdfConstraint(std::vector<PointRef> points, std::vector<Collider> colliders);

  int size() const override;
  void evaluate(const Vec& q, ConditionView c, double* out) const override;
  void add_vjp(const Vec& q, ConditionView c, const double* w, Vec& grad) const override;

 private:
  std::vector<PointRef> points_;
  std::vector<Collider> colliders_;
};

// w_eq |C_eq|^2 + w_ineq |min(C_ineq, 0)|^2.
class PenaltyTerm final : public EnergyTerm {
 public:
  PenaltyTerm(std::string name, double w_eq, double w_ineq,
              std::vector<std::shared_ptr<const Constraint>> equalities,
              std::vector<std::shared_ptr<const Constraint>> inequalities);

  std::string_view name() const override { return name_; }
  double energy(const Vec& q, ConditionView c) const override;
  double accumulate_gradient(const Vec& q, ConditionView c, Vec& grad) const override;

 private:
  std::string name_;
  double w_eq_;
  double w_ineq_;
  std::vector<std::shared_ptr<const Constraint>> equalities_;
  std::vector<std::shared_ptr<const Constraint>> inequalities_;
};

// Free functions matching the term classes, for direct use.
double rigid_orthogonality_energy(const Vec& q, double stiffness);
double penalty_energy(const Vec& q, ConditionView c, const std::vector<std::shared_ptr<const Constraint>>& eq,
                      const std::vector<std::shared_ptr<const Constraint>>& ineq, double w_eq,
                      double w_ineq);
double sdf_collision_energy(const Vec& q, const std::vector<PointRef>& points,
                            const std::vector<Collider>& colliders, double w_ineq);

}  // namespace nsub
