#include <algorithm>
#include <cmath>
#include <string>

#include "nsub/energies.hpp"
#include "nsub/errors.hpp"

namespace nsub {

Eigen::Matrix3d body_rotation(const Vec& q, int body) {
  Eigen::Matrix3d r;
  const int base = kRigidCoeffs * body;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r(i, j) = q[base + 4 * i + j];
  }
  return r;
}

Eigen::Vector3d body_translation(const Vec& q, int body) {
  const int base = kRigidCoeffs * body;
  return {q[base + 3], q[base + 7], q[base + 11]};
}

RigidOrthogonalityTerm::RigidOrthogonalityTerm(int body_count, double stiffness)
    : body_count_(body_count), stiffness_(stiffness) {
  if (body_count_ <= 0) throw ConfigError("orthogonality: need at least one body");
  if (!(stiffness_ > 0.0)) throw ConfigError("orthogonality: stiffness must be > 0");
}

double RigidOrthogonalityTerm::energy(const Vec& q, ConditionView) const {
  if (q.size() != kRigidCoeffs * body_count_) {
    throw ConfigError("orthogonality: configuration size mismatch");
  }
  double total = 0.0;
  for (int b = 0; b < body_count_; ++b) {
    const Eigen::Matrix3d r = body_rotation(q, b);
    total += (r.transpose() * r - Eigen::Matrix3d::Identity()).squaredNorm();
  }
  return stiffness_ * total;
}

double RigidOrthogonalityTerm::accumulate_gradient(const Vec& q, ConditionView, Vec& grad) const {
  if (q.size() != kRigidCoeffs * body_count_) {
    throw ConfigError("orthogonality: configuration size mismatch");
  }
  double total = 0.0;
  for (int b = 0; b < body_count_; ++b) {
    const Eigen::Matrix3d r = body_rotation(q, b);
    const Eigen::Matrix3d s = r.transpose() * r - Eigen::Matrix3d::Identity();
    total += s.squaredNorm();
    // d/dR |R^T R - I|^2 = 4 R S for symmetric S.
    const Eigen::Matrix3d g = 4.0 * stiffness_ * r * s;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) grad[kRigidCoeffs * b + 4 * i + j] += g(i, j);
    }
  }
  return stiffness_ * total;
}

double rigid_orthogonality_energy(const Vec& q, double stiffness) {
  if (q.size() % kRigidCoeffs != 0) throw ConfigError("orthogonality: size not a multiple of 12");
  return RigidOrthogonalityTerm(static_cast<int>(q.size() / kRigidCoeffs), stiffness).energy(q, {});
}

PointRef PointRef::vertex(int i, int dim) {
  PointRef p;
  p.kind = Kind::Vertex;
  p.index = i;
  p.dim = dim;
  return p;
}

PointRef PointRef::body(int b, const Eigen::Vector3d& local) {
  PointRef p;
  p.kind = Kind::Body;
  p.index = b;
  p.local = local;
  return p;
}

PointRef PointRef::world(const Eigen::Vector3d& pos) {
  PointRef p;
  p.kind = Kind::World;
  p.local = pos;
  return p;
}

Eigen::Vector3d PointRef::position(const Vec& q) const {
  switch (kind) {
    case Kind::Vertex: {
      Eigen::Vector3d p = Eigen::Vector3d::Zero();
      p.head(dim) = q.segment(dim * index, dim);
      return p;
    }
    case Kind::Body:
      return body_rotation(q, index) * local + body_translation(q, index);
    case Kind::World:
      break;
  }
  return local;
}

void PointRef::add_gradient(const Eigen::Vector3d& dir, Vec& grad) const {
  switch (kind) {
    case Kind::Vertex:
      grad.segment(dim * index, dim) += dir.head(dim);
      return;
    case Kind::Body: {
      const int base = kRigidCoeffs * index;
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) grad[base + 4 * i + j] += dir[i] * local[j];
        grad[base + 4 * i + 3] += dir[i];
      }
      return;
    }
    case Kind::World:
      return;
  }
}

PointMatchConstraint::PointMatchConstraint(PointRef a, PointRef b, int components,
                                           int offset_condition, int offset_axis)
    : a_(a), b_(b), components_(components), offset_condition_(offset_condition),
      offset_axis_(offset_axis) {
  if (components_ < 1 || components_ > 3) throw ConfigError("point constraint: bad component count");
  if (offset_axis_ < 0 || offset_axis_ >= 3) throw ConfigError("point constraint: bad offset axis");
}

void PointMatchConstraint::evaluate(const Vec& q, ConditionView c, double* out) const {
  Eigen::Vector3d d = a_.position(q) - b_.position(q);
  if (offset_condition_ >= 0 && static_cast<std::size_t>(offset_condition_) < c.size()) {
    d[offset_axis_] -= c[static_cast<std::size_t>(offset_condition_)];
  }
  for (int k = 0; k < components_; ++k) out[k] = d[k];
}

void PointMatchConstraint::add_vjp(const Vec&, ConditionView, const double* w, Vec& grad) const {
  Eigen::Vector3d dir = Eigen::Vector3d::Zero();
  for (int k = 0; k < components_; ++k) dir[k] = w[k];
  a_.add_gradient(dir, grad);
  b_.add_gradient(-dir, grad);
}

double Collider::local_distance(const Eigen::Vector3d& p, Eigen::Vector3d* grad) const {
  switch (shape) {
    case Shape::Sphere: {
      const double r = p.norm();
      if (grad) *grad = r > 0.0 ? Eigen::Vector3d(p / r) : Eigen::Vector3d::UnitY();
      return r - size.x();
    }
    case Shape::Box: {
      const Eigen::Vector3d d = p.cwiseAbs() - size;
      const Eigen::Vector3d outside = d.cwiseMax(0.0);
      const double out_len = outside.norm();
      if (out_len > 0.0) {
        if (grad) *grad = (outside / out_len).cwiseProduct(p.cwiseSign());
        return out_len;
      }
      Eigen::Index k = 0;
      const double inside = d.maxCoeff(&k);
      if (grad) {
        grad->setZero();
        (*grad)[k] = p[k] >= 0.0 ? 1.0 : -1.0;
      }
      return inside;
    }
    case Shape::Capsule: {
      const double half = size.y();
      const Eigen::Vector3d closest(0.0, std::clamp(p.y(), -half, half), 0.0);
      const Eigen::Vector3d diff = p - closest;
      const double r = diff.norm();
      if (grad) *grad = r > 0.0 ? Eigen::Vector3d(diff / r) : Eigen::Vector3d::UnitX();
      return r - size.x();
    }
    case Shape::Plane: {
      const Eigen::Vector3d n = normal.normalized();
      if (grad) *grad = n;
      return n.dot(p) - size.x();
    }
  }
  return 0.0;
}

double Collider::distance(const Vec& q, const Eigen::Vector3d& p) const {
  if (body < 0) return local_distance(p - center, nullptr);
  const Eigen::Matrix3d r = body_rotation(q, body);
  const Eigen::Vector3d rel = p - body_translation(q, body);
  return local_distance(r.transpose() * rel - center, nullptr);
}

void Collider::add_distance_gradient(const Vec& q, const Eigen::Vector3d& p, double w,
                                     Eigen::Vector3d& point_grad, Vec& grad) const {
  Eigen::Vector3d g;
  if (body < 0) {
    local_distance(p - center, &g);
    point_grad += w * g;
    return;
  }
  // Local point l = R^T (p - t) - center.
  const Eigen::Matrix3d r = body_rotation(q, body);
  const Eigen::Vector3d rel = p - body_translation(q, body);
  local_distance(r.transpose() * rel - center, &g);
  const Eigen::Vector3d world_dir = w * (r * g);
  point_grad += world_dir;
  const int base = kRigidCoeffs * body;
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 3; ++k) grad[base + 4 * i + k] += w * rel[i] * g[k];
    grad[base + 4 * i + 3] -= world_dir[i];
  }
}

SdfConstraint::SdfConstraint(std::vector<PointRef> points, std::vector<Collider> colliders)
    : points_(std::move(points)), colliders_(std::move(colliders)) {
  for (const auto& c : colliders_) {
    if (c.shape != Collider::Shape::Plane && !(c.size.minCoeff() >= 0.0)) {
      throw ConfigError("collider: sizes must be non-negative");
    }
  }
}

int SdfConstraint::size() const {
  return static_cast<int>(points_.size() * colliders_.size());
}

void SdfConstraint::evaluate(const Vec& q, ConditionView, double* out) const {
  int k = 0;
  for (const auto& p : points_) {
    const Eigen::Vector3d x = p.position(q);
    for (const auto& c : colliders_) out[k++] = c.distance(q, x);
  }
}

void SdfConstraint::add_vjp(const Vec& q, ConditionView, const double* w, Vec& grad) const {
  int k = 0;
  for (const auto& p : points_) {
    const Eigen::Vector3d x = p.position(q);
    Eigen::Vector3d point_grad = Eigen::Vector3d::Zero();
    for (const auto& c : colliders_) {
      const double wk = w[k++];
      if (wk != 0.0) c.add_distance_gradient(q, x, wk, point_grad, grad);
    }
    p.add_gradient(point_grad, grad);
  }
}

PenaltyTerm::PenaltyTerm(std::string name, double w_eq, double w_ineq,
                         std::vector<std::shared_ptr<const Constraint>> equalities,
                         std::vector<std::shared_ptr<const Constraint>> inequalities)
    : name_(std::move(name)), w_eq_(w_eq), w_ineq_(w_ineq), equalities_(std::move(equalities)),
      inequalities_(std::move(inequalities)) {
  if (!equalities_.empty() && !(w_eq_ > 0.0)) throw ConfigError(name_ + ": weight must be > 0");
  if (!inequalities_.empty() && !(w_ineq_ > 0.0)) throw ConfigError(name_ + ": weight must be > 0");
}

double PenaltyTerm::energy(const Vec& q, ConditionView c) const {
  double total = 0.0;
  std::vector<double> values;
  for (const auto& con : equalities_) {
    values.resize(static_cast<std::size_t>(con->size()));
    con->evaluate(q, c, values.data());
    for (double v : values) total += w_eq_ * v * v;
  }
  for (const auto& con : inequalities_) {
    values.resize(static_cast<std::size_t>(con->size()));
    con->evaluate(q, c, values.data());
    for (double v : values) {
      const double m = std::min(v, 0.0);
      total += w_ineq_ * m * m;
    }
  }
  return total;
}

double PenaltyTerm::accumulate_gradient(const Vec& q, ConditionView c, Vec& grad) const {
  double total = 0.0;
  std::vector<double> values;
  for (const auto& con : equalities_) {
    values.resize(static_cast<std::size_t>(con->size()));
    con->evaluate(q, c, values.data());
    for (double& v : values) {
      total += w_eq_ * v * v;
      v *= 2.0 * w_eq_;
    }
    con->add_vjp(q, c, values.data(), grad);
  }
  for (const auto& con : inequalities_) {
    values.resize(static_cast<std::size_t>(con->size()));
    con->evaluate(q, c, values.data());
    bool active = false;
    for (double& v : values) {
      const double m = std::min(v, 0.0);
      total += w_ineq_ * m * m;
      v = 2.0 * w_ineq_ * m;
      active = active || m != 0.0;
    }
    if (active) con->add_vjp(q, c, values.data(), grad);
  }
  return total;
}

double penalty_energy(const Vec& q, ConditionView c,
                      const std::vector<std::shared_ptr<const Constraint>>& eq,
                      const std::vector<std::shared_ptr<const Constraint>>& ineq, double w_eq,
                      double w_ineq) {
  return PenaltyTerm("penalty", w_eq, w_ineq, eq, ineq).energy(q, c);
}

double sdf_collision_energy(const Vec& q, const std::vector<PointRef>& points,
                            const std::vector<Collider>& colliders, double w_ineq) {
  auto con = std::make_shared<const SdfConstraint>(points, colliders);
  return PenaltyTerm("collision", 1.0, w_ineq, {}, {con}).energy(q, {});
}

LinearTerm::LinearTerm(std::string name, Vec coeffs)
    : name_(std::move(name)), coeffs_(std::move(coeffs)) {}

double LinearTerm::energy(const Vec& q, ConditionView) const {
  if (q.size() != coeffs_.size()) throw ConfigError(name_ + ": configuration size mismatch");
  return coeffs_.dot(q);
}

double LinearTerm::accumulate_gradient(const Vec& q, ConditionView c, Vec& grad) const {
  grad += coeffs_;
  return energy(q, c);
}

Vec gravity_coefficients(const Vec& vertex_masses, int dim, const Eigen::VectorXd& g) {
  if (g.size() != dim) throw ConfigError("gravity: vector must have " + std::to_string(dim) + " entries");
  Vec coeffs(vertex_masses.size() * dim);
  for (Eigen::Index i = 0; i < vertex_masses.size(); ++i) {
    coeffs.segment(dim * i, dim) = -vertex_masses[i] * g;
  }
  return coeffs;
}

QuadraticTerm::QuadraticTerm(Mat stiffness, Vec rest)
    : stiffness_(std::move(stiffness)), rest_(std::move(rest)) {
  if (stiffness_.rows() != stiffness_.cols() || stiffness_.rows() != rest_.size()) {
    throw ConfigError("quadratic: stiffness must be square and match rest size");
  }
}

double QuadraticTerm::energy(const Vec& q, ConditionView) const {
  if (q.size() != rest_.size()) throw ConfigError("quadratic: configuration size mismatch");
  const Vec d = q - rest_;
  return 0.5 * d.dot(stiffness_ * d);
}

double QuadraticTerm::accumulate_gradient(const Vec& q, ConditionView c, Vec& grad) const {
  const double e = energy(q, c);
  const Vec d = q - rest_;
  grad += 0.5 * (stiffness_ + stiffness_.transpose()) * d;
  return e;
}

}  // namespace nsub
