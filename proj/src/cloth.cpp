#include <cmath>

#include "nsub/energies.hpp"
#include "nsub/errors.hpp"

namespace nsub {

namespace {

using Vec3 = Eigen::Vector3d;
using Mat32 = Eigen::Matrix<double, 3, 2>;

Vec3 vertex(const Vec& q, int i) { return q.segment<3>(3 * i); }

struct HingeGradient {
  double angle;
  std::array<Vec3, 4> d;  // d theta / d x_k
  bool valid;
};

HingeGradient hinge_angle_gradient(const Vec3& x0, const Vec3& x1, const Vec3& x2,
                                   const Vec3& x3) {
  HingeGradient out{};
  const Vec3 e = x1 - x0;
  const Vec3 n1 = e.cross(x2 - x0);
  const Vec3 n2 = (x0 - x1).cross(x3 - x1);
  const double el = e.norm();
  const double n1sq = n1.squaredNorm();
  const double n2sq = n2.squaredNorm();
  out.angle = hinge_angle(x0, x1, x2, x3);
  out.valid = el > 0.0 && n1sq > 0.0 && n2sq > 0.0;
  if (!out.valid) return out;
  const Vec3 a1 = n1 / n1sq;
  const Vec3 a2 = n2 / n2sq;
  const Vec3 eh = e / el;
  out.d[2] = -el * a1;
  out.d[3] = -el * a2;
  out.d[0] = -((x2 - x1).dot(eh) * a1 + (x3 - x1).dot(eh) * a2);
  out.d[1] = (x2 - x0).dot(eh) * a1 + (x3 - x0).dot(eh) * a2;
  return out;
}

}  // namespace

double hinge_angle(const Vec3& x0, const Vec3& x1, const Vec3& x2, const Vec3& x3) {
  const Vec3 e = x1 - x0;
  const Vec3 n1 = e.cross(x2 - x0);
  const Vec3 n2 = (x0 - x1).cross(x3 - x1);
  const double el = e.norm();
  if (el == 0.0) return 0.0;
  return std::atan2(n1.cross(n2).dot(e / el), n1.dot(n2));
}

ClothTerm::ClothTerm(const VertexMatrix& rest, std::vector<std::array<int, 3>> triangles,
                     const Material& material)
    : triangles_(std::move(triangles)),
      vertex_count_(static_cast<int>(rest.rows())),
      lame_(lame_plane_stress(material.stretch_stiffness, material.poisson_ratio)),
      bend_stiffness_(material.bend_stiffness),
      density_(material.density) {
  material.validate();
  if (rest.cols() != 3) throw ConfigError("cloth: mesh must be three-dimensional");
  if (triangles_.empty()) throw ConfigError("cloth: mesh has no faces");
  Vec q0(3 * vertex_count_);
  for (int i = 0; i < vertex_count_; ++i) q0.segment<3>(3 * i) = rest.row(i).transpose();

  for (const auto& t : triangles_) {
    const Vec3 x0 = vertex(q0, t[0]);
    const Vec3 e1 = vertex(q0, t[1]) - x0;
    const Vec3 e2 = vertex(q0, t[2]) - x0;
    const Vec3 n = e1.cross(e2);
    const double area = 0.5 * n.norm();
    if (!(area > 0.0)) throw ConfigError("cloth: degenerate rest triangle");
    const Vec3 u = e1.normalized();
    const Vec3 w = n.cross(u).normalized();
    Eigen::Matrix2d dm;
    dm << e1.norm(), e2.dot(u), 0.0, e2.dot(w);
    rest_inverse_.push_back(dm.inverse());
    rest_area_.push_back(area);
  }

  hinges_ = interior_hinges(triangles_);
  for (const auto& h : hinges_) {
    const Vec3 x0 = vertex(q0, h.v0);
    const Vec3 x1 = vertex(q0, h.v1);
    const Vec3 x2 = vertex(q0, h.v2);
    const Vec3 x3 = vertex(q0, h.v3);
    const double a1 = 0.5 * (x1 - x0).cross(x2 - x0).norm();
    const double a2 = 0.5 * (x0 - x1).cross(x3 - x1).norm();
    rest_angle_.push_back(hinge_angle(x0, x1, x2, x3));
    hinge_weight_.push_back((x1 - x0).squaredNorm() / (a1 + a2));
  }
}

double ClothTerm::stretch_energy(const Vec& q) const {
  double total = 0.0;
  for (std::size_t f = 0; f < triangles_.size(); ++f) {
    const auto& t = triangles_[f];
    Mat32 ds;
    ds.col(0) = vertex(q, t[1]) - vertex(q, t[0]);
    ds.col(1) = vertex(q, t[2]) - vertex(q, t[0]);
    const Mat32 F = ds * rest_inverse_[f];
    const Eigen::Matrix2d g = 0.5 * (F.transpose() * F - Eigen::Matrix2d::Identity());
    const double tr = g.trace();
    total += rest_area_[f] * (lame_.mu * g.squaredNorm() + 0.5 * lame_.lambda * tr * tr);
  }
  return total;
}

double ClothTerm::bending_energy(const Vec& q) const {
  double total = 0.0;
  for (std::size_t k = 0; k < hinges_.size(); ++k) {
    const auto& h = hinges_[k];
    const double dev =
        hinge_angle(vertex(q, h.v0), vertex(q, h.v1), vertex(q, h.v2), vertex(q, h.v3)) -
        rest_angle_[k];
    total += bend_stiffness_ * hinge_weight_[k] * dev * dev;
  }
  return total;
}

double ClothTerm::energy(const Vec& q, ConditionView) const {
  if (q.size() != 3 * vertex_count_) throw ConfigError("cloth: configuration size mismatch");
  return stretch_energy(q) + bending_energy(q);
}

double ClothTerm::accumulate_gradient(const Vec& q, ConditionView, Vec& grad) const {
  if (q.size() != 3 * vertex_count_) throw ConfigError("cloth: configuration size mismatch");
  double total = 0.0;
  for (std::size_t f = 0; f < triangles_.size(); ++f) {
    const auto& t = triangles_[f];
    Mat32 ds;
    ds.col(0) = vertex(q, t[1]) - vertex(q, t[0]);
    ds.col(1) = vertex(q, t[2]) - vertex(q, t[0]);
    const Mat32 F = ds * rest_inverse_[f];
    const Eigen::Matrix2d g = 0.5 * (F.transpose() * F - Eigen::Matrix2d::Identity());
    const double tr = g.trace();
    total += rest_area_[f] * (lame_.mu * g.squaredNorm() + 0.5 * lame_.lambda * tr * tr);
    const Mat32 P = F * (2.0 * lame_.mu * g + lame_.lambda * tr * Eigen::Matrix2d::Identity());
    const Mat32 h = rest_area_[f] * P * rest_inverse_[f].transpose();
    grad.segment<3>(3 * t[1]) += h.col(0);
    grad.segment<3>(3 * t[2]) += h.col(1);
    grad.segment<3>(3 * t[0]) -= h.col(0) + h.col(1);
  }
  for (std::size_t k = 0; k < hinges_.size(); ++k) {
    const auto& h = hinges_[k];
    const HingeGradient hg =
        hinge_angle_gradient(vertex(q, h.v0), vertex(q, h.v1), vertex(q, h.v2), vertex(q, h.v3));
    const double dev = hg.angle - rest_angle_[k];
    const double coeff = bend_stiffness_ * hinge_weight_[k];
    total += coeff * dev * dev;
    if (!hg.valid) continue;
    const std::array<int, 4> ids = {h.v0, h.v1, h.v2, h.v3};
    for (int j = 0; j < 4; ++j) grad.segment<3>(3 * ids[j]) += 2.0 * coeff * dev * hg.d[j];
  }
  return total;
}

Vec ClothTerm::vertex_masses() const {
  Vec m = Vec::Zero(vertex_count_);
  for (std::size_t f = 0; f < triangles_.size(); ++f) {
    for (int v : triangles_[f]) m[v] += density_ * rest_area_[f] / 3.0;
  }
  return m;
}

}  // namespace nsub
