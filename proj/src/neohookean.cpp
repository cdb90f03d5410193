#include <cmath>
#include <string>

#include "nsub/energies.hpp"
#include "nsub/errors.hpp"

namespace nsub {

void Material::validate() const {
  if (!(youngs_modulus > 0.0)) throw ConfigError("material.youngs_modulus must be > 0");
  if (!(poisson_ratio > 0.0 && poisson_ratio < 0.5)) {
    throw ConfigError("material.poisson_ratio must lie in (0, 0.5)");
  }
  if (!(density > 0.0)) throw ConfigError("material.density must be > 0");
  if (!(bend_stiffness >= 0.0)) throw ConfigError("material.bend_stiffness must be >= 0");
  if (!(stretch_stiffness > 0.0)) throw ConfigError("material.stretch_stiffness must be > 0");
}

Lame lame_from_youngs(double youngs_modulus, double poisson_ratio) {
  const double mu = youngs_modulus / (2.0 * (1.0 + poisson_ratio));
  const double lambda =
      youngs_modulus * poisson_ratio / ((1.0 + poisson_ratio) * (1.0 - 2.0 * poisson_ratio));
  return {mu, lambda};
}

Lame lame_plane_stress(double stiffness, double poisson_ratio) {
  const double mu = stiffness / (2.0 * (1.0 + poisson_ratio));
  const double lambda = stiffness * poisson_ratio / (1.0 - poisson_ratio * poisson_ratio);
  return {mu, lambda};
}

namespace {

template <int D>
double snh_alpha(const Lame& lame) {
  return 1.0 + lame.mu / lame.lambda - lame.mu / ((D + 1) * lame.lambda);
}

template <int D>
double snh_rest_value(const Lame& lame) {
  const double a = 1.0 - snh_alpha<D>(lame);
  return 0.5 * lame.lambda * a * a - 0.5 * lame.mu * std::log(D + 1.0);
}

Eigen::Matrix2d cofactor(const Eigen::Matrix2d& F) {
  Eigen::Matrix2d c;
  c << F(1, 1), -F(1, 0), -F(0, 1), F(0, 0);
  return c;
}

Eigen::Matrix3d cofactor(const Eigen::Matrix3d& F) {
  Eigen::Matrix3d c;
  c.col(0) = F.col(1).cross(F.col(2));
  c.col(1) = F.col(2).cross(F.col(0));
  c.col(2) = F.col(0).cross(F.col(1));
  return c;
}

double factorial(int d) { return d == 2 ? 2.0 : 6.0; }

}  // namespace

template <int D>
double snh_density(const Eigen::Matrix<double, D, D>& F, const Lame& lame) {
  const double ic = F.squaredNorm();
  const double j = F.determinant();
  const double dj = j - snh_alpha<D>(lame);
  return 0.5 * lame.mu * (ic - D) + 0.5 * lame.lambda * dj * dj -
         0.5 * lame.mu * std::log(ic + 1.0) - snh_rest_value<D>(lame);
}

template <int D>
Eigen::Matrix<double, D, D> snh_stress(const Eigen::Matrix<double, D, D>& F, const Lame& lame) {
  const double ic = F.squaredNorm();
  const double j = F.determinant();
  return lame.mu * (1.0 - 1.0 / (ic + 1.0)) * F +
         lame.lambda * (j - snh_alpha<D>(lame)) * cofactor(F);
}

template double snh_density<2>(const Eigen::Matrix2d&, const Lame&);
template double snh_density<3>(const Eigen::Matrix3d&, const Lame&);
template Eigen::Matrix2d snh_stress<2>(const Eigen::Matrix2d&, const Lame&);
template Eigen::Matrix3d snh_stress<3>(const Eigen::Matrix3d&, const Lame&);

template <int D>
NeoHookeanTerm<D>::NeoHookeanTerm(const VertexMatrix& rest, std::vector<Element> elements,
                                  const Material& material, StiffnessRegion region)
    : elements_(std::move(elements)),
      vertex_count_(static_cast<int>(rest.rows())),
      lame_(lame_from_youngs(material.youngs_modulus, material.poisson_ratio)),
      density_(material.density),
      region_(region) {
  material.validate();
  if (rest.cols() != D) {
    throw ConfigError("neohookean: mesh dimension " + std::to_string(rest.cols()) +
                      " does not match element dimension " + std::to_string(D));
  }
  if (elements_.empty()) throw ConfigError("neohookean: mesh has no elements");
  double scale = 0.0;
  for (Eigen::Index i = 0; i < rest.rows(); ++i) scale = std::max(scale, rest.row(i).cwiseAbs().maxCoeff());
  scale = std::max(scale, 1.0);
  for (std::size_t e = 0; e < elements_.size(); ++e) {
    MatD dm;
    Eigen::Matrix<double, D, 1> centroid = rest.row(elements_[e][0]).transpose();
    for (int k = 0; k < D; ++k) {
      const int v = elements_[e][k + 1];
      if (v < 0 || v >= vertex_count_) throw ConfigError("neohookean: element index out of range");
      dm.col(k) = (rest.row(v) - rest.row(elements_[e][0])).transpose();
      centroid += rest.row(v).transpose();
    }
    const double volume = std::abs(dm.determinant()) / factorial(D);
    if (!(volume > 1e-14 * std::pow(scale, D))) {
      throw ConfigError("neohookean: degenerate rest element " + std::to_string(e));
    }
    rest_inverse_.push_back(dm.inverse());
    rest_volume_.push_back(volume);
    centroid /= (D + 1);
    in_region_.push_back(region_.condition_index >= 0 && centroid(region_.axis) > region_.threshold);
  }
}

template <int D>
typename NeoHookeanTerm<D>::MatD NeoHookeanTerm<D>::deformation_gradient(const Vec& q,
                                                                        std::size_t e) const {
  const auto& el = elements_[e];
  MatD ds;
  const auto x0 = q.template segment<D>(D * el[0]);
  for (int k = 0; k < D; ++k) ds.col(k) = q.template segment<D>(D * el[k + 1]) - x0;
  return ds * rest_inverse_[e];
}

template <int D>
double NeoHookeanTerm<D>::stiffness_scale(std::size_t e, ConditionView c) const {
  if (!in_region_[e]) return 1.0;
  const auto idx = static_cast<std::size_t>(region_.condition_index);
  return idx < c.size() ? c[idx] : 1.0;
}

template <int D>
double NeoHookeanTerm<D>::energy(const Vec& q, ConditionView c) const {
  if (q.size() != D * vertex_count_) throw ConfigError("neohookean: configuration size mismatch");
  double total = 0.0;
  for (std::size_t e = 0; e < elements_.size(); ++e) {
    const double s = stiffness_scale(e, c);
    const Lame lame{lame_.mu * s, lame_.lambda * s};
    total += rest_volume_[e] * snh_density<D>(deformation_gradient(q, e), lame);
  }
  return total;
}

template <int D>
double NeoHookeanTerm<D>::accumulate_gradient(const Vec& q, ConditionView c, Vec& grad) const {
  if (q.size() != D * vertex_count_) throw ConfigError("neohookean: configuration size mismatch");
  double total = 0.0;
  for (std::size_t e = 0; e < elements_.size(); ++e) {
    const double s = stiffness_scale(e, c);
    const Lame lame{lame_.mu * s, lame_.lambda * s};
    const MatD F = deformation_gradient(q, e);
    total += rest_volume_[e] * snh_density<D>(F, lame);
    const MatD h = rest_volume_[e] * snh_stress<D>(F, lame) * rest_inverse_[e].transpose();
    const auto& el = elements_[e];
    for (int k = 0; k < D; ++k) {
      grad.template segment<D>(D * el[k + 1]) += h.col(k);
      grad.template segment<D>(D * el[0]) -= h.col(k);
    }
  }
  return total;
}

template <int D>
Vec NeoHookeanTerm<D>::vertex_masses() const {
  Vec m = Vec::Zero(vertex_count_);
  for (std::size_t e = 0; e < elements_.size(); ++e) {
    const double share = density_ * rest_volume_[e] / (D + 1);
    for (int v : elements_[e]) m[v] += share;
  }
  return m;
}

template class NeoHookeanTerm<2>;
template class NeoHookeanTerm<3>;

}  // namespace nsub
