#pragma once

// Test-only reference computations. Nothing here calls the analytic
// derivative paths of the library.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

namespace nsub::testing {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Central differences of a scalar function.
inline Vec finite_difference_gradient(const std::function<double(const Vec&)>& f, const Vec& x,
                                      double step = 1e-6) {
  Vec g(x.size());
  Vec xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = step * std::max(1.0, std::abs(x[i]));
    xp[i] = x[i] + h;
    const double fp = f(xp);
    xp[i] = x[i] - h;
    const double fm = f(xp);
    xp[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// max_i |a_i - b_i| / max(|b|_inf, floor)
inline double relative_error(const Vec& analytic, const Vec& reference, double floor = 1e-12) {
  const double scale = std::max(reference.cwiseAbs().maxCoeff(), floor);
  return (analytic - reference).cwiseAbs().maxCoeff() / scale;
}

inline Vec random_vector(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

inline Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> dist;
  Eigen::Quaterniond q(dist(rng), dist(rng), dist(rng), dist(rng));
  q.normalize();
  return q.toRotationMatrix();
}

// Random A with A^T diag(m) A = sigma^2 I.
inline Mat random_scaled_isometry(std::mt19937_64& rng, int n, int d, const Vec& mass, double sigma) {
  Mat g(n, d);
  std::normal_distribution<double> dist;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) g(i, j) = dist(rng);
  Eigen::HouseholderQR<Mat> qr(g);
  const Mat q = qr.householderQ() * Mat::Identity(n, d);
  return sigma * mass.cwiseSqrt().cwiseInverse().asDiagonal() * q;
}

// Largest principal angle (radians) between the column spans of a and b.
inline double largest_principal_angle(const Mat& a, const Mat& b) {
  const Mat qa = Eigen::HouseholderQR<Mat>(a).householderQ() * Mat::Identity(a.rows(), a.cols());
  const Mat qb = Eigen::HouseholderQR<Mat>(b).householderQ() * Mat::Identity(b.rows(), b.cols());
  Eigen::JacobiSVD<Mat> svd(qa.transpose() * qb);
  const double smallest = std::clamp(svd.singularValues().minCoeff(), -1.0, 1.0);
  return std::acos(smallest);
}

}  // namespace nsub::testing
