#include "nsub/modal_baseline.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nsub/errors.hpp"

namespace nsub {

Vec find_rest_state(const SystemDef& system, const Vec& q0, ConditionView c, const RestStateOptions& options) {
  if (q0.size() != system.n) throw ConfigError("find_rest_state: initial guess has the wrong size");
  if (!q0.allFinite()) throw ConfigError("find_rest_state: initial guess is not finite");
  Objective objective = [&](const Vec& q, Vec& g) { return system.energy_and_gradient(q, c, g); };
  LbfgsOptions lbfgs = options.lbfgs;
  if (options.scale_tolerance) {
    lbfgs.grad_tol *= std::max(1.0, energy_gradient(system, q0, c).lpNorm<Eigen::Infinity>());
  }
  const LbfgsResult r = lbfgs_minimize(objective, q0, lbfgs);
  if (!r.converged) {
    std::ostringstream msg;
    msg << "find_rest_state: no convergence after " << r.iterations << " iterations (|grad|_inf = "
        << r.gradient.lpNorm<Eigen::Infinity>() << ", tolerance " << lbfgs.grad_tol << ")";
    throw NumericalError(msg.str());
  }
  return r.x;
}

EigenPairs generalized_eigs(const Mat& H, const Vec& mass_diag, int d) {
  const Eigen::Index n = H.rows();
  if (H.cols() != n) throw ConfigError("generalized_eigs: H must be square");
  if (mass_diag.size() != n) throw ConfigError("generalized_eigs: mass size mismatch");
  if (d < 1 || d > n) throw ConfigError("generalized_eigs: d must lie in [1, n]");
  if (!(mass_diag.minCoeff() > 0.0)) throw ConfigError("generalized_eigs: masses must be positive");
  const double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
  if ((H - H.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale) {
    throw ConfigError("generalized_eigs: H is not symmetric");
  }

  const Vec inv_sqrt_m = mass_diag.cwiseSqrt().cwiseInverse();
  const Mat reduced = inv_sqrt_m.asDiagonal() * (0.5 * (H + H.transpose())) * inv_sqrt_m.asDiagonal();
  const Eigen::SelfAdjointEigenSolver<Mat> solver(reduced);
  if (solver.info() != Eigen::Success) throw NumericalError("generalized_eigs: eigensolver failed");

  EigenPairs out;
  out.values = solver.eigenvalues().head(d);  // already ascending
  out.vectors = inv_sqrt_m.asDiagonal() * solver.eigenvectors().leftCols(d);
  for (int j = 0; j < d; ++j) {
    auto col = out.vectors.col(j);
    const double cutoff = 1e-10 * col.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (std::abs(col[i]) > cutoff) {
        if (col[i] < 0.0) col = -col;
        break;
      }
    }
  }
  return out;
}

AffineSubspace linear_modes(const SystemDef& system, int d, double sigma, const Vec& q0, ConditionView c,
                            const RestStateOptions& options) {
  if (!(sigma >= 0.0)) throw ConfigError("linear_modes: sigma must be >= 0");
  const Vec b = find_rest_state(system, q0, c, options);
  const Mat H = energy_hessian(system, b, c);
  const EigenPairs modes = generalized_eigs(H, system.mass_diag, d);
  return AffineSubspace(sigma * modes.vectors, b, sigma);
}

double quadratic_loss_oracle(const Mat& A, const Vec& b, const Mat& hessian, double energy_at_b,
                             const Vec& mass_diag, double sigma) {
  if (A.rows() != b.size() || hessian.rows() != b.size() || mass_diag.size() != b.size()) {
    throw ConfigError("quadratic_loss_oracle: dimension mismatch");
  }
  const Eigen::Index d = A.cols();
  const Mat gram = A.transpose() * mass_diag.asDiagonal() * A;
  const double violation = (gram - sigma * sigma * Mat::Identity(d, d)).cwiseAbs().maxCoeff();
  if (violation > 1e-8 * std::max(sigma * sigma, 1e-30)) {
    throw ConfigError("quadratic_loss_oracle: A^T M A differs from sigma^2 I");
  }
  return energy_at_b + 0.5 * (A.transpose() * hessian * A).trace();
}

double quadratic_loss_oracle(const Mat& A, const Vec& b, const SystemDef& system, double sigma, ConditionView c) {
  return quadratic_loss_oracle(A, b, energy_hessian(system, b, c), system.energy(b, c), system.mass_diag, sigma);
}

}  // namespace nsub
