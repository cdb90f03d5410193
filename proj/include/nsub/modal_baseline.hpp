#pragma once

#include <Eigen/Dense>

#include "nsub/latent_sim.hpp"
#include "nsub/subspace_map.hpp"
#include "nsub/systems.hpp"

namespace nsub {

// f(z) = A z + b with A^T M A = sigma^2 I.
class AffineSubspace final : public SubspaceMap {
 public:
  Mat A;
  Vec b;
  double sigma = 1.0;

  AffineSubspace() = default;
  AffineSubspace(Mat a, Vec offset, double s) : A(std::move(a)), b(std::move(offset)), sigma(s) {}

  int latent_dim() const override { return static_cast<int>(A.cols()); }
  int condition_dim() const override { return 0; }
  int config_dim() const override { return static_cast<int>(A.rows()); }

  Vec evaluate(const Vec& z, ConditionView = {}) const override { return A * z + b; }
  Vec latent_vjp(const Vec&, ConditionView, const Vec& u) const override { return A.transpose() * u; }
  Mat latent_jacobian(const Vec&, ConditionView = {}) const override { return A; }
};

struct RestStateOptions {
  LbfgsOptions lbfgs{8, 20000, 1e-10, 1e-4, 0.5, 40};
  // grad_tol is scaled by max(1, |grad E(q0)|_inf).
  bool scale_tolerance = true;
};

// Local minimizer of E_pot near q0. Throws NumericalError with the residual
// when the optimizer does not converge.
Vec find_rest_state(const SystemDef& system, const Vec& q0, ConditionView c = {},
                    const RestStateOptions& options = {});

struct EigenPairs {
  Vec values;   // ascending
  Mat vectors;  // columns, M-orthonormal
};

// d smallest solutions of H v = lambda M v, first nonzero entry of each
// vector positive. Throws ConfigError for non-symmetric H.
EigenPairs generalized_eigs(const Mat& H, const Vec& mass_diag, int d);

// A = sigma * (d softest M-orthonormal modes of H(b)), b the rest state near q0.
AffineSubspace linear_modes(const SystemDef& system, int d, double sigma, const Vec& q0, ConditionView c = {},
                            const RestStateOptions& options = {});

// E_pot(b) + 1/2 tr(A^T H(b) A). Throws ConfigError when A^T M A differs
// from sigma^2 I beyond tolerance.
double quadratic_loss_oracle(const Mat& A, const Vec& b, const SystemDef& system, double sigma,
                             ConditionView c = {});
// Same with a precomputed Hessian at b.
double quadratic_loss_oracle(const Mat& A, const Vec& b, const Mat& hessian, double energy_at_b,
                             const Vec& mass_diag, double sigma);

}  // namespace nsub
