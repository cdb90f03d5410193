#pragma once

#include <Eigen/Dense>

#include "nsub/systems.hpp"

namespace nsub {

// A map from latent coordinates (plus optional condition values) to full
// configurations. Implemented by trained networks and by affine modal bases.
class SubspaceMap {
 public:
  virtual ~SubspaceMap() = default;

  virtual int latent_dim() const = 0;
  virtual int condition_dim() const = 0;
  virtual int config_dim() const = 0;

  virtual Vec evaluate(const Vec& z, ConditionView c = {}) const = 0;
  // u^T df/dz at z.
  virtual Vec latent_vjp(const Vec& z, ConditionView c, const Vec& u) const = 0;
  // config_dim x latent_dim.
  virtual Mat latent_jacobian(const Vec& z, ConditionView c = {}) const = 0;
};

}  // namespace nsub
