#pragma once

#include <Eigen/Dense>

#include <functional>
#include <vector>

#include "nsub/subspace_map.hpp"
#include "nsub/systems.hpp"

namespace nsub {

struct LbfgsOptions {
  int memory = 8;
  int max_iters = 200;
  double grad_tol = 1e-6;  // on the infinity norm
  double c1 = 1e-4;        // Armijo constant
  double backtrack = 0.5;
  int max_backtracks = 40;

  void validate() const;
};

struct LbfgsResult {
  Vec x;
  double value = 0.0;
  Vec gradient;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

// Returns the objective value and writes its gradient.
using Objective = std::function<double(const Vec& x, Vec& grad)>;

// Limited-memory BFGS with Armijo backtracking. Accepted values never
// increase. An exhausted line search returns the best point with
// converged = false.
LbfgsResult lbfgs_minimize(const Objective& objective, const Vec& x0, const LbfgsOptions& options = {});

struct LatentSimState {
  Vec z_curr;
  Vec z_prev;
  double h = 1.0 / 60.0;
  Vec c;  // empty when the system has no conditions
};

struct StepOptions {
  LbfgsOptions lbfgs;
  // Gradient tolerance is lbfgs.grad_tol * max(1, |gradient at warm start|_inf).
  bool scale_tolerance = true;
};

struct StepReport {
  int iterations = 0;
  bool converged = false;
  double objective_start = 0.0;  // at the warm start
  double objective_end = 0.0;
  double grad_norm = 0.0;
};

// 2 f(z_curr) - f(z_prev).
Vec inertial_guess(const SubspaceMap& map, const LatentSimState& state);

// 1/(2h^2) |f(z) - q_bar|_M^2 + E_pot(f(z), c), with its gradient in z.
double timestep_objective(const SubspaceMap& map, const SystemDef& system, const LatentSimState& state,
                          const Vec& q_bar, const Vec& z, Vec* grad = nullptr);

LatentSimState implicit_euler_step(const SubspaceMap& map, const SystemDef& system, const LatentSimState& state,
                                   const StepOptions& options = {}, StepReport* report = nullptr);

struct Trajectory {
  std::vector<Vec> z;
  std::vector<Vec> q;
  std::vector<StepReport> reports;  // one per step
};

// Per-step conditions; receives the index of the step being taken.
using ConditionSource = std::function<Vec(long step)>;

Trajectory simulate(const SubspaceMap& map, const SystemDef& system, const LatentSimState& initial, long steps,
                    const StepOptions& options = {}, const ConditionSource& conditions = {});

// Starts at rest: z_prev = z_curr = z0, with the system's default condition.
Trajectory simulate(const SubspaceMap& map, const SystemDef& system, const Vec& z0, long steps, double h,
                    const StepOptions& options = {}, const ConditionSource& conditions = {});

}  // namespace nsub
