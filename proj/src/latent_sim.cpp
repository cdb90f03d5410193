#include "nsub/latent_sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "nsub/errors.hpp"

namespace nsub {

void LbfgsOptions::validate() const {
  if (memory < 1) throw ConfigError("lbfgs.memory must be >= 1");
  if (max_iters < 0) throw ConfigError("lbfgs.max_iters must be >= 0");
  if (!(grad_tol > 0.0)) throw ConfigError("lbfgs.grad_tol must be > 0");
  if (!(c1 > 0.0 && c1 < 1.0)) throw ConfigError("lbfgs.c1 must lie in (0, 1)");
  if (!(backtrack > 0.0 && backtrack < 1.0)) throw ConfigError("lbfgs.backtrack must lie in (0, 1)");
  if (max_backtracks < 1) throw ConfigError("lbfgs.max_backtracks must be >= 1");
}

LbfgsResult lbfgs_minimize(const Objective& objective, const Vec& x0, const LbfgsOptions& options) {
  options.validate();
  LbfgsResult r;
  r.x = x0;
  r.gradient.setZero(x0.size());
  r.value = objective(r.x, r.gradient);
  r.evaluations = 1;
  if (!std::isfinite(r.value) || !r.gradient.allFinite()) {
    throw NumericalError("lbfgs: objective is not finite at the starting point");
  }

  struct Pair {
    Vec s, y;
    double rho;
  };
  std::deque<Pair> history;
  Vec trial_grad(x0.size());

  while (true) {
    if (r.gradient.lpNorm<Eigen::Infinity>() <= options.grad_tol) {
      r.converged = true;
      return r;
    }
    if (r.iterations >= options.max_iters) return r;

    // Two-loop recursion.
    Vec d = -r.gradient;
    std::vector<double> alpha(history.size());
    for (std::size_t k = history.size(); k-- > 0;) {
      alpha[k] = history[k].rho * history[k].s.dot(d);
      d -= alpha[k] * history[k].y;
    }
    if (!history.empty()) {
      const Pair& last = history.back();
      d *= last.s.dot(last.y) / last.y.squaredNorm();
    }
    for (std::size_t k = 0; k < history.size(); ++k) {
      const double beta = history[k].rho * history[k].y.dot(d);
      d += (alpha[k] - beta) * history[k].s;
    }

    double slope = r.gradient.dot(d);
    if (!(slope < 0.0)) {
      history.clear();
      d = -r.gradient;
      slope = -r.gradient.squaredNorm();
    }
    // Without curvature information, cap the first step at unit length.
    double step = history.empty() ? std::min(1.0, 1.0 / d.lpNorm<Eigen::Infinity>()) : 1.0;

    bool accepted = false;
    Vec x_new;
    double f_new = 0.0;
    for (int k = 0; k < options.max_backtracks; ++k) {
      x_new = r.x + step * d;
      trial_grad.setZero();
      f_new = objective(x_new, trial_grad);
      ++r.evaluations;
      if (std::isfinite(f_new) && trial_grad.allFinite() && f_new <= r.value + options.c1 * step * slope) {
        accepted = true;
        break;
      }
      step *= options.backtrack;
    }
    if (!accepted) {
      if (!history.empty()) {
        history.clear();  // retry once along steepest descent
        continue;
      }
      return r;
    }

    Pair p{x_new - r.x, trial_grad - r.gradient, 0.0};
    const double sy = p.s.dot(p.y);
    if (sy > 1e-12 * p.s.norm() * p.y.norm() && sy > 0.0) {
      p.rho = 1.0 / sy;
      history.push_back(std::move(p));
      if (static_cast<int>(history.size()) > options.memory) history.pop_front();
    }
    r.x = std::move(x_new);
    r.value = f_new;
    r.gradient = trial_grad;
    ++r.iterations;
  }
}

Vec inertial_guess(const SubspaceMap& map, const LatentSimState& state) {
  const ConditionView c = view(state.c);
  if (state.z_curr == state.z_prev) return map.evaluate(state.z_curr, c);
  return 2.0 * map.evaluate(state.z_curr, c) - map.evaluate(state.z_prev, c);
}

double timestep_objective(const SubspaceMap& map, const SystemDef& system, const LatentSimState& state,
                          const Vec& q_bar, const Vec& z, Vec* grad) {
  const ConditionView c = view(state.c);
  const Vec q = map.evaluate(z, c);
  const Vec dq = q - q_bar;
  const double inv_h2 = 1.0 / (state.h * state.h);
  const double inertia = 0.5 * inv_h2 * dq.dot(system.mass_diag.cwiseProduct(dq));
  if (!grad) return inertia + system.energy(q, c);
  Vec g;
  const double e = system.energy_and_gradient(q, c, g);
  const Vec u = inv_h2 * system.mass_diag.cwiseProduct(dq) + g;
  *grad = map.latent_vjp(z, c, u);
  return inertia + e;
}

namespace {

void check_dims(const SubspaceMap& map, const SystemDef& system, const LatentSimState& state) {
  if (map.config_dim() != system.n) throw ConfigError("latent_sim: map output differs from the system dimension");
  if (state.z_curr.size() != map.latent_dim() || state.z_prev.size() != map.latent_dim()) {
    throw ConfigError("latent_sim: latent state size differs from the map's latent dimension");
  }
  if (state.c.size() != map.condition_dim()) throw ConfigError("latent_sim: condition size mismatch");
  if (!(state.h > 0.0)) throw ConfigError("latent_sim: timestep must be > 0");
}

}  // namespace

LatentSimState implicit_euler_step(const SubspaceMap& map, const SystemDef& system, const LatentSimState& state,
                                   const StepOptions& options, StepReport* report) {
  check_dims(map, system, state);
  const Vec q_bar = inertial_guess(map, state);
  const Vec warm = 2.0 * state.z_curr - state.z_prev;
  Objective objective = [&](const Vec& z, Vec& g) { return timestep_objective(map, system, state, q_bar, z, &g); };

  LbfgsOptions lbfgs = options.lbfgs;
  Vec g0;
  const double f0 = objective(warm, g0);
  if (options.scale_tolerance) lbfgs.grad_tol *= std::max(1.0, g0.lpNorm<Eigen::Infinity>());
  const LbfgsResult r = lbfgs_minimize(objective, warm, lbfgs);

  if (report) {
    *report = StepReport{r.iterations, r.converged, f0, r.value, r.gradient.lpNorm<Eigen::Infinity>()};
  }
  LatentSimState next = state;
  next.z_prev = state.z_curr;
  next.z_curr = r.x;
  return next;
}

Trajectory simulate(const SubspaceMap& map, const SystemDef& system, const LatentSimState& initial, long steps,
                    const StepOptions& options, const ConditionSource& conditions) {
  if (steps < 0) throw ConfigError("simulate: steps must be >= 0");
  check_dims(map, system, initial);
  Trajectory traj;
  LatentSimState state = initial;
  traj.z.push_back(state.z_curr);
  traj.q.push_back(map.evaluate(state.z_curr, view(state.c)));
  for (long t = 0; t < steps; ++t) {
    if (conditions) state.c = conditions(t);
    StepReport rep;
    state = implicit_euler_step(map, system, state, options, &rep);
    const Vec q = map.evaluate(state.z_curr, view(state.c));
    if (!state.z_curr.allFinite() || !q.allFinite()) {
      throw NumericalError("simulate: non-finite state at step " + std::to_string(t + 1));
    }
    traj.z.push_back(state.z_curr);
    traj.q.push_back(q);
    traj.reports.push_back(rep);
  }
  return traj;
}

Trajectory simulate(const SubspaceMap& map, const SystemDef& system, const Vec& z0, long steps, double h,
                    const StepOptions& options, const ConditionSource& conditions) {
  LatentSimState s{z0, z0, h, system.default_condition()};
  if (conditions) s.c = conditions(0);
  return simulate(map, system, s, steps, options, conditions);
}

}  // namespace nsub
