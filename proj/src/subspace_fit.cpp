#include "nsub/subspace_fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "nsub/errors.hpp"

namespace nsub {

namespace {

Mat stack_inputs(const Mat& z, const Mat& c) {
  Mat x(z.rows() + c.rows(), z.cols());
  x.topRows(z.rows()) = z;
  if (c.rows() > 0) x.bottomRows(c.rows()) = c;
  return x;
}

Vec stack_input(const Vec& z, ConditionView c) {
  Vec x(z.size() + static_cast<Eigen::Index>(c.size()));
  x.head(z.size()) = z;
  for (std::size_t i = 0; i < c.size(); ++i) x[z.size() + static_cast<Eigen::Index>(i)] = c[i];
  return x;
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

// Linear interpolation between order statistics of a sorted vector.
double quantile_sorted(const std::vector<double>& v, double p) {
  if (v.empty()) return 0.0;
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double t = pos - static_cast<double>(lo);
  return (1.0 - t) * v[lo] + t * v[hi];
}

template <typename F>
void parallel_for(int count, int threads, F&& body) {
  threads = std::clamp(threads, 1, std::max(count, 1));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (int i = t; i < count; i += threads) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

void TrainConfig::validate() const {
  if (latent_dim < 1) throw ConfigError("train.latent_dim must be >= 1");
  if (condition_dim < 0) throw ConfigError("train.condition_dim must be >= 0");
  if (!(lambda > 0.0)) throw ConfigError("train.lambda must be > 0");
  if (!(sigma > 0.0)) throw ConfigError("train.sigma must be > 0");
  if (batch_size < 2) throw ConfigError("train.batch_size must be >= 2");
  if (total_steps < 1) throw ConfigError("train.total_steps must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be > 0");
  if (lr_decay_every < 1) throw ConfigError("train.lr_decay_every must be >= 1");
  if (!(lr_decay_factor > 0.0 && lr_decay_factor <= 1.0)) {
    throw ConfigError("train.lr_decay_factor must lie in (0, 1]");
  }
  if (log_every < 1) throw ConfigError("train.log_every must be >= 1");
  if (!(rho_ramp_fraction > 0.0 && rho_ramp_fraction <= 1.0)) {
    throw ConfigError("train.rho_ramp_fraction must lie in (0, 1]");
  }
  if (hidden_layers < 0) throw ConfigError("train.hidden_layers must be >= 0");
  if (hidden_width < 1) throw ConfigError("train.hidden_width must be >= 1");
  if (!(energy_ceiling > 0.0)) throw ConfigError("train.energy_ceiling must be > 0");
  if (divergence_window < 1) throw ConfigError("train.divergence_window must be >= 1");
  if (threads < 1) throw ConfigError("train.threads must be >= 1");
  if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every must be >= 0");
}

std::vector<int> TrainConfig::layer_sizes(int config_dim) const {
  std::vector<int> sizes;
  sizes.push_back(latent_dim + condition_dim);
  for (int i = 0; i < hidden_layers; ++i) sizes.push_back(hidden_width);
  sizes.push_back(config_dim);
  return sizes;
}

Vec SubspaceModel::evaluate(const Vec& z, ConditionView c) const {
  return forward(mlp, stack_input(z, c));
}

Vec SubspaceModel::latent_vjp(const Vec& z, ConditionView c, const Vec& u) const {
  const ForwardTape tape(mlp, stack_input(z, c));
  const Mat g = tape.backward_inputs(u);
  return g.col(0).head(d);
}

Mat SubspaceModel::latent_jacobian(const Vec& z, ConditionView c) const {
  return input_jacobian(mlp, stack_input(z, c)).leftCols(d);
}

void SubspaceModel::validate() const {
  mlp.validate();
  if (d < 1 || m < 0) throw ConfigError("model: invalid latent/condition dimensions");
  if (mlp.input_width() != d + m) throw ConfigError("model: network input width differs from d + m");
  if (fingerprint.n != 0 && mlp.output_width() != fingerprint.n) {
    throw ConfigError("model: network output width differs from the system dimension");
  }
  if (!(sigma > 0.0)) throw ConfigError("model: sigma must be > 0");
}

LatentBatch sample_latent_batch(std::mt19937_64& rng, int batch_size, int d, int m,
                                const ConditionSampler& sampler) {
  if (batch_size < 2) throw ConfigError("sample_latent_batch: batch size must be >= 2");
  if (m > 0 && !sampler) throw ConfigError("sample_latent_batch: conditions requested without a sampler");
  std::normal_distribution<double> normal(0.0, 1.0);
  LatentBatch batch{Mat(d, batch_size), Mat(m, batch_size)};
  for (int b = 0; b < batch_size; ++b) {
    for (int i = 0; i < d; ++i) batch.z(i, b) = normal(rng);
    if (m > 0) {
      const Vec c = sampler(rng);
      if (c.size() != m) throw ConfigError("sample_latent_batch: sampler returned the wrong size");
      batch.c.col(b) = c;
    }
  }
  return batch;
}

Vec scheduled_map(const MlpParams& mlp, const Vec& z, ConditionView c, double rho, const Vec& q_seed) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("scheduled_map: rho must lie in [0, 1]");
  const Vec u = forward(mlp, stack_input(z, c));
  if (rho == 1.0) return u;
  if (q_seed.size() != u.size()) throw ConfigError("scheduled_map: seed size mismatch");
  return rho * u + (1.0 - rho) * q_seed;
}

PenaltyResult isometry_penalty(const Mat& outputs, const Mat& zs, const Vec& mass_diag, double sigma_eff,
                               bool with_gradient) {
  if (outputs.cols() != zs.cols()) throw ConfigError("isometry_penalty: outputs and latents differ in count");
  if (outputs.cols() < 2) throw ConfigError("isometry_penalty: needs at least two samples");
  if (mass_diag.size() != outputs.rows()) throw ConfigError("isometry_penalty: mass size mismatch");
  if (!(sigma_eff > 0.0)) throw ConfigError("isometry_penalty: sigma must be > 0");

  const Eigen::Index count = outputs.cols();
  PenaltyResult result;
  if (with_gradient) result.output_grad = Mat::Zero(outputs.rows(), count);
  std::vector<double> abs_logs;
  abs_logs.reserve(static_cast<std::size_t>(count * (count - 1) / 2));
  const double log_min = std::log(kRatioMin);
  const double log_max = std::log(kRatioMax);

  double sum = 0.0;
  for (Eigen::Index a = 0; a < count; ++a) {
    for (Eigen::Index b = a + 1; b < count; ++b) {
      const double dz = (zs.col(a) - zs.col(b)).norm();
      if (dz < kLatentPairFloor) {
        ++result.pairs_skipped;
        continue;
      }
      const Vec dq = outputs.col(a) - outputs.col(b);
      const double dq_m2 = dq.dot(mass_diag.cwiseProduct(dq));
      // log r = 1/2 log |dq|_M^2 - log(sigma |dz|)
      double log_r = dq_m2 > 0.0 ? 0.5 * std::log(dq_m2) - std::log(sigma_eff * dz)
                                 : -std::numeric_limits<double>::infinity();
      bool clamped = false;
      if (!(log_r >= log_min)) {
        log_r = log_min;
        clamped = true;
      } else if (log_r > log_max) {
        log_r = log_max;
        clamped = true;
      }
      sum += log_r * log_r;
      abs_logs.push_back(std::abs(log_r));
      ++result.pairs_used;
      if (clamped) {
        ++result.pairs_clamped;
      } else if (with_gradient) {
        // d (log r)^2 / d q_a = 2 log r * M dq / |dq|_M^2
        const Vec g = (2.0 * log_r / dq_m2) * mass_diag.cwiseProduct(dq);
        result.output_grad.col(a) += g;
        result.output_grad.col(b) -= g;
      }
    }
  }
  if (result.pairs_used == 0) throw NumericalError("isometry_penalty: every latent pair is degenerate");
  const double inv = 1.0 / result.pairs_used;
  result.value = sum * inv;
  if (with_gradient) result.output_grad *= inv;
  result.log_ratio_median = median_of(std::move(abs_logs));
  return result;
}

LossResult subspace_loss(const MlpParams& mlp, const LatentBatch& batch, const SystemDef& system,
                         double lambda, double sigma_eff, double rho, const LossOptions& options) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("subspace_loss: rho must lie in [0, 1]");
  if (!(lambda >= 0.0)) throw ConfigError("subspace_loss: lambda must be >= 0");
  if (mlp.output_width() != system.n) throw ConfigError("subspace_loss: network output differs from n");
  const int count = batch.size();
  if (count < 1) throw ConfigError("subspace_loss: empty batch");

  const Mat inputs = stack_inputs(batch.z, batch.c);
  const ForwardTape tape(mlp, inputs);
  Mat q = tape.output();
  if (rho != 1.0) q = (rho * q).colwise() + (1.0 - rho) * system.q_seed;

  Vec energies(count);
  Mat cotangent(system.n, count);
  std::vector<char> clamped(static_cast<std::size_t>(count), 0);
  parallel_for(count, options.threads, [&](int b) {
    const Vec cb = batch.c.col(b);
    Vec g;
    const Vec qb = q.col(b);
    double e = system.energy_and_gradient(qb, view(cb), g);
    if (!(std::abs(e) <= options.energy_ceiling) || !g.allFinite()) {
      if (!(std::abs(e) <= options.energy_ceiling)) e = e < 0.0 ? -options.energy_ceiling : options.energy_ceiling;
      g.setZero(system.n);
      clamped[static_cast<std::size_t>(b)] = 1;
    }
    energies[b] = e;
    cotangent.col(b) = g / static_cast<double>(count);
  });

  LossResult result;
  result.potential = energies.mean();
  for (char c : clamped) result.energy_clamps += c;

  // The penalty is undefined while the map is still the constant seed.
  if (lambda > 0.0 && rho > 0.0) {
    const PenaltyResult pen = isometry_penalty(q, batch.z, system.mass_diag, sigma_eff, true);
    result.penalty = pen.value;
    result.pairs_skipped = pen.pairs_skipped;
    result.log_ratio_median = pen.log_ratio_median;
    cotangent += lambda * pen.output_grad;
  }
  result.loss = result.potential + lambda * result.penalty;

  result.grads = mlp.zeros_like();
  // Clamping keeps the loss finite for huge energies, but a non-finite
  // configuration means the network itself has blown up.
  if (!q.allFinite()) {
    result.loss = std::numeric_limits<double>::quiet_NaN();
    return result;
  }
  if (rho > 0.0) tape.backward(rho * cotangent, result.grads);
  return result;
}

namespace {

template <typename Visit>
void for_each_block(MlpParams& p, Visit&& visit) {
  for (int i = 0; i < p.num_layers(); ++i) {
    visit(p.weights[i].data(), p.weights[i].size());
    visit(p.biases[i].data(), p.biases[i].size());
  }
}

template <typename Visit>
void for_each_block(const MlpParams& p, Visit&& visit) {
  for (int i = 0; i < p.num_layers(); ++i) {
    visit(p.weights[i].data(), p.weights[i].size());
    visit(p.biases[i].data(), p.biases[i].size());
  }
}

}  // namespace

std::vector<double> flatten_params(const MlpParams& params) {
  std::vector<double> flat;
  flat.reserve(params.parameter_count());
  for_each_block(params, [&](const double* p, Eigen::Index n) { flat.insert(flat.end(), p, p + n); });
  return flat;
}

void unflatten_params(std::span<const double> flat, MlpParams& params) {
  if (flat.size() != params.parameter_count()) throw ConfigError("unflatten_params: size mismatch");
  std::size_t k = 0;
  for_each_block(params, [&](double* p, Eigen::Index n) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(k), n, p);
    k += static_cast<std::size_t>(n);
  });
}

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads, double lr) {
  if (params.size() != grads.size()) throw ConfigError("adam_step: parameter and gradient sizes differ");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size()) throw ConfigError("adam_step: optimizer state size mismatch");
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
}

void adam_step(AdamState& state, MlpParams& params, const MlpParams& grads, double lr) {
  std::vector<double> flat = flatten_params(params);
  const std::vector<double> g = flatten_params(grads);
  adam_step(state, flat, g, lr);
  unflatten_params(flat, params);
}

double rho_schedule(long step, long total_steps, double ramp_fraction) {
  const long ramp = std::max<long>(1, static_cast<long>(std::ceil(ramp_fraction * static_cast<double>(total_steps))));
  if (step + 1 >= ramp) return 1.0;
  return static_cast<double>(step + 1) / static_cast<double>(ramp);
}

double learning_rate_at(const TrainConfig& cfg, long step) {
  return cfg.learning_rate * std::pow(cfg.lr_decay_factor, static_cast<double>(step / cfg.lr_decay_every));
}

TrainResult train(const SystemDef& system, const TrainConfig& cfg, const TrainCallbacks& callbacks) {
  cfg.validate();
  system.validate();
  if (cfg.condition_dim != system.condition_dim()) {
    throw ConfigError("train.condition_dim (" + std::to_string(cfg.condition_dim) +
                      ") differs from the system's condition count (" +
                      std::to_string(system.condition_dim()) + ")");
  }

  TrainResult out;
  SubspaceModel& model = out.model;
  model.d = cfg.latent_dim;
  model.m = cfg.condition_dim;
  model.sigma = cfg.sigma;
  model.fingerprint.n = system.n;
  model.fingerprint.system_name = system.name;
  model.mlp = init_mlp(cfg.layer_sizes(system.n), cfg.rng_seed);

  std::mt19937_64 rng(cfg.rng_seed ^ 0x9e3779b97f4a7c15ULL);
  const ConditionSampler sampler = [&system](std::mt19937_64& r) { return system.sample_condition(r); };
  const LossOptions loss_options{cfg.energy_ceiling, cfg.threads};

  AdamState adam;
  int bad_streak = 0;
  TelemetryRecord last;
  for (long t = 0; t < cfg.total_steps; ++t) {
    const double rho = rho_schedule(t, cfg.total_steps, cfg.rho_ramp_fraction);
    const double lr = learning_rate_at(cfg, t);
    const LatentBatch batch = sample_latent_batch(rng, cfg.batch_size, cfg.latent_dim, cfg.condition_dim, sampler);
    const LossResult loss = subspace_loss(model.mlp, batch, system, cfg.lambda, rho * cfg.sigma, rho, loss_options);

    out.telemetry.energy_clamps += loss.energy_clamps;
    out.telemetry.skipped_pairs += loss.pairs_skipped;
    if (std::isfinite(loss.loss) && loss.grads.all_finite()) {
      bad_streak = 0;
      adam_step(adam, model.mlp, loss.grads, lr);
    } else if (++bad_streak >= cfg.divergence_window) {
      throw NumericalError("training diverged: loss non-finite for " + std::to_string(bad_streak) +
                           " consecutive steps (last at step " + std::to_string(t) + ")");
    }

    const bool final_step = t + 1 == cfg.total_steps;
    if ((t + 1) % cfg.log_every == 0 || final_step) {
      last = TelemetryRecord{t + 1, loss.loss, loss.potential, loss.penalty, loss.log_ratio_median,
                             rho, lr, out.telemetry.energy_clamps};
      out.telemetry.records.push_back(last);
      if (callbacks.on_log) callbacks.on_log(last);
    }
    if (cfg.checkpoint_every > 0 && (t + 1) % cfg.checkpoint_every == 0 && !final_step &&
        callbacks.on_checkpoint) {
      model.summary.steps = t + 1;
      callbacks.on_checkpoint(model, t + 1);
    }
  }

  model.summary = TrainSummary{cfg.total_steps, last.loss, last.potential, last.penalty, last.log_ratio_median,
                               out.telemetry.energy_clamps};
  return out;
}

RatioSummary ratio_diagnostics(const SubspaceMap& map, const SystemDef& system, double sigma, int pair_count,
                               std::mt19937_64& rng) {
  if (pair_count < 1) throw ConfigError("ratio_diagnostics: pair count must be >= 1");
  if (!(sigma > 0.0)) throw ConfigError("ratio_diagnostics: sigma must be > 0");
  std::normal_distribution<double> normal(0.0, 1.0);
  const int d = map.latent_dim();
  std::vector<double> ratios;
  std::vector<double> abs_logs;
  for (int k = 0; k < pair_count; ++k) {
    Vec z1(d), z2(d);
    for (int i = 0; i < d; ++i) z1[i] = normal(rng);
    for (int i = 0; i < d; ++i) z2[i] = normal(rng);
    const Vec c = system.sample_condition(rng);
    const double dz = (z1 - z2).norm();
    if (dz < kLatentPairFloor) continue;
    const Vec dq = map.evaluate(z1, view(c)) - map.evaluate(z2, view(c));
    const double r = std::sqrt(dq.dot(system.mass_diag.cwiseProduct(dq))) / (sigma * dz);
    ratios.push_back(r);
    abs_logs.push_back(std::abs(std::log(std::clamp(r, kRatioMin, kRatioMax))));
  }
  RatioSummary s;
  s.pairs = static_cast<int>(ratios.size());
  std::sort(ratios.begin(), ratios.end());
  s.median = quantile_sorted(ratios, 0.5);
  s.q05 = quantile_sorted(ratios, 0.05);
  s.q25 = quantile_sorted(ratios, 0.25);
  s.q75 = quantile_sorted(ratios, 0.75);
  s.q95 = quantile_sorted(ratios, 0.95);
  s.median_abs_log = median_of(std::move(abs_logs));
  return s;
}

}  // namespace nsub
