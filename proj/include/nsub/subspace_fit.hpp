#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "nsub/mlp.hpp"
#include "nsub/subspace_map.hpp"
#include "nsub/systems.hpp"

namespace nsub {

struct TrainConfig {
  int latent_dim = 2;
  int condition_dim = 0;
  double lambda = 1.0;
  double sigma = 1e-2;
  int batch_size = 32;
  long total_steps = 10000;
  double learning_rate = 1e-4;
  long lr_decay_every = 250000;
  double lr_decay_factor = 0.5;
  std::uint64_t rng_seed = 0;
  long log_every = 100;

  double rho_ramp_fraction = 0.9;  // rho reaches 1 after this fraction of the steps
  int hidden_layers = 5;
  int hidden_width = 128;
  double energy_ceiling = 1e10;
  int divergence_window = 50;  // consecutive non-finite losses before aborting
  int threads = 1;
  long checkpoint_every = 0;  // 0 disables

  void validate() const;
  std::vector<int> layer_sizes(int config_dim) const;
};

struct SystemFingerprint {
  int n = 0;
  std::string system_name;
  std::uint64_t config_hash = 0;
};

struct TrainSummary {
  long steps = 0;
  double final_loss = 0.0;
  double final_potential = 0.0;
  double final_penalty = 0.0;
  double final_log_ratio = 0.0;  // median |log ratio| at the last logged step
  long energy_clamps = 0;
};

// A trained f(z, c) = MLP([z, c]).
class SubspaceModel final : public SubspaceMap {
 public:
  MlpParams mlp;
  int d = 0;
  int m = 0;
  double sigma = 0.0;
  SystemFingerprint fingerprint;
  TrainSummary summary;

  int latent_dim() const override { return d; }
  int condition_dim() const override { return m; }
  int config_dim() const override { return mlp.output_width(); }

  Vec evaluate(const Vec& z, ConditionView c = {}) const override;
  Vec latent_vjp(const Vec& z, ConditionView c, const Vec& u) const override;
  Mat latent_jacobian(const Vec& z, ConditionView c = {}) const override;

  // Throws ConfigError when d, m and the network widths disagree.
  void validate() const;
};

struct TelemetryRecord {
  long step = 0;
  double loss = 0.0;
  double potential = 0.0;  // batch mean of E_pot
  double penalty = 0.0;    // isometry penalty, before lambda
  double log_ratio_median = 0.0;
  double rho = 0.0;
  double learning_rate = 0.0;
  long energy_clamps = 0;  // cumulative
};

struct TrainTelemetry {
  std::vector<TelemetryRecord> records;
  long energy_clamps = 0;
  long skipped_pairs = 0;
};

// Latents as columns (d x B) and their conditions (m x B).
struct LatentBatch {
  Mat z;
  Mat c;
  int size() const { return static_cast<int>(z.cols()); }
};

using ConditionSampler = std::function<Vec(std::mt19937_64&)>;

LatentBatch sample_latent_batch(std::mt19937_64& rng, int batch_size, int d, int m,
                                const ConditionSampler& sampler = {});

// rho * MLP([z, c]) + (1 - rho) * q_seed; exactly the plain MLP output at rho = 1.
Vec scheduled_map(const MlpParams& mlp, const Vec& z, ConditionView c, double rho, const Vec& q_seed);

inline constexpr double kLatentPairFloor = 1e-12;
inline constexpr double kRatioMin = 1e-8;
inline constexpr double kRatioMax = 1e8;

struct PenaltyResult {
  double value = 0.0;
  Mat output_grad;  // d value / d outputs, n x B (only when requested)
  int pairs_used = 0;
  int pairs_skipped = 0;
  int pairs_clamped = 0;
  double log_ratio_median = 0.0;  // median |log ratio| over used pairs
};

// Mean over all unordered pairs of (log(|f(z) - f(z')|_M / (sigma_eff |z - z'|)))^2.
// Pairs with coincident latents are skipped; ratios are clamped to
// [kRatioMin, kRatioMax] and clamped pairs contribute no gradient.
PenaltyResult isometry_penalty(const Mat& outputs, const Mat& zs, const Vec& mass_diag, double sigma_eff,
                               bool with_gradient = false);

struct LossResult {
  double loss = 0.0;
  double potential = 0.0;
  double penalty = 0.0;
  MlpParams grads;
  long energy_clamps = 0;
  int pairs_skipped = 0;
  double log_ratio_median = 0.0;
};

struct LossOptions {
  double energy_ceiling = 1e10;
  int threads = 1;
};

// Batch mean of E_pot(scheduled_map(z, c)) + lambda * isometry_penalty, with
// gradients w.r.t. the network parameters only.
LossResult subspace_loss(const MlpParams& mlp, const LatentBatch& batch, const SystemDef& system,
                         double lambda, double sigma_eff, double rho, const LossOptions& options = {});

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads, double lr);
void adam_step(AdamState& state, MlpParams& params, const MlpParams& grads, double lr);

// Flat copies of all weights and biases, layer by layer, weights column-major.
std::vector<double> flatten_params(const MlpParams& params);
void unflatten_params(std::span<const double> flat, MlpParams& params);

double rho_schedule(long step, long total_steps, double ramp_fraction);
double learning_rate_at(const TrainConfig& cfg, long step);

struct TrainCallbacks {
  std::function<void(const TelemetryRecord&)> on_log;
  std::function<void(const SubspaceModel&, long step)> on_checkpoint;
};

struct TrainResult {
  SubspaceModel model;
  TrainTelemetry telemetry;
};

// Throws ConfigError for invalid configs and NumericalError when the loss
// stays non-finite for cfg.divergence_window consecutive steps.
TrainResult train(const SystemDef& system, const TrainConfig& cfg, const TrainCallbacks& callbacks = {});

struct RatioSummary {
  int pairs = 0;
  double median = 0.0;
  double q05 = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
  double q95 = 0.0;
  double median_abs_log = 0.0;
};

// Statistics of |f(z) - f(z')|_M / (sigma |z - z'|) over random latent pairs,
// each pair sharing one sampled condition.
RatioSummary ratio_diagnostics(const SubspaceMap& map, const SystemDef& system, double sigma,
                               int pair_count, std::mt19937_64& rng);

}  // namespace nsub
