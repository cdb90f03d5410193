#include "nsub/mlp.hpp"

#include <cmath>
#include <random>
#include <string>

#include "nsub/errors.hpp"

namespace nsub {

int MlpParams::input_width() const {
  return weights.empty() ? 0 : static_cast<int>(weights.front().cols());
}

int MlpParams::output_width() const {
  return weights.empty() ? 0 : static_cast<int>(weights.back().rows());
}

std::vector<int> MlpParams::layer_sizes() const {
  std::vector<int> sizes;
  if (weights.empty()) return sizes;
  sizes.push_back(input_width());
  for (const auto& w : weights) sizes.push_back(static_cast<int>(w.rows()));
  return sizes;
}

std::size_t MlpParams::parameter_count() const {
  std::size_t count = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    count += weights[i].size() + biases[i].size();
  }
  return count;
}

MlpParams MlpParams::zeros_like() const {
  MlpParams out;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    out.weights.push_back(Mat::Zero(weights[i].rows(), weights[i].cols()));
    out.biases.push_back(Vec::Zero(biases[i].size()));
  }
  return out;
}

bool MlpParams::all_finite() const {
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!weights[i].allFinite() || !biases[i].allFinite()) return false;
  }
  return true;
}

void MlpParams::validate() const {
  if (weights.empty()) throw ConfigError("mlp: no layers");
  if (weights.size() != biases.size()) throw ConfigError("mlp: weight/bias count mismatch");
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (biases[i].size() != weights[i].rows()) {
      throw ConfigError("mlp: bias " + std::to_string(i) + " does not match weight rows");
    }
    if (i > 0 && weights[i].cols() != weights[i - 1].rows()) {
      throw ConfigError("mlp: layer " + std::to_string(i) + " input width does not chain");
    }
  }
}

bool operator==(const MlpParams& a, const MlpParams& b) {
  if (a.weights.size() != b.weights.size()) return false;
  for (std::size_t i = 0; i < a.weights.size(); ++i) {
    if (a.weights[i].rows() != b.weights[i].rows() || a.weights[i].cols() != b.weights[i].cols()) {
      return false;
    }
    if (a.weights[i] != b.weights[i] || a.biases[i] != b.biases[i]) return false;
  }
  return true;
}

MlpParams init_mlp(std::span<const int> layer_sizes, std::uint64_t rng_seed) {
  if (layer_sizes.size() < 2) throw ConfigError("init_mlp: need at least 2 layer sizes");
  for (int s : layer_sizes) {
    if (s <= 0) throw ConfigError("init_mlp: layer sizes must be positive");
  }
  std::mt19937_64 rng(rng_seed);
  MlpParams params;
  for (std::size_t i = 0; i + 1 < layer_sizes.size(); ++i) {
    const int fan_in = layer_sizes[i];
    const int fan_out = layer_sizes[i + 1];
    const double bound = std::sqrt(6.0 / fan_in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    Mat w(fan_out, fan_in);
    // Fill row-major so the draw order matches the serialized layout.
    for (int r = 0; r < fan_out; ++r) {
      for (int c = 0; c < fan_in; ++c) w(r, c) = dist(rng);
    }
    params.weights.push_back(std::move(w));
    params.biases.push_back(Vec::Zero(fan_out));
  }
  return params;
}

double elu(double x) { return x > 0.0 ? x : std::expm1(x); }

double elu_derivative(double x) { return x > 0.0 ? 1.0 : std::exp(x); }

namespace {

void check_input(const MlpParams& params, Eigen::Index rows) {
  if (params.weights.empty()) throw ConfigError("mlp: no layers");
  if (rows != params.input_width()) {
    throw ConfigError("mlp: input has " + std::to_string(rows) + " entries, expected " +
                      std::to_string(params.input_width()));
  }
}

}  // namespace

Vec forward(const MlpParams& params, const Vec& x) {
  check_input(params, x.size());
  Vec h = x;
  const int last = params.num_layers() - 1;
  for (int i = 0; i <= last; ++i) {
    Vec pre = params.weights[i] * h + params.biases[i];
    h = i < last ? Vec(pre.unaryExpr(&elu)) : pre;
  }
  return h;
}

Mat forward_batch(const MlpParams& params, const Mat& inputs) {
  check_input(params, inputs.rows());
  Mat h = inputs;
  const int last = params.num_layers() - 1;
  for (int i = 0; i <= last; ++i) {
    Mat pre = params.weights[i] * h;
    pre.colwise() += params.biases[i];
    h = i < last ? Mat(pre.unaryExpr(&elu)) : pre;
  }
  return h;
}

ForwardTape::ForwardTape(const MlpParams& params, const Mat& inputs) : params_(params) {
  check_input(params, inputs.rows());
  activations_.push_back(inputs);
  const int last = params.num_layers() - 1;
  for (int i = 0; i <= last; ++i) {
    Mat pre = params.weights[i] * activations_.back();
    pre.colwise() += params.biases[i];
    if (i < last) {
      activations_.push_back(pre.unaryExpr(&elu));
      pre_.push_back(std::move(pre));
    } else {
      activations_.push_back(std::move(pre));
    }
  }
}

Mat ForwardTape::backward(const Mat& cotangents, MlpParams& grads) const {
  const int last = params_.num_layers() - 1;
  if (cotangents.rows() != params_.output_width() ||
      cotangents.cols() != activations_.front().cols()) {
    throw ConfigError("mlp: cotangent shape does not match output batch");
  }
  Mat delta = cotangents;
  for (int i = last; i >= 0; --i) {
    if (i < last) delta.array() *= pre_[i].unaryExpr(&elu_derivative).array();
    grads.weights[i].noalias() += delta * activations_[i].transpose();
    grads.biases[i] += delta.rowwise().sum();
    delta = params_.weights[i].transpose() * delta;
  }
  return delta;
}

Mat ForwardTape::backward_inputs(const Mat& cotangents) const {
  const int last = params_.num_layers() - 1;
  if (cotangents.rows() != params_.output_width() ||
      cotangents.cols() != activations_.front().cols()) {
    throw ConfigError("mlp: cotangent shape does not match output batch");
  }
  Mat delta = cotangents;
  for (int i = last; i >= 0; --i) {
    if (i < last) delta.array() *= pre_[i].unaryExpr(&elu_derivative).array();
    delta = params_.weights[i].transpose() * delta;
  }
  return delta;
}

MlpVjp vjp(const MlpParams& params, const Vec& x, const Vec& cotangent) {
  ForwardTape tape(params, x);
  if (cotangent.size() != params.output_width()) {
    throw ConfigError("mlp: cotangent has " + std::to_string(cotangent.size()) +
                      " entries, expected " + std::to_string(params.output_width()));
  }
  MlpVjp out{params.zeros_like(), Vec()};
  Mat input_grad = tape.backward(cotangent, out.param_grads);
  out.input_grad = input_grad.col(0);
  return out;
}

Mat input_jacobian(const MlpParams& params, const Vec& x) {
  check_input(params, x.size());
  Vec h = x;
  Mat tangent = Mat::Identity(x.size(), x.size());
  const int last = params.num_layers() - 1;
  for (int i = 0; i <= last; ++i) {
    Vec pre = params.weights[i] * h + params.biases[i];
    tangent = params.weights[i] * tangent;
    if (i < last) {
      tangent = pre.unaryExpr(&elu_derivative).asDiagonal() * tangent;
      h = pre.unaryExpr(&elu);
    } else {
      h = pre;
    }
  }
  return tangent;
}

}  // namespace nsub
