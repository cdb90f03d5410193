#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace nsub {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Weights and biases of a fully connected network. Hidden layers use ELU
// (alpha = 1); the output layer is affine.
struct MlpParams {
  std::vector<Mat> weights;  // weights[i] is width[i+1] x width[i]
  std::vector<Vec> biases;   // biases[i] has width[i+1] entries

  int input_width() const;
  int output_width() const;
  int num_layers() const { return static_cast<int>(weights.size()); }
  std::vector<int> layer_sizes() const;
  std::size_t parameter_count() const;

  // Same shapes, all entries zero.
  MlpParams zeros_like() const;
  bool all_finite() const;

  // Throws ConfigError if the layer chain is inconsistent.
  void validate() const;
};

bool operator==(const MlpParams& a, const MlpParams& b);

// Weights uniform in +-sqrt(6 / fan_in), biases zero.
MlpParams init_mlp(std::span<const int> layer_sizes, std::uint64_t rng_seed);

double elu(double x);
double elu_derivative(double x);

Vec forward(const MlpParams& params, const Vec& x);

// Column-wise evaluation of a batch (input_width x B -> output_width x B).
Mat forward_batch(const MlpParams& params, const Mat& inputs);

struct MlpVjp {
  MlpParams param_grads;
  Vec input_grad;
};

// u^T df/dtheta and u^T df/dx for a single input.
MlpVjp vjp(const MlpParams& params, const Vec& x, const Vec& cotangent);

// Activations recorded by a batched forward pass, reused by the backward pass.
class ForwardTape {
 public:
  ForwardTape(const MlpParams& params, const Mat& inputs);

  const Mat& output() const { return activations_.back(); }

  // Accumulates sum_b u_b^T df/dtheta (x_b) into grads. Returns the input
  // gradients (input_width x B).
  Mat backward(const Mat& cotangents, MlpParams& grads) const;

  // Input gradients only; parameter gradients are not formed.
  Mat backward_inputs(const Mat& cotangents) const;

 private:
  const MlpParams& params_;
  std::vector<Mat> pre_;          // pre-activations per layer
  std::vector<Mat> activations_;  // activations_[0] is the input
};

// d f / d x, output_width x input_width, by forward-mode propagation.
Mat input_jacobian(const MlpParams& params, const Vec& x);

}  // namespace nsub
