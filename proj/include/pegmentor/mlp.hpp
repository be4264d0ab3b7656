#pragma once

// Small dense networks with exact reverse-mode gradients and an Adam
// optimizer. Batches are stored column-wise: a (features x batch) matrix.

#include <Eigen/Core>

#include <random>
#include <span>
#include <string>
#include <vector>

namespace pegmentor {

enum class Activation { Identity, Relu, Tanh };

std::string to_string(Activation a);

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd bias;     // out
  Activation activation = Activation::Identity;
};

struct MlpParams {
  std::vector<DenseLayer> layers;

  int input_dim() const;
  int output_dim() const;
  /// Throws ShapeMismatch when layer dimensions do not chain.
  void validate() const;

  /// Glorot-uniform weights and zero biases. `sizes` lists every layer width
  /// including input and output.
  static MlpParams glorot(std::span<const int> sizes, Activation hidden, Activation output,
                          std::mt19937_64& rng);
  /// Same shapes and activations, all parameters zero.
  static MlpParams zeros_like(const MlpParams& p);
};

/// Forward intermediates kept for the backward pass.
struct MlpTape {
  std::vector<Eigen::MatrixXd> inputs;  // input to each layer
  std::vector<Eigen::MatrixXd> outputs;  // post-activation output of each layer
};

Eigen::VectorXd mlp_forward(const MlpParams& p, const Eigen::VectorXd& input);
Eigen::MatrixXd mlp_forward_batch(const MlpParams& p, const Eigen::MatrixXd& input, MlpTape* tape = nullptr);

/// Accumulates d(sum(output .* upstream))/d(params) into `grads` (which must be
/// shaped like p) and, when requested, writes the gradient w.r.t. the input.
void mlp_backward(const MlpParams& p, const MlpTape& tape, const Eigen::MatrixXd& upstream, MlpParams& grads,
                  Eigen::MatrixXd* input_grad = nullptr);

/// Gradients of output . upstream for a single input.
MlpParams mlp_gradients(const MlpParams& p, const Eigen::VectorXd& input, const Eigen::VectorXd& upstream);

class Adam {
 public:
  explicit Adam(const MlpParams& shape, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(MlpParams& params, const MlpParams& grads);
  long steps() const { return t_; }

 private:
  MlpParams m_;
  MlpParams v_;
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  long t_ = 0;
};

/// target <- polyak * target + (1 - polyak) * live, element-wise.
void polyak_update(MlpParams& target, const MlpParams& live, double polyak);

/// Rounds every parameter to the nearest 32-bit float.
void round_to_float32(MlpParams& p);

}  // namespace pegmentor
