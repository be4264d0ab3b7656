#include "pegmentor/mlp.hpp"

#include <cmath>

#include "pegmentor/error.hpp"

namespace pegmentor {
namespace {

void apply_activation(Activation a, Eigen::MatrixXd& x) {
  switch (a) {
    case Activation::Identity: break;
    case Activation::Relu: x = x.cwiseMax(0.0); break;
    case Activation::Tanh: x = x.array().tanh().matrix(); break;
  }
}

// d(activation)/d(pre) expressed through the post-activation output.
void scale_by_derivative(Activation a, const Eigen::MatrixXd& out, Eigen::MatrixXd& grad) {
  switch (a) {
    case Activation::Identity: break;
    case Activation::Relu: grad = (out.array() > 0.0).select(grad, 0.0); break;
    case Activation::Tanh: grad.array() *= 1.0 - out.array().square(); break;
  }
}

template <typename Fn>
void for_each_pair(MlpParams& a, const MlpParams& b, Fn&& fn) {
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    fn(a.layers[i].weights, b.layers[i].weights);
    fn(a.layers[i].bias, b.layers[i].bias);
  }
}

}  // namespace

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
  }
  return "?";
}

int MlpParams::input_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.front().weights.cols()); }

int MlpParams::output_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.back().weights.rows()); }

void MlpParams::validate() const {
  if (layers.empty()) throw Error(ErrorCode::ShapeMismatch, "network has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.bias.size() != l.weights.rows())
      throw Error(ErrorCode::ShapeMismatch, "layer " + std::to_string(i) + " bias length differs from rows");
    if (i > 0 && l.weights.cols() != layers[i - 1].weights.rows())
      throw Error(ErrorCode::ShapeMismatch, "layer " + std::to_string(i) + " input does not chain");
    if (!l.weights.allFinite() || !l.bias.allFinite())
      throw Error(ErrorCode::ShapeMismatch, "layer " + std::to_string(i) + " has non-finite parameters");
  }
}

MlpParams MlpParams::glorot(std::span<const int> sizes, Activation hidden, Activation output,
                            std::mt19937_64& rng) {
  if (sizes.size() < 2) throw Error(ErrorCode::ShapeMismatch, "need at least input and output sizes");
  MlpParams p;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    const int in = sizes[i];
    const int out = sizes[i + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> u(-limit, limit);
    DenseLayer l;
    l.weights.resize(out, in);
    for (int c = 0; c < in; ++c)
      for (int r = 0; r < out; ++r) l.weights(r, c) = u(rng);
    l.bias = Eigen::VectorXd::Zero(out);
    l.activation = (i + 2 == sizes.size()) ? output : hidden;
    p.layers.push_back(std::move(l));
  }
  return p;
}

MlpParams MlpParams::zeros_like(const MlpParams& p) {
  MlpParams z = p;
  for (auto& l : z.layers) {
    l.weights.setZero();
    l.bias.setZero();
  }
  return z;
}

Eigen::MatrixXd mlp_forward_batch(const MlpParams& p, const Eigen::MatrixXd& input, MlpTape* tape) {
  if (p.layers.empty() || input.rows() != p.input_dim())
    throw Error(ErrorCode::ShapeMismatch, "input has " + std::to_string(input.rows()) + " features, network expects " +
                                              std::to_string(p.input_dim()));
  if (tape) {
    tape->inputs.clear();
    tape->outputs.clear();
  }
  Eigen::MatrixXd x = input;
  for (const auto& l : p.layers) {
    if (tape) tape->inputs.push_back(x);
    Eigen::MatrixXd y = l.weights * x;
    y.colwise() += l.bias;
    apply_activation(l.activation, y);
    if (tape) tape->outputs.push_back(y);
    x = std::move(y);
  }
  return x;
}

Eigen::VectorXd mlp_forward(const MlpParams& p, const Eigen::VectorXd& input) {
  return mlp_forward_batch(p, input, nullptr).col(0);
}

void mlp_backward(const MlpParams& p, const MlpTape& tape, const Eigen::MatrixXd& upstream, MlpParams& grads,
                  Eigen::MatrixXd* input_grad) {
  if (tape.inputs.size() != p.layers.size() || grads.layers.size() != p.layers.size())
    throw Error(ErrorCode::ShapeMismatch, "tape or gradient buffer does not match the network");
  if (upstream.rows() != p.output_dim() || upstream.cols() != tape.outputs.back().cols())
    throw Error(ErrorCode::ShapeMismatch, "upstream gradient shape does not match the output");
  Eigen::MatrixXd g = upstream;
  for (std::size_t idx = p.layers.size(); idx-- > 0;) {
    const auto& l = p.layers[idx];
    scale_by_derivative(l.activation, tape.outputs[idx], g);
    grads.layers[idx].weights.noalias() += g * tape.inputs[idx].transpose();
    grads.layers[idx].bias += g.rowwise().sum();
    if (idx > 0 || input_grad) g = l.weights.transpose() * g;
  }
  if (input_grad) *input_grad = std::move(g);
}

MlpParams mlp_gradients(const MlpParams& p, const Eigen::VectorXd& input, const Eigen::VectorXd& upstream) {
  p.validate();
  MlpTape tape;
  mlp_forward_batch(p, input, &tape);
  if (upstream.size() != p.output_dim())
    throw Error(ErrorCode::ShapeMismatch, "upstream length differs from output dimension");
  MlpParams grads = MlpParams::zeros_like(p);
  mlp_backward(p, tape, upstream, grads);
  return grads;
}

Adam::Adam(const MlpParams& shape, double lr, double beta1, double beta2, double eps)
    : m_(MlpParams::zeros_like(shape)),
      v_(MlpParams::zeros_like(shape)),
      lr_(lr),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps) {}

void Adam::step(MlpParams& params, const MlpParams& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const double step_size = lr_ * std::sqrt(c2) / c1;
  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    m = beta1_ * m + (1.0 - beta1_) * grad;
    v = beta2_ * v + (1.0 - beta2_) * grad.cwiseProduct(grad);
    param.array() -= step_size * m.array() / (v.array().sqrt() + eps_);
  };
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    update(params.layers[i].weights, grads.layers[i].weights, m_.layers[i].weights, v_.layers[i].weights);
    update(params.layers[i].bias, grads.layers[i].bias, m_.layers[i].bias, v_.layers[i].bias);
  }
}

void polyak_update(MlpParams& target, const MlpParams& live, double polyak) {
  for_each_pair(target, live, [polyak](auto& t, const auto& l) { t = polyak * t + (1.0 - polyak) * l; });
}

void round_to_float32(MlpParams& p) {
  for (auto& l : p.layers) {
    l.weights = l.weights.cast<float>().cast<double>();
    l.bias = l.bias.cast<float>().cast<double>();
  }
}

}  // namespace pegmentor
