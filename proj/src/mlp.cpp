#include "mpo_lab/mlp.hpp"

#include <cmath>

namespace mpo {
namespace {

Matrix apply_activation(const Matrix& z, Activation act) {
  if (act == Activation::kTanh) return z.array().tanh();
  return z.unaryExpr([](double v) { return v > 0.0 ? v : std::expm1(v); });
}

// Activation derivative recovered from the activated value.
Matrix activation_grad_from_post(const Matrix& y, Activation act) {
  if (act == Activation::kTanh) return 1.0 - y.array().square();
  return y.unaryExpr([](double v) { return v > 0.0 ? 1.0 : v + 1.0; });
}

}  // namespace

Index MlpParams::num_params() const {
  Index n = 0;
  for (const auto& w : weights) n += w.size();
  for (const auto& b : biases) n += b.size();
  return n;
}

MlpGrads MlpGrads::zeros_like(const MlpParams& params) {
  MlpGrads g;
  g.d_weights.reserve(params.weights.size());
  g.d_biases.reserve(params.biases.size());
  for (const auto& w : params.weights) g.d_weights.push_back(Matrix::Zero(w.rows(), w.cols()));
  for (const auto& b : params.biases) g.d_biases.push_back(Vector::Zero(b.size()));
  return g;
}

void MlpGrads::add_scaled(const MlpGrads& other, double scale) {
  for (std::size_t l = 0; l < d_weights.size(); ++l) {
    d_weights[l] += scale * other.d_weights[l];
    d_biases[l] += scale * other.d_biases[l];
  }
}

void MlpGrads::scale(double s) {
  for (auto& w : d_weights) w *= s;
  for (auto& b : d_biases) b *= s;
}

double MlpGrads::squared_norm() const {
  double n = 0.0;
  for (const auto& w : d_weights) n += w.squaredNorm();
  for (const auto& b : d_biases) n += b.squaredNorm();
  return n;
}

bool MlpGrads::all_finite() const {
  for (const auto& w : d_weights)
    if (!w.allFinite()) return false;
  for (const auto& b : d_biases)
    if (!b.allFinite()) return false;
  return true;
}

MlpParams make_mlp(const std::vector<int>& layer_sizes, Activation activation) {
  require(layer_sizes.size() >= 2, "make_mlp: need at least input and output sizes");
  for (int s : layer_sizes) require(s >= 1, "make_mlp: layer sizes must be positive");
  MlpParams p;
  p.layer_sizes = layer_sizes;
  p.activation = activation;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    p.weights.push_back(Matrix::Zero(layer_sizes[l + 1], layer_sizes[l]));
    p.biases.push_back(Vector::Zero(layer_sizes[l + 1]));
  }
  return p;
}

void init_mlp(MlpParams& params, Rng& rng, double final_scale) {
  for (int l = 0; l < params.num_layers(); ++l) {
    Matrix& w = params.weights[l];
    const double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (Index c = 0; c < w.cols(); ++c)
      for (Index r = 0; r < w.rows(); ++r) w(r, c) = rng.uniform(-bound, bound);
    if (l + 1 == params.num_layers()) w *= final_scale;
    params.biases[l].setZero();
  }
}

Matrix mlp_forward(const MlpParams& params, const Matrix& input, MlpCache* cache) {
  if (input.rows() != params.input_size())
    throw DimensionError("mlp_forward: input has " + std::to_string(input.rows()) +
                         " rows, network expects " + std::to_string(params.input_size()));
  const int layers = params.num_layers();
  if (cache) {
    cache->input = input;
    cache->post.assign(layers, Matrix());
  }
  Matrix h = input;
  for (int l = 0; l < layers; ++l) {
    Matrix z = (params.weights[l] * h).colwise() + params.biases[l];
    h = (l + 1 < layers) ? apply_activation(z, params.activation) : std::move(z);
    if (cache) cache->post[l] = h;
  }
  return h;
}

Vector mlp_forward(const MlpParams& params, const Vector& input, MlpCache* cache) {
  return mlp_forward(params, Matrix(input), cache).col(0);
}

std::pair<MlpGrads, Matrix> mlp_backward(const MlpParams& params, const MlpCache& cache,
                                         const Matrix& output_grad) {
  const int layers = params.num_layers();
  if (static_cast<int>(cache.post.size()) != layers)
    throw DimensionError("mlp_backward: cache does not match network depth");
  if (output_grad.rows() != params.output_size() || output_grad.cols() != cache.input.cols())
    throw DimensionError("mlp_backward: output_grad shape mismatch");

  MlpGrads grads;
  grads.d_weights.resize(layers);
  grads.d_biases.resize(layers);

  Matrix d = output_grad;  // gradient w.r.t. pre-activation of layer l
  Matrix input_grad;
  for (int l = layers - 1; l >= 0; --l) {
    const Matrix& below = (l == 0) ? cache.input : cache.post[l - 1];
    grads.d_weights[l] = d * below.transpose();
    grads.d_biases[l] = d.rowwise().sum();
    Matrix d_below = params.weights[l].transpose() * d;
    if (l == 0) {
      input_grad = std::move(d_below);
    } else {
      d = d_below.cwiseProduct(activation_grad_from_post(cache.post[l - 1], params.activation));
    }
  }
  return {std::move(grads), std::move(input_grad)};
}

}  // namespace mpo
