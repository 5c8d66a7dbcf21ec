#pragma once

#include <utility>
#include <vector>

#include "mpo_lab/rng.hpp"
#include "mpo_lab/types.hpp"

namespace mpo {

enum class Activation { kTanh, kElu };

// Fixed-topology fully connected network. Hidden layers use the configured
// nonlinearity; the output layer is linear. Inputs and outputs are column
// vectors; batched calls stack samples as columns.
struct MlpParams {
  std::vector<int> layer_sizes;  // [input, hidden..., output]
  std::vector<Matrix> weights;   // weights[l]: layer_sizes[l+1] x layer_sizes[l]
  std::vector<Vector> biases;    // biases[l]: layer_sizes[l+1]
  Activation activation = Activation::kTanh;

  int input_size() const { return layer_sizes.front(); }
  int output_size() const { return layer_sizes.back(); }
  int num_layers() const { return static_cast<int>(weights.size()); }
  Index num_params() const;
};

// Gradients with the exact shapes of MlpParams.
struct MlpGrads {
  std::vector<Matrix> d_weights;
  std::vector<Vector> d_biases;

  static MlpGrads zeros_like(const MlpParams& params);
  void add_scaled(const MlpGrads& other, double scale);
  void scale(double s);
  double squared_norm() const;
  bool all_finite() const;
};

// Post-activation values of every layer, enough for the backward pass.
struct MlpCache {
  Matrix input;              // input x batch
  std::vector<Matrix> post;  // per layer: layer output (activated except last)
};

MlpParams make_mlp(const std::vector<int>& layer_sizes, Activation activation);

// Glorot-uniform weights, zero biases; the last layer is scaled by
// `final_scale` so heads can start near zero.
void init_mlp(MlpParams& params, Rng& rng, double final_scale = 1.0);

Matrix mlp_forward(const MlpParams& params, const Matrix& input, MlpCache* cache = nullptr);
Vector mlp_forward(const MlpParams& params, const Vector& input, MlpCache* cache = nullptr);

// Reverse-mode pass. `output_grad` has one column per batch sample; gradients
// are summed over the batch. Returns (parameter gradients, input gradient).
std::pair<MlpGrads, Matrix> mlp_backward(const MlpParams& params, const MlpCache& cache,
                                         const Matrix& output_grad);

}  // namespace mpo
