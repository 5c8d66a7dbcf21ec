#pragma once

#include <utility>
#include <variant>
#include <vector>

#include "mpo_lab/cholesky.hpp"
#include "mpo_lab/mlp.hpp"
#include "mpo_lab/rng.hpp"
#include "mpo_lab/types.hpp"

namespace mpo {

// State-conditional Gaussian with full covariance Sigma = A A^T.
struct GaussianHead {
  Vector mean;
  CholeskyFactor chol;

  Index dim() const { return mean.size(); }
};

struct CategoricalHead {
  Vector logits;

  Index num_actions() const { return logits.size(); }
  Vector probs() const;
  Vector log_probs() const;
};

using PolicyHead = std::variant<GaussianHead, CategoricalHead>;

enum class HeadKind { kGaussian, kCategorical };

// Network plus head interpretation. For Gaussian heads the network emits
// [mean (d), raw Cholesky diagonal (d), strict lower triangle row-major];
// for categorical heads it emits the logits.
struct PolicyParams {
  MlpParams net;
  HeadKind head_kind = HeadKind::kGaussian;
  int action_dim = 0;  // action dimension or number of discrete actions

  int state_dim() const { return net.input_size(); }
};

int gaussian_output_size(int action_dim);

PolicyParams make_gaussian_policy(int state_dim, const std::vector<int>& hidden, int action_dim,
                                  Activation activation);
PolicyParams make_categorical_policy(int state_dim, const std::vector<int>& hidden, int n_actions,
                                     Activation activation);

GaussianHead make_gaussian_head(const Vector& net_output, int action_dim);
CategoricalHead make_categorical_head(const Vector& net_output);

PolicyHead head_at(const PolicyParams& params, const Vector& state, MlpCache* cache = nullptr);
GaussianHead gaussian_head_at(const PolicyParams& params, const Vector& state,
                              MlpCache* cache = nullptr);
// Batched heads; `states` stacks one state per column.
std::vector<GaussianHead> gaussian_heads_at(const PolicyParams& params, const Matrix& states,
                                            MlpCache* cache = nullptr);
CategoricalHead categorical_head_at(const PolicyParams& params, const Vector& state,
                                    MlpCache* cache = nullptr);
std::vector<CategoricalHead> categorical_heads_at(const PolicyParams& params, const Matrix& states,
                                                  MlpCache* cache = nullptr);

double log_prob(const GaussianHead& head, const Vector& action);
double log_prob(const CategoricalHead& head, Index action);

// Draws action = mean + A z and returns its log density.
std::pair<Vector, double> sample(const GaussianHead& head, Rng& rng);
std::pair<Index, double> sample(const CategoricalHead& head, Rng& rng);

// Forward KL(old || new) split into the quadratic mean term (w.r.t. the new
// covariance) and the trace/log-det covariance term; the two sum exactly to
// the full Gaussian KL.
struct KlTerms {
  double mean_term = 0.0;
  double cov_term = 0.0;
  double total() const { return mean_term + cov_term; }
};

KlTerms kl_decoupled(const GaussianHead& old_head, const GaussianHead& new_head);
double kl_categorical(const CategoricalHead& old_head, const CategoricalHead& new_head);

// Gradients with respect to a head's mean and Cholesky factor. d_lower is
// masked to the lower triangle.
struct GaussianHeadGrad {
  Vector d_mean;
  Matrix d_lower;

  static GaussianHeadGrad zeros(Index dim);
  void add_scaled(const GaussianHeadGrad& other, double scale);
};

GaussianHeadGrad log_prob_grad(const GaussianHead& head, const Vector& action);

// Derivatives of the kl_decoupled terms w.r.t. the *new* head (M-step use).
GaussianHeadGrad kl_mean_grad_new(const GaussianHead& old_head, const GaussianHead& new_head);
GaussianHeadGrad kl_cov_grad_new(const GaussianHead& old_head, const GaussianHead& new_head);

// Derivatives w.r.t. the *old* (first) head, for the parametric E-step where
// the variational distribution sits in the first slot of KL(q || pi_i).
GaussianHeadGrad kl_mean_grad_old(const GaussianHead& old_head, const GaussianHead& new_head);
GaussianHeadGrad kl_cov_grad_old(const GaussianHead& old_head, const GaussianHead& new_head);

// Chains a head gradient back to the raw network output column.
Vector gaussian_head_grad_to_output(const GaussianHeadGrad& grad, const Vector& net_output,
                                    int action_dim);

}  // namespace mpo
