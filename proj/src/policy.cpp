#include "mpo_lab/policy.hpp"

#include <cmath>

namespace mpo {
namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;  // ln(2 pi)

// Packed index of strict-lower entry (i, j), row-major.
inline Index strict_lower_index(Index i, Index j) { return i * (i - 1) / 2 + j; }

Matrix lower_masked(Matrix m) {
  m.triangularView<Eigen::StrictlyUpper>().setZero();
  return m;
}

// A^{-T} x via one backward substitution.
template <typename Rhs>
auto solve_transposed(const CholeskyFactor& chol, const Rhs& rhs) {
  return chol.lower.transpose().template triangularView<Eigen::Upper>().solve(rhs).eval();
}

}  // namespace

Vector CategoricalHead::log_probs() const {
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return logits.array() - lse;
}

Vector CategoricalHead::probs() const { return log_probs().array().exp(); }

int gaussian_output_size(int action_dim) {
  return 2 * action_dim + action_dim * (action_dim - 1) / 2;
}

PolicyParams make_gaussian_policy(int state_dim, const std::vector<int>& hidden, int action_dim,
                                  Activation activation) {
  std::vector<int> sizes{state_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(gaussian_output_size(action_dim));
  return PolicyParams{make_mlp(sizes, activation), HeadKind::kGaussian, action_dim};
}

PolicyParams make_categorical_policy(int state_dim, const std::vector<int>& hidden, int n_actions,
                                     Activation activation) {
  std::vector<int> sizes{state_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(n_actions);
  return PolicyParams{make_mlp(sizes, activation), HeadKind::kCategorical, n_actions};
}

GaussianHead make_gaussian_head(const Vector& net_output, int action_dim) {
  const Index d = action_dim;
  if (net_output.size() != gaussian_output_size(action_dim))
    throw DimensionError("make_gaussian_head: output size mismatch");
  Matrix raw = Matrix::Zero(d, d);
  raw.diagonal() = net_output.segment(d, d);
  for (Index i = 1; i < d; ++i)
    for (Index j = 0; j < i; ++j) raw(i, j) = net_output[2 * d + strict_lower_index(i, j)];
  return GaussianHead{net_output.head(d), cholesky_from_raw(raw)};
}

CategoricalHead make_categorical_head(const Vector& net_output) {
  return CategoricalHead{net_output};
}

GaussianHead gaussian_head_at(const PolicyParams& params, const Vector& state, MlpCache* cache) {
  return make_gaussian_head(mlp_forward(params.net, state, cache), params.action_dim);
}

std::vector<GaussianHead> gaussian_heads_at(const PolicyParams& params, const Matrix& states,
                                            MlpCache* cache) {
  const Matrix out = mlp_forward(params.net, states, cache);
  std::vector<GaussianHead> heads;
  heads.reserve(states.cols());
  for (Index c = 0; c < out.cols(); ++c)
    heads.push_back(make_gaussian_head(out.col(c), params.action_dim));
  return heads;
}

CategoricalHead categorical_head_at(const PolicyParams& params, const Vector& state,
                                    MlpCache* cache) {
  return make_categorical_head(mlp_forward(params.net, state, cache));
}

std::vector<CategoricalHead> categorical_heads_at(const PolicyParams& params, const Matrix& states,
                                                  MlpCache* cache) {
  const Matrix out = mlp_forward(params.net, states, cache);
  std::vector<CategoricalHead> heads;
  heads.reserve(states.cols());
  for (Index c = 0; c < out.cols(); ++c) heads.push_back(make_categorical_head(out.col(c)));
  return heads;
}

PolicyHead head_at(const PolicyParams& params, const Vector& state, MlpCache* cache) {
  if (params.head_kind == HeadKind::kGaussian)
    return gaussian_head_at(params, state, cache);
  return categorical_head_at(params, state, cache);
}

double log_prob(const GaussianHead& head, const Vector& action) {
  if (action.size() != head.dim()) throw DimensionError("log_prob: action dimension");
  const Vector z = head.chol.solve(action - head.mean);
  return -0.5 * head.dim() * kLogTwoPi - head.chol.lower.diagonal().array().log().sum() -
         0.5 * z.squaredNorm();
}

double log_prob(const CategoricalHead& head, Index action) {
  if (action < 0 || action >= head.num_actions())
    throw DimensionError("log_prob: action index out of range");
  return head.log_probs()[action];
}

std::pair<Vector, double> sample(const GaussianHead& head, Rng& rng) {
  const Vector z = rng.normal_vector(head.dim());
  Vector action = head.mean + head.chol.lower.triangularView<Eigen::Lower>() * z;
  const double lp = -0.5 * head.dim() * kLogTwoPi -
                    head.chol.lower.diagonal().array().log().sum() - 0.5 * z.squaredNorm();
  return {std::move(action), lp};
}

std::pair<Index, double> sample(const CategoricalHead& head, Rng& rng) {
  const Vector lp = head.log_probs();
  const Index a = rng.sample_categorical(lp.array().exp());
  return {a, lp[a]};
}

KlTerms kl_decoupled(const GaussianHead& old_head, const GaussianHead& new_head) {
  if (old_head.dim() != new_head.dim()) throw DimensionError("kl_decoupled: dimension mismatch");
  const Index n = old_head.dim();
  const Vector w = new_head.chol.solve(new_head.mean - old_head.mean);
  const Matrix b = new_head.chol.solve(old_head.chol.lower);
  KlTerms terms;
  terms.mean_term = 0.5 * w.squaredNorm();
  terms.cov_term = 0.5 * (b.squaredNorm() - static_cast<double>(n) +
                          new_head.chol.log_det_covariance() - old_head.chol.log_det_covariance());
  return terms;
}

double kl_categorical(const CategoricalHead& old_head, const CategoricalHead& new_head) {
  if (old_head.num_actions() != new_head.num_actions())
    throw DimensionError("kl_categorical: action count mismatch");
  const Vector lp_old = old_head.log_probs();
  const Vector lp_new = new_head.log_probs();
  double kl = 0.0;
  for (Index a = 0; a < old_head.num_actions(); ++a) {
    const double p = std::exp(lp_old[a]);
    if (p > 0.0) kl += p * (lp_old[a] - lp_new[a]);
  }
  return std::max(kl, 0.0);
}

GaussianHeadGrad GaussianHeadGrad::zeros(Index dim) {
  return {Vector::Zero(dim), Matrix::Zero(dim, dim)};
}

void GaussianHeadGrad::add_scaled(const GaussianHeadGrad& other, double scale) {
  d_mean += scale * other.d_mean;
  d_lower += scale * other.d_lower;
}

GaussianHeadGrad log_prob_grad(const GaussianHead& head, const Vector& action) {
  const Vector z = head.chol.solve(action - head.mean);
  const Vector at_z = solve_transposed(head.chol, z);
  Matrix d_lower = at_z * z.transpose();
  d_lower.diagonal() -= head.chol.lower.diagonal().cwiseInverse();
  return {at_z, lower_masked(std::move(d_lower))};
}

GaussianHeadGrad kl_mean_grad_new(const GaussianHead& old_head, const GaussianHead& new_head) {
  const Vector w = new_head.chol.solve(new_head.mean - old_head.mean);
  const Vector at_w = solve_transposed(new_head.chol, w);
  return {at_w, lower_masked(-at_w * w.transpose())};
}

GaussianHeadGrad kl_cov_grad_new(const GaussianHead& old_head, const GaussianHead& new_head) {
  const Matrix b = new_head.chol.solve(old_head.chol.lower);
  Matrix d_lower = -solve_transposed(new_head.chol, Matrix(b * b.transpose()));
  d_lower.diagonal() += new_head.chol.lower.diagonal().cwiseInverse();
  return {Vector::Zero(new_head.dim()), lower_masked(std::move(d_lower))};
}

GaussianHeadGrad kl_mean_grad_old(const GaussianHead& old_head, const GaussianHead& new_head) {
  const Vector w = new_head.chol.solve(new_head.mean - old_head.mean);
  Vector d_mean = -solve_transposed(new_head.chol, w);
  return {std::move(d_mean), Matrix::Zero(old_head.dim(), old_head.dim())};
}

GaussianHeadGrad kl_cov_grad_old(const GaussianHead& old_head, const GaussianHead& new_head) {
  const Matrix b = new_head.chol.solve(old_head.chol.lower);
  Matrix d_lower = solve_transposed(new_head.chol, b);
  d_lower.diagonal() -= old_head.chol.lower.diagonal().cwiseInverse();
  return {Vector::Zero(old_head.dim()), lower_masked(std::move(d_lower))};
}

Vector gaussian_head_grad_to_output(const GaussianHeadGrad& grad, const Vector& net_output,
                                    int action_dim) {
  const Index d = action_dim;
  Vector out = Vector::Zero(gaussian_output_size(action_dim));
  out.head(d) = grad.d_mean;
  for (Index i = 0; i < d; ++i)
    out[d + i] = grad.d_lower(i, i) * chol_diag_grad(net_output[d + i]);
  for (Index i = 1; i < d; ++i)
    for (Index j = 0; j < i; ++j) out[2 * d + strict_lower_index(i, j)] = grad.d_lower(i, j);
  return out;
}

}  // namespace mpo
