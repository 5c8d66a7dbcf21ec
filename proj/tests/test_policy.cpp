#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "mpo_lab/policy.hpp"
#include "support/finite_diff.hpp"

using namespace mpo;

namespace {

GaussianHead head_from(double mean0, double var0) {
  Vector mean = Vector::Constant(1, mean0);
  Matrix lower = Matrix::Constant(1, 1, std::sqrt(var0));
  return GaussianHead{mean, CholeskyFactor{lower}};
}

GaussianHead random_head(Rng& rng, Index dim) {
  return GaussianHead{rng.normal_vector(dim),
                      cholesky_from_raw(Matrix(rng.normal_matrix(dim, dim)))};
}

// Full Gaussian KL from the closed form, computed independently of
// kl_decoupled through dense inverses and determinants.
double gaussian_kl_direct(const GaussianHead& p, const GaussianHead& q) {
  const Matrix s0 = p.chol.covariance();
  const Matrix s1 = q.chol.covariance();
  const Matrix s1_inv = s1.inverse();
  const Vector d = q.mean - p.mean;
  const double n = static_cast<double>(p.dim());
  return 0.5 * ((s1_inv * s0).trace() + d.dot(s1_inv * d) - n +
                std::log(s1.determinant() / s0.determinant()));
}

}  // namespace

TEST_CASE("zero network yields zero mean and ln2 cholesky diagonal") {
  PolicyParams policy = make_gaussian_policy(3, {8}, 2, Activation::kTanh);
  const GaussianHead head = gaussian_head_at(policy, Vector::Zero(3));
  CHECK(head.mean.isZero(0.0));
  CHECK(head.chol.lower(0, 0) == doctest::Approx(std::log(2.0)));
  CHECK(head.chol.lower(1, 1) == doctest::Approx(std::log(2.0)));
  CHECK(head.chol.lower(1, 0) == 0.0);
}

TEST_CASE("same state produces an identical head") {
  Rng rng(3);
  PolicyParams policy = make_gaussian_policy(3, {16, 16}, 2, Activation::kTanh);
  init_mlp(policy.net, rng);
  const Vector state = rng.normal_vector(3);
  const GaussianHead a = gaussian_head_at(policy, state);
  const GaussianHead b = gaussian_head_at(policy, state);
  CHECK((a.mean - b.mean).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.chol.lower - b.chol.lower).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("network heads give positive definite covariances on random states") {
  Rng rng(5);
  PolicyParams policy = make_gaussian_policy(4, {12}, 3, Activation::kElu);
  init_mlp(policy.net, rng);
  for (int i = 0; i < 100; ++i) {
    const GaussianHead head = gaussian_head_at(policy, Vector(5.0 * rng.normal_vector(4)));
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(head.chol.covariance());
    CHECK(eig.eigenvalues().minCoeff() > 0.0);
    CHECK(head.chol.lower.diagonal().minCoeff() >= kCholDiagFloor);
  }
}

TEST_CASE("standard normal density at the mean") {
  for (Index d = 1; d <= 3; ++d) {
    GaussianHead head{Vector::Zero(d), CholeskyFactor{Matrix::Identity(d, d)}};
    CHECK(log_prob(head, Vector(Vector::Zero(d))) ==
          doctest::Approx(-0.5 * d * std::log(2.0 * M_PI)).epsilon(1e-12));
  }
}

TEST_CASE("uniform categorical log probability") {
  CategoricalHead head{Vector::Zero(4)};
  for (Index a = 0; a < 4; ++a)
    CHECK(log_prob(head, a) == doctest::Approx(std::log(0.25)).epsilon(1e-12));
}

TEST_CASE("gaussian density integrates to one on a quadrature grid") {
  Rng rng(11);
  SUBCASE("one dimension") {
    const GaussianHead head = random_head(rng, 1);
    const double sd = head.chol.lower(0, 0);
    const double lo = head.mean[0] - 10.0 * sd, hi = head.mean[0] + 10.0 * sd;
    const int n = 4000;
    const double h = (hi - lo) / n;
    double integral = 0.0;
    for (int i = 0; i < n; ++i)
      integral += std::exp(log_prob(head, Vector(Vector::Constant(1, lo + (i + 0.5) * h)))) * h;
    CHECK(integral == doctest::Approx(1.0).epsilon(1e-4));
  }
  SUBCASE("two dimensions") {
    const GaussianHead head = random_head(rng, 2);
    const Matrix sigma = head.chol.covariance();
    const double s0 = std::sqrt(sigma(0, 0)), s1 = std::sqrt(sigma(1, 1));
    const int n = 400;
    double integral = 0.0;
    const double h0 = 16.0 * s0 / n, h1 = 16.0 * s1 / n;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        Vector x(2);
        x << head.mean[0] - 8.0 * s0 + (i + 0.5) * h0, head.mean[1] - 8.0 * s1 + (j + 0.5) * h1;
        integral += std::exp(log_prob(head, x)) * h0 * h1;
      }
    CHECK(integral == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("sampling near the degenerate limit concentrates at the mean") {
  Vector mean(2);
  mean << 0.4, -1.2;
  Matrix lower = Matrix::Identity(2, 2) * kCholDiagFloor;
  GaussianHead head{mean, CholeskyFactor{lower}};
  Rng rng(2);
  for (int i = 0; i < 100; ++i)
    CHECK((sample(head, rng).first - mean).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("sample mean over many draws matches the head mean") {
  Rng rng(6);
  const GaussianHead head = random_head(rng, 2);
  const int n = 100000;
  Vector acc = Vector::Zero(2);
  for (int i = 0; i < n; ++i) acc += sample(head, rng).first;
  acc /= n;
  const Matrix sigma = head.chol.covariance();
  for (Index k = 0; k < 2; ++k)
    CHECK(std::abs(acc[k] - head.mean[k]) < 3.0 * std::sqrt(sigma(k, k) / n));
}

TEST_CASE("categorical frequencies match the softmax probabilities") {
  Vector logits(4);
  logits << 0.5, -0.3, 1.2, 0.0;
  CategoricalHead head{logits};
  Rng rng(7);
  Vector counts = Vector::Zero(4);
  const int n = 100000;
  for (int i = 0; i < n; ++i) counts[sample(head, rng).first] += 1.0;
  counts /= n;
  CHECK((counts - head.probs()).cwiseAbs().maxCoeff() < 1e-2);
}

TEST_CASE("sampled log prob agrees with log_prob to 1e-12") {
  Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    const GaussianHead head = random_head(rng, 3);
    const auto [action, lp] = sample(head, rng);
    CHECK(std::abs(lp - log_prob(head, action)) < 1e-12);
  }
}

TEST_CASE("identical gaussian heads have zero KL") {
  Rng rng(9);
  const GaussianHead head = random_head(rng, 3);
  const KlTerms kl = kl_decoupled(head, head);
  CHECK(std::abs(kl.mean_term) < 1e-14);
  CHECK(std::abs(kl.cov_term) < 1e-12);
}

TEST_CASE("one dimensional closed form: N(0,1) vs N(1,4)") {
  const KlTerms kl = kl_decoupled(head_from(0.0, 1.0), head_from(1.0, 4.0));
  CHECK(kl.mean_term == doctest::Approx(1.0 / 8.0).epsilon(1e-12));
  CHECK(kl.total() == doctest::Approx(std::log(2.0) + 2.0 / 8.0 - 0.5).epsilon(1e-12));
}

TEST_CASE("decoupled terms sum exactly to the full gaussian KL") {
  Rng rng(10);
  for (int i = 0; i < 100; ++i) {
    const Index d = 1 + rng.uniform_index(4);
    const GaussianHead p = random_head(rng, d);
    const GaussianHead q = random_head(rng, d);
    const KlTerms kl = kl_decoupled(p, q);
    CHECK(kl.mean_term >= 0.0);
    CHECK(kl.cov_term >= -1e-12);
    const double direct = gaussian_kl_direct(p, q);
    CHECK(std::abs(kl.total() - direct) <= 1e-10 * std::max(1.0, std::abs(direct)));
  }
}

TEST_CASE("decoupled KL matches a Monte Carlo estimate") {
  Rng rng(12);
  const GaussianHead p = random_head(rng, 2);
  const GaussianHead q = random_head(rng, 2);
  const int n = 100000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto [x, lp] = sample(p, rng);
    const double term = lp - log_prob(q, x);
    sum += term;
    sum_sq += term * term;
  }
  const double mc = sum / n;
  const double se = std::sqrt((sum_sq / n - mc * mc) / n);
  CHECK(std::abs(kl_decoupled(p, q).total() - mc) < 3.0 * se);
}

TEST_CASE("categorical KL examples") {
  CategoricalHead uniform{Vector::Zero(2)};
  CHECK(kl_categorical(uniform, uniform) == 0.0);

  Vector skewed(2);
  skewed << std::log(0.9), std::log(0.1);
  const double expected = 0.5 * std::log(0.5 / 0.9) + 0.5 * std::log(0.5 / 0.1);
  CHECK(kl_categorical(uniform, CategoricalHead{skewed}) ==
        doctest::Approx(expected).epsilon(1e-12));

  // near-degenerate new distribution blows the divergence up
  Vector extreme(2);
  extreme << 0.0, -400.0;
  CHECK(kl_categorical(uniform, CategoricalHead{extreme}) > 100.0);
}

TEST_CASE("categorical KL is nonnegative over random pairs") {
  Rng rng(13);
  for (int i = 0; i < 1000; ++i) {
    const Index n = 2 + rng.uniform_index(5);
    const CategoricalHead p{Vector(3.0 * rng.normal_vector(n))};
    const CategoricalHead q{Vector(3.0 * rng.normal_vector(n))};
    CHECK(kl_categorical(p, q) >= 0.0);
    CHECK(kl_categorical(p, p) == doctest::Approx(0.0).epsilon(1e-14));
  }
}

TEST_CASE("log prob gradient w.r.t. network parameters matches finite differences") {
  Rng rng(14);
  PolicyParams policy = make_gaussian_policy(3, {10}, 2, Activation::kTanh);
  init_mlp(policy.net, rng);
  const Vector state = rng.normal_vector(3);
  const Vector action = rng.normal_vector(2);

  MlpCache cache;
  const Vector out = mlp_forward(policy.net, state, &cache);
  const GaussianHead head = make_gaussian_head(out, 2);
  const Vector d_out =
      gaussian_head_grad_to_output(log_prob_grad(head, action), out, 2);
  auto [grads, d_in] = mlp_backward(policy.net, cache, Matrix(d_out));

  const auto fd = mpo::testing::finite_diff_grads(policy.net, [&](const MlpParams& p) {
    return log_prob(make_gaussian_head(mlp_forward(p, state), 2), action);
  });
  CHECK(mpo::testing::max_grad_mismatch(grads, fd) < 1e-4);
}

TEST_CASE("head gradients match finite differences in head space") {
  Rng rng(15);
  const GaussianHead old_head = random_head(rng, 2);
  GaussianHead new_head = random_head(rng, 2);

  auto fd_vs = [&](const GaussianHeadGrad& grad, auto&& f) {
    for (Index i = 0; i < 2; ++i) {
      const double fd = mpo::testing::central_diff(
          [&](double v) {
            GaussianHead h = new_head;
            h.mean[i] = v;
            return f(h);
          },
          new_head.mean[i]);
      CHECK(std::abs(grad.d_mean[i] - fd) < 1e-6 * std::max(1.0, std::abs(fd)));
    }
    for (Index i = 0; i < 2; ++i)
      for (Index j = 0; j <= i; ++j) {
        const double fd = mpo::testing::central_diff(
            [&](double v) {
              GaussianHead h = new_head;
              h.chol.lower(i, j) = v;
              return f(h);
            },
            new_head.chol.lower(i, j));
        CHECK(std::abs(grad.d_lower(i, j) - fd) < 1e-6 * std::max(1.0, std::abs(fd)));
      }
  };

  fd_vs(kl_mean_grad_new(old_head, new_head),
        [&](const GaussianHead& h) { return kl_decoupled(old_head, h).mean_term; });
  fd_vs(kl_cov_grad_new(old_head, new_head),
        [&](const GaussianHead& h) { return kl_decoupled(old_head, h).cov_term; });

  // first-slot derivatives (parametric E-step direction)
  const GaussianHead q = new_head;
  const GaussianHead ref = old_head;
  const GaussianHeadGrad g_mean = kl_mean_grad_old(q, ref);
  const GaussianHeadGrad g_cov = kl_cov_grad_old(q, ref);
  for (Index i = 0; i < 2; ++i) {
    const double fd = mpo::testing::central_diff(
        [&](double v) {
          GaussianHead h = q;
          h.mean[i] = v;
          return kl_decoupled(h, ref).mean_term;
        },
        q.mean[i]);
    CHECK(std::abs(g_mean.d_mean[i] - fd) < 1e-6 * std::max(1.0, std::abs(fd)));
  }
  for (Index i = 0; i < 2; ++i)
    for (Index j = 0; j <= i; ++j) {
      const double fd = mpo::testing::central_diff(
          [&](double v) {
            GaussianHead h = q;
            h.chol.lower(i, j) = v;
            return kl_decoupled(h, ref).cov_term;
          },
          q.chol.lower(i, j));
      CHECK(std::abs(g_cov.d_lower(i, j) - fd) < 1e-6 * std::max(1.0, std::abs(fd)));
    }
}

TEST_CASE("head_at dispatches on the head kind") {
  PolicyParams gaussian = make_gaussian_policy(2, {4}, 1, Activation::kTanh);
  PolicyParams categorical = make_categorical_policy(2, {4}, 5, Activation::kTanh);
  CHECK(std::holds_alternative<GaussianHead>(head_at(gaussian, Vector::Zero(2))));
  CHECK(std::holds_alternative<CategoricalHead>(head_at(categorical, Vector::Zero(2))));
}
