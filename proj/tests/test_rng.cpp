#include <doctest.h>

#include "mpo_lab/rng.hpp"

using namespace mpo;

TEST_CASE("same seed reproduces the same sequence") {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.uniform01() == b.uniform01());
}

TEST_CASE("named substreams are independent of each other") {
  Rng a = derive_stream(9, "env", 0);
  Rng b = derive_stream(9, "env", 1);
  Rng c = derive_stream(9, "policy-sampling", 0);
  CHECK(a.next_u64() != b.next_u64());
  Rng a2 = derive_stream(9, "env", 0);
  CHECK(derive_stream(9, "env", 0).next_u64() == a2.next_u64());
  CHECK(derive_stream(9, "env", 0).next_u64() != c.next_u64());
}

TEST_CASE("normal draws have roughly standard moments") {
  Rng rng(77);
  const int n = 200000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sum_sq += z * z;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  CHECK(std::abs(mean) < 3.0 / std::sqrt(double(n)));
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("dirichlet draws live on the simplex") {
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const Vector v = rng.dirichlet_uniform(6);
    CHECK(v.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(v.minCoeff() > 0.0);
  }
}

TEST_CASE("categorical sampling matches the distribution") {
  Rng rng(8);
  Vector probs(3);
  probs << 0.2, 0.5, 0.3;
  Vector counts = Vector::Zero(3);
  const int n = 100000;
  for (int i = 0; i < n; ++i) counts[rng.sample_categorical(probs)] += 1.0;
  counts /= n;
  CHECK((counts - probs).cwiseAbs().maxCoeff() < 0.01);
}
