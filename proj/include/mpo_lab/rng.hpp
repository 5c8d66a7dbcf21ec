#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "mpo_lab/types.hpp"

namespace mpo {

// Deterministic random stream. All distributions are hand-rolled on top of
// the raw 64-bit generator so that sequences are identical across standard
// library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1).
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via Box-Muller; consumes two uniforms per draw.
  double normal() {
    const double u1 = 1.0 - uniform01();  // (0, 1]
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  Vector normal_vector(Index n) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

  Matrix normal_matrix(Index rows, Index cols) {
    Matrix m(rows, cols);
    for (Index c = 0; c < cols; ++c)
      for (Index r = 0; r < rows; ++r) m(r, c) = normal();
    return m;
  }

  // Uniform index in [0, n).
  Index uniform_index(Index n) {
    return static_cast<Index>(gen_() % static_cast<std::uint64_t>(n));
  }

  // Flat Dirichlet draw (uniform over the simplex).
  Vector dirichlet_uniform(Index n) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) v[i] = -std::log(1.0 - uniform01());
    v /= v.sum();
    return v;
  }

  // Sample an index from an explicit probability row.
  Index sample_categorical(const Vector& probs) {
    double u = uniform01();
    for (Index i = 0; i < probs.size(); ++i) {
      u -= probs[i];
      if (u < 0.0) return i;
    }
    return probs.size() - 1;
  }

 private:
  std::mt19937_64 gen_;
};

// Derives an independent named substream from a root seed, so components
// (env, policy sampling, replay sampling, init) can be reseeded separately.
Rng derive_stream(std::uint64_t root_seed, std::string_view name, std::uint64_t index = 0);

}  // namespace mpo
