#include "mpo_lab/cholesky.hpp"

#include <algorithm>

namespace mpo {

CholeskyFactor cholesky_from_raw(const Matrix& raw) {
  if (raw.rows() != raw.cols())
    throw DimensionError("cholesky_from_raw: matrix must be square");
  const Index d = raw.rows();
  Matrix lower = Matrix::Zero(d, d);
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < i; ++j) lower(i, j) = raw(i, j);
    lower(i, i) = std::max(softplus(raw(i, i)), kCholDiagFloor);
  }
  return CholeskyFactor{std::move(lower)};
}

}  // namespace mpo
