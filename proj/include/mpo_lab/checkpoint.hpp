#pragma once

#include <map>
#include <string>
#include <vector>

#include "mpo_lab/types.hpp"

namespace mpo {

// Named tensor store persisted as a JSON manifest (tensor names, shapes and
// byte offsets) next to a little-endian float64 blob. Save/load round trips
// are bitwise exact.
class Checkpoint {
 public:
  void put(const std::string& name, const Matrix& tensor);
  void put(const std::string& name, const Vector& tensor);
  void put_scalar(const std::string& name, double value);

  const Matrix& tensor(const std::string& name) const;
  Vector vector(const std::string& name) const;
  double scalar(const std::string& name) const;
  bool has(const std::string& name) const;
  std::vector<std::string> names() const;

  // Free-form metadata carried in the manifest.
  std::map<std::string, std::string> meta;

  // Writes `<dir>/manifest.json` and `<dir>/params.bin`.
  void save(const std::string& dir) const;
  static Checkpoint load(const std::string& dir);

 private:
  std::map<std::string, Matrix> tensors_;
};

}  // namespace mpo
