#include "mpo_lab/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace mpo {
namespace {

static_assert(sizeof(double) == 8);

void write_le_doubles(std::ostream& out, const double* data, std::size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * 8));
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      std::uint64_t bits;
      std::memcpy(&bits, data + i, 8);
      char buf[8];
      for (int b = 0; b < 8; ++b) buf[b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
      out.write(buf, 8);
    }
  }
}

void read_le_doubles(std::istream& in, double* data, std::size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * 8));
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      char buf[8];
      in.read(buf, 8);
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b)
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[b])) << (8 * b);
      std::memcpy(data + i, &bits, 8);
    }
  }
}

}  // namespace

void Checkpoint::put(const std::string& name, const Matrix& tensor) {
  tensors_[name] = tensor;
}

void Checkpoint::put(const std::string& name, const Vector& tensor) {
  tensors_[name] = Matrix(tensor);
}

void Checkpoint::put_scalar(const std::string& name, double value) {
  tensors_[name] = Matrix::Constant(1, 1, value);
}

const Matrix& Checkpoint::tensor(const std::string& name) const {
  const auto it = tensors_.find(name);
  if (it == tensors_.end()) throw DomainError("checkpoint: missing tensor '" + name + "'");
  return it->second;
}

Vector Checkpoint::vector(const std::string& name) const {
  const Matrix& m = tensor(name);
  require(m.cols() == 1, "checkpoint: tensor '" + name + "' is not a vector");
  return m.col(0);
}

double Checkpoint::scalar(const std::string& name) const {
  const Matrix& m = tensor(name);
  require(m.size() == 1, "checkpoint: tensor '" + name + "' is not a scalar");
  return m(0, 0);
}

bool Checkpoint::has(const std::string& name) const { return tensors_.count(name) > 0; }

std::vector<std::string> Checkpoint::names() const {
  std::vector<std::string> out;
  out.reserve(tensors_.size());
  for (const auto& [name, _] : tensors_) out.push_back(name);
  return out;
}

void Checkpoint::save(const std::string& dir) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  nlohmann::json manifest;
  manifest["format"] = "mpo-lab-checkpoint-v1";
  manifest["dtype"] = "float64-le";
  nlohmann::json entries = nlohmann::json::array();

  std::ofstream blob(fs::path(dir) / "params.bin", std::ios::binary | std::ios::trunc);
  if (!blob) throw std::runtime_error("checkpoint: cannot write params.bin in " + dir);
  std::size_t offset = 0;
  // std::map iteration gives a stable name order, so offsets are canonical.
  for (const auto& [name, m] : tensors_) {
    entries.push_back({{"name", name},
                       {"shape", {m.rows(), m.cols()}},
                       {"offset", offset},
                       {"count", m.size()}});
    // Eigen default storage is column-major; serialize row-major for a
    // layout-independent contract.
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
    write_le_doubles(blob, rm.data(), static_cast<std::size_t>(rm.size()));
    offset += static_cast<std::size_t>(m.size()) * 8;
  }
  manifest["tensors"] = entries;
  manifest["meta"] = meta;

  std::ofstream mf(fs::path(dir) / "manifest.json", std::ios::trunc);
  if (!mf) throw std::runtime_error("checkpoint: cannot write manifest.json in " + dir);
  mf << manifest.dump(2) << "\n";
}

Checkpoint Checkpoint::load(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw std::runtime_error("checkpoint: cannot open manifest.json in " + dir);
  nlohmann::json manifest;
  mf >> manifest;

  std::ifstream blob(fs::path(dir) / "params.bin", std::ios::binary);
  if (!blob) throw std::runtime_error("checkpoint: cannot open params.bin in " + dir);

  Checkpoint ckpt;
  for (const auto& [key, value] : manifest.at("meta").items())
    ckpt.meta[key] = value.get<std::string>();
  for (const auto& entry : manifest.at("tensors")) {
    const std::string name = entry.at("name").get<std::string>();
    const auto shape = entry.at("shape");
    const Index rows = shape.at(0).get<Index>();
    const Index cols = shape.at(1).get<Index>();
    blob.seekg(static_cast<std::streamoff>(entry.at("offset").get<std::size_t>()));
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
    read_le_doubles(blob, rm.data(), static_cast<std::size_t>(rm.size()));
    if (!blob) throw std::runtime_error("checkpoint: truncated params.bin in " + dir);
    ckpt.tensors_[name] = rm;
  }
  return ckpt;
}

}  // namespace mpo
