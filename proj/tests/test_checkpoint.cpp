#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "mpo_lab/checkpoint.hpp"
#include "mpo_lab/rng.hpp"

using namespace mpo;

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name)
      : path(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("save and load round-trip tensors bitwise") {
  TempDir dir("mpo_ckpt_test_1");
  Rng rng(1);
  Checkpoint ck;
  const Matrix m = rng.normal_matrix(4, 3);
  const Vector v = rng.normal_vector(5);
  ck.put("weights", m);
  ck.put("bias", v);
  ck.put_scalar("eta", 0.123456789123456789);
  ck.meta["config"] = "env.id = pendulum";
  ck.save(dir.path.string());

  const Checkpoint back = Checkpoint::load(dir.path.string());
  CHECK((back.tensor("weights") - m).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.vector("bias") - v).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.scalar("eta") == 0.123456789123456789);
  CHECK(back.meta.at("config") == "env.id = pendulum");
}

TEST_CASE("save load save produces byte-identical files") {
  TempDir a("mpo_ckpt_test_2a"), b("mpo_ckpt_test_2b");
  Rng rng(2);
  Checkpoint ck;
  ck.put("alpha", Matrix(rng.normal_matrix(7, 2)));
  ck.put("zeta", Matrix(rng.normal_matrix(1, 9)));
  ck.put_scalar("count", -3.25);
  ck.meta["note"] = "round trip";
  ck.save(a.path.string());

  Checkpoint::load(a.path.string()).save(b.path.string());
  CHECK(read_file(a.path / "manifest.json") == read_file(b.path / "manifest.json"));
  CHECK(read_file(a.path / "params.bin") == read_file(b.path / "params.bin"));
}

TEST_CASE("manifest records shapes and byte offsets") {
  TempDir dir("mpo_ckpt_test_3");
  Checkpoint ck;
  ck.put("a", Matrix(Matrix::Ones(2, 3)));
  ck.put("b", Matrix(Matrix::Zero(1, 4)));
  ck.save(dir.path.string());
  const std::string manifest = read_file(dir.path / "manifest.json");
  CHECK(manifest.find("\"offset\": 0") != std::string::npos);
  CHECK(manifest.find("\"offset\": 48") != std::string::npos);  // 2*3 doubles
  CHECK(std::filesystem::file_size(dir.path / "params.bin") == (6 + 4) * 8);
}

TEST_CASE("missing tensors raise a domain error") {
  Checkpoint ck;
  CHECK_THROWS_AS(ck.tensor("nope"), DomainError);
}
