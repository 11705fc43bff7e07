#include "tot/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "tot/errors.hpp"

namespace tot {

namespace fs = std::filesystem;

namespace {

class Writer {
 public:
  explicit Writer(const fs::path& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw DataError(path.string() + ": cannot open for writing");
  }

  void bytes(const void* data, std::size_t n) { out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n)); }

  void u(std::uint64_t v, int width) {
    unsigned char b[8];
    for (int i = 0; i < width; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    bytes(b, static_cast<std::size_t>(width));
  }

  void f64(double v) { u(std::bit_cast<std::uint64_t>(v), 8); }

  void matrix(const Matrix& m) {
    for (double v : m.values()) f64(v);
  }

  void finish() {
    out_.flush();
    if (!out_) throw DataError(path_.string() + ": write failed");
  }

 private:
  fs::path path_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const fs::path& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw DataError(path.string() + ": cannot open checkpoint");
  }

  void bytes(void* data, std::size_t n) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw DataError(path_.string() + ": truncated checkpoint");
  }

  std::uint64_t u(int width) {
    unsigned char b[8];
    bytes(b, static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }

  double f64() { return std::bit_cast<double>(u(8)); }

  void matrix(Matrix& m) {
    for (double& v : m.values()) v = f64();
  }

  void expect_end() {
    char extra;
    in_.read(&extra, 1);
    if (in_.gcount() != 0) throw DataError(path_.string() + ": trailing bytes after checkpoint");
  }

 private:
  fs::path path_;
  std::ifstream in_;
};

}  // namespace

void save_checkpoint(const Checkpoint& checkpoint, const fs::path& path) {
  const EncoderShape shape = checkpoint.params.shape();
  Writer w(path);
  w.bytes("TOTC", 4);
  w.u(kCheckpointFormatVersion, 2);
  w.u(0, 2);
  w.u(shape.input_dim, 4);
  w.u(shape.hidden_dim, 4);
  w.u(shape.embed_dim, 4);
  w.u(shape.num_prototypes, 4);
  w.f64(checkpoint.inference.temperature);
  w.u(checkpoint.inference.normalize ? 1 : 0, 1);
  w.u(checkpoint.adam.prototypes_frozen ? 1 : 0, 1);
  w.u(0, 2);
  w.u(checkpoint.adam.step, 8);
  w.u(checkpoint.adam.prototype_step, 8);
  const AdamConfig& cfg = checkpoint.adam.config;
  for (double v : {cfg.learning_rate, cfg.weight_decay, cfg.beta1, cfg.beta2, cfg.epsilon}) w.f64(v);
  checkpoint.params.for_each([&](const Matrix& m) { w.matrix(m); });
  checkpoint.adam.first_moment.for_each([&](const Matrix& m) { w.matrix(m); });
  checkpoint.adam.second_moment.for_each([&](const Matrix& m) { w.matrix(m); });
  w.finish();
}

Checkpoint load_checkpoint(const fs::path& path) {
  Reader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, "TOTC", 4) != 0) throw DataError(path.string() + ": bad magic (expected \"TOTC\")");
  const auto version = r.u(2);
  if (version != kCheckpointFormatVersion) {
    throw DataError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  r.u(2);
  EncoderShape shape;
  shape.input_dim = r.u(4);
  shape.hidden_dim = r.u(4);
  shape.embed_dim = r.u(4);
  shape.num_prototypes = r.u(4);

  Checkpoint cp;
  cp.inference.temperature = r.f64();
  cp.inference.normalize = r.u(1) != 0;
  const bool frozen = r.u(1) != 0;
  r.u(2);
  const auto step = r.u(8);
  const auto prototype_step = r.u(8);
  AdamConfig cfg;
  cfg.learning_rate = r.f64();
  cfg.weight_decay = r.f64();
  cfg.beta1 = r.f64();
  cfg.beta2 = r.f64();
  cfg.epsilon = r.f64();

  cp.params = zeros_like(shape);
  cp.adam = init_adam(shape, cfg);
  cp.adam.step = step;
  cp.adam.prototype_step = prototype_step;
  cp.adam.prototypes_frozen = frozen;
  cp.params.for_each([&](Matrix& m) { r.matrix(m); });
  cp.adam.first_moment.for_each([&](Matrix& m) { r.matrix(m); });
  cp.adam.second_moment.for_each([&](Matrix& m) { r.matrix(m); });
  r.expect_end();
  return cp;
}

}  // namespace tot
