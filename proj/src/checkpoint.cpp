#include "capnet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace capnet {

namespace {

class Writer {
 public:
  void bytes(const void* data, std::size_t n) {
    out_.append(static_cast<const char*>(data), n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void params(const ModelParams& p) {
    for (auto t : p.tensors()) {
      for (double x : t) f64(x);
    }
  }
  std::string& str() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  void bytes(void* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, in_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  void params(ModelParams& p) {
    for (auto& view : p.views()) {
      for (auto& x : view.values) x = f64();
    }
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw CheckpointError("checkpoint truncated");
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

std::uint32_t narrow_dim(std::size_t d) {
  if (d > 0xffffffffu) throw CheckpointError("dimension does not fit in u32");
  return static_cast<std::uint32_t>(d);
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.u32(kCheckpointVersion);
  const auto& d = ckpt.dims();
  w.u32(narrow_dim(d.image));
  w.u32(narrow_dim(d.embed));
  w.u32(narrow_dim(d.hidden));
  w.u32(narrow_dim(d.vocab));
  w.bytes(ckpt.vocab_hash.data(), ckpt.vocab_hash.size());
  w.u64(ckpt.epoch);
  w.params(ckpt.params);
  w.u32(static_cast<std::uint32_t>(ckpt.optimizer.kind));
  w.u64(ckpt.optimizer.step);
  w.u64(ckpt.seed);
  if (ckpt.optimizer.kind == OptimizerKind::kAdam) {
    w.params(ckpt.optimizer.m);
    w.params(ckpt.optimizer.v);
  }
  const auto digest = sha256(w.str());
  w.bytes(digest.data(), digest.size());
  return std::move(w.str());
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  if (bytes.size() < sizeof(kCheckpointMagic) + 32 ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0) {
    throw CheckpointError("not a checkpoint file (bad magic)");
  }
  const auto body = bytes.substr(0, bytes.size() - 32);
  const auto expected = sha256(body);
  if (std::memcmp(expected.data(), bytes.data() + body.size(), expected.size()) != 0) {
    throw CheckpointError("checkpoint checksum mismatch (file corrupt)");
  }

  Reader r(body);
  char magic[4];
  r.bytes(magic, 4);
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint format version " + std::to_string(version) +
                          " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  Dims dims;
  dims.image = r.u32();
  dims.embed = r.u32();
  dims.hidden = r.u32();
  dims.vocab = r.u32();

  Checkpoint ckpt;
  r.bytes(ckpt.vocab_hash.data(), ckpt.vocab_hash.size());
  ckpt.epoch = r.u64();
  try {
    ckpt.params = ModelParams::zeros(dims);
  } catch (const ShapeError& e) {
    throw CheckpointError(std::string("checkpoint header: ") + e.what());
  }
  r.params(ckpt.params);
  const auto kind = r.u32();
  if (kind > static_cast<std::uint32_t>(OptimizerKind::kAdam)) {
    throw CheckpointError("unknown optimizer kind " + std::to_string(kind));
  }
  ckpt.optimizer = OptimizerState::fresh(static_cast<OptimizerKind>(kind), dims);
  ckpt.optimizer.step = r.u64();
  ckpt.seed = r.u64();
  if (ckpt.optimizer.kind == OptimizerKind::kAdam) {
    r.params(ckpt.optimizer.m);
    r.params(ckpt.optimizer.v);
  }
  if (r.remaining() != 0) throw CheckpointError("checkpoint has trailing bytes");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = serialize_checkpoint(ckpt);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError("cannot write checkpoint " + tmp.string());
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw CheckpointError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot read checkpoint " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_checkpoint(ss.str());
}

void require_vocabulary(const Checkpoint& ckpt, const Digest& vocab_hash) {
  if (ckpt.vocab_hash != vocab_hash) {
    throw CheckpointError("checkpoint was trained with vocabulary " + to_hex(ckpt.vocab_hash) +
                          " but the supplied vocabulary hashes to " + to_hex(vocab_hash));
  }
}

void require_compatible(const Checkpoint& ckpt, const Dims& dims, const Digest& vocab_hash) {
  if (!(ckpt.dims() == dims)) {
    throw CheckpointError("checkpoint dims (" + ckpt.dims().to_string() +
                          ") differ from requested (" + dims.to_string() + ")");
  }
  require_vocabulary(ckpt, vocab_hash);
}

}  // namespace capnet
