#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include "capnet/hash.hpp"
#include "capnet/model.hpp"
#include "capnet/train.hpp"

namespace capnet {

inline constexpr char kCheckpointMagic[4] = {'C', 'A', 'P', 'N'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Checkpoint file layout, all integers and floats little-endian:
///
///   "CAPN" | version u32 | D u32 | E u32 | H u32 | V u32 | vocab sha256 (32)
///   | epoch u64
///   | parameter arrays (ModelParams::views() order) as f64
///   | optimizer kind u32 | optimizer step u64 | seed u64
///   | Adam first moments, then second moments (Adam only), as f64
///   | sha256 of every preceding byte (32)
struct Checkpoint {
  Digest vocab_hash{};
  std::uint64_t epoch = 0;
  std::uint64_t seed = 0;
  ModelParams params;
  OptimizerState optimizer;

  const Dims& dims() const { return params.dims; }
  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::string_view bytes);

/// Writes to a temporary file and renames it into place.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Throws CheckpointError explaining any dims or vocabulary-hash mismatch.
void require_compatible(const Checkpoint& ckpt, const Dims& dims, const Digest& vocab_hash);
void require_vocabulary(const Checkpoint& ckpt, const Digest& vocab_hash);

}  // namespace capnet
