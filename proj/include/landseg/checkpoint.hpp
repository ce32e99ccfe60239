#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "landseg/model.hpp"

namespace landseg {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Self-contained serialized network: topology config plus all weights.
// Binary layout (integers little-endian, floats as raw IEEE-754 bits):
//   "LSEG" | u32 format_version | u64 training_step |
//   u32 config text length + bytes |
//   u32 blob count, then per blob:
//     u32 name length + bytes | u32 rank | u32 dims[rank] |
//     u32 value count | f32 values
// Loading then re-saving produces a byte-identical file.
struct ModelCheckpoint {
  struct Blob {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::vector<float> values;

    bool operator==(const Blob&) const = default;
  };

  std::uint32_t format_version = kCheckpointVersion;
  ModelConfig config;
  std::vector<Blob> blobs;  // declaration order
  std::uint64_t training_step = 0;

  bool operator==(const ModelCheckpoint&) const = default;
};

ModelCheckpoint checkpoint_from_model(const Model& model, std::uint64_t training_step = 0);

// Rebuilds the topology from the embedded config and validates every
// blob's name and shape against it.
Model model_from_checkpoint(const ModelCheckpoint& ckpt);

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path);

// Write-to-temp-then-rename, so a crash never leaves a torn file behind.
void save_checkpoint_atomic(const ModelCheckpoint& ckpt, const std::filesystem::path& path);

ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace landseg
