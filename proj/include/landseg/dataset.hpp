#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "landseg/image.hpp"
#include "landseg/mask.hpp"

namespace landseg {

// One training-ready tile: image patch, its label mask, and where in the
// source scene it came from.
struct SamplePair {
  RasterImage image;
  LabelMask mask;
  std::string source_id;
  std::uint32_t tile_x = 0;
  std::uint32_t tile_y = 0;

  bool operator==(const SamplePair&) const = default;
};

inline constexpr std::uint32_t kArchiveVersion = 1;

// Binary sample container. Layout (all integers little-endian):
//   "LSAR" | u32 version | u32 sample count | u32 tile size
//   per record: u32 byte length | u32 id length + id bytes |
//               u32 x | u32 y | u32 width | u32 height |
//               raw RGB bytes | raw class-index bytes
void write_archive(const std::vector<SamplePair>& samples, const std::filesystem::path& path,
                   std::uint32_t tile_size);

// Sequential streaming reader; validates header up front and record
// consistency as it goes.
class ArchiveReader {
 public:
  explicit ArchiveReader(const std::filesystem::path& path);

  std::uint32_t count() const { return count_; }
  std::uint32_t tile_size() const { return tile_size_; }
  std::uint32_t version() const { return version_; }

  // The next record, or nullopt once `count` records were read. Throws
  // FormatError on truncation, and count_mismatch if bytes remain after
  // the declared record count.
  std::optional<SamplePair> next();

 private:
  std::ifstream in_;
  std::filesystem::path path_;
  std::uint32_t version_ = 0;
  std::uint32_t count_ = 0;
  std::uint32_t tile_size_ = 0;
  std::uint32_t read_ = 0;
};

std::vector<SamplePair> read_archive(const std::filesystem::path& path);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> eval;
};

// Deterministic scene-level split: shuffle 0..n-1 with the seeded
// generator, first floor(train_fraction * n) shuffled scenes go to
// train, the rest to eval.
SplitIndices split_dataset(std::size_t scene_count, double train_fraction, std::uint64_t seed);

}  // namespace landseg
