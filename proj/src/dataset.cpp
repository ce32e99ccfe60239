#include "landseg/dataset.hpp"

#include <cmath>
#include <cstring>
#include <numeric>

#include "landseg/error.hpp"
#include "landseg/rng.hpp"
#include "wire.hpp"

namespace landseg {

namespace {

constexpr char kMagic[4] = {'L', 'S', 'A', 'R'};

std::size_t record_payload_size(const SamplePair& s) {
  return 4 + s.source_id.size() +  // id
         4 * 4 +                   // x, y, width, height
         s.image.rgb.size() + s.mask.classes.size();
}

}  // namespace

void write_archive(const std::vector<SamplePair>& samples, const std::filesystem::path& path,
                   std::uint32_t tile_size) {
  for (const SamplePair& s : samples) {
    s.image.validate();
    s.mask.validate();
    if (s.image.width != s.mask.width || s.image.height != s.mask.height) {
      throw DimensionError("sample `" + s.source_id + "` image and mask dimensions differ");
    }
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");

  out.write(kMagic, 4);
  wire::put_u32(out, kArchiveVersion);
  wire::put_u32(out, static_cast<std::uint32_t>(samples.size()));
  wire::put_u32(out, tile_size);

  for (const SamplePair& s : samples) {
    wire::put_u32(out, static_cast<std::uint32_t>(record_payload_size(s)));
    wire::put_string(out, s.source_id);
    wire::put_u32(out, s.tile_x);
    wire::put_u32(out, s.tile_y);
    wire::put_u32(out, static_cast<std::uint32_t>(s.image.width));
    wire::put_u32(out, static_cast<std::uint32_t>(s.image.height));
    out.write(reinterpret_cast<const char*>(s.image.rgb.data()),
              static_cast<std::streamsize>(s.image.rgb.size()));
    out.write(reinterpret_cast<const char*>(s.mask.classes.data()),
              static_cast<std::streamsize>(s.mask.classes.size()));
  }
  if (!out) throw IoError("write to " + path.string() + " failed");
}

ArchiveReader::ArchiveReader(const std::filesystem::path& path)
    : in_(path, std::ios::binary), path_(path) {
  if (!in_) throw IoError("cannot open archive " + path.string());
  char magic[4];
  wire::read_exact(in_, magic, 4, "archive magic");
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError(FormatError::Kind::bad_magic, path.string() + " is not a sample archive");
  }
  version_ = wire::get_u32(in_, "archive version");
  if (version_ != kArchiveVersion) {
    throw FormatError(FormatError::Kind::bad_version,
                      path.string() + " has unsupported archive version " +
                          std::to_string(version_));
  }
  count_ = wire::get_u32(in_, "sample count");
  tile_size_ = wire::get_u32(in_, "tile size");
}

std::optional<SamplePair> ArchiveReader::next() {
  if (read_ == count_) {
    // Declared count consumed; anything left over is a count mismatch.
    if (in_.peek() != std::ifstream::traits_type::eof()) {
      throw FormatError(FormatError::Kind::count_mismatch,
                        path_.string() + " declares " + std::to_string(count_) +
                            " records but holds trailing data");
    }
    return std::nullopt;
  }

  const std::string where = "record " + std::to_string(read_) + " of " + path_.string();
  const std::uint32_t payload = wire::get_u32(in_, where + " length");

  SamplePair s;
  s.source_id = wire::get_string(in_, where + " source id");
  s.tile_x = wire::get_u32(in_, where);
  s.tile_y = wire::get_u32(in_, where);
  const std::uint32_t w = wire::get_u32(in_, where);
  const std::uint32_t h = wire::get_u32(in_, where);
  if (w == 0 || h == 0 || w > (1u << 16) || h > (1u << 16)) {
    throw FormatError(FormatError::Kind::corrupt,
                      where + " has implausible dimensions " + std::to_string(w) + "x" +
                          std::to_string(h));
  }
  s.image.width = static_cast<int>(w);
  s.image.height = static_cast<int>(h);
  s.image.rgb.resize(static_cast<std::size_t>(w) * h * 3);
  wire::read_exact(in_, s.image.rgb.data(), s.image.rgb.size(), where + " pixels");
  s.mask.width = static_cast<int>(w);
  s.mask.height = static_cast<int>(h);
  s.mask.classes.resize(static_cast<std::size_t>(w) * h);
  wire::read_exact(in_, s.mask.classes.data(), s.mask.classes.size(), where + " mask");

  if (payload != record_payload_size(s)) {
    throw FormatError(FormatError::Kind::corrupt,
                      where + " length field disagrees with its content");
  }
  s.mask.validate();
  ++read_;
  return s;
}

std::vector<SamplePair> read_archive(const std::filesystem::path& path) {
  ArchiveReader reader(path);
  std::vector<SamplePair> samples;
  samples.reserve(reader.count());
  while (std::optional<SamplePair> s = reader.next()) samples.push_back(std::move(*s));
  return samples;
}

SplitIndices split_dataset(std::size_t scene_count, double train_fraction, std::uint64_t seed) {
  if (scene_count < 2) {
    throw ParameterError("need at least 2 scenes to split, got " + std::to_string(scene_count));
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ParameterError("train fraction must be in (0,1), got " +
                         std::to_string(train_fraction));
  }
  std::vector<std::size_t> order(scene_count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);

  const std::size_t train_count =
      static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(scene_count)));
  SplitIndices split;
  split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(train_count));
  split.eval.assign(order.begin() + static_cast<std::ptrdiff_t>(train_count), order.end());
  return split;
}

}  // namespace landseg
