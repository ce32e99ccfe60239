#include "landseg/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "wire.hpp"

namespace landseg {

namespace {

constexpr char kMagic[4] = {'L', 'S', 'E', 'G'};

void append_blob(ModelCheckpoint& ckpt, const std::string& name,
                 std::vector<std::uint32_t> dims, const float* values, std::size_t count) {
  ModelCheckpoint::Blob blob;
  blob.name = name;
  blob.dims = std::move(dims);
  blob.values.assign(values, values + count);
  ckpt.blobs.push_back(std::move(blob));
}

std::size_t dims_product(const std::vector<std::uint32_t>& dims) {
  std::size_t p = 1;
  for (std::uint32_t d : dims) p *= d;
  return p;
}

}  // namespace

ModelCheckpoint checkpoint_from_model(const Model& model, std::uint64_t training_step) {
  ModelCheckpoint ckpt;
  ckpt.config = model.config;
  ckpt.training_step = training_step;
  for (const ConvLayerT<float>& layer : model.layers) {
    const Shape4& s = layer.weight.shape;
    append_blob(ckpt, layer.name + ".weight",
                {static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c),
                 static_cast<std::uint32_t>(s.h), static_cast<std::uint32_t>(s.w)},
                layer.weight.data.data(), layer.weight.data.size());
    append_blob(ckpt, layer.name + ".bias", {static_cast<std::uint32_t>(layer.bias.size())},
                layer.bias.data(), layer.bias.size());
  }
  return ckpt;
}

Model model_from_checkpoint(const ModelCheckpoint& ckpt) {
  if (ckpt.format_version != kCheckpointVersion) {
    throw FormatError(FormatError::Kind::bad_version,
                      "unsupported checkpoint version " + std::to_string(ckpt.format_version));
  }
  Model model = build_model(ckpt.config);
  if (ckpt.blobs.size() != model.layers.size() * 2) {
    throw FormatError(FormatError::Kind::shape_mismatch,
                      "checkpoint holds " + std::to_string(ckpt.blobs.size()) + " blobs, topology needs " +
                          std::to_string(model.layers.size() * 2));
  }
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    ConvLayerT<float>& layer = model.layers[i];
    const ModelCheckpoint::Blob& wb = ckpt.blobs[2 * i];
    const ModelCheckpoint::Blob& bb = ckpt.blobs[2 * i + 1];
    if (wb.name != layer.name + ".weight" || bb.name != layer.name + ".bias") {
      throw FormatError(FormatError::Kind::shape_mismatch,
                        "blob `" + wb.name + "` does not match expected layer `" + layer.name + "`");
    }
    const Shape4& s = layer.weight.shape;
    const std::vector<std::uint32_t> expect_w = {
        static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c),
        static_cast<std::uint32_t>(s.h), static_cast<std::uint32_t>(s.w)};
    if (wb.dims != expect_w || wb.values.size() != layer.weight.data.size()) {
      throw FormatError(FormatError::Kind::shape_mismatch,
                        "weight blob `" + wb.name + "` shape does not match topology");
    }
    if (bb.dims != std::vector<std::uint32_t>{static_cast<std::uint32_t>(layer.bias.size())} ||
        bb.values.size() != layer.bias.size()) {
      throw FormatError(FormatError::Kind::shape_mismatch,
                        "bias blob `" + bb.name + "` shape does not match topology");
    }
    layer.weight.data = wb.values;
    layer.bias = bb.values;
  }
  return model;
}

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");

  out.write(kMagic, 4);
  wire::put_u32(out, ckpt.format_version);
  wire::put_u64(out, ckpt.training_step);
  wire::put_string(out, ckpt.config.to_text());
  wire::put_u32(out, static_cast<std::uint32_t>(ckpt.blobs.size()));
  for (const ModelCheckpoint::Blob& blob : ckpt.blobs) {
    wire::put_string(out, blob.name);
    wire::put_u32(out, static_cast<std::uint32_t>(blob.dims.size()));
    for (std::uint32_t d : blob.dims) wire::put_u32(out, d);
    wire::put_u32(out, static_cast<std::uint32_t>(blob.values.size()));
    for (float v : blob.values) wire::put_f32(out, v);
  }
  if (!out) throw IoError("write to " + path.string() + " failed");
}

void save_checkpoint_atomic(const ModelCheckpoint& ckpt, const std::filesystem::path& path) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  save_checkpoint(ckpt, tmp);
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
  }
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());

  char magic[4];
  wire::read_exact(in, magic, 4, "checkpoint magic");
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw FormatError(FormatError::Kind::bad_magic, path.string() + " is not a model checkpoint");
  }

  ModelCheckpoint ckpt;
  ckpt.format_version = wire::get_u32(in, "format version");
  if (ckpt.format_version != kCheckpointVersion) {
    throw FormatError(FormatError::Kind::bad_version,
                      path.string() + " has unsupported checkpoint version " +
                          std::to_string(ckpt.format_version));
  }
  ckpt.training_step = wire::get_u64(in, "training step");
  const std::string config_text = wire::get_string(in, "config block");
  ckpt.config = ModelConfig::from_text(config_text);

  const std::uint32_t blob_count = wire::get_u32(in, "blob count");
  if (blob_count > (1u << 16)) {
    throw FormatError(FormatError::Kind::corrupt,
                      path.string() + " declares an implausible blob count");
  }
  ckpt.blobs.reserve(blob_count);
  for (std::uint32_t b = 0; b < blob_count; ++b) {
    ModelCheckpoint::Blob blob;
    blob.name = wire::get_string(in, "blob name");
    const std::uint32_t rank = wire::get_u32(in, "blob rank");
    if (rank > 8) {
      throw FormatError(FormatError::Kind::corrupt, "blob `" + blob.name + "` has rank " +
                                                        std::to_string(rank));
    }
    blob.dims.resize(rank);
    for (std::uint32_t d = 0; d < rank; ++d) blob.dims[d] = wire::get_u32(in, "blob dims");
    const std::uint32_t count = wire::get_u32(in, "blob value count");
    if (count != dims_product(blob.dims)) {
      throw FormatError(FormatError::Kind::shape_mismatch,
                        "blob `" + blob.name + "` declares " + std::to_string(count) +
                            " values for a shape holding " +
                            std::to_string(dims_product(blob.dims)));
    }
    blob.values.resize(count);
    for (std::uint32_t i = 0; i < count; ++i) blob.values[i] = wire::get_f32(in, "blob values");
    ckpt.blobs.push_back(std::move(blob));
  }

  if (in.peek() != std::ifstream::traits_type::eof()) {
    throw FormatError(FormatError::Kind::corrupt,
                      path.string() + " has trailing bytes after the last blob");
  }
  return ckpt;
}

}  // namespace landseg
