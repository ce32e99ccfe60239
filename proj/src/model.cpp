#include "landseg/model.hpp"

#include <cmath>
#include <set>
#include <sstream>

namespace landseg {

namespace {

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

int log2_int(int v) {
  int n = 0;
  while ((1 << n) < v) ++n;
  return n;
}

std::string join_ints(const std::vector<int>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(values[i]);
  }
  return out;
}

std::vector<int> parse_ints(const std::string& s) {
  std::vector<int> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stoi(item));
  }
  return out;
}

constexpr int kTileSize = 512;

}  // namespace

void ModelConfig::validate() const {
  if (input_channels < 1) throw ParameterError("input_channels must be positive");
  if (num_classes < 2) throw ParameterError("num_classes must be at least 2");
  if (!is_power_of_two(output_stride) || output_stride < 4 || kTileSize % output_stride != 0) {
    throw ParameterError("output_stride must be a power of two in 4.." + std::to_string(kTileSize) +
                         " dividing the tile size, got " + std::to_string(output_stride));
  }
  if (encoder_channel_plan.empty()) throw ParameterError("encoder_channel_plan must not be empty");
  for (int c : encoder_channel_plan) {
    if (c < 1) throw ParameterError("encoder channel widths must be positive");
  }
  const int downsamplings = log2_int(output_stride);
  if (static_cast<int>(encoder_channel_plan.size()) < downsamplings) {
    throw ParameterError("encoder needs at least " + std::to_string(downsamplings) +
                         " stages to reach output stride " + std::to_string(output_stride));
  }
  std::set<int> rates;
  for (int r : aspp_rates) {
    if (r < 1) throw ParameterError("aspp rates must be positive");
    if (!rates.insert(r).second) {
      throw ParameterError("aspp rates must be distinct, " + std::to_string(r) + " repeats");
    }
  }
  if (aspp_out_channels < 1) throw ParameterError("aspp_out_channels must be positive");
  if (decoder_low_level_channels < 1) {
    throw ParameterError("decoder_low_level_channels must be positive");
  }
}

std::string ModelConfig::to_text() const {
  std::string out;
  out += "input_channels=" + std::to_string(input_channels) + "\n";
  out += "num_classes=" + std::to_string(num_classes) + "\n";
  out += "output_stride=" + std::to_string(output_stride) + "\n";
  out += "encoder_channel_plan=" + join_ints(encoder_channel_plan) + "\n";
  out += "aspp_rates=" + join_ints(aspp_rates) + "\n";
  out += "aspp_out_channels=" + std::to_string(aspp_out_channels) + "\n";
  out += "decoder_low_level_channels=" + std::to_string(decoder_low_level_channels) + "\n";
  out += "seed=" + std::to_string(seed) + "\n";
  return out;
}

ModelConfig ModelConfig::from_text(const std::string& text) {
  ModelConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError(FormatError::Kind::corrupt, "bad config line `" + line + "`");
    }
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    try {
      if (key == "input_channels") {
        cfg.input_channels = std::stoi(value);
      } else if (key == "num_classes") {
        cfg.num_classes = std::stoi(value);
      } else if (key == "output_stride") {
        cfg.output_stride = std::stoi(value);
      } else if (key == "encoder_channel_plan") {
        cfg.encoder_channel_plan = parse_ints(value);
      } else if (key == "aspp_rates") {
        cfg.aspp_rates = parse_ints(value);
      } else if (key == "aspp_out_channels") {
        cfg.aspp_out_channels = std::stoi(value);
      } else if (key == "decoder_low_level_channels") {
        cfg.decoder_low_level_channels = std::stoi(value);
      } else if (key == "seed") {
        cfg.seed = std::stoull(value);
      } else {
        throw FormatError(FormatError::Kind::corrupt, "unknown config key `" + key + "`");
      }
    } catch (const std::invalid_argument&) {
      throw FormatError(FormatError::Kind::corrupt, "bad value for config key `" + key + "`");
    } catch (const std::out_of_range&) {
      throw FormatError(FormatError::Kind::corrupt, "bad value for config key `" + key + "`");
    }
    seen.insert(key);
  }
  if (seen.size() != 8) {
    throw FormatError(FormatError::Kind::corrupt,
                      "config block has " + std::to_string(seen.size()) + " of 8 required keys");
  }
  return cfg;
}

namespace {

ConvLayerT<float> make_layer(std::string name, int in_c, int out_c, int k, int stride, int dilation,
                             Rng& rng) {
  ConvLayerT<float> layer;
  layer.name = std::move(name);
  layer.params = ConvParams{k, stride, dilation, Padding::same, in_c, out_c};
  layer.weight = Tensor(Shape4{out_c, in_c, k, k});
  const double fan_in = static_cast<double>(in_c) * k * k;
  const double bound = std::sqrt(6.0 / fan_in);
  for (float& w : layer.weight.data) w = static_cast<float>(rng.uniform(-bound, bound));
  layer.bias.assign(static_cast<std::size_t>(out_c), 0.0f);
  return layer;
}

}  // namespace

Model build_model(const ModelConfig& config) {
  config.validate();
  Model model;
  model.config = config;
  Rng rng(config.seed);

  // Encoder: stride-2 stages until the output stride is reached, then
  // dilation doubles per extra stage instead of downsampling further.
  int cur_stride = 1;
  int dilation = 1;
  int in_c = config.input_channels;
  for (std::size_t i = 0; i < config.encoder_channel_plan.size(); ++i) {
    const int out_c = config.encoder_channel_plan[i];
    int stride = 1;
    if (cur_stride < config.output_stride) {
      stride = 2;
    } else {
      dilation *= 2;
    }
    model.layers.push_back(make_layer("encoder.stage" + std::to_string(i) + ".conv", in_c, out_c, 3,
                                      stride, std::max(dilation, 1), rng));
    model.enc.push_back(static_cast<int>(model.layers.size()) - 1);
    cur_stride *= stride;
    if (cur_stride == 4 && model.low_stage < 0) model.low_stage = static_cast<int>(i);
    in_c = out_c;
  }
  const int high_c = in_c;
  const int low_c = config.encoder_channel_plan[static_cast<std::size_t>(model.low_stage)];

  model.layers.push_back(make_layer("aspp.conv1x1", high_c, config.aspp_out_channels, 1, 1, 1, rng));
  model.aspp_1x1 = static_cast<int>(model.layers.size()) - 1;
  for (int rate : config.aspp_rates) {
    model.layers.push_back(make_layer("aspp.rate" + std::to_string(rate), high_c,
                                      config.aspp_out_channels, 3, 1, rate, rng));
    model.aspp_rate_layers.push_back(static_cast<int>(model.layers.size()) - 1);
  }
  model.layers.push_back(
      make_layer("aspp.image_pool", high_c, config.aspp_out_channels, 1, 1, 1, rng));
  model.aspp_pool = static_cast<int>(model.layers.size()) - 1;
  const int cat_c = (2 + static_cast<int>(config.aspp_rates.size())) * config.aspp_out_channels;
  model.layers.push_back(make_layer("aspp.fuse", cat_c, config.aspp_out_channels, 1, 1, 1, rng));
  model.aspp_fuse = static_cast<int>(model.layers.size()) - 1;

  model.layers.push_back(
      make_layer("decoder.low_reduce", low_c, config.decoder_low_level_channels, 1, 1, 1, rng));
  model.dec_reduce = static_cast<int>(model.layers.size()) - 1;
  const int dec_in = config.aspp_out_channels + config.decoder_low_level_channels;
  model.layers.push_back(
      make_layer("decoder.refine0", dec_in, config.aspp_out_channels, 3, 1, 1, rng));
  model.dec_refine0 = static_cast<int>(model.layers.size()) - 1;
  model.layers.push_back(make_layer("decoder.refine1", config.aspp_out_channels,
                                    config.aspp_out_channels, 3, 1, 1, rng));
  model.dec_refine1 = static_cast<int>(model.layers.size()) - 1;
  model.layers.push_back(
      make_layer("decoder.classifier", config.aspp_out_channels, config.num_classes, 1, 1, 1, rng));
  model.dec_classifier = static_cast<int>(model.layers.size()) - 1;

  return model;
}

LabelMask argmax_mask(const Tensor& logits, int batch_index) {
  if (batch_index < 0 || batch_index >= logits.shape.n) {
    throw ParameterError("batch index " + std::to_string(batch_index) + " outside batch of " +
                         std::to_string(logits.shape.n));
  }
  LabelMask mask(logits.shape.w, logits.shape.h);
  const std::size_t area = static_cast<std::size_t>(logits.shape.h) * logits.shape.w;
  const float* base = logits.plane(batch_index, 0);
  for (std::size_t px = 0; px < area; ++px) {
    int best = 0;
    float best_v = base[px];
    for (int c = 1; c < logits.shape.c; ++c) {
      const float v = base[static_cast<std::size_t>(c) * area + px];
      if (v > best_v) {  // strict: ties keep the lowest class index
        best_v = v;
        best = c;
      }
    }
    mask.classes[px] = static_cast<std::uint8_t>(best);
  }
  return mask;
}

LabelMask predict_mask(const Model& model, const Tensor& image) {
  return argmax_mask(model_forward(model, image));
}

Tensor image_to_tensor(const RasterImage& image) {
  image.validate();
  Tensor t(Shape4{1, 3, image.height, image.width});
  const std::size_t area = static_cast<std::size_t>(image.height) * image.width;
  for (std::size_t px = 0; px < area; ++px) {
    for (int c = 0; c < 3; ++c) {
      t.data[static_cast<std::size_t>(c) * area + px] =
          static_cast<float>(image.rgb[px * 3 + static_cast<std::size_t>(c)]) / 255.0f;
    }
  }
  return t;
}

Tensor images_to_batch(const std::vector<const RasterImage*>& images) {
  if (images.empty()) throw ParameterError("empty batch");
  const int h = images[0]->height, w = images[0]->width;
  Tensor batch(Shape4{static_cast<int>(images.size()), 3, h, w});
  const std::size_t item = static_cast<std::size_t>(3) * h * w;
  for (std::size_t n = 0; n < images.size(); ++n) {
    if (images[n]->height != h || images[n]->width != w) {
      throw DimensionError("batch images disagree in size");
    }
    const Tensor one = image_to_tensor(*images[n]);
    std::copy(one.data.begin(), one.data.end(), batch.data.begin() + n * item);
  }
  return batch;
}

}  // namespace landseg
