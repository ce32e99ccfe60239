// landseg: land-cover segmentation and change-detection toolkit.
//
// Subcommands cover the whole pipeline: synth (procedural scenes),
// prepare (tile + split into sample archives), train, eval, infer, and
// change. Exit codes: 0 success, 1 internal error, 2 usage/data error.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "landseg/change.hpp"
#include "landseg/checkpoint.hpp"
#include "landseg/dataset.hpp"
#include "landseg/image_io.hpp"
#include "landseg/mask_codec.hpp"
#include "landseg/metrics.hpp"
#include "landseg/model.hpp"
#include "landseg/palette.hpp"
#include "landseg/synth.hpp"
#include "landseg/tiling.hpp"
#include "landseg/train.hpp"

namespace fs = std::filesystem;
using namespace landseg;

namespace {

enum class LogLevel { debug = 0, info = 1, warn = 2, error = 3 };
LogLevel g_log_level = LogLevel::info;

void log_at(LogLevel level, const std::string& msg) {
  if (level < g_log_level) return;
  static const char* names[] = {"debug", "info", "warn", "error"};
  std::cerr << "[" << names[static_cast<int>(level)] << "] " << msg << "\n";
}

void print_config(const std::vector<std::pair<std::string, std::string>>& kv) {
  for (const auto& [k, v] : kv) std::cout << "config: " << k << " = " << v << "\n";
}

std::string join_ints(const std::vector<int>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(values[i]);
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& s, const std::string& what) {
  std::vector<int> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw ParameterError("bad integer `" + item + "` in " + what);
    }
  }
  if (out.empty()) throw ParameterError(what + " must not be empty");
  return out;
}

// Optional key-value file overriding the palette and model defaults.
struct FileConfig {
  std::optional<std::string> palette_file;
  std::map<std::string, std::string> model_keys;
};

FileConfig read_file_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  FileConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      if (line.find_first_not_of(" \t\r") != std::string::npos) {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
      }
      continue;
    }
    auto trim = [](std::string s) {
      const std::size_t a = s.find_first_not_of(" \t\r");
      const std::size_t b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "palette_file") {
      cfg.palette_file = value;
    } else if (key == "output_stride" || key == "encoder_channel_plan" || key == "aspp_rates" ||
               key == "aspp_out_channels" || key == "decoder_low_level_channels") {
      cfg.model_keys[key] = value;
    } else {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": unknown key `" + key +
                      "`");
    }
  }
  return cfg;
}

void apply_file_config(const FileConfig& file_cfg, ModelConfig& model) {
  for (const auto& [key, value] : file_cfg.model_keys) {
    if (key == "output_stride") {
      model.output_stride = std::stoi(value);
    } else if (key == "encoder_channel_plan") {
      model.encoder_channel_plan = parse_int_list(value, "encoder_channel_plan");
    } else if (key == "aspp_rates") {
      model.aspp_rates = parse_int_list(value, "aspp_rates");
    } else if (key == "aspp_out_channels") {
      model.aspp_out_channels = std::stoi(value);
    } else if (key == "decoder_low_level_channels") {
      model.decoder_low_level_channels = std::stoi(value);
    }
  }
}

std::array<double, kNumClasses> parse_mix(const std::string& spec, const ClassPalette& palette) {
  std::array<double, kNumClasses> mix{};
  std::array<bool, kNumClasses> seen{};
  std::stringstream in(spec);
  std::string item;
  double sum = 0.0;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    const std::size_t colon = item.find(':');
    if (colon == std::string::npos) {
      throw ParameterError("mix entry `" + item + "` is not name:percent");
    }
    const std::string name = item.substr(0, colon);
    int cls = -1;
    for (int c = 0; c < kNumClasses; ++c) {
      if (palette.entry(c).name == name) {
        cls = c;
        break;
      }
    }
    if (cls < 0) throw ParameterError("unknown class `" + name + "` in mix");
    if (seen[static_cast<std::size_t>(cls)]) {
      throw ParameterError("class `" + name + "` repeats in mix");
    }
    seen[static_cast<std::size_t>(cls)] = true;
    double percent = 0.0;
    try {
      percent = std::stod(item.substr(colon + 1));
    } catch (const std::exception&) {
      throw ParameterError("bad percent in mix entry `" + item + "`");
    }
    if (percent < 0.0) throw ParameterError("mix percent must be non-negative");
    mix[static_cast<std::size_t>(cls)] = percent / 100.0;
    sum += percent;
  }
  if (std::abs(sum - 100.0) > 1e-6) {
    throw ParameterError("mix percentages must sum to 100, got " + std::to_string(sum));
  }
  return mix;
}

std::vector<std::string> png_names(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError(dir.string() + " is not a directory");
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") {
      names.push_back(entry.path().filename().string());
    }
  }
  std::sort(names.begin(), names.end());
  return names;
}

// Tiled inference for big inputs, direct prediction for tile-sized and
// smaller ones.
LabelMask infer_mask(const RasterImage& image, const Model& model, int tile_size) {
  if (image.width >= tile_size && image.height >= tile_size) {
    return tiled_inference(image, model, tile_size);
  }
  return predict_mask(model, image_to_tensor(image));
}

// ---- subcommand options ----

struct PrepareOpts {
  std::string images_dir, masks_dir, out_prefix;
  int tile = 512;
  double split = 0.9;
  bool lenient = false;
};

struct SynthOpts {
  std::string out_dir;
  int scenes = 8;
  int size = 64;
  std::string mix = "forest:30,agriculture:25,urban:20,water:15,rangeland:10";
};

struct TrainOpts {
  std::string train_archive, eval_archive, out_dir;
  TrainConfig train_cfg;
};

struct EvalOpts {
  std::string ckpt, archive, csv_out;
  bool exclude_unknown = false;
};

struct InferOpts {
  std::string ckpt, image, out, percent_csv;
  int tile = 512;
};

struct ChangeOpts {
  std::string ckpt, t1, t2, out_prefix;
  std::string format = "markdown";
  std::string location = "unlabeled location";
  std::string t1_label = "T1", t2_label = "T2";
  int tile = 512;
  bool drop_zero = false;
};

int run_prepare(const PrepareOpts& opt, const ClassPalette& palette, std::uint64_t seed) {
  print_config({{"command", "prepare"},
                {"images", opt.images_dir},
                {"masks", opt.masks_dir},
                {"out", opt.out_prefix},
                {"tile", std::to_string(opt.tile)},
                {"split", std::to_string(opt.split)},
                {"seed", std::to_string(seed)},
                {"mask_decode", opt.lenient ? "lenient" : "strict"}});

  const std::vector<std::string> image_names = png_names(opt.images_dir);
  const std::vector<std::string> mask_names = png_names(opt.masks_dir);
  if (image_names.empty()) throw DataError("no .png images found in " + opt.images_dir);

  std::vector<std::string> unpaired;
  std::vector<std::string> scenes;
  for (const std::string& name : image_names) {
    if (std::find(mask_names.begin(), mask_names.end(), name) == mask_names.end()) {
      unpaired.push_back(opt.images_dir + "/" + name);
    } else {
      scenes.push_back(name);
    }
  }
  for (const std::string& name : mask_names) {
    if (std::find(image_names.begin(), image_names.end(), name) == image_names.end()) {
      unpaired.push_back(opt.masks_dir + "/" + name);
    }
  }
  if (!unpaired.empty()) {
    std::string msg = "unpaired files:";
    for (const std::string& f : unpaired) msg += "\n  " + f;
    throw DataError(msg);
  }

  SplitIndices split;
  if (scenes.size() == 1) {
    // floor(0.9 * 1) = 0 train scenes; the lone scene evaluates.
    split.eval.push_back(0);
  } else {
    split = split_dataset(scenes.size(), opt.split, seed);
  }

  auto build = [&](const std::vector<std::size_t>& indices, const fs::path& out_path) {
    std::vector<SamplePair> samples;
    for (std::size_t idx : indices) {
      const std::string& name = scenes[idx];
      const RasterImage image = load_png(fs::path(opt.images_dir) / name);
      const RasterImage mask_image = load_png(fs::path(opt.masks_dir) / name);
      if (image.width != mask_image.width || image.height != mask_image.height) {
        throw DataError("scene `" + name + "`: image and mask dimensions differ");
      }
      DecodeStats stats;
      const LabelMask mask = decode_mask(mask_image, palette, !opt.lenient, &stats);
      if (stats.off_palette > 0) {
        log_at(LogLevel::warn, "scene `" + name + "`: " + std::to_string(stats.off_palette) +
                                   " off-palette pixels mapped to unknown");
      }
      const std::string stem = fs::path(name).stem().string();
      for (const TileOrigin& origin : tile_grid(image.width, image.height, opt.tile)) {
        SamplePair s;
        s.image = crop_image(image, origin.x, origin.y, opt.tile, opt.tile);
        s.mask = crop_mask(mask, origin.x, origin.y, opt.tile, opt.tile);
        s.source_id = stem;
        s.tile_x = static_cast<std::uint32_t>(origin.x);
        s.tile_y = static_cast<std::uint32_t>(origin.y);
        samples.push_back(std::move(s));
      }
    }
    write_archive(samples, out_path, static_cast<std::uint32_t>(opt.tile));
    return samples.size();
  };

  const std::size_t train_tiles = build(split.train, opt.out_prefix + ".train.lsar");
  const std::size_t eval_tiles = build(split.eval, opt.out_prefix + ".eval.lsar");
  std::cout << "scenes: " << scenes.size() << " (train " << split.train.size() << ", eval "
            << split.eval.size() << ")\n";
  std::cout << "tiles:  " << train_tiles + eval_tiles << " (train " << train_tiles << ", eval "
            << eval_tiles << ")\n";
  std::cout << "wrote " << opt.out_prefix << ".train.lsar and " << opt.out_prefix
            << ".eval.lsar\n";
  return 0;
}

int run_synth(const SynthOpts& opt, const ClassPalette& palette, std::uint64_t seed) {
  print_config({{"command", "synth"},
                {"out", opt.out_dir},
                {"scenes", std::to_string(opt.scenes)},
                {"size", std::to_string(opt.size)},
                {"seed", std::to_string(seed)},
                {"mix", opt.mix}});

  SynthSpec spec;
  spec.seed = seed;
  spec.scene_size = opt.size;
  spec.num_scenes = opt.scenes;
  spec.class_mix = parse_mix(opt.mix, palette);

  const std::vector<SynthScene> scenes = synth_generate(spec, palette);
  fs::create_directories(fs::path(opt.out_dir) / "images");
  fs::create_directories(fs::path(opt.out_dir) / "masks");
  char name[32];
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    std::snprintf(name, sizeof name, "scene_%03zu.png", i);
    save_png(scenes[i].image, fs::path(opt.out_dir) / "images" / name);
    save_png(encode_mask(scenes[i].mask, palette), fs::path(opt.out_dir) / "masks" / name);
  }
  std::cout << "wrote " << scenes.size() << " scene pairs under " << opt.out_dir << "\n";
  return 0;
}

int run_train(const TrainOpts& opt, ModelConfig model_cfg, std::uint64_t seed) {
  model_cfg.seed = seed;
  TrainConfig train_cfg = opt.train_cfg;
  train_cfg.seed = seed;

  print_config({{"command", "train"},
                {"train_archive", opt.train_archive},
                {"eval_archive", opt.eval_archive},
                {"out", opt.out_dir},
                {"learning_rate", std::to_string(train_cfg.learning_rate)},
                {"momentum", std::to_string(train_cfg.momentum)},
                {"batch_size", std::to_string(train_cfg.batch_size)},
                {"max_steps", std::to_string(train_cfg.max_steps)},
                {"eval_interval", std::to_string(train_cfg.eval_interval)},
                {"ignore_unknown_in_loss", train_cfg.ignore_unknown_in_loss ? "true" : "false"},
                {"seed", std::to_string(seed)},
                {"output_stride", std::to_string(model_cfg.output_stride)},
                {"encoder_channel_plan", join_ints(model_cfg.encoder_channel_plan)},
                {"aspp_rates", join_ints(model_cfg.aspp_rates)},
                {"aspp_out_channels", std::to_string(model_cfg.aspp_out_channels)},
                {"decoder_low_level_channels",
                 std::to_string(model_cfg.decoder_low_level_channels)}});

  const std::vector<SamplePair> train_set = read_archive(opt.train_archive);
  const std::vector<SamplePair> eval_set = read_archive(opt.eval_archive);
  ArchiveReader header(opt.train_archive);
  if (static_cast<int>(header.tile_size()) % model_cfg.output_stride != 0) {
    throw ParameterError("archive tile size " + std::to_string(header.tile_size()) +
                         " is not divisible by output stride " +
                         std::to_string(model_cfg.output_stride));
  }

  const ModelCheckpoint final_ckpt = train_loop(
      train_set, eval_set, model_cfg, train_cfg, opt.out_dir,
      [](long step, double loss, std::optional<double> miou) {
        if (miou) {
          log_at(LogLevel::info, "step " + std::to_string(step) + ": loss " + std::to_string(loss) +
                                     ", eval mIoU " + std::to_string(*miou));
        } else {
          log_at(LogLevel::debug, "step " + std::to_string(step) + ": loss " + std::to_string(loss));
        }
      });

  std::cout << "trained " << final_ckpt.training_step << " steps\n";
  std::cout << "checkpoints: " << opt.out_dir << "/latest.ckpt";
  if (!eval_set.empty()) std::cout << ", " << opt.out_dir << "/best.ckpt";
  std::cout << "\nlog: " << opt.out_dir << "/train_log.csv\n";
  return 0;
}

int run_eval(const EvalOpts& opt) {
  print_config({{"command", "eval"},
                {"checkpoint", opt.ckpt},
                {"archive", opt.archive},
                {"exclude_unknown", opt.exclude_unknown ? "true" : "false"},
                {"csv", opt.csv_out.empty() ? "(none)" : opt.csv_out}});

  const Model model = model_from_checkpoint(load_checkpoint(opt.ckpt));
  const std::vector<SamplePair> samples = read_archive(opt.archive);
  const EvalResult result = evaluate(model, samples);
  const double miou = mean_iou(result.per_class, opt.exclude_unknown);

  std::printf("%-14s %s\n", "class", "iou");
  for (int c = 0; c < kNumClasses; ++c) {
    if (result.per_class[static_cast<std::size_t>(c)]) {
      std::printf("%-14s %.4f\n", kClassNames[static_cast<std::size_t>(c)],
                  *result.per_class[static_cast<std::size_t>(c)]);
    } else {
      std::printf("%-14s %s\n", kClassNames[static_cast<std::size_t>(c)], "undefined");
    }
  }
  std::printf("\nsummary:\n");
  std::printf("miou=%.6f\n", miou);
  std::printf("loss=%.6f\n", result.loss);
  std::printf("pixels=%llu\n", static_cast<unsigned long long>(result.cm.total()));

  if (!opt.csv_out.empty()) {
    std::ofstream csv(opt.csv_out, std::ios::trunc);
    if (!csv) throw IoError("cannot open " + opt.csv_out);
    csv << iou_csv(result.per_class);
  }
  return 0;
}

int run_infer(const InferOpts& opt, const ClassPalette& palette) {
  print_config({{"command", "infer"},
                {"checkpoint", opt.ckpt},
                {"image", opt.image},
                {"out", opt.out},
                {"tile", std::to_string(opt.tile)},
                {"percent_csv", opt.percent_csv.empty() ? "(none)" : opt.percent_csv}});

  const Model model = model_from_checkpoint(load_checkpoint(opt.ckpt));
  const RasterImage image = load_png(opt.image);
  const LabelMask mask = infer_mask(image, model, opt.tile);
  save_png(encode_mask(mask, palette), opt.out);
  if (!opt.percent_csv.empty()) {
    std::ofstream csv(opt.percent_csv, std::ios::trunc);
    if (!csv) throw IoError("cannot open " + opt.percent_csv);
    csv << percentages_csv(class_percentages(mask));
  }
  std::cout << "wrote " << opt.out << "\n";
  return 0;
}

int run_change(const ChangeOpts& opt, const ClassPalette& palette) {
  print_config({{"command", "change"},
                {"checkpoint", opt.ckpt},
                {"t1", opt.t1},
                {"t2", opt.t2},
                {"out", opt.out_prefix},
                {"format", opt.format},
                {"location", opt.location},
                {"t1_label", opt.t1_label},
                {"t2_label", opt.t2_label},
                {"tile", std::to_string(opt.tile)},
                {"drop_zero", opt.drop_zero ? "true" : "false"}});

  const Model model = model_from_checkpoint(load_checkpoint(opt.ckpt));
  const RasterImage image_t1 = load_png(opt.t1);
  const RasterImage image_t2 = load_png(opt.t2);

  LabelMask mask_t1, mask_t2;
  try {
    mask_t1 = infer_mask(image_t1, model, opt.tile);
  } catch (const Error& e) {
    throw DataError("image at t1 (" + opt.t1 + "): " + e.what());
  }
  try {
    mask_t2 = infer_mask(image_t2, model, opt.tile);
  } catch (const Error& e) {
    throw DataError("image at t2 (" + opt.t2 + "): " + e.what());
  }

  const ChangeReport report =
      report_from_masks(mask_t1, mask_t2, opt.location, opt.t1_label, opt.t2_label);
  const ReportFormat format =
      opt.format == "csv" ? ReportFormat::csv : ReportFormat::markdown;
  const std::string text = render_report(report, format, opt.drop_zero);

  const std::string report_path =
      opt.out_prefix + (format == ReportFormat::csv ? ".report.csv" : ".report.md");
  std::ofstream out(report_path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + report_path);
  out << text;
  out.close();

  save_png(encode_mask(mask_t1, palette), opt.out_prefix + ".t1_mask.png");
  save_png(encode_mask(mask_t2, palette), opt.out_prefix + ".t2_mask.png");

  std::cout << text;
  std::cout << "\nwrote " << report_path << ", " << opt.out_prefix << ".t1_mask.png, "
            << opt.out_prefix << ".t2_mask.png\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"landseg: land-cover segmentation and change detection"};
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 42;
  std::string log_level = "info";
  std::string config_file;
  app.add_option("--seed", seed, "seed for every random choice (default 42)");
  app.add_option("--log-level", log_level, "debug|info|warn|error (default info)")
      ->check(CLI::IsMember({"debug", "info", "warn", "error"}));
  app.add_option("--config", config_file, "key-value file overriding palette and model defaults");

  PrepareOpts prepare_opts;
  auto* prepare = app.add_subcommand("prepare", "tile scene pairs into train/eval archives");
  prepare->add_option("--images", prepare_opts.images_dir, "directory of scene PNGs")->required();
  prepare->add_option("--masks", prepare_opts.masks_dir, "directory of mask PNGs")->required();
  prepare->add_option("--out", prepare_opts.out_prefix, "output archive prefix")->required();
  prepare->add_option("--tile", prepare_opts.tile, "tile size (default 512)");
  prepare->add_option("--split", prepare_opts.split, "train fraction (default 0.9)");
  prepare->add_flag("--lenient", prepare_opts.lenient,
                    "map off-palette mask colors to unknown instead of failing");

  SynthOpts synth_opts;
  auto* synth = app.add_subcommand("synth", "generate synthetic scene/mask pairs");
  synth->add_option("--out", synth_opts.out_dir, "output directory")->required();
  synth->add_option("--scenes", synth_opts.scenes, "number of scenes (default 8)");
  synth->add_option("--size", synth_opts.size, "scene size, multiple of 16 (default 64)");
  synth->add_option("--mix", synth_opts.mix, "class:percent,... (default 5-class mix)");

  TrainOpts train_opts;
  ModelConfig model_cfg;
  std::string encoder_plan_str, aspp_rates_str;
  auto* train = app.add_subcommand("train", "train a segmentation model on sample archives");
  train->add_option("--train", train_opts.train_archive, "training archive")->required();
  train->add_option("--eval", train_opts.eval_archive, "evaluation archive")->required();
  train->add_option("--out", train_opts.out_dir, "output directory")->required();
  train->add_option("--lr", train_opts.train_cfg.learning_rate, "learning rate (default 1e-2)");
  train->add_option("--momentum", train_opts.train_cfg.momentum, "momentum (default 0.9)");
  train->add_option("--batch", train_opts.train_cfg.batch_size, "batch size (default 4)");
  train->add_option("--steps", train_opts.train_cfg.max_steps, "training steps (default 500)");
  train->add_option("--eval-interval", train_opts.train_cfg.eval_interval,
                    "steps between evaluations (default 100)");
  train->add_flag("--ignore-unknown", train_opts.train_cfg.ignore_unknown_in_loss,
                  "exclude unknown-class pixels from the loss");
  auto add_model_flags = [&](CLI::App* cmd) {
    cmd->add_option("--output-stride", model_cfg.output_stride, "encoder output stride (default 16)");
    cmd->add_option("--encoder-plan", encoder_plan_str, "stage widths, e.g. 12,24,32,48");
    cmd->add_option("--aspp-rates", aspp_rates_str, "dilation rates, e.g. 6,12,18");
    cmd->add_option("--aspp-out", model_cfg.aspp_out_channels, "ASPP output channels (default 48)");
    cmd->add_option("--decoder-low", model_cfg.decoder_low_level_channels,
                    "decoder low-level channels (default 16)");
  };
  add_model_flags(train);

  EvalOpts eval_opts;
  auto* eval = app.add_subcommand("eval", "report per-class IoU and mIoU of a checkpoint");
  eval->add_option("--ckpt", eval_opts.ckpt, "model checkpoint")->required();
  eval->add_option("--archive", eval_opts.archive, "evaluation archive")->required();
  eval->add_option("--csv", eval_opts.csv_out, "also write class,iou rows to this file");
  eval->add_flag("--exclude-unknown", eval_opts.exclude_unknown,
                 "exclude the unknown class from the mIoU average");

  InferOpts infer_opts;
  auto* infer = app.add_subcommand("infer", "segment one image into a palette mask PNG");
  infer->add_option("--ckpt", infer_opts.ckpt, "model checkpoint")->required();
  infer->add_option("--image", infer_opts.image, "input PNG")->required();
  infer->add_option("--out", infer_opts.out, "output mask PNG")->required();
  infer->add_option("--tile", infer_opts.tile, "tile size for large inputs (default 512)");
  infer->add_option("--percent-csv", infer_opts.percent_csv,
                    "also write class,percent rows for the predicted mask");

  ChangeOpts change_opts;
  auto* change = app.add_subcommand("change", "compare land cover between two co-located images");
  change->add_option("--ckpt", change_opts.ckpt, "model checkpoint")->required();
  change->add_option("--t1", change_opts.t1, "earlier image PNG")->required();
  change->add_option("--t2", change_opts.t2, "later image PNG")->required();
  change->add_option("--out", change_opts.out_prefix, "output prefix")->required();
  change->add_option("--format", change_opts.format, "markdown|csv (default markdown)")
      ->check(CLI::IsMember({"markdown", "csv"}));
  change->add_option("--location", change_opts.location, "location label");
  change->add_option("--t1-label", change_opts.t1_label, "label for t1 (e.g. a date)");
  change->add_option("--t2-label", change_opts.t2_label, "label for t2");
  change->add_option("--tile", change_opts.tile, "tile size for large inputs (default 512)");
  change->add_flag("--drop-zero", change_opts.drop_zero,
                   "hide classes at 0% in both timestamps");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (log_level == "debug") g_log_level = LogLevel::debug;
  else if (log_level == "warn") g_log_level = LogLevel::warn;
  else if (log_level == "error") g_log_level = LogLevel::error;

  try {
    ClassPalette palette = ClassPalette::defaults();
    if (!config_file.empty()) {
      const FileConfig file_cfg = read_file_config(config_file);
      if (file_cfg.palette_file) palette = ClassPalette::from_file(*file_cfg.palette_file);
      apply_file_config(file_cfg, model_cfg);
    }
    // Explicit list flags override any config-file value.
    if (!encoder_plan_str.empty()) {
      model_cfg.encoder_channel_plan = parse_int_list(encoder_plan_str, "encoder plan");
    }
    if (!aspp_rates_str.empty()) {
      model_cfg.aspp_rates = parse_int_list(aspp_rates_str, "aspp rates");
    }

    if (prepare->parsed()) return run_prepare(prepare_opts, palette, seed);
    if (synth->parsed()) return run_synth(synth_opts, palette, seed);
    if (train->parsed()) return run_train(train_opts, model_cfg, seed);
    if (eval->parsed()) return run_eval(eval_opts);
    if (infer->parsed()) return run_infer(infer_opts, palette);
    if (change->parsed()) return run_change(change_opts, palette);
    std::cerr << "no subcommand\n";
    return 2;
  } catch (const TrainingError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DimensionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}
