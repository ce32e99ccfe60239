#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "landseg/checkpoint.hpp"
#include "landseg/dataset.hpp"
#include "landseg/image_io.hpp"
#include "landseg/mask_codec.hpp"
#include "landseg/model.hpp"

// Full-pipeline exercises of the installed binary: synth -> prepare ->
// train -> eval -> infer -> change, plus the exit-code contract.

#ifndef LANDSEG_BIN
#error "LANDSEG_BIN must point at the landseg executable"
#endif

using namespace landseg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("landseg_cli_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static inline int counter = 0;
};

struct RunResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

RunResult run(const std::string& args, const fs::path& scratch) {
  const fs::path out_file = scratch / "cmd_output.txt";
  const std::string cmd =
      std::string(LANDSEG_BIN) + " " + args + " > " + out_file.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(out_file);
  r.output.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  return r;
}

std::vector<char> file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

const std::string kTinyModelFlags =
    "--output-stride 4 --encoder-plan 4,6 --aspp-rates 2 --aspp-out 6 --decoder-low 4";

}  // namespace

TEST_CASE("full pipeline: synth, prepare, train, eval, infer, change") {
  TempDir tmp;
  const fs::path data = tmp.path / "data";

  // synth
  const RunResult synth = run("--seed 5 synth --out " + data.string() + " --scenes 3 --size 64",
                              tmp.path);
  INFO(synth.output);
  REQUIRE(synth.exit_code == 0);
  CHECK(synth.output.find("config: command = synth") != std::string::npos);
  for (int i = 0; i < 3; ++i) {
    const std::string name = "scene_00" + std::to_string(i) + ".png";
    CHECK(fs::exists(data / "images" / name));
    CHECK(fs::exists(data / "masks" / name));
  }

  // synth determinism: same seed writes byte-identical files
  const fs::path data2 = tmp.path / "data2";
  REQUIRE(run("--seed 5 synth --out " + data2.string() + " --scenes 3 --size 64", tmp.path)
              .exit_code == 0);
  CHECK(file_bytes(data / "images" / "scene_000.png") ==
        file_bytes(data2 / "images" / "scene_000.png"));
  CHECK(file_bytes(data / "masks" / "scene_002.png") ==
        file_bytes(data2 / "masks" / "scene_002.png"));

  // prepare (tile 64 on 64-pixel scenes: one tile per scene)
  const std::string prefix = (tmp.path / "set").string();
  const RunResult prepare =
      run("--seed 9 prepare --images " + (data / "images").string() + " --masks " +
              (data / "masks").string() + " --out " + prefix + " --tile 64",
          tmp.path);
  INFO(prepare.output);
  REQUIRE(prepare.exit_code == 0);
  {
    ArchiveReader train_reader(prefix + ".train.lsar");
    ArchiveReader eval_reader(prefix + ".eval.lsar");
    CHECK(train_reader.count() == 2);  // floor(0.9 * 3) = 2 scenes
    CHECK(eval_reader.count() == 1);
    CHECK(train_reader.tile_size() == 64);
  }

  // prepare determinism
  const std::string prefix2 = (tmp.path / "set2").string();
  REQUIRE(run("--seed 9 prepare --images " + (data / "images").string() + " --masks " +
                  (data / "masks").string() + " --out " + prefix2 + " --tile 64",
              tmp.path)
              .exit_code == 0);
  CHECK(file_bytes(prefix + ".train.lsar") == file_bytes(prefix2 + ".train.lsar"));
  CHECK(file_bytes(prefix + ".eval.lsar") == file_bytes(prefix2 + ".eval.lsar"));

  // train, a few steps on the tiny model
  const fs::path run_dir = tmp.path / "run";
  const RunResult train = run("--seed 3 train --train " + prefix + ".train.lsar --eval " + prefix +
                                  ".eval.lsar --out " + run_dir.string() + " " + kTinyModelFlags +
                                  " --steps 4 --eval-interval 2 --batch 2 --lr 0.001",
                              tmp.path);
  INFO(train.output);
  REQUIRE(train.exit_code == 0);
  CHECK(fs::exists(run_dir / "latest.ckpt"));
  CHECK(fs::exists(run_dir / "best.ckpt"));
  CHECK(fs::exists(run_dir / "train_log.csv"));
  {
    std::ifstream log(run_dir / "train_log.csv");
    std::string header;
    std::getline(log, header);
    CHECK(header == "step,loss,eval_miou");
  }

  // eval prints a per-class table and a summary block
  const RunResult eval = run("eval --ckpt " + (run_dir / "latest.ckpt").string() + " --archive " +
                                 prefix + ".eval.lsar --csv " + (tmp.path / "iou.csv").string(),
                             tmp.path);
  INFO(eval.output);
  REQUIRE(eval.exit_code == 0);
  CHECK(eval.output.find("miou=") != std::string::npos);
  CHECK(eval.output.find("urban") != std::string::npos);
  CHECK(fs::exists(tmp.path / "iou.csv"));

  // infer: output PNG decodes strictly back to the predicted mask
  const fs::path mask_png = tmp.path / "mask.png";
  const RunResult infer =
      run("infer --ckpt " + (run_dir / "latest.ckpt").string() + " --image " +
              (data / "images" / "scene_000.png").string() + " --out " + mask_png.string() +
              " --tile 64 --percent-csv " + (tmp.path / "percent.csv").string(),
          tmp.path);
  INFO(infer.output);
  REQUIRE(infer.exit_code == 0);
  {
    const Model model = model_from_checkpoint(load_checkpoint(run_dir / "latest.ckpt"));
    const RasterImage image = load_png(data / "images" / "scene_000.png");
    const LabelMask expected = predict_mask(model, image_to_tensor(image));
    const LabelMask decoded = decode_mask(load_png(mask_png), ClassPalette::defaults(), true);
    CHECK(decoded == expected);

    std::ifstream pcsv(tmp.path / "percent.csv");
    std::string header;
    std::getline(pcsv, header);
    CHECK(header == "class,percent");
  }

  // change of an image against itself: all-zero delta table
  const std::string change_prefix = (tmp.path / "delta").string();
  const RunResult change =
      run("change --ckpt " + (run_dir / "latest.ckpt").string() + " --t1 " +
              (data / "images" / "scene_000.png").string() + " --t2 " +
              (data / "images" / "scene_000.png").string() + " --out " + change_prefix +
              " --tile 64 --location somewhere --t1-label 2004 --t2-label 2018",
          tmp.path);
  INFO(change.output);
  REQUIRE(change.exit_code == 0);
  CHECK(fs::exists(change_prefix + ".report.md"));
  CHECK(fs::exists(change_prefix + ".t1_mask.png"));
  CHECK(fs::exists(change_prefix + ".t2_mask.png"));
  const std::string report = change.output;
  CHECK(report.find("somewhere") != std::string::npos);
  CHECK(report.find("-") != std::string::npos);
  CHECK(report.find("+0.0") != std::string::npos);
  // No non-zero delta anywhere in the self-comparison.
  CHECK(report.find("+46") == std::string::npos);
  CHECK(file_bytes(change_prefix + ".t1_mask.png") == file_bytes(change_prefix + ".t2_mask.png"));

  // csv format variant
  const RunResult change_csv =
      run("change --ckpt " + (run_dir / "latest.ckpt").string() + " --t1 " +
              (data / "images" / "scene_000.png").string() + " --t2 " +
              (data / "images" / "scene_001.png").string() + " --out " + change_prefix +
              "2 --tile 64 --format csv",
          tmp.path);
  REQUIRE(change_csv.exit_code == 0);
  CHECK(fs::exists(change_prefix + "2.report.csv"));
  CHECK(change_csv.output.find("class,t1_percent,t2_percent,delta_points") != std::string::npos);
}

TEST_CASE("exit codes: 0 success, 2 usage/data errors") {
  TempDir tmp;

  SUBCASE("help exits 0") {
    CHECK(run("--help", tmp.path).exit_code == 0);
    CHECK(run("synth --help", tmp.path).exit_code == 0);
  }

  SUBCASE("unknown flag exits 2") {
    CHECK(run("synth --out x --frobnicate", tmp.path).exit_code == 2);
  }

  SUBCASE("missing subcommand exits 2") {
    CHECK(run("", tmp.path).exit_code == 2);
  }

  SUBCASE("empty input directory exits 2 with a message") {
    const fs::path empty = tmp.path / "empty";
    fs::create_directories(empty);
    const RunResult r = run("prepare --images " + empty.string() + " --masks " + empty.string() +
                                " --out " + (tmp.path / "x").string(),
                            tmp.path);
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("no .png images") != std::string::npos);
  }

  SUBCASE("unpaired files are listed and exit 2") {
    const fs::path images = tmp.path / "images";
    const fs::path masks = tmp.path / "masks";
    fs::create_directories(images);
    fs::create_directories(masks);
    RasterImage img(16, 16);
    save_png(img, images / "a.png");
    save_png(img, images / "b.png");
    save_png(img, masks / "a.png");
    save_png(img, masks / "c.png");
    const RunResult r = run("prepare --images " + images.string() + " --masks " + masks.string() +
                                " --out " + (tmp.path / "x").string(),
                            tmp.path);
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("b.png") != std::string::npos);
    CHECK(r.output.find("c.png") != std::string::npos);
  }

  SUBCASE("mix not summing to 100 exits 2") {
    const RunResult r =
        run("synth --out " + (tmp.path / "s").string() + " --mix water:60,forest:20", tmp.path);
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("sum to 100") != std::string::npos);
  }

  SUBCASE("missing checkpoint file exits 2") {
    const RunResult r = run("eval --ckpt /nonexistent.ckpt --archive /nonexistent.lsar", tmp.path);
    CHECK(r.exit_code == 2);
  }

  SUBCASE("degenerate water mix decodes to all class 4") {
    const fs::path out = tmp.path / "water";
    REQUIRE(run("--seed 2 synth --out " + out.string() + " --scenes 1 --size 32 --mix water:100",
                tmp.path)
                .exit_code == 0);
    const LabelMask mask =
        decode_mask(load_png(out / "masks" / "scene_000.png"), ClassPalette::defaults(), true);
    for (auto c : mask.classes) CHECK(c == 4);
  }
}

TEST_CASE("config file overrides the palette and model defaults") {
  TempDir tmp;

  // Custom palette: same classes, different colors.
  const fs::path palette_file = tmp.path / "palette.txt";
  std::ofstream(palette_file) << "0 urban 10 0 0\n"
                              << "1 agriculture 0 10 0\n"
                              << "2 rangeland 0 0 10\n"
                              << "3 forest 20 20 0\n"
                              << "4 water 0 20 20\n"
                              << "5 barren 20 0 20\n"
                              << "6 unknown 5 5 5\n";
  const fs::path config_file = tmp.path / "landseg.conf";
  std::ofstream(config_file) << "palette_file = " << palette_file.string() << "\n"
                             << "output_stride = 4\n"
                             << "encoder_channel_plan = 4,6\n"
                             << "aspp_rates = 2\n"
                             << "aspp_out_channels = 6\n"
                             << "decoder_low_level_channels = 4\n";

  const fs::path data = tmp.path / "data";
  const RunResult synth = run("--seed 11 --config " + config_file.string() + " synth --out " +
                                  data.string() + " --scenes 2 --size 64 --mix water:100",
                              tmp.path);
  INFO(synth.output);
  REQUIRE(synth.exit_code == 0);

  // Masks are rendered with the overridden water color.
  const RasterImage mask_img = load_png(data / "masks" / "scene_000.png");
  CHECK(mask_img.pixel(0, 0)[0] == 0);
  CHECK(mask_img.pixel(0, 0)[1] == 20);
  CHECK(mask_img.pixel(0, 0)[2] == 20);

  // prepare + train through the same config: the custom palette decodes
  // the masks and the model picks up the overridden topology.
  const std::string prefix = (tmp.path / "set").string();
  REQUIRE(run("--seed 11 --config " + config_file.string() + " prepare --images " +
                  (data / "images").string() + " --masks " + (data / "masks").string() +
                  " --out " + prefix + " --tile 64",
              tmp.path)
              .exit_code == 0);
  const fs::path run_dir = tmp.path / "run";
  const RunResult train = run("--seed 11 --config " + config_file.string() + " train --train " +
                                  prefix + ".train.lsar --eval " + prefix +
                                  ".eval.lsar --out " + run_dir.string() +
                                  " --steps 2 --eval-interval 1 --batch 1 --lr 0.001",
                              tmp.path);
  INFO(train.output);
  REQUIRE(train.exit_code == 0);
  CHECK(train.output.find("config: output_stride = 4") != std::string::npos);
  const ModelCheckpoint ckpt = load_checkpoint(run_dir / "latest.ckpt");
  CHECK(ckpt.config.output_stride == 4);
  CHECK(ckpt.config.encoder_channel_plan == std::vector<int>{4, 6});
}

TEST_CASE("prepare on a single full-size scene yields 25 tiles with defaults") {
  TempDir tmp;
  const fs::path data = tmp.path / "big";
  const RunResult synth = run("--seed 31 synth --out " + data.string() +
                                  " --scenes 1 --size 2448 --mix forest:60,urban:40",
                              tmp.path);
  INFO(synth.output);
  REQUIRE(synth.exit_code == 0);

  const std::string prefix = (tmp.path / "big_set").string();
  const RunResult prepare = run("--seed 31 prepare --images " + (data / "images").string() +
                                    " --masks " + (data / "masks").string() + " --out " + prefix,
                                tmp.path);
  INFO(prepare.output);
  REQUIRE(prepare.exit_code == 0);

  // floor(0.9 * 1) = 0 train scenes; the lone scene tiles into eval.
  ArchiveReader train_reader(prefix + ".train.lsar");
  ArchiveReader eval_reader(prefix + ".eval.lsar");
  CHECK(train_reader.count() == 0);
  CHECK(eval_reader.count() == 25);
  CHECK(eval_reader.tile_size() == 512);

  // Tile origins follow the even 484-stride grid.
  std::set<std::uint32_t> xs, ys;
  while (auto s = eval_reader.next()) {
    xs.insert(s->tile_x);
    ys.insert(s->tile_y);
    CHECK(s->image.width == 512);
    CHECK(s->mask.height == 512);
  }
  CHECK(xs == std::set<std::uint32_t>{0, 484, 968, 1452, 1936});
  CHECK(ys == std::set<std::uint32_t>{0, 484, 968, 1452, 1936});
}
