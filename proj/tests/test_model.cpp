#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "landseg/checkpoint.hpp"
#include "landseg/model.hpp"
#include "test_util.hpp"

using namespace landseg;
using namespace landseg::testing;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.input_channels = 2;
  cfg.num_classes = 3;
  cfg.output_stride = 4;
  cfg.encoder_channel_plan = {3, 4};
  cfg.aspp_rates = {2, 3};
  cfg.aspp_out_channels = 4;
  cfg.decoder_low_level_channels = 3;
  cfg.seed = 99;
  return cfg;
}

ModelConfig small_config(int output_stride = 16) {
  ModelConfig cfg;
  cfg.encoder_channel_plan = {4, 6, 8, 8};
  cfg.output_stride = output_stride;
  cfg.aspp_rates = {2, 4};
  cfg.aspp_out_channels = 6;
  cfg.decoder_low_level_channels = 4;
  cfg.seed = 5;
  return cfg;
}

std::vector<char> file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("landseg_test_" + std::to_string(::getpid()) + "_" +
                                        std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static inline int counter = 0;
};

}  // namespace

TEST_CASE("ModelConfig validation") {
  CHECK_NOTHROW(ModelConfig{}.validate());

  ModelConfig bad = small_config();
  bad.output_stride = 12;  // not a power of two
  CHECK_THROWS_AS(bad.validate(), ParameterError);
  bad.output_stride = 2;  // below the stride-4 skip
  CHECK_THROWS_AS(bad.validate(), ParameterError);

  bad = small_config();
  bad.encoder_channel_plan = {4, 6};  // cannot reach stride 16 in two stages
  CHECK_THROWS_AS(bad.validate(), ParameterError);

  bad = small_config();
  bad.aspp_rates = {2, 2};
  CHECK_THROWS_AS(bad.validate(), ParameterError);

  bad = small_config();
  bad.aspp_out_channels = 0;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
}

TEST_CASE("ModelConfig text block round-trips") {
  ModelConfig cfg = small_config();
  cfg.seed = 0xdeadbeef12345678ull;
  const ModelConfig back = ModelConfig::from_text(cfg.to_text());
  CHECK(back == cfg);

  CHECK_THROWS_AS(ModelConfig::from_text("input_channels=3\n"), FormatError);
  CHECK_THROWS_AS(ModelConfig::from_text(cfg.to_text() + "mystery=1\n"), FormatError);
}

TEST_CASE("encoder output dims follow the output stride") {
  Rng rng(3);

  SUBCASE("stride 16 on 64x64") {
    Model model = build_model(small_config(16));
    ModelActs<float> acts;
    Tensor image = random_tensor<float>(Shape4{1, 3, 64, 64}, rng, 0.0, 1.0);
    auto [high, low] = encoder_forward(model, image, acts);
    CHECK(high.shape == Shape4{1, 8, 4, 4});
    CHECK(low.shape == Shape4{1, 6, 16, 16});
  }

  SUBCASE("stride 16 on 512x512") {
    ModelConfig cfg = small_config(16);
    cfg.encoder_channel_plan = {2, 2, 2, 2};
    Model model = build_model(cfg);
    ModelActs<float> acts;
    Tensor image = random_tensor<float>(Shape4{1, 3, 512, 512}, rng, 0.0, 1.0);
    auto [high, low] = encoder_forward(model, image, acts);
    CHECK(high.shape.h == 32);
    CHECK(high.shape.w == 32);
    CHECK(low.shape.h == 128);
  }

  SUBCASE("stride 8 on 64x64 dilates the last stage") {
    Model model = build_model(small_config(8));
    ModelActs<float> acts;
    Tensor image = random_tensor<float>(Shape4{1, 3, 64, 64}, rng, 0.0, 1.0);
    auto [high, low] = encoder_forward(model, image, acts);
    CHECK(high.shape == Shape4{1, 8, 8, 8});
    CHECK(low.shape == Shape4{1, 6, 16, 16});
    // The post-stride stage must be dilated, not strided.
    const ConvLayerT<float>& last = model.layers[static_cast<std::size_t>(model.enc.back())];
    CHECK(last.params.stride == 1);
    CHECK(last.params.dilation_rate == 2);
  }

  SUBCASE("indivisible input dims are a shape error") {
    Model model = build_model(small_config(16));
    ModelActs<float> acts;
    Tensor image(Shape4{1, 3, 60, 64});
    CHECK_THROWS_AS(encoder_forward(model, image, acts), DimensionError);
  }
}

TEST_CASE("aspp branch layout and shape preservation") {
  Rng rng(5);
  Model model = build_model(small_config(16));
  ModelActs<float> acts;
  Tensor features = random_tensor<float>(Shape4{1, 8, 4, 4}, rng);
  Tensor out = aspp_forward(model, features, acts);

  // 1x1 + one per rate + image pooling = 2 + |rates| branches.
  CHECK(acts.branch_pre.size() == 2 + model.config.aspp_rates.size());
  CHECK(acts.aspp_cat.shape.c ==
        (2 + static_cast<int>(model.config.aspp_rates.size())) * model.config.aspp_out_channels);
  CHECK(out.shape == Shape4{1, model.config.aspp_out_channels, 4, 4});

  SUBCASE("image-pooling branch of a constant map is constant") {
    Tensor constant(Shape4{1, 8, 6, 6}, std::vector<float>(8 * 36, 0.4f));
    aspp_forward(model, constant, acts);
    // Pool-branch channels sit at the tail of the concat.
    const int pool_begin = acts.aspp_cat.shape.c - model.config.aspp_out_channels;
    for (int c = pool_begin; c < acts.aspp_cat.shape.c; ++c) {
      const float v0 = acts.aspp_cat.at(0, c, 0, 0);
      for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 6; ++x) CHECK(acts.aspp_cat.at(0, c, y, x) == v0);
    }
  }

  SUBCASE("spatial dims preserved across feature sizes and rate sets") {
    ModelConfig cfg = small_config(16);
    cfg.aspp_rates = {1, 5, 9};
    Model wide = build_model(cfg);
    for (int dim : {2, 4, 7}) {
      Tensor f = random_tensor<float>(Shape4{1, 8, dim, dim}, rng);
      Tensor o = aspp_forward(wide, f, acts);
      CHECK(o.shape.h == dim);
      CHECK(o.shape.w == dim);
    }
  }
}

TEST_CASE("decoder lifts to full resolution with the class count") {
  Rng rng(7);
  Model model = build_model(small_config(16));
  ModelActs<float> acts;
  Tensor image = random_tensor<float>(Shape4{2, 3, 64, 64}, rng, 0.0, 1.0);
  Tensor logits = model_forward(model, image, acts);
  CHECK(logits.shape == Shape4{2, 7, 64, 64});

  SUBCASE("stride mismatch is a shape error") {
    Tensor aspp_out(Shape4{1, 6, 4, 4});
    Tensor low(Shape4{1, 6, 20, 20});  // not 4 * output_stride/4
    CHECK_THROWS_AS(decoder_forward(model, aspp_out, low, acts), DimensionError);
  }

  SUBCASE("zeroed low-level reduction makes the output independent of the skip") {
    Model ablated = build_model(small_config(16));
    ConvLayerT<float>& reduce = ablated.layers[static_cast<std::size_t>(ablated.dec_reduce)];
    std::fill(reduce.weight.data.begin(), reduce.weight.data.end(), 0.0f);
    std::fill(reduce.bias.begin(), reduce.bias.end(), 0.0f);

    Tensor aspp_out = random_tensor<float>(Shape4{1, 6, 4, 4}, rng);
    Tensor low_a = random_tensor<float>(Shape4{1, 6, 16, 16}, rng);
    Tensor low_b = random_tensor<float>(Shape4{1, 6, 16, 16}, rng);
    ModelActs<float> acts_a, acts_b;
    Tensor out_a = decoder_forward(ablated, aspp_out, low_a, acts_a);
    Tensor out_b = decoder_forward(ablated, aspp_out, low_b, acts_b);
    CHECK(out_a.data == out_b.data);
  }
}

TEST_CASE("model_forward is deterministic and batch-consistent") {
  Rng rng(9);
  Model model = build_model(small_config(16));
  Tensor image = random_tensor<float>(Shape4{2, 3, 32, 32}, rng, 0.0, 1.0);

  Tensor a = model_forward(model, image);
  Tensor b = model_forward(model, image);
  CHECK(a.data == b.data);  // bit-identical

  // A batch of 2 equals the two batch-of-1 results stacked.
  Tensor first(Shape4{1, 3, 32, 32});
  Tensor second(Shape4{1, 3, 32, 32});
  const std::size_t item = first.data.size();
  std::copy(image.data.begin(), image.data.begin() + static_cast<std::ptrdiff_t>(item),
            first.data.begin());
  std::copy(image.data.begin() + static_cast<std::ptrdiff_t>(item), image.data.end(),
            second.data.begin());
  Tensor out1 = model_forward(model, first);
  Tensor out2 = model_forward(model, second);
  REQUIRE(out1.data.size() + out2.data.size() == a.data.size());
  for (std::size_t i = 0; i < out1.data.size(); ++i) {
    CHECK(a.data[i] == out1.data[i]);
    CHECK(a.data[i + out1.data.size()] == out2.data[i]);
  }
}

TEST_CASE("end-to-end model gradients match finite differences (wide precision)") {
  Rng rng(13);
  Model model_f = build_model(tiny_config());
  ModelT<double> model = model_cast<double>(model_f);

  TensorT<double> image = random_tensor<double>(Shape4{1, 2, 8, 8}, rng, 0.0, 1.0);
  std::vector<LabelMask> targets = {random_mask(8, 8, rng, 3)};

  const ModelLoss<double> result = model_loss_and_grads(model, image, targets);
  CHECK(result.pixels == 64);

  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    ConvLayerT<double>& layer = model.layers[l];
    auto loss = [&]() { return model_loss_and_grads(model, image, targets).loss; };

    {
      const std::vector<double> numeric = central_diff(loss, layer.weight.data);
      const GradCompare cmp = compare_grads(result.grads.weight[l].data, numeric);
      INFO("layer ", layer.name, " weights: ", cmp.describe());
      CHECK(cmp.ok);
    }
    {
      const std::vector<double> numeric = central_diff(loss, layer.bias);
      const GradCompare cmp = compare_grads(result.grads.bias[l], numeric);
      INFO("layer ", layer.name, " bias: ", cmp.describe());
      CHECK(cmp.ok);
    }
  }
}

TEST_CASE("predict_mask argmax rules") {
  SUBCASE("a strictly maximal channel wins everywhere") {
    Tensor logits(Shape4{1, 7, 3, 3});
    for (int px = 0; px < 9; ++px) logits.plane(0, 3)[px] = 1.0f;
    LabelMask mask = argmax_mask(logits);
    for (auto c : mask.classes) CHECK(c == 3);
  }

  SUBCASE("all-equal logits pick class 0") {
    Tensor logits(Shape4{1, 7, 2, 2}, std::vector<float>(28, 0.5f));
    LabelMask mask = argmax_mask(logits);
    for (auto c : mask.classes) CHECK(c == 0);
  }

  SUBCASE("random logits match a per-pixel brute-force argmax") {
    Rng rng(17);
    Tensor logits = random_tensor<float>(Shape4{1, 7, 4, 4}, rng);
    LabelMask mask = argmax_mask(logits);
    for (int y = 0; y < 4; ++y) {
      for (int x = 0; x < 4; ++x) {
        int best = 0;
        for (int c = 1; c < 7; ++c) {
          if (logits.at(0, c, y, x) > logits.at(0, best, y, x)) best = c;
        }
        CHECK(mask.at(x, y) == best);
      }
    }
  }
}

TEST_CASE("checkpoint save/load/save is byte-identical and inference-equivalent") {
  TempDir tmp;
  Rng rng(19);
  Model model = build_model(small_config(16));
  // Train-ish weights: perturb so the file is not just the seeded init.
  for (auto& layer : model.layers)
    for (auto& b : layer.bias) b = static_cast<float>(rng.uniform(-0.1, 0.1));

  Tensor image = random_tensor<float>(Shape4{1, 3, 32, 32}, rng, 0.0, 1.0);
  const Tensor before = model_forward(model, image);

  const fs::path p1 = tmp.path / "a.ckpt";
  const fs::path p2 = tmp.path / "b.ckpt";
  const ModelCheckpoint ckpt = checkpoint_from_model(model, 123);
  save_checkpoint(ckpt, p1);
  const ModelCheckpoint loaded = load_checkpoint(p1);
  CHECK(loaded.training_step == 123);
  CHECK(loaded == ckpt);
  save_checkpoint(loaded, p2);
  CHECK(file_bytes(p1) == file_bytes(p2));

  const Model reloaded = model_from_checkpoint(loaded);
  const Tensor after = model_forward(reloaded, image);
  CHECK(after.data == before.data);  // bit-identical inference
}

TEST_CASE("checkpoint load failures are distinct") {
  TempDir tmp;
  Model model = build_model(tiny_config());
  const ModelCheckpoint ckpt = checkpoint_from_model(model, 7);
  const fs::path good = tmp.path / "good.ckpt";
  save_checkpoint(ckpt, good);

  SUBCASE("truncated file") {
    const std::vector<char> bytes = file_bytes(good);
    const fs::path cut = tmp.path / "cut.ckpt";
    std::ofstream out(cut, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
    out.close();
    try {
      load_checkpoint(cut);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.kind == FormatError::Kind::truncated);
    }
  }

  SUBCASE("bad magic") {
    std::vector<char> bytes = file_bytes(good);
    bytes[0] = 'X';
    const fs::path bad = tmp.path / "bad.ckpt";
    std::ofstream(bad, std::ios::binary)
        .write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    try {
      load_checkpoint(bad);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.kind == FormatError::Kind::bad_magic);
    }
  }

  SUBCASE("unsupported version") {
    std::vector<char> bytes = file_bytes(good);
    bytes[4] = 9;  // version field
    const fs::path bad = tmp.path / "vers.ckpt";
    std::ofstream(bad, std::ios::binary)
        .write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    try {
      load_checkpoint(bad);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.kind == FormatError::Kind::bad_version);
    }
  }

  SUBCASE("blob shape disagreeing with the topology") {
    ModelCheckpoint tampered = ckpt;
    tampered.blobs[0].dims[0] += 1;
    tampered.blobs[0].values.resize(tampered.blobs[0].values.size() +
                                    tampered.blobs[0].values.size() / tampered.blobs[0].dims[0]);
    try {
      model_from_checkpoint(tampered);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.kind == FormatError::Kind::shape_mismatch);
    }
  }

  SUBCASE("trailing bytes") {
    std::vector<char> bytes = file_bytes(good);
    bytes.push_back('\0');
    const fs::path bad = tmp.path / "trail.ckpt";
    std::ofstream(bad, std::ios::binary)
        .write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    try {
      load_checkpoint(bad);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.kind == FormatError::Kind::corrupt);
    }
  }
}

TEST_CASE("checkpoint byte-identity holds across random seeds") {
  TempDir tmp;
  for (std::uint64_t seed : {1ull, 42ull, 777ull}) {
    ModelConfig cfg = tiny_config();
    cfg.seed = seed;
    const ModelCheckpoint ckpt = checkpoint_from_model(build_model(cfg), seed);
    const fs::path p1 = tmp.path / (std::to_string(seed) + "_1.ckpt");
    const fs::path p2 = tmp.path / (std::to_string(seed) + "_2.ckpt");
    save_checkpoint(ckpt, p1);
    save_checkpoint(load_checkpoint(p1), p2);
    CHECK(file_bytes(p1) == file_bytes(p2));
  }
}
