#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lfe/trainer.hpp"
#include "support/test_support.hpp"

#include <cmath>
#include <filesystem>
#include <random>

using namespace lfe;
namespace fs = std::filesystem;

TEST_CASE("adam leaves parameters untouched under zero gradients") {
    std::mt19937_64 rng(1);
    std::vector<NamedTensor> params{{"w", Tensor::randn({1, 1, 2, 2}, rng, 1.0, true)}};
    params[0].tensor.zero_grad();
    const auto before = params[0].tensor.values();
    AdamState state = make_adam_state(params);
    TrainConfig cfg;
    adam_step(params, state, cfg);
    CHECK(params[0].tensor.values() == before);
    CHECK(state.step == 1);
    for (double m : state.m[0]) CHECK(m == 0.0);
}

TEST_CASE("adam asymptotic step magnitude approaches the learning rate") {
    std::vector<NamedTensor> params{{"w", Tensor::zeros({1, 1, 1, 1}, true)}};
    params[0].tensor.zero_grad();
    AdamState state = make_adam_state(params);
    TrainConfig cfg;
    cfg.learning_rate = 0.01;
    double prev = 0.0;
    double step_size = 0.0;
    for (int i = 0; i < 200; ++i) {
        params[0].tensor.grad()[0] = 3.7;  // constant gradient
        prev = params[0].tensor.values()[0];
        adam_step(params, state, cfg);
        step_size = std::fabs(params[0].tensor.values()[0] - prev);
    }
    CHECK(step_size == doctest::Approx(cfg.learning_rate).epsilon(0.01));
}

TEST_CASE("adam drives a quadratic bowl to its optimum") {
    std::mt19937_64 rng(2);
    Tensor target = Tensor::randn({1, 1, 2, 4}, rng, 1.0);
    std::vector<NamedTensor> params{{"w", Tensor::zeros({1, 1, 2, 4}, true)}};
    params[0].tensor.zero_grad();
    AdamState state = make_adam_state(params);
    TrainConfig cfg;
    cfg.learning_rate = 0.05;
    for (int i = 0; i < 500; ++i) {
        for (std::size_t j = 0; j < 8; ++j) {
            params[0].tensor.grad()[j] =
                params[0].tensor.values()[j] - target.values()[j];
        }
        adam_step(params, state, cfg);
    }
    double dist = 0.0;
    for (std::size_t j = 0; j < 8; ++j) {
        const double d = params[0].tensor.values()[j] - target.values()[j];
        dist += d * d;
    }
    CHECK(std::sqrt(dist) < 1e-3);
}

TEST_CASE("non-finite gradients abort with a numeric error") {
    std::vector<NamedTensor> params{{"w", Tensor::zeros({1, 1, 1, 1}, true)}};
    params[0].tensor.zero_grad();
    params[0].tensor.grad()[0] = std::nan("");
    AdamState state = make_adam_state(params);
    TrainConfig cfg;
    CHECK_THROWS_AS(adam_step(params, state, cfg), NumericError);
}

TEST_CASE("train config validation") {
    TrainConfig cfg;
    cfg.window = 50;  // not divisible by 16
    CHECK_THROWS_AS(cfg.validate(), TensorError);
    cfg.window = 48;
    cfg.learning_rate = 0.0;
    CHECK_THROWS_AS(cfg.validate(), TensorError);
}

TEST_CASE("max_steps zero is a byte-exact no-op") {
    const std::string dir =
        (fs::temp_directory_path() / "lfe_train_noop").string();
    fs::remove_all(dir);
    std::vector<GrayImage> masters{synthesize_master(31, 64, 64)};
    std::vector<NoiseRecipe> recipes(1);
    recipes[0].seed = 7;
    CorpusManifest corpus = build_corpus(masters, recipes, dir + "/corpus");

    TrainConfig cfg;
    cfg.max_steps = 0;
    cfg.window = 64;
    cfg.batch_size = 2;
    cfg.gen_base_channels = 4;
    cfg.disc_base_channels = 4;
    cfg.checkpoint_dir = dir + "/ckpt";
    TrainResult result = train(corpus, cfg);
    CHECK(result.log.records.empty());

    CHECK(testsupport::file_bytes(dir + "/ckpt/gen_init.ckpt") ==
          testsupport::file_bytes(dir + "/ckpt/gen_final.ckpt"));
    CHECK(testsupport::file_bytes(dir + "/ckpt/disc_init.ckpt") ==
          testsupport::file_bytes(dir + "/ckpt/disc_final.ckpt"));
    fs::remove_all(dir);
}

TEST_CASE("short training runs are seed-deterministic and finite") {
    const std::string dir =
        (fs::temp_directory_path() / "lfe_train_det").string();
    fs::remove_all(dir);
    std::vector<GrayImage> masters{synthesize_master(32, 64, 64)};
    std::vector<NoiseRecipe> recipes(2);
    recipes[0].seed = 1;
    recipes[1].seed = 2;
    CorpusManifest corpus = build_corpus(masters, recipes, dir + "/corpus");

    TrainConfig cfg;
    cfg.max_steps = 3;
    cfg.window = 48;
    cfg.batch_size = 2;
    cfg.gen_base_channels = 4;
    cfg.disc_base_channels = 4;
    cfg.seed = 99;
    cfg.checkpoint_dir = dir + "/a";
    TrainResult r1 = train(corpus, cfg);
    cfg.checkpoint_dir = dir + "/b";
    TrainResult r2 = train(corpus, cfg);

    REQUIRE(r1.log.records.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(std::isfinite(r1.log.records[i].loss_g_adv));
        CHECK(std::isfinite(r1.log.records[i].loss_d));
        CHECK(r1.log.records[i].loss_g_adv == r2.log.records[i].loss_g_adv);
        CHECK(r1.log.records[i].loss_g_recon == r2.log.records[i].loss_g_recon);
        CHECK(r1.log.records[i].loss_d == r2.log.records[i].loss_d);
    }
    CHECK(testsupport::file_bytes(dir + "/a/gen_final.ckpt") ==
          testsupport::file_bytes(dir + "/b/gen_final.ckpt"));
    fs::remove_all(dir);
}

TEST_CASE("train log serialization carries the config header") {
    TrainLog log;
    log.header.push_back("lr=0.001 batch=8 window=192");
    log.records.push_back({0, 0.5, 0.25, 0.75, 12.0});
    const std::string path =
        (fs::temp_directory_path() / "lfe_log_test.tsv").string();
    save_train_log(log, path);
    const std::string bytes = testsupport::file_bytes(path);
    CHECK(bytes.find("# lr=0.001 batch=8 window=192") != std::string::npos);
    CHECK(bytes.find("step\tloss_G_adv\tloss_G_recon\tloss_D\twall_ms") !=
          std::string::npos);
    fs::remove(path);
}

TEST_CASE("paper defaults are the config defaults") {
    TrainConfig cfg;
    CHECK(cfg.learning_rate == 0.001);
    CHECK(cfg.batch_size == 8);
    CHECK(cfg.window == 192);
}

TEST_CASE("window-sized image enhances identically to one forward pass") {
    GeneratorParams gen = make_generator({4, 4, {}}, 41);
    gen.set_training(false);
    GrayImage img = synthesize_master(42, 48, 48);
    GrayImage via_window = enhance_full(img, gen, 48, 24);

    NoGradGuard ng;
    Tensor direct = generator_forward(image_to_tensor(img), gen);
    GrayImage direct_img = tensor_to_image(direct);
    REQUIRE(via_window.size() == direct_img.size());
    for (std::size_t i = 0; i < direct_img.size(); ++i) {
        CHECK(via_window.pixels[i] == direct_img.pixels[i]);
    }
}

TEST_CASE("non-overlapping stride partitions into independent tiles") {
    GeneratorParams gen = make_generator({4, 4, {}}, 43);
    gen.set_training(false);
    GrayImage img = synthesize_master(44, 96, 96);
    GrayImage stitched = enhance_full(img, gen, 48, 48);
    REQUIRE(stitched.width == 96);
    REQUIRE(stitched.height == 96);

    // second tile of the partition equals its standalone forward pass
    GrayImage tile(48, 48);
    for (int y = 0; y < 48; ++y)
        for (int x = 0; x < 48; ++x) tile.at(y, x) = img.at(y, x + 48);
    NoGradGuard ng;
    GrayImage tile_out = tensor_to_image(generator_forward(image_to_tensor(tile), gen));
    for (int y = 0; y < 48; ++y) {
        for (int x = 0; x < 48; ++x) {
            CHECK(stitched.at(y, x + 48) ==
                  doctest::Approx(tile_out.at(y, x)).epsilon(1e-12));
        }
    }
}

TEST_CASE("overlapping windows leave no seam") {
    GeneratorParams gen = make_generator({4, 4, {}}, 45);
    gen.set_training(false);
    GrayImage img = synthesize_master(46, 144, 144);
    const int window = 96, stride = 48;
    GrayImage out = enhance_full(img, gen, window, stride);

    auto line_jump = [&](int x) {
        double m = 0.0;
        for (int y = 0; y < out.height; ++y) {
            m = std::max(m, std::fabs(out.at(y, x) - out.at(y, x - 1)));
        }
        return m;
    };
    double seam = 0.0;
    for (int x : {stride, 2 * stride}) seam = std::max(seam, line_jump(x));
    double interior = 0.0;
    for (int x : {13, 29, 37, 59, 67, 83, 101, 123}) {
        interior = std::max(interior, line_jump(x));
    }
    CHECK(seam <= interior * 2.0);
}

TEST_CASE("images smaller than the window are reflect-padded") {
    GeneratorParams gen = make_generator({4, 4, {}}, 47);
    gen.set_training(false);
    GrayImage img = synthesize_master(48, 40, 56);
    GrayImage out = enhance_full(img, gen, 64, 32);
    CHECK(out.width == 40);
    CHECK(out.height == 56);
    for (double p : out.pixels) {
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
    }
}
