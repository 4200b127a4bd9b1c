#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lfe/discriminator.hpp"
#include "lfe/generator.hpp"
#include "lfe/gradcheck.hpp"

#include <cmath>
#include <random>

using namespace lfe;

namespace {

void zero_all(std::vector<NamedTensor> params) {
    for (auto& p : params) {
        std::fill(p.tensor.values().begin(), p.tensor.values().end(), 0.0);
    }
}

}  // namespace

TEST_CASE("layer_l: conv -> batch norm -> relu") {
    std::mt19937_64 rng(1);
    ComposedLayer layer{make_conv(2, 3, 3, 1, 1, rng), make_batch_norm(3)};
    Tensor x = Tensor::randn({2, 2, 8, 8}, rng, 1.0);

    Tensor y = layer_l(x, layer);
    CHECK(y.shape() == Shape{2, 3, 8, 8});
    for (double v : y.values()) CHECK(v >= 0.0);

    std::fill(layer.conv.kernel.values().begin(),
              layer.conv.kernel.values().end(), 0.0);
    std::fill(layer.conv.bias.values().begin(), layer.conv.bias.values().end(),
              0.0);
    std::fill(layer.bn.beta.values().begin(), layer.bn.beta.values().end(),
              0.0);
    Tensor zeroed = layer_l(x, layer);
    for (double v : zeroed.values()) CHECK(v == 0.0);
}

TEST_CASE("layer_l gradcheck on 1x2x8x8") {
    std::mt19937_64 rng(2);
    ComposedLayer layer{make_conv(2, 2, 3, 1, 1, rng), make_batch_norm(2)};
    Tensor x = Tensor::randn({1, 2, 8, 8}, rng, 1.0, true);
    std::vector<Tensor> params{x, layer.conv.kernel, layer.conv.bias,
                               layer.bn.gamma, layer.bn.beta};
    const double err = max_gradient_error(
        [&] {
            Tensor y = layer_l(x, layer);
            return sum_all(mul(y, y));
        },
        params, 1e-5, 48, 0);
    CHECK(err <= 1e-4);
}

TEST_CASE("encoder block halves resolution and keeps the skip") {
    GeneratorParams gen = make_generator({4, 4, {}}, 3);
    std::mt19937_64 rng(4);
    Tensor x = Tensor::randn({1, 4, 32, 32}, rng, 1.0);
    EncoderOut out = encoder_block(x, gen.encoders[0]);
    CHECK(out.e.shape().h == 16);
    CHECK(out.e.shape().w == 16);
    CHECK(out.s.shape().h == 32);
    CHECK(out.s.shape().w == 32);

    Tensor odd = Tensor::zeros({1, 4, 7, 8});
    CHECK_THROWS_AS(encoder_block(odd, gen.encoders[0]), TensorError);
}

TEST_CASE("encoder block with zero parameters emits zeros") {
    GeneratorParams gen = make_generator({2, 2, {}}, 5);
    auto& blk = gen.encoders[0];
    zero_all(gen.named_parameters());
    std::mt19937_64 rng(6);
    Tensor x = Tensor::randn({1, 2, 8, 8}, rng, 1.0);
    EncoderOut out = encoder_block(x, blk);
    for (double v : out.e.values()) CHECK(v == 0.0);
}

TEST_CASE("encoder block gradcheck at miniature scale") {
    GeneratorParams gen = make_generator({2, 2, {}}, 7);
    gen.set_training(true);
    std::mt19937_64 rng(8);
    Tensor x = Tensor::randn({2, 2, 8, 8}, rng, 0.7, true);
    std::vector<Tensor> params{x};
    const double err = max_gradient_error(
        [&] {
            EncoderOut out = encoder_block(x, gen.encoders[0]);
            return sum_all(mul(out.e, out.e));
        },
        params, 1e-5, 32, 1);
    CHECK(err <= 1e-3);
}

TEST_CASE("decoder block doubles resolution") {
    GeneratorParams gen = make_generator({4, 4, {}}, 9);
    std::mt19937_64 rng(10);
    // deepest decoder consumes the deepest encoder output
    const auto sch = gen.config.resolved_schedule();
    Tensor d_prev = Tensor::randn({1, sch[3], 16, 16}, rng, 0.5);
    Tensor skip = Tensor::randn({1, sch[3], 32, 32}, rng, 0.5);
    Tensor d = decoder_block(d_prev, skip, gen.decoders[0]);
    CHECK(d.shape().h == 32);
    CHECK(d.shape().w == 32);

    Tensor bad_skip = Tensor::randn({1, sch[3], 64, 64}, rng, 0.5);
    CHECK_THROWS_AS(decoder_block(d_prev, bad_skip, gen.decoders[0]),
                    TensorError);
}

TEST_CASE("decoder block with zero parameters and zero skip emits zeros") {
    GeneratorParams gen = make_generator({2, 2, {}}, 11);
    zero_all(gen.named_parameters());
    std::mt19937_64 rng(12);
    const auto sch = gen.config.resolved_schedule();
    Tensor d_prev = Tensor::randn({1, sch[1], 4, 4}, rng, 1.0);
    Tensor skip = Tensor::zeros({1, sch[1], 8, 8});
    Tensor d = decoder_block(d_prev, skip, gen.decoders[0]);
    for (double v : d.values()) {
        CHECK(v == 0.0);
    }
}

TEST_CASE("generator forward: spatial contract and output range") {
    GeneratorParams gen = make_generator({4, 16, {}}, 13);
    gen.set_training(false);
    std::mt19937_64 rng(14);
    NoGradGuard ng;

    Tensor small = Tensor::randn({1, 1, 16, 16}, rng, 0.4);
    Tensor out_small = generator_forward(small, gen);
    CHECK(out_small.shape() == Shape{1, 1, 16, 16});

    Tensor big = Tensor::randn({1, 1, 192, 192}, rng, 0.4);
    Tensor out = generator_forward(big, gen);
    CHECK(out.shape() == Shape{1, 1, 192, 192});
    for (double v : out.values()) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }

    Tensor bad = Tensor::zeros({1, 1, 40, 40});  // not divisible by 16
    CHECK_THROWS_AS(generator_forward(bad, gen), TensorError);
}

TEST_CASE("generator forward is bit-deterministic across repeated runs") {
    GeneratorParams gen = make_generator({4, 8, {}}, 15);
    gen.set_training(false);
    std::mt19937_64 rng(16);
    NoGradGuard ng;
    Tensor x = Tensor::randn({1, 1, 32, 32}, rng, 0.4);
    Tensor a = generator_forward(x, gen);
    Tensor b = generator_forward(x, gen);
    for (std::size_t i = 0; i < a.numel(); ++i) {
        CHECK(a.values()[i] == b.values()[i]);
    }
}

TEST_CASE("every generator parameter gets gradient under L1 loss") {
    GeneratorParams gen = make_generator({2, 2, {}}, 17);
    gen.set_training(true);
    std::mt19937_64 rng(18);
    Tensor x = Tensor::randn({2, 1, 16, 16}, rng, 0.5, true);
    Tensor target = Tensor::full({2, 1, 16, 16}, -1.0);
    Tensor loss = mean_abs_diff(generator_forward(x, gen), target);
    backward(loss);
    for (auto& p : gen.named_parameters()) {
        double mag = 0.0;
        for (double g : p.tensor.grad()) mag += std::fabs(g);
        INFO("parameter " << p.name);
        CHECK(mag > 0.0);
    }
}

TEST_CASE("parameter count is a pure function of the config") {
    GeneratorParams a = make_generator({4, 16, {}}, 19);
    GeneratorParams b = make_generator({4, 16, {}}, 20);
    CHECK(a.parameter_count() == b.parameter_count());

    // independently sum the tensor sizes
    std::size_t manual = 0;
    for (auto& p : a.named_parameters()) manual += p.tensor.numel();
    CHECK(a.parameter_count() == manual);

    // summary dump mentions every level
    const std::string s = a.summary();
    CHECK(s.find("16") != std::string::npos);
    CHECK(s.find("128") != std::string::npos);
}

TEST_CASE("default channel schedule doubles from base") {
    GeneratorConfig cfg{4, 16, {}};
    const auto sch = cfg.resolved_schedule();
    REQUIRE(sch.size() == 4);
    CHECK(sch[0] == 16);
    CHECK(sch[1] == 32);
    CHECK(sch[2] == 64);
    CHECK(sch[3] == 128);
}

TEST_CASE("discriminator emits a scalar in (0,1) through 7 blocks") {
    DiscriminatorParams disc = make_discriminator({7, 16, 128, 0.2}, 21);
    disc.set_training(false);
    REQUIRE(disc.blocks.size() == 7);
    CHECK_FALSE(disc.blocks[0].has_bn);
    for (std::size_t b = 1; b < disc.blocks.size(); ++b) {
        CHECK(disc.blocks[b].has_bn);
    }
    std::mt19937_64 rng(22);
    NoGradGuard ng;
    Tensor pair = Tensor::randn({1, 2, 192, 192}, rng, 0.4);
    Tensor score = discriminator_forward(pair, disc);
    CHECK(score.is_scalar());
    CHECK(score.item() > 0.0);
    CHECK(score.item() < 1.0);
}

TEST_CASE("discriminator with zero parameters scores exactly one half") {
    DiscriminatorParams disc = make_discriminator({7, 8, 128, 0.2}, 23);
    disc.set_training(false);
    zero_all(disc.named_parameters());
    std::mt19937_64 rng(24);
    NoGradGuard ng;
    Tensor pair = Tensor::randn({1, 2, 128, 128}, rng, 1.0);
    CHECK(discriminator_forward(pair, disc).item() == 0.5);
}

TEST_CASE("discriminator rejects wrong channel count or tiny input") {
    DiscriminatorParams disc = make_discriminator({7, 8, 128, 0.2}, 25);
    CHECK_THROWS_AS(discriminator_forward(Tensor::zeros({1, 1, 64, 64}), disc),
                    TensorError);
    CHECK_THROWS_AS(discriminator_forward(Tensor::zeros({1, 2, 1, 1}), disc),
                    TensorError);
}
