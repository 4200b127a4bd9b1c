#include "lfe/gabor.hpp"
#include "lfe/generator.hpp"
#include "lfe/synth.hpp"
#include "lfe/tensor.hpp"

#include <benchmark/benchmark.h>

namespace {

void BM_Conv2dForward(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    std::mt19937_64 rng(1);
    lfe::Tensor x = lfe::Tensor::randn({1, 16, size, size}, rng, 1.0);
    lfe::ConvParams conv = lfe::make_conv(16, 16, 3, 1, 1, rng);
    lfe::NoGradGuard ng;
    for (auto _ : state) {
        benchmark::DoNotOptimize(lfe::conv2d(x, conv));
    }
    state.SetItemsProcessed(state.iterations() * x.numel());
}
BENCHMARK(BM_Conv2dForward)->Arg(32)->Arg(64)->Arg(128);

void BM_Conv2dBackward(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    std::mt19937_64 rng(1);
    lfe::Tensor x = lfe::Tensor::randn({1, 16, size, size}, rng, 1.0, true);
    lfe::ConvParams conv = lfe::make_conv(16, 16, 3, 1, 1, rng);
    for (auto _ : state) {
        lfe::Tensor loss = lfe::sum_all(lfe::conv2d(x, conv));
        lfe::backward(loss);
        x.zero_grad();
        conv.kernel.zero_grad();
        conv.bias.zero_grad();
    }
}
BENCHMARK(BM_Conv2dBackward)->Arg(32)->Arg(64);

void BM_GeneratorForward(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    std::mt19937_64 rng(2);
    lfe::GeneratorParams gen = lfe::make_generator({4, 16, {}}, 7);
    gen.set_training(false);
    lfe::Tensor x = lfe::Tensor::randn({1, 1, size, size}, rng, 0.3);
    lfe::NoGradGuard ng;
    for (auto _ : state) {
        benchmark::DoNotOptimize(lfe::generator_forward(x, gen));
    }
}
BENCHMARK(BM_GeneratorForward)->Arg(64)->Arg(128);

void BM_GaborEnhance(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    lfe::GrayImage img = lfe::synthesize_master(11, size, size);
    const auto orient = lfe::estimate_orientation(img, 16);
    const auto freq = lfe::estimate_frequency(img, orient);
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            lfe::gabor_enhance(img, orient, freq, lfe::GaborBankConfig{}));
    }
}
BENCHMARK(BM_GaborEnhance)->Arg(128)->Arg(256);

void BM_Thinning(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    lfe::GrayImage img = lfe::synthesize_master(13, size, size);
    lfe::GrayImage binary = lfe::binarize(img);
    for (auto _ : state) {
        benchmark::DoNotOptimize(lfe::thin(binary));
    }
}
BENCHMARK(BM_Thinning)->Arg(128)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
