#pragma once

#include "lfe/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace lfe {

struct GeneratorConfig {
    int depth = 4;
    int base_channels = 16;
    /// Channel counts per level; empty means base_channels doubling.
    std::vector<int> channel_schedule;

    std::vector<int> resolved_schedule() const;
};

/// Conv -> batch norm -> ReLU composite used throughout both networks.
struct ComposedLayer {
    ConvParams conv;
    BatchNormParams bn;
};

struct EncoderBlockParams {
    ComposedLayer skip;      // s_k
    ConvParams main1;        // conv+BN, no ReLU
    BatchNormParams main1_bn;
    ConvParams main2;
    BatchNormParams main2_bn;
    ComposedLayer res1;
    ComposedLayer res2;
    ConvParams res3;         // bare conv closing the residual branch
};

struct DecoderBlockParams {
    ComposedLayer up;        // maps upsampled channels onto the skip's
    ComposedLayer branch_a1;
    ComposedLayer branch_a2;
    ConvParams branch_a3;
    ConvParams branch_b1;
    BatchNormParams branch_b1_bn;
    ConvParams branch_b2;
    BatchNormParams branch_b2_bn;
};

struct GeneratorParams {
    GeneratorConfig config;
    ComposedLayer stem;                 // s_o
    ComposedLayer enc0_a, enc0_b;       // initial encoder block
    std::vector<EncoderBlockParams> encoders;  // levels 1..depth-1
    std::vector<DecoderBlockParams> decoders;  // deepest first
    ComposedLayer head;                 // l^3x3 before the 1x1 conv
    ConvParams head_out;                // f^1x1 -> sigmoid

    std::vector<NamedTensor> named_parameters();  // trainable
    std::vector<NamedTensor> named_buffers();     // running stats
    std::vector<NamedTensor> named_state();       // both, checkpoint order
    std::size_t parameter_count();
    void set_training(bool training);

    /// Per-layer shape/parameter-count summary for documentation.
    std::string summary() const;
};

GeneratorParams make_generator(const GeneratorConfig& cfg, std::uint64_t seed);

/// Conv -> BN -> ReLU.
Tensor layer_l(const Tensor& input, ComposedLayer& layer);

struct EncoderOut {
    Tensor e;  // half resolution
    Tensor s;  // skip, input resolution
};

EncoderOut encoder_block(const Tensor& e_prev, EncoderBlockParams& params);
Tensor decoder_block(const Tensor& d_prev, const Tensor& skip,
                     DecoderBlockParams& params);

/// Full forward pass: stem, initial encoder, depth-1 residual encoders,
/// depth decoders consuming skips in reverse, sigmoid head. Output matches
/// the input's spatial size, values strictly in (0,1).
Tensor generator_forward(const Tensor& input, GeneratorParams& params);

}  // namespace lfe
