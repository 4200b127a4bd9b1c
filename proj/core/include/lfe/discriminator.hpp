#pragma once

#include "lfe/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace lfe {

struct DiscriminatorConfig {
    int n_blocks = 7;
    int base_channels = 16;
    int max_channels = 128;
    double leaky_slope = 0.2;
};

struct DiscriminatorBlock {
    ConvParams conv;       // 3x3 stride 2
    BatchNormParams bn;    // omitted (unused) in block 0
    bool has_bn = true;
};

struct DiscriminatorParams {
    DiscriminatorConfig config;
    std::vector<DiscriminatorBlock> blocks;
    ConvParams head;  // 1x1 conv after global average pooling

    std::vector<NamedTensor> named_parameters();
    std::vector<NamedTensor> named_buffers();
    std::vector<NamedTensor> named_state();
    void set_training(bool training);
};

DiscriminatorParams make_discriminator(const DiscriminatorConfig& cfg,
                                       std::uint64_t seed);

/// Two-channel (conditioning latent, candidate) pair to a score in (0,1):
/// n_blocks of stride-2 conv / BN / LeakyReLU (first block skips BN), then
/// global average pooling, 1x1 conv and sigmoid.
Tensor discriminator_forward(const Tensor& pair, DiscriminatorParams& params);

}  // namespace lfe
