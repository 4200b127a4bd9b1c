#include "lfe/discriminator.hpp"

#include <algorithm>

namespace lfe {

DiscriminatorParams make_discriminator(const DiscriminatorConfig& cfg,
                                       std::uint64_t seed) {
    if (cfg.n_blocks < 1) {
        throw TensorError("discriminator needs at least one block");
    }
    std::mt19937_64 rng(seed);
    DiscriminatorParams d;
    d.config = cfg;
    int in_ch = 2;
    for (int i = 0; i < cfg.n_blocks; ++i) {
        const int out_ch =
            std::min(cfg.base_channels << i, cfg.max_channels);
        DiscriminatorBlock b;
        b.conv = make_conv(in_ch, out_ch, 3, 2, 1, rng);
        b.has_bn = i > 0;
        if (b.has_bn) b.bn = make_batch_norm(out_ch);
        d.blocks.push_back(std::move(b));
        in_ch = out_ch;
    }
    d.head = make_conv(in_ch, 1, 1, 1, 0, rng);
    return d;
}

std::vector<NamedTensor> DiscriminatorParams::named_parameters() {
    std::vector<NamedTensor> out;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const std::string p = "disc.block" + std::to_string(i);
        out.push_back({p + ".kernel", blocks[i].conv.kernel});
        out.push_back({p + ".bias", blocks[i].conv.bias});
        if (blocks[i].has_bn) {
            out.push_back({p + ".gamma", blocks[i].bn.gamma});
            out.push_back({p + ".beta", blocks[i].bn.beta});
        }
    }
    out.push_back({"disc.head.kernel", head.kernel});
    out.push_back({"disc.head.bias", head.bias});
    return out;
}

std::vector<NamedTensor> DiscriminatorParams::named_buffers() {
    std::vector<NamedTensor> out;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (!blocks[i].has_bn) continue;
        const std::string p = "disc.block" + std::to_string(i);
        out.push_back({p + ".running_mean", blocks[i].bn.running_mean});
        out.push_back({p + ".running_var", blocks[i].bn.running_var});
    }
    return out;
}

std::vector<NamedTensor> DiscriminatorParams::named_state() {
    auto all = named_parameters();
    for (auto& b : named_buffers()) all.push_back(std::move(b));
    return all;
}

void DiscriminatorParams::set_training(bool training) {
    for (auto& b : blocks) {
        if (b.has_bn) b.bn.training = training;
    }
}

Tensor discriminator_forward(const Tensor& pair, DiscriminatorParams& params) {
    const Shape s = pair.shape();
    if (s.c != 2) {
        throw TensorError("discriminator expects two channels, got " + s.str());
    }
    if (s.h < 2 || s.w < 2) {
        throw TensorError("discriminator input too small: " + s.str());
    }
    Tensor x = pair;
    for (auto& block : params.blocks) {
        x = conv2d(x, block.conv);
        if (block.has_bn) x = batch_norm(x, block.bn);
        x = leaky_relu(x, params.config.leaky_slope);
    }
    Tensor pooled = global_avg_pool(x);
    return sigmoid(conv2d(pooled, params.head));
}

}  // namespace lfe
