#include "lfe/generator.hpp"

#include <sstream>

namespace lfe {

std::vector<int> GeneratorConfig::resolved_schedule() const {
    if (!channel_schedule.empty()) {
        if (static_cast<int>(channel_schedule.size()) != depth) {
            throw TensorError("channel_schedule length must equal depth");
        }
        return channel_schedule;
    }
    std::vector<int> sch(depth);
    for (int k = 0; k < depth; ++k) sch[k] = base_channels << k;
    return sch;
}

namespace {

ComposedLayer make_layer(int in_ch, int out_ch, int k, std::mt19937_64& rng) {
    ComposedLayer l;
    l.conv = make_conv(in_ch, out_ch, k, 1, k == 3 ? 1 : 0, rng);
    l.bn = make_batch_norm(out_ch);
    return l;
}

void collect_conv(std::vector<NamedTensor>& out, const std::string& prefix,
                  ConvParams& c) {
    out.push_back({prefix + ".kernel", c.kernel});
    out.push_back({prefix + ".bias", c.bias});
}

void collect_bn(std::vector<NamedTensor>& params,
                std::vector<NamedTensor>* buffers, const std::string& prefix,
                BatchNormParams& bn) {
    params.push_back({prefix + ".gamma", bn.gamma});
    params.push_back({prefix + ".beta", bn.beta});
    if (buffers) {
        buffers->push_back({prefix + ".running_mean", bn.running_mean});
        buffers->push_back({prefix + ".running_var", bn.running_var});
    }
}

void collect_layer(std::vector<NamedTensor>& params,
                   std::vector<NamedTensor>* buffers,
                   const std::string& prefix, ComposedLayer& l) {
    collect_conv(params, prefix + ".conv", l.conv);
    collect_bn(params, buffers, prefix + ".bn", l.bn);
}

struct Collector {
    std::vector<NamedTensor> params;
    std::vector<NamedTensor> buffers;

    void visit(GeneratorParams& g) {
        collect_layer(params, &buffers, "gen.stem", g.stem);
        collect_layer(params, &buffers, "gen.enc0.a", g.enc0_a);
        collect_layer(params, &buffers, "gen.enc0.b", g.enc0_b);
        for (std::size_t k = 0; k < g.encoders.size(); ++k) {
            auto& e = g.encoders[k];
            const std::string p = "gen.enc" + std::to_string(k + 1);
            collect_layer(params, &buffers, p + ".skip", e.skip);
            collect_conv(params, p + ".main1", e.main1);
            collect_bn(params, &buffers, p + ".main1_bn", e.main1_bn);
            collect_conv(params, p + ".main2", e.main2);
            collect_bn(params, &buffers, p + ".main2_bn", e.main2_bn);
            collect_layer(params, &buffers, p + ".res1", e.res1);
            collect_layer(params, &buffers, p + ".res2", e.res2);
            collect_conv(params, p + ".res3", e.res3);
        }
        for (std::size_t k = 0; k < g.decoders.size(); ++k) {
            auto& d = g.decoders[k];
            const std::string p = "gen.dec" + std::to_string(k);
            collect_layer(params, &buffers, p + ".up", d.up);
            collect_layer(params, &buffers, p + ".a1", d.branch_a1);
            collect_layer(params, &buffers, p + ".a2", d.branch_a2);
            collect_conv(params, p + ".a3", d.branch_a3);
            collect_conv(params, p + ".b1", d.branch_b1);
            collect_bn(params, &buffers, p + ".b1_bn", d.branch_b1_bn);
            collect_conv(params, p + ".b2", d.branch_b2);
            collect_bn(params, &buffers, p + ".b2_bn", d.branch_b2_bn);
        }
        collect_layer(params, &buffers, "gen.head", g.head);
        collect_conv(params, "gen.head_out", g.head_out);
    }
};

void set_bn_training(BatchNormParams& bn, bool training) {
    bn.training = training;
}

}  // namespace

GeneratorParams make_generator(const GeneratorConfig& cfg, std::uint64_t seed) {
    if (cfg.depth < 1) throw TensorError("generator depth must be >= 1");
    std::mt19937_64 rng(seed);
    const auto sch = cfg.resolved_schedule();

    GeneratorParams g;
    g.config = cfg;
    g.stem = make_layer(1, sch[0], 3, rng);
    g.enc0_a = make_layer(sch[0], sch[0], 3, rng);
    g.enc0_b = make_layer(sch[0], sch[0], 3, rng);
    for (int k = 1; k < cfg.depth; ++k) {
        EncoderBlockParams e;
        e.skip = make_layer(sch[k - 1], sch[k], 3, rng);
        e.main1 = make_conv(sch[k], sch[k], 3, 1, 1, rng);
        e.main1_bn = make_batch_norm(sch[k]);
        e.main2 = make_conv(sch[k], sch[k], 3, 1, 1, rng);
        e.main2_bn = make_batch_norm(sch[k]);
        e.res1 = make_layer(sch[k - 1], sch[k - 1], 3, rng);
        e.res2 = make_layer(sch[k - 1], sch[k - 1], 3, rng);
        e.res3 = make_conv(sch[k - 1], sch[k], 3, 1, 1, rng);
        g.encoders.push_back(std::move(e));
    }
    for (int j = 0; j < cfg.depth; ++j) {
        const int k = cfg.depth - 1 - j;  // skip level consumed
        const int c_prev = j == 0 ? sch[cfg.depth - 1] : sch[k + 1];
        const int c_k = sch[k];
        DecoderBlockParams d;
        d.up = make_layer(c_prev, c_k, 3, rng);
        d.branch_a1 = make_layer(c_prev, c_prev, 3, rng);
        d.branch_a2 = make_layer(c_prev, c_prev, 3, rng);
        d.branch_a3 = make_conv(c_prev, c_k, 3, 1, 1, rng);
        d.branch_b1 = make_conv(c_k, c_k, 3, 1, 1, rng);
        d.branch_b1_bn = make_batch_norm(c_k);
        d.branch_b2 = make_conv(c_k, c_k, 3, 1, 1, rng);
        d.branch_b2_bn = make_batch_norm(c_k);
        g.decoders.push_back(std::move(d));
    }
    g.head = make_layer(sch[0], sch[0], 3, rng);
    g.head_out = make_conv(sch[0], 1, 1, 1, 0, rng);
    return g;
}

std::vector<NamedTensor> GeneratorParams::named_parameters() {
    Collector c;
    c.visit(*this);
    return std::move(c.params);
}

std::vector<NamedTensor> GeneratorParams::named_buffers() {
    Collector c;
    c.visit(*this);
    return std::move(c.buffers);
}

std::vector<NamedTensor> GeneratorParams::named_state() {
    Collector c;
    c.visit(*this);
    auto all = std::move(c.params);
    for (auto& b : c.buffers) all.push_back(std::move(b));
    return all;
}

std::size_t GeneratorParams::parameter_count() {
    std::size_t n = 0;
    for (const auto& p : named_parameters()) n += p.tensor.numel();
    return n;
}

void GeneratorParams::set_training(bool training) {
    set_bn_training(stem.bn, training);
    set_bn_training(enc0_a.bn, training);
    set_bn_training(enc0_b.bn, training);
    for (auto& e : encoders) {
        set_bn_training(e.skip.bn, training);
        set_bn_training(e.main1_bn, training);
        set_bn_training(e.main2_bn, training);
        set_bn_training(e.res1.bn, training);
        set_bn_training(e.res2.bn, training);
    }
    for (auto& d : decoders) {
        set_bn_training(d.up.bn, training);
        set_bn_training(d.branch_a1.bn, training);
        set_bn_training(d.branch_a2.bn, training);
        set_bn_training(d.branch_b1_bn, training);
        set_bn_training(d.branch_b2_bn, training);
    }
    set_bn_training(head.bn, training);
}

std::string GeneratorParams::summary() const {
    std::ostringstream os;
    auto& self = const_cast<GeneratorParams&>(*this);
    os << "generator depth=" << config.depth << "\n";
    std::size_t total = 0;
    for (auto& p : self.named_parameters()) {
        os << "  " << p.name << "  " << p.tensor.shape().str() << "  "
           << p.tensor.numel() << "\n";
        total += p.tensor.numel();
    }
    os << "total trainable parameters: " << total << "\n";
    return os.str();
}

Tensor layer_l(const Tensor& input, ComposedLayer& layer) {
    return relu(batch_norm(conv2d(input, layer.conv), layer.bn));
}

EncoderOut encoder_block(const Tensor& e_prev, EncoderBlockParams& params) {
    if (e_prev.shape().h % 2 || e_prev.shape().w % 2) {
        throw TensorError("encoder_block requires even spatial dims, got " +
                          e_prev.shape().str());
    }
    EncoderOut out;
    out.s = layer_l(e_prev, params.skip);
    Tensor main = batch_norm(conv2d(out.s, params.main1), params.main1_bn);
    main = batch_norm(conv2d(main, params.main2), params.main2_bn);
    Tensor res = layer_l(e_prev, params.res1);
    res = layer_l(res, params.res2);
    res = conv2d(res, params.res3);
    out.e = max_pool2(relu(add(main, res)));
    return out;
}

Tensor decoder_block(const Tensor& d_prev, const Tensor& skip,
                     DecoderBlockParams& params) {
    Tensor up = upsample2(d_prev);
    if (up.shape().h != skip.shape().h || up.shape().w != skip.shape().w) {
        throw TensorError("decoder_block skip mismatch: upsampled " +
                          up.shape().str() + " vs skip " + skip.shape().str());
    }
    Tensor fused = add(skip, layer_l(up, params.up));
    Tensor a = layer_l(up, params.branch_a1);
    a = layer_l(a, params.branch_a2);
    a = conv2d(a, params.branch_a3);
    Tensor b = batch_norm(conv2d(fused, params.branch_b1), params.branch_b1_bn);
    b = batch_norm(conv2d(b, params.branch_b2), params.branch_b2_bn);
    return relu(add(a, b));
}

Tensor generator_forward(const Tensor& input, GeneratorParams& params) {
    const Shape s = input.shape();
    const int div = 1 << params.config.depth;
    if (s.c != 1) {
        throw TensorError("generator expects a single input channel, got " +
                          s.str());
    }
    if (s.h % div || s.w % div) {
        throw TensorError("generator input " + s.str() +
                          " not divisible by 2^depth = " + std::to_string(div));
    }
    std::vector<Tensor> skips;
    Tensor s0 = layer_l(input, params.stem);
    skips.push_back(s0);
    Tensor e = max_pool2(layer_l(layer_l(s0, params.enc0_a), params.enc0_b));
    for (auto& enc : params.encoders) {
        EncoderOut out = encoder_block(e, enc);
        skips.push_back(out.s);
        e = out.e;
    }
    Tensor d = e;
    for (std::size_t j = 0; j < params.decoders.size(); ++j) {
        const Tensor& skip = skips[skips.size() - 1 - j];
        d = decoder_block(d, skip, params.decoders[j]);
    }
    // A saturated sigmoid rounds to exactly 0 or 1 in double precision
    // (pre-activations beyond ~36.7), which would break the documented
    // open-interval output guarantee. The affine squeeze keeps the output
    // strictly inside (0, 1); the shift is far below pixel quantization.
    constexpr double kEps = 1e-9;
    Tensor y = sigmoid(conv2d(layer_l(d, params.head), params.head_out));
    return add(scale(y, 1.0 - 2.0 * kEps), Tensor::full(y.shape(), kEps));
}

}  // namespace lfe
