#pragma once

#include "lfe/discriminator.hpp"
#include "lfe/generator.hpp"
#include "lfe/image.hpp"
#include "lfe/synth.hpp"
#include "lfe/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace lfe {

struct TrainConfig {
    double learning_rate = 0.001;
    double adam_beta1 = 0.5;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int batch_size = 8;
    int window = 192;
    int max_steps = 1000;
    double recon_weight = 100.0;  // lambda on the L1 term
    std::uint64_t seed = 0;
    int checkpoint_every = 500;
    std::string checkpoint_dir;
    int gen_base_channels = 16;
    int disc_base_channels = 16;
    int disc_blocks = 7;
    /// Optional auxiliary L1 on skeleton maps; off by default.
    double minutiae_weight = 0.0;

    void validate() const;
};

struct TrainStepRecord {
    int step = 0;
    double loss_g_adv = 0.0;
    double loss_g_recon = 0.0;
    double loss_d = 0.0;
    double wall_ms = 0.0;
};

struct TrainLog {
    std::vector<std::string> header;  // config echo
    std::vector<TrainStepRecord> records;
};

/// Tab-separated TrainLog: '#' header lines, then
/// step, loss_G_adv, loss_G_recon, loss_D, wall_ms.
void save_train_log(const TrainLog& log, const std::string& path);

/// Adam moment state for a flat parameter list.
struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    long step = 0;
};

AdamState make_adam_state(const std::vector<NamedTensor>& params);

/// One Adam update over the parameter list from the gradients stored on
/// each tensor. Throws on a non-finite gradient.
void adam_step(std::vector<NamedTensor>& params, AdamState& state,
               const TrainConfig& cfg);

struct TrainResult {
    GeneratorParams generator;
    DiscriminatorParams discriminator;
    TrainLog log;
};

/// Alternating 1:1 adversarial training on aligned window crops of the
/// corpus pairs; non-saturating G loss plus lambda * L1 reconstruction.
TrainResult train(const CorpusManifest& corpus, const TrainConfig& cfg);

/// Sliding-window enhancement: overlapping tiles blended with a raised-
/// cosine weight; batch norm in inference mode. Images smaller than the
/// window are reflect-padded.
GrayImage enhance_full(const GrayImage& img, GeneratorParams& gen, int window,
                       int stride);

GrayImage tensor_to_image(const Tensor& t, int batch_index = 0);
Tensor image_to_tensor(const GrayImage& img);

}  // namespace lfe
