#include "lfe/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace lfe {

void TrainConfig::validate() const {
    if (learning_rate <= 0.0) throw TensorError("learning_rate must be > 0");
    if (window % 16) throw TensorError("window must be divisible by 16");
    if (batch_size < 1) throw TensorError("batch_size must be >= 1");
    if (max_steps < 0) throw TensorError("max_steps must be >= 0");
}

void save_train_log(const TrainLog& log, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw TensorError("cannot write train log: " + path);
    for (const auto& h : log.header) os << "# " << h << "\n";
    os << "step\tloss_G_adv\tloss_G_recon\tloss_D\twall_ms\n";
    os.precision(17);
    for (const auto& r : log.records) {
        os << r.step << '\t' << r.loss_g_adv << '\t' << r.loss_g_recon << '\t'
           << r.loss_d << '\t' << r.wall_ms << '\n';
    }
}

AdamState make_adam_state(const std::vector<NamedTensor>& params) {
    AdamState s;
    s.m.resize(params.size());
    s.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        s.m[i].assign(params[i].tensor.numel(), 0.0);
        s.v[i].assign(params[i].tensor.numel(), 0.0);
    }
    return s;
}

void adam_step(std::vector<NamedTensor>& params, AdamState& state,
               const TrainConfig& cfg) {
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.adam_beta1, state.step);
    const double bc2 = 1.0 - std::pow(cfg.adam_beta2, state.step);
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& t = params[i].tensor;
        if (t.grad().empty()) continue;  // never touched by backward: zero grad
        double* p = t.data();
        const double* g = t.grad().data();
        double* m = state.m[i].data();
        double* v = state.v[i].data();
        for (std::size_t j = 0; j < t.numel(); ++j) {
            if (!std::isfinite(g[j])) {
                throw NumericError("NaN gradient in parameter " + params[i].name);
            }
            m[j] = cfg.adam_beta1 * m[j] + (1.0 - cfg.adam_beta1) * g[j];
            v[j] = cfg.adam_beta2 * v[j] + (1.0 - cfg.adam_beta2) * g[j] * g[j];
            const double mh = m[j] / bc1;
            const double vh = v[j] / bc2;
            p[j] -= cfg.learning_rate * mh / (std::sqrt(vh) + cfg.adam_eps);
        }
    }
}

Tensor image_to_tensor(const GrayImage& img) {
    return Tensor::from_data({1, 1, img.height, img.width}, img.pixels);
}

GrayImage tensor_to_image(const Tensor& t, int batch_index) {
    const Shape s = t.shape();
    GrayImage img(s.w, s.h);
    const double* p = t.data() + static_cast<std::size_t>(batch_index) * s.c * s.h * s.w;
    for (std::size_t i = 0; i < img.size(); ++i) {
        img.pixels[i] = std::clamp(p[i], 0.0, 1.0);
    }
    return img;
}

namespace {

void zero_grads(std::vector<NamedTensor>& params) {
    for (auto& p : params) p.tensor.zero_grad();
}

Tensor detach(const Tensor& t) {
    return Tensor::from_data(t.shape(), t.values());
}

// -mean(log(x + eps)); eps keeps a saturated sigmoid finite
Tensor neg_log_mean(const Tensor& x) {
    Tensor eps = Tensor::full(x.shape(), 1e-12);
    return scale(mean_all(log_op(add(x, eps))), -1.0);
}

Tensor one_minus(const Tensor& x) {
    return sub(Tensor::full(x.shape(), 1.0), x);
}

}  // namespace

TrainResult train(const CorpusManifest& corpus, const TrainConfig& cfg) {
    cfg.validate();
    if (corpus.entries.empty()) {
        throw TensorError("train requires a non-empty corpus");
    }

    // load everything up front; missing files abort before step 0
    std::vector<GrayImage> latents, gts;
    for (const auto& e : corpus.entries) {
        latents.push_back(load_image(e.latent_path));
        gts.push_back(load_image(e.gt_path));
        if (latents.back().width < cfg.window ||
            latents.back().height < cfg.window) {
            throw TensorError("corpus image smaller than window: " +
                              e.latent_path);
        }
    }

    // optional skeleton targets for the auxiliary minutiae term
    std::vector<GrayImage> skel_masks;
    if (cfg.minutiae_weight > 0.0) {
        for (const auto& gt : gts) {
            skel_masks.push_back(thin(binarize(gt)));
        }
    }

    TrainResult result{
        make_generator({4, cfg.gen_base_channels, {}}, cfg.seed),
        make_discriminator(
            {cfg.disc_blocks, cfg.disc_base_channels, 128, 0.2}, cfg.seed + 1),
        {}};
    GeneratorParams& gen = result.generator;
    DiscriminatorParams& disc = result.discriminator;
    gen.set_training(true);
    disc.set_training(true);

    auto gen_params = gen.named_parameters();
    auto disc_params = disc.named_parameters();
    AdamState gen_state = make_adam_state(gen_params);
    AdamState disc_state = make_adam_state(disc_params);

    auto& log = result.log;
    {
        std::ostringstream h;
        h << "learning_rate=" << cfg.learning_rate
          << " beta1=" << cfg.adam_beta1 << " beta2=" << cfg.adam_beta2
          << " batch_size=" << cfg.batch_size << " window=" << cfg.window
          << " max_steps=" << cfg.max_steps << " lambda=" << cfg.recon_weight
          << " minutiae_weight=" << cfg.minutiae_weight
          << " seed=" << cfg.seed;
        log.header.push_back(h.str());
    }

    const bool checkpointing = !cfg.checkpoint_dir.empty();
    auto write_ckpt = [&](const std::string& tag) {
        if (!checkpointing) return;
        std::filesystem::create_directories(cfg.checkpoint_dir);
        write_checkpoint(cfg.checkpoint_dir + "/gen_" + tag + ".ckpt",
                         gen.named_state());
        write_checkpoint(cfg.checkpoint_dir + "/disc_" + tag + ".ckpt",
                         disc.named_state());
    };
    write_ckpt("init");

    std::mt19937_64 rng(cfg.seed + 2);
    std::uniform_int_distribution<std::size_t> pick(0, corpus.entries.size() - 1);

    for (int step = 0; step < cfg.max_steps; ++step) {
        const auto t0 = std::chrono::steady_clock::now();

        // sample a batch of aligned window crops
        const int B = cfg.batch_size;
        Tensor lat({B, 1, cfg.window, cfg.window});
        Tensor gt({B, 1, cfg.window, cfg.window});
        Tensor skel_mask;
        if (cfg.minutiae_weight > 0.0) {
            skel_mask = Tensor({B, 1, cfg.window, cfg.window});
        }
        for (int b = 0; b < B; ++b) {
            const std::size_t idx = pick(rng);
            const GrayImage& li = latents[idx];
            std::uniform_int_distribution<int> ox(0, li.width - cfg.window);
            std::uniform_int_distribution<int> oy(0, li.height - cfg.window);
            const int x0 = ox(rng), y0 = oy(rng);
            for (int y = 0; y < cfg.window; ++y) {
                for (int x = 0; x < cfg.window; ++x) {
                    lat.at(b, 0, y, x) = li.at(y0 + y, x0 + x);
                    gt.at(b, 0, y, x) = gts[idx].at(y0 + y, x0 + x);
                    if (cfg.minutiae_weight > 0.0) {
                        skel_mask.at(b, 0, y, x) =
                            skel_masks[idx].at(y0 + y, x0 + x);
                    }
                }
            }
        }

        try {
            // generator forward (shared between both updates)
            Tensor fake = generator_forward(lat, gen);

            // discriminator step: push D(real) up, D(fake) down
            Tensor d_real = discriminator_forward(concat_channels(lat, gt), disc);
            Tensor d_fake =
                discriminator_forward(concat_channels(lat, detach(fake)), disc);
            Tensor loss_d = scale(
                add(neg_log_mean(d_real), neg_log_mean(one_minus(d_fake))), 0.5);
            backward(loss_d);
            adam_step(disc_params, disc_state, cfg);
            zero_grads(disc_params);

            // generator step: non-saturating adversarial + lambda * L1
            Tensor d_fake_g =
                discriminator_forward(concat_channels(lat, fake), disc);
            Tensor loss_g_adv = neg_log_mean(d_fake_g);
            Tensor loss_g_recon = mean_abs_diff(fake, gt);
            Tensor loss_g =
                add(loss_g_adv, scale(loss_g_recon, cfg.recon_weight));
            if (cfg.minutiae_weight > 0.0) {
                // L1 restricted to ground-truth skeleton pixels
                Tensor masked = mul(abs_op(sub(fake, gt)), skel_mask);
                loss_g = add(loss_g, scale(mean_all(masked), cfg.minutiae_weight));
            }
            backward(loss_g);
            adam_step(gen_params, gen_state, cfg);
            zero_grads(gen_params);
            zero_grads(disc_params);  // G step leaked gradients into D

            const auto t1 = std::chrono::steady_clock::now();
            TrainStepRecord rec;
            rec.step = step;
            rec.loss_g_adv = loss_g_adv.item();
            rec.loss_g_recon = loss_g_recon.item();
            rec.loss_d = loss_d.item();
            rec.wall_ms =
                std::chrono::duration<double, std::milli>(t1 - t0).count();
            if (!std::isfinite(rec.loss_g_adv) ||
                !std::isfinite(rec.loss_g_recon) || !std::isfinite(rec.loss_d)) {
                throw NumericError("non-finite loss");
            }
            log.records.push_back(rec);
        } catch (const NumericError& e) {
            throw NumericError("training aborted at step " +
                               std::to_string(step) + ": " + e.what());
        }

        if (cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0) {
            write_ckpt("step" + std::to_string(step + 1));
        }
    }

    write_ckpt("final");
    return result;
}

namespace {

// reflect-pads an image up to at least (min_w, min_h)
GrayImage reflect_pad(const GrayImage& img, int min_w, int min_h) {
    const int W = std::max(img.width, min_w);
    const int H = std::max(img.height, min_h);
    GrayImage out(W, H);
    out.dpi = img.dpi;
    auto reflect = [](int i, int n) {
        if (n == 1) return 0;
        const int period = 2 * n - 2;
        i = std::abs(i) % period;
        return i < n ? i : period - i;
    };
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            out.at(y, x) = img.at(reflect(y, img.height), reflect(x, img.width));
        }
    }
    return out;
}

std::vector<int> tile_positions(int extent, int window, int stride) {
    std::vector<int> pos;
    for (int p = 0;; p += stride) {
        if (p + window >= extent) {
            pos.push_back(extent - window);
            break;
        }
        pos.push_back(p);
    }
    return pos;
}

}  // namespace

GrayImage enhance_full(const GrayImage& img, GeneratorParams& gen, int window,
                       int stride) {
    if (stride < 1) stride = window;
    gen.set_training(false);
    NoGradGuard no_grad;

    const GrayImage padded = reflect_pad(img, window, window);
    const auto xs = tile_positions(padded.width, window, stride);
    const auto ys = tile_positions(padded.height, window, stride);

    GrayImage out(padded.width, padded.height);
    out.dpi = img.dpi;

    // single tile covering everything: plain forward, no blending
    if (xs.size() == 1 && ys.size() == 1) {
        Tensor in({1, 1, window, window});
        for (int y = 0; y < window; ++y) {
            for (int x = 0; x < window; ++x) {
                in.at(0, 0, y, x) = padded.at(y, x);
            }
        }
        Tensor res = generator_forward(in, gen);
        for (int y = 0; y < window; ++y) {
            for (int x = 0; x < window; ++x) {
                out.at(y, x) = res.at(0, 0, y, x);
            }
        }
    } else {
        // raised-cosine blending weight, strictly positive at tile edges
        std::vector<double> wgt(window);
        for (int i = 0; i < window; ++i) {
            wgt[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * (i + 0.5) / window);
        }
        std::vector<double> acc(out.size(), 0.0), wsum(out.size(), 0.0);

        std::vector<std::pair<int, int>> tiles;
        for (int ty : ys) {
            for (int tx : xs) tiles.emplace_back(ty, tx);
        }
        const int kBatch = 8;
        for (std::size_t t0 = 0; t0 < tiles.size(); t0 += kBatch) {
            const int nb = static_cast<int>(
                std::min<std::size_t>(kBatch, tiles.size() - t0));
            Tensor in({nb, 1, window, window});
            for (int b = 0; b < nb; ++b) {
                const auto [ty, tx] = tiles[t0 + b];
                for (int y = 0; y < window; ++y) {
                    for (int x = 0; x < window; ++x) {
                        in.at(b, 0, y, x) = padded.at(ty + y, tx + x);
                    }
                }
            }
            Tensor res = generator_forward(in, gen);
            for (int b = 0; b < nb; ++b) {
                const auto [ty, tx] = tiles[t0 + b];
                for (int y = 0; y < window; ++y) {
                    for (int x = 0; x < window; ++x) {
                        const double w = wgt[y] * wgt[x];
                        const std::size_t idx =
                            static_cast<std::size_t>(ty + y) * out.width + tx + x;
                        acc[idx] += w * res.at(b, 0, y, x);
                        wsum[idx] += w;
                    }
                }
            }
        }
        for (std::size_t i = 0; i < out.size(); ++i) {
            out.pixels[i] = acc[i] / wsum[i];
        }
    }

    // crop back if reflect-padded
    if (out.width != img.width || out.height != img.height) {
        GrayImage cropped(img.width, img.height);
        cropped.dpi = img.dpi;
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x) {
                cropped.at(y, x) = out.at(y, x);
            }
        }
        return cropped;
    }
    return out;
}

}  // namespace lfe
