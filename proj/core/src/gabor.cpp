#include "lfe/gabor.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace lfe {

GaborKernel gabor_kernel(double theta, double freq,
                         const GaborBankConfig& cfg) {
    if (freq < kMinRidgeFreq || freq > kMaxRidgeFreq) {
        throw ImageError("gabor_kernel frequency " + std::to_string(freq) +
                         " outside valid window");
    }
    const int min_radius = static_cast<int>(
        std::ceil(3.0 * std::max(cfg.sigma_x, cfg.sigma_y)));
    if (cfg.kernel_radius < min_radius) {
        throw ImageError("kernel_radius " + std::to_string(cfg.kernel_radius) +
                         " below 3*sigma = " + std::to_string(min_radius));
    }
    const int r = cfg.kernel_radius;
    GaborKernel k;
    k.radius = r;
    k.taps.resize(static_cast<std::size_t>(2 * r + 1) * (2 * r + 1));
    // x' runs normal to the ridge direction, y' along it
    const double nx = -std::sin(theta), ny = std::cos(theta);
    const double tx = std::cos(theta), ty = std::sin(theta);
    double sum = 0.0, env_sum = 0.0;
    std::vector<double> env(k.taps.size());
    std::size_t i = 0;
    for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx, ++i) {
            const double xp = dx * nx + dy * ny;
            const double yp = dx * tx + dy * ty;
            const double e = std::exp(-0.5 * (xp * xp / (cfg.sigma_x * cfg.sigma_x) +
                                              yp * yp / (cfg.sigma_y * cfg.sigma_y)));
            k.taps[i] = e * std::cos(2.0 * M_PI * freq * xp);
            env[i] = e;
            sum += k.taps[i];
            env_sum += e;
        }
    }
    // DC removal: subtract the envelope-weighted mean
    const double dc = sum / env_sum;
    for (std::size_t j = 0; j < k.taps.size(); ++j) {
        k.taps[j] -= dc * env[j];
    }
    return k;
}

namespace {

// Doubled-angle average of theta over a square block window.
double averaged_theta(const OrientationField& orient, int by, int bx,
                      int window) {
    const int half = window / 2;
    double sx = 0.0, sy = 0.0;
    for (int dy = -half; dy <= half; ++dy) {
        for (int dx = -half; dx <= half; ++dx) {
            const int yy = by + dy, xx = bx + dx;
            if (yy < 0 || yy >= orient.blocks_y || xx < 0 ||
                xx >= orient.blocks_x) {
                continue;
            }
            const std::size_t bi = static_cast<std::size_t>(yy) * orient.blocks_x + xx;
            const double c = orient.coherence[bi];
            sx += c * std::cos(2.0 * orient.theta[bi]);
            sy += c * std::sin(2.0 * orient.theta[bi]);
        }
    }
    if (sx == 0.0 && sy == 0.0) return orient.theta_at(by, bx);
    double t = 0.5 * std::atan2(sy, sx);
    if (t < 0.0) t += M_PI;
    return t;
}

}  // namespace

GrayImage gabor_enhance(const GrayImage& img, const OrientationField& orient,
                        const FrequencyMap& freq, const GaborBankConfig& cfg) {
    if (orient.blocks_x != freq.blocks_x || orient.blocks_y != freq.blocks_y ||
        orient.block_size != freq.block_size) {
        throw ImageError("orientation and frequency grids differ");
    }
    const int bs = orient.block_size;
    GrayImage out(img.width, img.height);
    out.dpi = img.dpi;
    std::vector<std::uint8_t> filtered(img.size(), 0);

    // kernel cache keyed by quantized (theta, freq)
    std::map<std::pair<int, int>, GaborKernel> cache;
    const double theta_step = M_PI / cfg.n_orientations;
    const double freq_step = 0.005;

    double fmin = 1e300, fmax = -1e300;
    for (int by = 0; by < orient.blocks_y; ++by) {
        for (int bx = 0; bx < orient.blocks_x; ++bx) {
            const std::size_t bi = static_cast<std::size_t>(by) * orient.blocks_x + bx;
            const double f = freq.freq[bi];
            const int y0 = by * bs, x0 = bx * bs;
            const int y1 = std::min(y0 + bs, img.height);
            const int x1 = std::min(x0 + bs, img.width);
            if (f <= 0.0) {
                // undefined frequency: pass through unfiltered
                for (int y = y0; y < y1; ++y) {
                    for (int x = x0; x < x1; ++x) {
                        out.at(y, x) = img.at(y, x);
                    }
                }
                continue;
            }
            const double theta = averaged_theta(orient, by, bx, cfg.curvature_window);
            const int tq = static_cast<int>(std::lround(theta / theta_step)) %
                           cfg.n_orientations;
            const int fq = static_cast<int>(std::lround(f / freq_step));
            const double fq_val = std::clamp(fq * freq_step, kMinRidgeFreq, kMaxRidgeFreq);
            auto it = cache.find({tq, fq});
            if (it == cache.end()) {
                it = cache.emplace(std::pair{tq, fq},
                                   gabor_kernel(tq * theta_step, fq_val, cfg))
                         .first;
            }
            const GaborKernel& k = it->second;
            for (int y = y0; y < y1; ++y) {
                for (int x = x0; x < x1; ++x) {
                    double acc = 0.0;
                    for (int dy = -k.radius; dy <= k.radius; ++dy) {
                        const int yy = std::clamp(y + dy, 0, img.height - 1);
                        for (int dx = -k.radius; dx <= k.radius; ++dx) {
                            const int xx = std::clamp(x + dx, 0, img.width - 1);
                            acc += k.at(dy, dx) * img.at(yy, xx);
                        }
                    }
                    out.at(y, x) = acc;
                    filtered[static_cast<std::size_t>(y) * img.width + x] = 1;
                    fmin = std::min(fmin, acc);
                    fmax = std::max(fmax, acc);
                }
            }
        }
    }

    // rescale only filtered pixels to [0,1]; pass-through pixels already are
    if (fmax > fmin) {
        const double inv = 1.0 / (fmax - fmin);
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (filtered[i]) out.pixels[i] = (out.pixels[i] - fmin) * inv;
        }
    } else if (fmax == fmin && fmin != 1e300) {
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (filtered[i]) out.pixels[i] = 0.5;
        }
    }
    return out;
}

}  // namespace lfe
