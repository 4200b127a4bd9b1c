#pragma once

#include "lfe/image.hpp"

#include <vector>

namespace lfe {

struct GaborBankConfig {
    double sigma_x = 4.0;
    double sigma_y = 4.0;
    int n_orientations = 16;
    int kernel_radius = 12;   // >= 3*max(sigma_x, sigma_y)
    int curvature_window = 3; // blocks averaged to follow curved ridges
};

struct GaborKernel {
    int radius = 0;
    std::vector<double> taps;  // (2r+1)^2 row-major

    double at(int dy, int dx) const {
        return taps[static_cast<std::size_t>(dy + radius) * (2 * radius + 1) +
                    (dx + radius)];
    }
};

/// Even-symmetric, zero-mean Gabor kernel tuned to ridge direction theta and
/// frequency freq (cycles/px).
GaborKernel gabor_kernel(double theta, double freq, const GaborBankConfig& cfg);

/// Contextual ridge enhancement: each pixel filtered with the kernel of its
/// block's (theta, freq); undefined-frequency blocks pass through unchanged.
GrayImage gabor_enhance(const GrayImage& img, const OrientationField& orient,
                        const FrequencyMap& freq, const GaborBankConfig& cfg);

}  // namespace lfe
