#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace lfe {

class ImageError : public std::runtime_error {
public:
    explicit ImageError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Single-channel intensity raster in [0,1], row-major.
struct GrayImage {
    int width = 0;
    int height = 0;
    int dpi = 500;
    std::vector<double> pixels;

    GrayImage() = default;
    GrayImage(int w, int h, double fill = 0.0)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

    double& at(int y, int x) {
        return pixels[static_cast<std::size_t>(y) * width + x];
    }
    double at(int y, int x) const {
        return pixels[static_cast<std::size_t>(y) * width + x];
    }
    bool in_bounds(int y, int x) const {
        return y >= 0 && y < height && x >= 0 && x < width;
    }
    std::size_t size() const { return pixels.size(); }
};

/// 8-bit RGB raster for minutiae overlays.
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // r,g,b interleaved

    RgbImage() = default;
    RgbImage(int w, int h)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

    std::uint8_t* px(int y, int x) {
        return &pixels[(static_cast<std::size_t>(y) * width + x) * 3];
    }
};

/// Reads an 8-bit P5 PGM. Intensities map linearly onto [0,1].
GrayImage load_image(const std::string& path);
/// Writes an 8-bit P5 PGM (values rounded to the nearest of 256 levels).
void save_image(const GrayImage& img, const std::string& path);

/// Writes an 8-bit P6 PPM.
void save_ppm(const RgbImage& img, const std::string& path);

/// Block-wise ridge direction, radians modulo pi.
struct OrientationField {
    int block_size = 16;
    int blocks_x = 0;
    int blocks_y = 0;
    std::vector<double> theta;      // [0, pi)
    std::vector<double> coherence;  // [0, 1]

    double theta_at(int by, int bx) const {
        return theta[static_cast<std::size_t>(by) * blocks_x + bx];
    }
    double coherence_at(int by, int bx) const {
        return coherence[static_cast<std::size_t>(by) * blocks_x + bx];
    }
};

/// Block-wise ridge frequency in cycles/pixel; 0 marks undefined.
struct FrequencyMap {
    int block_size = 16;
    int blocks_x = 0;
    int blocks_y = 0;
    std::vector<double> freq;

    double freq_at(int by, int bx) const {
        return freq[static_cast<std::size_t>(by) * blocks_x + bx];
    }
};

// Valid ridge frequencies at 500 dpi: period 3..25 px.
constexpr double kMinRidgeFreq = 1.0 / 25.0;
constexpr double kMaxRidgeFreq = 1.0 / 3.0;

/// Classical mean/variance normalization, clamped to [0,1].
GrayImage normalize(const GrayImage& img, double target_mean,
                    double target_var);

/// Gradient-based least-squares orientation per block.
OrientationField estimate_orientation(const GrayImage& img, int block_size);

/// X-signature projection frequency estimate per block.
FrequencyMap estimate_frequency(const GrayImage& img,
                                const OrientationField& orient);

/// Adaptive local-mean threshold; dark (ridge) pixels become 1.
GrayImage binarize(const GrayImage& img);

/// Zhang-Suen thinning to a 1-px-wide 8-connected skeleton.
GrayImage thin(const GrayImage& binary);

}  // namespace lfe
