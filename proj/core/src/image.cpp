#include "lfe/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace lfe {

namespace {

// Skips whitespace and '#' comment lines in a PNM header, tracking offset.
int next_header_token(std::istream& is, std::string& token,
                      std::streamoff& pos) {
    token.clear();
    int ch;
    while ((ch = is.get()) != EOF) {
        ++pos;
        if (ch == '#') {
            while ((ch = is.get()) != EOF) {
                ++pos;
                if (ch == '\n') break;
            }
            continue;
        }
        if (!std::isspace(ch)) break;
    }
    if (ch == EOF) return -1;
    token.push_back(static_cast<char>(ch));
    while ((ch = is.get()) != EOF) {
        ++pos;
        if (std::isspace(ch)) break;
        token.push_back(static_cast<char>(ch));
    }
    return 0;
}

[[noreturn]] void header_fail(const std::string& path, std::streamoff pos,
                              const std::string& what) {
    throw ImageError("malformed PGM header in " + path + " at byte " +
                     std::to_string(pos) + ": " + what);
}

}  // namespace

GrayImage load_image(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ImageError("cannot open image file: " + path);
    std::streamoff pos = 0;
    std::string tok;
    if (next_header_token(is, tok, pos) < 0 || tok != "P5") {
        header_fail(path, pos, "expected magic P5, got '" + tok + "'");
    }
    long dims[3];
    for (int i = 0; i < 3; ++i) {
        if (next_header_token(is, tok, pos) < 0) {
            header_fail(path, pos, "unexpected end of header");
        }
        char* end = nullptr;
        dims[i] = std::strtol(tok.c_str(), &end, 10);
        if (end == tok.c_str() || *end != '\0' || dims[i] <= 0) {
            header_fail(path, pos, "bad integer '" + tok + "'");
        }
    }
    const long w = dims[0], h = dims[1], maxval = dims[2];
    if (maxval != 255) {
        header_fail(path, pos,
                    "unsupported bit depth (maxval " + std::to_string(maxval) +
                        ", only 255 supported)");
    }
    GrayImage img(static_cast<int>(w), static_cast<int>(h));
    std::vector<std::uint8_t> raw(img.size());
    is.read(reinterpret_cast<char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(is.gcount()) != raw.size()) {
        throw ImageError("truncated pixel data in " + path + " at byte " +
                         std::to_string(pos + is.gcount()));
    }
    for (std::size_t i = 0; i < raw.size(); ++i) {
        img.pixels[i] = raw[i] / 255.0;
    }
    return img;
}

void save_image(const GrayImage& img, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ImageError("cannot open image for writing: " + path);
    os << "P5\n" << img.width << " " << img.height << "\n255\n";
    std::vector<std::uint8_t> raw(img.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const double v = std::clamp(img.pixels[i], 0.0, 1.0);
        raw[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
    os.write(reinterpret_cast<const char*>(raw.data()),
             static_cast<std::streamsize>(raw.size()));
    if (!os) throw ImageError("write failure on " + path);
}

void save_ppm(const RgbImage& img, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ImageError("cannot open image for writing: " + path);
    os << "P6\n" << img.width << " " << img.height << "\n255\n";
    os.write(reinterpret_cast<const char*>(img.pixels.data()),
             static_cast<std::streamsize>(img.pixels.size()));
    if (!os) throw ImageError("write failure on " + path);
}

GrayImage normalize(const GrayImage& img, double target_mean,
                    double target_var) {
    double mean = 0.0;
    for (double v : img.pixels) mean += v;
    mean /= static_cast<double>(img.size());
    double var = 0.0;
    for (double v : img.pixels) var += (v - mean) * (v - mean);
    var /= static_cast<double>(img.size());
    if (var <= 0.0) {
        throw ImageError("normalize rejected: zero-variance image");
    }
    GrayImage out(img.width, img.height);
    out.dpi = img.dpi;
    const double k = std::sqrt(target_var / var);
    for (std::size_t i = 0; i < img.size(); ++i) {
        const double v = target_mean + (img.pixels[i] - mean) * k;
        out.pixels[i] = std::clamp(v, 0.0, 1.0);
    }
    return out;
}

OrientationField estimate_orientation(const GrayImage& img, int block_size) {
    if (block_size < 8) {
        throw ImageError("orientation block_size must be >= 8");
    }
    // Sobel gradients
    std::vector<double> gx(img.size(), 0.0), gy(img.size(), 0.0);
    for (int y = 1; y + 1 < img.height; ++y) {
        for (int x = 1; x + 1 < img.width; ++x) {
            const double a = img.at(y - 1, x - 1), b = img.at(y - 1, x),
                         c = img.at(y - 1, x + 1);
            const double d = img.at(y, x - 1), f = img.at(y, x + 1);
            const double g = img.at(y + 1, x - 1), hh = img.at(y + 1, x),
                         i2 = img.at(y + 1, x + 1);
            gx[static_cast<std::size_t>(y) * img.width + x] =
                (c + 2 * f + i2) - (a + 2 * d + g);
            gy[static_cast<std::size_t>(y) * img.width + x] =
                (g + 2 * hh + i2) - (a + 2 * b + c);
        }
    }
    OrientationField of;
    of.block_size = block_size;
    of.blocks_x = (img.width + block_size - 1) / block_size;
    of.blocks_y = (img.height + block_size - 1) / block_size;
    of.theta.resize(static_cast<std::size_t>(of.blocks_x) * of.blocks_y, 0.0);
    of.coherence.resize(of.theta.size(), 0.0);
    for (int by = 0; by < of.blocks_y; ++by) {
        for (int bx = 0; bx < of.blocks_x; ++bx) {
            double sxy = 0.0, sxx_yy = 0.0, energy = 0.0;
            const int y0 = by * block_size, x0 = bx * block_size;
            const int y1 = std::min(y0 + block_size, img.height);
            const int x1 = std::min(x0 + block_size, img.width);
            for (int y = y0; y < y1; ++y) {
                for (int x = x0; x < x1; ++x) {
                    const double vx = gx[static_cast<std::size_t>(y) * img.width + x];
                    const double vy = gy[static_cast<std::size_t>(y) * img.width + x];
                    sxy += 2.0 * vx * vy;
                    sxx_yy += vx * vx - vy * vy;
                    energy += vx * vx + vy * vy;
                }
            }
            const std::size_t bi = static_cast<std::size_t>(by) * of.blocks_x + bx;
            if (energy <= 1e-12) {
                of.theta[bi] = 0.0;
                of.coherence[bi] = 0.0;
                continue;
            }
            double theta = 0.5 * std::atan2(sxy, sxx_yy) + M_PI / 2.0;
            theta = std::fmod(theta, M_PI);
            if (theta < 0.0) theta += M_PI;
            of.theta[bi] = theta;
            of.coherence[bi] = std::sqrt(sxy * sxy + sxx_yy * sxx_yy) / energy;
        }
    }
    return of;
}

namespace {

double sample_bilinear(const GrayImage& img, double y, double x) {
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0, fy = y - y0;
    auto px = [&](int yy, int xx) {
        yy = std::clamp(yy, 0, img.height - 1);
        xx = std::clamp(xx, 0, img.width - 1);
        return img.at(yy, xx);
    };
    return (1 - fy) * ((1 - fx) * px(y0, x0) + fx * px(y0, x0 + 1)) +
           fy * ((1 - fx) * px(y0 + 1, x0) + fx * px(y0 + 1, x0 + 1));
}

}  // namespace

FrequencyMap estimate_frequency(const GrayImage& img,
                                const OrientationField& orient) {
    FrequencyMap fm;
    fm.block_size = orient.block_size;
    fm.blocks_x = orient.blocks_x;
    fm.blocks_y = orient.blocks_y;
    fm.freq.resize(orient.theta.size(), 0.0);

    const int sig_half = 20;  // signature half-length along the normal
    const int win_half = 6;   // averaging half-width along the ridge

    for (int by = 0; by < fm.blocks_y; ++by) {
        for (int bx = 0; bx < fm.blocks_x; ++bx) {
            const std::size_t bi = static_cast<std::size_t>(by) * fm.blocks_x + bx;
            if (orient.coherence[bi] < 0.15) continue;
            const double theta = orient.theta[bi];
            const double tx = std::cos(theta), ty = std::sin(theta);
            const double nx = -ty, ny = tx;  // normal to the ridge direction
            const double cx = bx * fm.block_size + fm.block_size / 2.0;
            const double cy = by * fm.block_size + fm.block_size / 2.0;

            double signature[2 * sig_half + 1];
            for (int u = -sig_half; u <= sig_half; ++u) {
                double acc = 0.0;
                for (int v = -win_half; v <= win_half; ++v) {
                    acc += sample_bilinear(img, cy + u * ny + v * ty,
                                           cx + u * nx + v * tx);
                }
                signature[u + sig_half] = acc / (2 * win_half + 1);
            }
            // peaks of the x-signature give ridge spacing
            double mean = 0.0;
            for (double v : signature) mean += v;
            mean /= (2 * sig_half + 1);
            std::vector<int> peaks;
            for (int i = 1; i < 2 * sig_half; ++i) {
                if (signature[i] >= mean && signature[i] > signature[i - 1] &&
                    signature[i] >= signature[i + 1]) {
                    peaks.push_back(i);
                }
            }
            if (peaks.size() < 2) continue;
            const double span = peaks.back() - peaks.front();
            if (span <= 0.0) continue;
            const double freq = static_cast<double>(peaks.size() - 1) / span;
            if (freq >= kMinRidgeFreq && freq <= kMaxRidgeFreq) {
                fm.freq[bi] = freq;
            }
        }
    }
    return fm;
}

GrayImage binarize(const GrayImage& img) {
    const int W = img.width, H = img.height;
    // integral image for 16x16 local means
    std::vector<double> integral(static_cast<std::size_t>(W + 1) * (H + 1), 0.0);
    for (int y = 0; y < H; ++y) {
        double row = 0.0;
        for (int x = 0; x < W; ++x) {
            row += img.at(y, x);
            integral[static_cast<std::size_t>(y + 1) * (W + 1) + x + 1] =
                integral[static_cast<std::size_t>(y) * (W + 1) + x + 1] + row;
        }
    }
    const int half = 8;
    GrayImage out(W, H);
    out.dpi = img.dpi;
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const int y0 = std::max(0, y - half), y1 = std::min(H, y + half);
            const int x0 = std::max(0, x - half), x1 = std::min(W, x + half);
            const double sum =
                integral[static_cast<std::size_t>(y1) * (W + 1) + x1] -
                integral[static_cast<std::size_t>(y0) * (W + 1) + x1] -
                integral[static_cast<std::size_t>(y1) * (W + 1) + x0] +
                integral[static_cast<std::size_t>(y0) * (W + 1) + x0];
            const double mean = sum / ((y1 - y0) * (x1 - x0));
            // dark pixels are ridges; ties and flat regions go to background
            // (the margin absorbs integral-image rounding noise)
            out.at(y, x) = img.at(y, x) < mean - 1e-9 ? 1.0 : 0.0;
        }
    }
    return out;
}

namespace {

// Simple-point test: exactly one 0->1 transition around the 8-ring.
int ring_transitions(const std::vector<std::uint8_t>& p) {
    int a = 0;
    for (int i = 0; i < 8; ++i) {
        if (p[i] == 0 && p[(i + 1) % 8] == 1) ++a;
    }
    return a;
}

void ring_of(const GrayImage& img, int y, int x, std::vector<std::uint8_t>& p) {
    static const int dy[8] = {-1, -1, 0, 1, 1, 1, 0, -1};
    static const int dx[8] = {0, 1, 1, 1, 0, -1, -1, -1};
    for (int i = 0; i < 8; ++i) {
        const int yy = y + dy[i], xx = x + dx[i];
        p[i] = img.in_bounds(yy, xx) && img.at(yy, xx) > 0.5 ? 1 : 0;
    }
}

}  // namespace

GrayImage thin(const GrayImage& binary) {
    for (double v : binary.pixels) {
        if (v != 0.0 && v != 1.0) {
            throw ImageError("thin requires a strictly 0/1 image");
        }
    }
    GrayImage img = binary;
    const int W = img.width, H = img.height;
    std::vector<std::uint8_t> ring(8);
    bool changed = true;
    while (changed) {
        changed = false;
        for (int pass = 0; pass < 2; ++pass) {
            std::vector<std::pair<int, int>> to_delete;
            for (int y = 0; y < H; ++y) {
                for (int x = 0; x < W; ++x) {
                    if (img.at(y, x) < 0.5) continue;
                    ring_of(img, y, x, ring);
                    int b = 0;
                    for (int i = 0; i < 8; ++i) b += ring[i];
                    if (b < 2 || b > 6) continue;
                    if (ring_transitions(ring) != 1) continue;
                    // ring order: P2=N, P3=NE, P4=E, P5=SE, P6=S, P7=SW, P8=W, P9=NW
                    const int P2 = ring[0], P4 = ring[2], P6 = ring[4],
                              P8 = ring[6];
                    if (pass == 0) {
                        if (P2 * P4 * P6 != 0 || P4 * P6 * P8 != 0) continue;
                    } else {
                        if (P2 * P4 * P8 != 0 || P2 * P6 * P8 != 0) continue;
                    }
                    to_delete.emplace_back(y, x);
                }
            }
            for (auto [y, x] : to_delete) img.at(y, x) = 0.0;
            if (!to_delete.empty()) changed = true;
        }
    }
    // Zhang-Suen can leave staircase 2x2 blocks; clear them without
    // breaking connectivity.
    bool block_found = true;
    while (block_found) {
        block_found = false;
        for (int y = 0; y + 1 < H && !block_found; ++y) {
            for (int x = 0; x + 1 < W && !block_found; ++x) {
                if (img.at(y, x) > 0.5 && img.at(y, x + 1) > 0.5 &&
                    img.at(y + 1, x) > 0.5 && img.at(y + 1, x + 1) > 0.5) {
                    block_found = true;
                    bool removed = false;
                    for (auto [yy, xx] : {std::pair{y, x}, {y, x + 1},
                                          {y + 1, x}, {y + 1, x + 1}}) {
                        ring_of(img, yy, xx, ring);
                        if (ring_transitions(ring) == 1) {
                            img.at(yy, xx) = 0.0;
                            removed = true;
                            break;
                        }
                    }
                    if (!removed) img.at(y, x) = 0.0;
                }
            }
        }
    }
    return img;
}

}  // namespace lfe
