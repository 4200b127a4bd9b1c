#include "lfe/synth.hpp"

#include "lfe/gabor.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace lfe {

namespace {

// Smooth value noise interpolated on a coarse lattice, values in [-1,1].
std::vector<double> value_noise(int width, int height, int cell,
                                std::mt19937_64& rng) {
    const int gx = width / cell + 2, gy = height / cell + 2;
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> lattice(static_cast<std::size_t>(gx) * gy);
    for (double& v : lattice) v = dist(rng);
    std::vector<double> out(static_cast<std::size_t>(width) * height);
    for (int y = 0; y < height; ++y) {
        const double fy = static_cast<double>(y) / cell;
        const int y0 = static_cast<int>(fy);
        const double ty = fy - y0;
        const double sy = ty * ty * (3.0 - 2.0 * ty);
        for (int x = 0; x < width; ++x) {
            const double fx = static_cast<double>(x) / cell;
            const int x0 = static_cast<int>(fx);
            const double tx = fx - x0;
            const double sx = tx * tx * (3.0 - 2.0 * tx);
            const double a = lattice[static_cast<std::size_t>(y0) * gx + x0];
            const double b = lattice[static_cast<std::size_t>(y0) * gx + x0 + 1];
            const double c = lattice[static_cast<std::size_t>(y0 + 1) * gx + x0];
            const double d = lattice[static_cast<std::size_t>(y0 + 1) * gx + x0 + 1];
            out[static_cast<std::size_t>(y) * width + x] =
                (a * (1 - sx) + b * sx) * (1 - sy) + (c * (1 - sx) + d * sx) * sy;
        }
    }
    return out;
}

void draw_stroke(GrayImage& img, double x0, double y0, double x1, double y1,
                 double half_width, double value) {
    const int min_x = std::max(0, static_cast<int>(std::min(x0, x1) - half_width - 1));
    const int max_x = std::min(img.width - 1,
                               static_cast<int>(std::max(x0, x1) + half_width + 1));
    const int min_y = std::max(0, static_cast<int>(std::min(y0, y1) - half_width - 1));
    const int max_y = std::min(img.height - 1,
                               static_cast<int>(std::max(y0, y1) + half_width + 1));
    const double dx = x1 - x0, dy = y1 - y0;
    const double len2 = dx * dx + dy * dy;
    for (int y = min_y; y <= max_y; ++y) {
        for (int x = min_x; x <= max_x; ++x) {
            double t = len2 > 0.0 ? ((x - x0) * dx + (y - y0) * dy) / len2 : 0.0;
            t = std::clamp(t, 0.0, 1.0);
            const double px = x0 + t * dx, py = y0 + t * dy;
            const double d2 = (x - px) * (x - px) + (y - py) * (y - py);
            if (d2 <= half_width * half_width) {
                img.at(y, x) = value;
            }
        }
    }
}

void apply_gaussian_blur(GrayImage& img, double sigma) {
    const int r = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * r + 1);
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
        k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[i + r];
    }
    for (double& v : k) v /= sum;
    GrayImage tmp(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) {
                acc += k[i + r] * img.at(y, std::clamp(x + i, 0, img.width - 1));
            }
            tmp.at(y, x) = acc;
        }
    }
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) {
                acc += k[i + r] * tmp.at(std::clamp(y + i, 0, img.height - 1), x);
            }
            img.at(y, x) = acc;
        }
    }
}

}  // namespace

GrayImage degrade(const GrayImage& img, const NoiseRecipe& recipe) {
    std::mt19937_64 rng(recipe.seed);
    GrayImage out = img;

    // 1. contrast compression toward 0.5
    if (recipe.contrast_scale != 1.0) {
        for (double& p : out.pixels) {
            p = 0.5 + (p - 0.5) * recipe.contrast_scale;
        }
    }

    // 2. smooth low-frequency background field
    if (recipe.background_amplitude > 0.0) {
        auto field = value_noise(out.width, out.height, 32, rng);
        for (std::size_t i = 0; i < out.size(); ++i) {
            out.pixels[i] += recipe.background_amplitude * field[i];
        }
    }

    // 3. line strokes
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    for (int i = 0; i < recipe.line_count; ++i) {
        const double x0 = ud(rng) * out.width, y0 = ud(rng) * out.height;
        const double ang = ud(rng) * 2.0 * M_PI;
        const double len = (0.3 + 0.7 * ud(rng)) * std::max(out.width, out.height);
        const double w =
            recipe.line_width_min +
            ud(rng) * std::max(0, recipe.line_width_max - recipe.line_width_min);
        const double value = ud(rng) < 0.5 ? 0.05 + 0.15 * ud(rng)
                                           : 0.8 + 0.15 * ud(rng);
        draw_stroke(out, x0, y0, x0 + len * std::cos(ang),
                    y0 + len * std::sin(ang), 0.5 * w, value);
    }

    // 4. Gaussian blobs
    for (int i = 0; i < recipe.blob_count; ++i) {
        const double cx = ud(rng) * out.width, cy = ud(rng) * out.height;
        const double sigma =
            recipe.blob_sigma_min +
            ud(rng) * (recipe.blob_sigma_max - recipe.blob_sigma_min);
        const double amp = (ud(rng) < 0.5 ? -1.0 : 1.0) * (0.25 + 0.35 * ud(rng));
        const int r = static_cast<int>(std::ceil(3.0 * sigma));
        for (int y = std::max(0, static_cast<int>(cy) - r);
             y <= std::min(out.height - 1, static_cast<int>(cy) + r); ++y) {
            for (int x = std::max(0, static_cast<int>(cx) - r);
                 x <= std::min(out.width - 1, static_cast<int>(cx) + r); ++x) {
                const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                out.at(y, x) += amp * std::exp(-0.5 * d2 / (sigma * sigma));
            }
        }
    }

    // 5. convex occlusion patches (ellipses) until the target pixel
    //    fraction is covered
    if (recipe.occlusion_fraction > 0.0) {
        const std::size_t total = out.size();
        const auto target =
            static_cast<std::size_t>(recipe.occlusion_fraction * total);
        std::vector<std::uint8_t> mask(total, 0);
        std::size_t covered = 0;
        const double occlusion_level = 0.83;
        int guard = 0;
        while (covered < target && ++guard < 10000) {
            const std::size_t remaining = target - covered;
            double rmax = 0.09 * std::min(out.width, out.height);
            // shrink the patch when close to the target so the final
            // fraction lands within ~1%
            rmax = std::min(rmax, std::sqrt(static_cast<double>(remaining) / M_PI) + 1.0);
            const double ra = std::max(1.5, rmax * (0.5 + 0.5 * ud(rng)));
            const double rb = std::max(1.5, rmax * (0.5 + 0.5 * ud(rng)));
            const double cx = ud(rng) * out.width, cy = ud(rng) * out.height;
            const double rot = ud(rng) * M_PI;
            const double cr = std::cos(rot), sr = std::sin(rot);
            const int ext = static_cast<int>(std::ceil(std::max(ra, rb)));
            for (int y = std::max(0, static_cast<int>(cy) - ext);
                 y <= std::min(out.height - 1, static_cast<int>(cy) + ext); ++y) {
                for (int x = std::max(0, static_cast<int>(cx) - ext);
                     x <= std::min(out.width - 1, static_cast<int>(cx) + ext); ++x) {
                    const double u = (x - cx) * cr + (y - cy) * sr;
                    const double v = -(x - cx) * sr + (y - cy) * cr;
                    if (u * u / (ra * ra) + v * v / (rb * rb) > 1.0) continue;
                    const std::size_t idx = static_cast<std::size_t>(y) * out.width + x;
                    if (!mask[idx]) {
                        mask[idx] = 1;
                        ++covered;
                        out.pixels[idx] = occlusion_level;
                        if (covered >= target) break;
                    }
                }
                if (covered >= target) break;
            }
        }
    }

    // 6. blur
    if (recipe.gaussian_sigma > 0.0) {
        apply_gaussian_blur(out, recipe.gaussian_sigma);
    }

    // 7. clamp
    for (double& p : out.pixels) p = std::clamp(p, 0.0, 1.0);
    return out;
}

GrayImage synthesize_master(std::uint64_t seed, int width, int height) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ud(0.0, 1.0);

    const double period = 8.0 + 2.0 * ud(rng);  // ridge period in px
    const double base_freq = 2.0 * M_PI / period;
    const double bend = (0.10 + 0.10 * ud(rng)) * height;
    const double phase0 = ud(rng) * 2.0 * M_PI;

    // spiral singularities create ridge endings / bifurcations
    const int n_minutiae = 10 + static_cast<int>(ud(rng) * 6);
    std::vector<double> mx(n_minutiae), my(n_minutiae), ms(n_minutiae);
    for (int i = 0; i < n_minutiae; ++i) {
        mx[i] = (0.2 + 0.6 * ud(rng)) * width;
        my[i] = (0.2 + 0.6 * ud(rng)) * height;
        ms[i] = ud(rng) < 0.5 ? 1.0 : -1.0;
    }

    GrayImage img(width, height, 0.88);
    const double cx = width / 2.0, cy = height / 2.0;
    const double ax = 0.46 * width, ay = 0.47 * height;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double e = (x - cx) * (x - cx) / (ax * ax) +
                             (y - cy) * (y - cy) / (ay * ay);
            if (e > 1.0) continue;
            double phase = base_freq * (y + bend * std::sin(M_PI * x / width)) + phase0;
            for (int i = 0; i < n_minutiae; ++i) {
                phase += ms[i] * std::atan2(y - my[i], x - mx[i]);
            }
            // ridges dark, valleys light; fade to background near the rim
            double v = 0.5 - 0.4 * std::cos(phase);
            const double fade = std::clamp((1.0 - e) * 6.0, 0.0, 1.0);
            img.at(y, x) = fade * v + (1.0 - fade) * 0.88;
        }
    }
    return img;
}

CorpusManifest build_corpus(const std::vector<GrayImage>& masters,
                            const std::vector<NoiseRecipe>& recipes,
                            const std::string& out_dir) {
    if (masters.empty()) {
        throw ImageError("build_corpus requires at least one master image");
    }
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (!fs::is_directory(out_dir)) {
        throw ImageError("cannot create corpus directory: " + out_dir);
    }

    CorpusManifest manifest;
    GaborBankConfig gcfg;
    for (std::size_t si = 0; si < masters.size(); ++si) {
        const GrayImage& master = masters[si];
        const auto orient = estimate_orientation(master, 16);
        const auto freq = estimate_frequency(master, orient);
        const GrayImage gt = gabor_enhance(master, orient, freq, gcfg);

        std::ostringstream gt_name;
        gt_name << out_dir << "/subject_" << si << "_gt.pgm";
        save_image(gt, gt_name.str());

        for (std::size_t ri = 0; ri < recipes.size(); ++ri) {
            const GrayImage latent = degrade(gt, recipes[ri]);
            if (latent.width != gt.width || latent.height != gt.height) {
                throw ImageError("latent/ground-truth dimension mismatch");
            }
            std::ostringstream lat_name;
            lat_name << out_dir << "/subject_" << si << "_imp_" << ri
                     << "_latent.pgm";
            save_image(latent, lat_name.str());
            manifest.entries.push_back({lat_name.str(), gt_name.str(),
                                        static_cast<int>(si),
                                        static_cast<int>(ri),
                                        recipes[ri].seed});
        }
    }
    save_manifest(manifest, std::string(out_dir) + "/manifest.tsv");
    return manifest;
}

void save_manifest(const CorpusManifest& m, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw ImageError("cannot write manifest: " + path);
    for (const auto& e : m.entries) {
        os << e.latent_path << '\t' << e.gt_path << '\t' << e.subject_id << '\t'
           << e.impression_id << '\t' << e.seed << '\n';
    }
}

CorpusManifest load_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ImageError("cannot open manifest: " + path);
    CorpusManifest m;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        CorpusEntry e;
        std::string subject, impression, seed;
        if (!std::getline(ls, e.latent_path, '\t') ||
            !std::getline(ls, e.gt_path, '\t') ||
            !std::getline(ls, subject, '\t') ||
            !std::getline(ls, impression, '\t') || !std::getline(ls, seed)) {
            throw ImageError("malformed manifest line: " + line);
        }
        e.subject_id = std::stoi(subject);
        e.impression_id = std::stoi(impression);
        e.seed = std::stoull(seed);
        m.entries.push_back(std::move(e));
    }
    return m;
}

}  // namespace lfe
