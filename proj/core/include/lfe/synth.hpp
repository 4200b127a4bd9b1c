#pragma once

#include "lfe/image.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace lfe {

/// Structured degradation applied to a clean print to produce a synthetic
/// latent. Identical (recipe, input) pairs give bit-identical outputs.
struct NoiseRecipe {
    std::uint64_t seed = 0;
    int line_count = 6;
    int line_width_min = 1;
    int line_width_max = 3;
    int blob_count = 4;
    double blob_sigma_min = 4.0;
    double blob_sigma_max = 10.0;
    double occlusion_fraction = 0.12;
    double contrast_scale = 0.55;
    double background_amplitude = 0.18;
    double gaussian_sigma = 0.8;

    static NoiseRecipe none() {
        NoiseRecipe r;
        r.line_count = 0;
        r.blob_count = 0;
        r.occlusion_fraction = 0.0;
        r.contrast_scale = 1.0;
        r.background_amplitude = 0.0;
        r.gaussian_sigma = 0.0;
        return r;
    }
};

struct CorpusEntry {
    std::string latent_path;
    std::string gt_path;
    int subject_id = 0;
    int impression_id = 0;
    std::uint64_t seed = 0;
};

struct CorpusManifest {
    std::vector<CorpusEntry> entries;
};

/// Applies the recipe's degradations in fixed order: contrast compression,
/// low-frequency background, line strokes, Gaussian blobs, convex occlusion
/// patches, optional blur, clamp.
GrayImage degrade(const GrayImage& img, const NoiseRecipe& recipe);

/// Renders a synthetic master fingerprint: a curved ridge flow with spiral
/// phase singularities that produce natural minutiae, inside an elliptical
/// foreground. Ridges are dark.
GrayImage synthesize_master(std::uint64_t seed, int width, int height);

/// For each master: Gabor-enhance to a ground truth, then apply every recipe
/// to produce latents. Writes PGM files and the manifest under out_dir.
CorpusManifest build_corpus(const std::vector<GrayImage>& masters,
                            const std::vector<NoiseRecipe>& recipes,
                            const std::string& out_dir);

/// Tab-separated manifest: latent_path, gt_path, subject_id, impression_id,
/// seed per line.
void save_manifest(const CorpusManifest& m, const std::string& path);
CorpusManifest load_manifest(const std::string& path);

}  // namespace lfe
