#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lfe/gabor.hpp"
#include "lfe/synth.hpp"
#include "support/test_support.hpp"

#include <cmath>
#include <filesystem>

using namespace lfe;
namespace fs = std::filesystem;

namespace {

double psnr(const GrayImage& a, const GrayImage& b) {
    double mse = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.pixels[i] - b.pixels[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.size());
    return 10.0 * std::log10(1.0 / mse);
}

}  // namespace

TEST_CASE("no-op recipe leaves the image bit-identical") {
    GrayImage master = synthesize_master(3, 64, 64);
    GrayImage out = degrade(master, NoiseRecipe::none());
    REQUIRE(out.size() == master.size());
    for (std::size_t i = 0; i < master.size(); ++i) {
        CHECK(out.pixels[i] == master.pixels[i]);
    }
}

TEST_CASE("occlusion fraction is honoured within one percent") {
    GrayImage master = synthesize_master(4, 128, 128);
    NoiseRecipe recipe = NoiseRecipe::none();
    recipe.seed = 9;
    recipe.occlusion_fraction = 0.25;
    GrayImage out = degrade(master, recipe);
    std::size_t differing = 0;
    for (std::size_t i = 0; i < master.size(); ++i) {
        if (out.pixels[i] != master.pixels[i]) ++differing;
    }
    const double frac = static_cast<double>(differing) /
                        static_cast<double>(master.size());
    CHECK(frac >= 0.24);
    CHECK(frac <= 0.26);
}

TEST_CASE("stronger background fields strictly lower PSNR") {
    GrayImage master = synthesize_master(5, 96, 96);
    double prev = 1e300;
    for (double amp : {0.1, 0.2, 0.3}) {
        NoiseRecipe recipe = NoiseRecipe::none();
        recipe.seed = 77;
        recipe.background_amplitude = amp;
        const double p = psnr(degrade(master, recipe), master);
        CHECK(p < prev);
        prev = p;
    }
}

TEST_CASE("degradation is deterministic in (recipe, input)") {
    GrayImage master = synthesize_master(6, 96, 96);
    NoiseRecipe recipe;  // defaults with every component active
    recipe.seed = 1234;
    GrayImage a = degrade(master, recipe);
    GrayImage b = degrade(master, recipe);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.pixels[i] == b.pixels[i]);
    }
}

TEST_CASE("noise obscures but does not move ridges") {
    // geometry-preserving components only (no strokes/blobs/occlusion), so
    // the whole frame is comparable
    GrayImage master = synthesize_master(8, 96, 96);
    const auto orient = estimate_orientation(master, 16);
    const auto freq_map = estimate_frequency(master, orient);
    GrayImage gt = gabor_enhance(master, orient, freq_map, GaborBankConfig{});

    NoiseRecipe recipe = NoiseRecipe::none();
    recipe.seed = 21;
    recipe.contrast_scale = 0.7;
    recipe.background_amplitude = 0.1;
    recipe.gaussian_sigma = 0.6;
    GrayImage latent = degrade(gt, recipe);

    GrayImage sk_gt = thin(binarize(gt));
    GrayImage sk_lat = thin(binarize(latent));
    auto dilated_hit = [](const GrayImage& img, int y, int x) {
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx)
                if (img.in_bounds(y + dy, x + dx) &&
                    img.at(y + dy, x + dx) > 0.5)
                    return true;
        return false;
    };
    std::size_t inter = 0, uni = 0;
    for (int y = 8; y < 88; ++y) {
        for (int x = 8; x < 88; ++x) {
            const bool a = sk_gt.at(y, x) > 0.5;
            const bool b = sk_lat.at(y, x) > 0.5;
            if (a || b) ++uni;
            if ((a && dilated_hit(sk_lat, y, x)) ||
                (b && dilated_hit(sk_gt, y, x))) {
                if (a || b) ++inter;
            }
        }
    }
    REQUIRE(uni > 0);
    CHECK(static_cast<double>(inter) / static_cast<double>(uni) >= 0.7);
}

TEST_CASE("corpus building counts, files, and byte determinism") {
    const std::string dir =
        (fs::temp_directory_path() / "lfe_corpus_test").string();
    fs::remove_all(dir);
    std::vector<GrayImage> masters{synthesize_master(11, 64, 64),
                                   synthesize_master(12, 64, 64)};
    std::vector<NoiseRecipe> recipes(3);
    for (std::size_t r = 0; r < recipes.size(); ++r) {
        recipes[r].seed = 100 + r;
    }
    CorpusManifest m = build_corpus(masters, recipes, dir);
    REQUIRE(m.entries.size() == 6);
    for (const auto& e : m.entries) {
        CHECK(fs::exists(e.latent_path));
        CHECK(fs::exists(e.gt_path));
    }

    // round-trip through the manifest file
    CorpusManifest loaded = load_manifest(dir + "/manifest.tsv");
    REQUIRE(loaded.entries.size() == m.entries.size());
    for (std::size_t i = 0; i < m.entries.size(); ++i) {
        CHECK(loaded.entries[i].latent_path == m.entries[i].latent_path);
        CHECK(loaded.entries[i].subject_id == m.entries[i].subject_id);
        CHECK(loaded.entries[i].seed == m.entries[i].seed);
    }

    std::vector<std::string> first_bytes;
    for (const auto& e : m.entries) {
        first_bytes.push_back(testsupport::file_bytes(e.latent_path));
    }
    build_corpus(masters, recipes, dir);  // rebuild in place
    for (std::size_t i = 0; i < m.entries.size(); ++i) {
        CHECK(testsupport::file_bytes(m.entries[i].latent_path) ==
              first_bytes[i]);
    }
    fs::remove_all(dir);
}

TEST_CASE("empty master list is rejected") {
    CHECK_THROWS_AS(build_corpus({}, {NoiseRecipe{}}, "/tmp/lfe_never"),
                    ImageError);
}

TEST_CASE("masters are reproducible and in range") {
    GrayImage a = synthesize_master(123, 96, 96);
    GrayImage b = synthesize_master(123, 96, 96);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.pixels[i] == b.pixels[i]);
        CHECK(a.pixels[i] >= 0.0);
        CHECK(a.pixels[i] <= 1.0);
    }
    GrayImage c = synthesize_master(124, 96, 96);
    bool differs = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a.pixels[i] != c.pixels[i]) {
            differs = true;
            break;
        }
    }
    CHECK(differs);
}
