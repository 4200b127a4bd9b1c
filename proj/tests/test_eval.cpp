#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lfe/eval.hpp"
#include "support/test_support.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

using namespace lfe;
namespace fs = std::filesystem;

namespace {

const double kPi = std::numbers::pi;

std::vector<Minutia> random_template(std::mt19937_64& rng, int n,
                                     double lo = 20.0, double hi = 170.0) {
    std::uniform_real_distribution<double> pos(lo, hi);
    std::uniform_real_distribution<double> ang(0.0, 2.0 * kPi);
    std::vector<Minutia> out;
    for (int i = 0; i < n; ++i) {
        out.push_back({pos(rng), pos(rng), ang(rng),
                       (rng() % 2) ? MinutiaKind::ending
                                   : MinutiaKind::bifurcation});
    }
    return out;
}

std::vector<Minutia> rotate_translate(const std::vector<Minutia>& in,
                                      double theta, double tx, double ty) {
    const double c = std::cos(theta), s = std::sin(theta);
    std::vector<Minutia> out;
    for (const auto& m : in) {
        Minutia r = m;
        r.x = c * m.x - s * m.y + tx;
        r.y = s * m.x + c * m.y + ty;
        r.direction = std::fmod(m.direction + theta + 2.0 * kPi, 2.0 * kPi);
        out.push_back(r);
    }
    return out;
}

}  // namespace

TEST_CASE("self similarity dominates unrelated templates") {
    std::mt19937_64 rng(1);
    auto a = random_template(rng, 12);
    auto b = random_template(rng, 12);
    const double self = similarity(a, a);
    CHECK(self > 0.0);
    CHECK(similarity(a, b) < self);
}

TEST_CASE("empty sets score zero") {
    std::mt19937_64 rng(2);
    auto a = random_template(rng, 8);
    CHECK(similarity(a, {}) == 0.0);
    CHECK(similarity({}, a) == 0.0);
    CHECK(similarity({}, {}) == 0.0);
}

TEST_CASE("similarity recovers a rotated, translated, thinned copy") {
    std::mt19937_64 rng(3);
    auto a = random_template(rng, 15);
    auto moved = rotate_translate(a, 20.0 * kPi / 180.0, 15.0, -7.0);
    moved.resize(12);  // 20% dropout
    const double self = similarity(a, a);
    const double recovered = similarity(a, moved);
    CHECK(recovered >= 0.7 * self * 12.0 / 15.0);
}

TEST_CASE("similarity is exactly symmetric") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 5; ++trial) {
        auto a = random_template(rng, 8);
        auto b = random_template(rng, 10);
        CHECK(similarity(a, b) == similarity(b, a));
    }
}

TEST_CASE("centroid cap keeps the nearest minutiae and stays bounded") {
    std::mt19937_64 rng(5);
    auto a = random_template(rng, 20, 80.0, 110.0);  // tight cluster
    // distant outliers that the cap must discard
    auto with_outliers = a;
    with_outliers.push_back({400.0, 400.0, 0.0, MinutiaKind::ending});
    with_outliers.push_back({-200.0, 380.0, 1.0, MinutiaKind::bifurcation});

    SimilarityConfig capped;
    capped.max_minutiae = 20;
    // the capped comparison sees exactly the original cluster
    CHECK(similarity(with_outliers, a, capped) ==
          similarity(a, a, capped));
}

TEST_CASE("score matrix shapes, duplicates, and mate lookup") {
    std::mt19937_64 rng(6);
    auto t0 = random_template(rng, 8);
    auto t1 = random_template(rng, 8);

    std::vector<std::pair<std::string, std::vector<Minutia>>> probes{
        {"p0", t0}};
    std::vector<std::pair<std::string, std::vector<Minutia>>> gallery{
        {"g0", t1}, {"g1", t1}, {"g2", t0}};
    std::map<std::string, std::string> mates{{"p0", "g2"}};
    ScoreMatrix m = build_score_matrix(probes, gallery, mates);
    REQUIRE(m.probes.size() == 1);
    REQUIRE(m.gallery.size() == 3);
    CHECK(m.mate[0] == 2);
    // duplicated gallery entries score identically
    CHECK(m.score_at(0, 0) == m.score_at(0, 1));

    std::map<std::string, std::string> missing{{"p0", "nope"}};
    CHECK_THROWS_AS(build_score_matrix(probes, gallery, missing), ImageError);
}

TEST_CASE("cmc on a 1x1 matrix is trivially perfect") {
    ScoreMatrix m;
    m.probes = {"p"};
    m.gallery = {"g"};
    m.scores = {0.37};
    m.mate = {0};
    CMCCurve c = cmc(m);
    REQUIRE(c.rates.size() == 1);
    CHECK(c.rates[0] == 1.0);
}

TEST_CASE("cmc matches an exhaustive oracle on random matrices") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> score(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const int np = 5, ng = 10;
        ScoreMatrix m;
        for (int p = 0; p < np; ++p) m.probes.push_back("p" + std::to_string(p));
        for (int g = 0; g < ng; ++g) m.gallery.push_back("g" + std::to_string(g));
        m.scores.resize(np * ng);
        for (auto& s : m.scores) s = score(rng);
        // inject ties sometimes
        if (trial % 3 == 0) {
            for (auto& s : m.scores) s = std::floor(s * 4.0) / 4.0;
        }
        for (int p = 0; p < np; ++p) {
            m.mate.push_back(static_cast<int>(rng() % ng));
        }
        CMCCurve c = cmc(m);
        std::vector<double> expect = testsupport::cmc_oracle(m);
        REQUIRE(c.rates.size() == expect.size());
        for (std::size_t k = 0; k < expect.size(); ++k) {
            CHECK(c.rates[k] == expect[k]);
        }
        // monotone non-decreasing and ends at 1
        for (std::size_t k = 1; k < c.rates.size(); ++k) {
            CHECK(c.rates[k] >= c.rates[k - 1]);
        }
        CHECK(c.rates.back() == 1.0);
    }
}

TEST_CASE("cmc is invariant under increasing score transforms") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> score(0.1, 1.0);
    ScoreMatrix m;
    for (int p = 0; p < 4; ++p) m.probes.push_back("p" + std::to_string(p));
    for (int g = 0; g < 6; ++g) m.gallery.push_back("g" + std::to_string(g));
    m.scores.resize(24);
    for (auto& s : m.scores) s = score(rng);
    m.mate = {2, 0, 5, 3};
    CMCCurve base = cmc(m);
    ScoreMatrix warped = m;
    for (auto& s : warped.scores) s = std::exp(3.0 * s);  // strictly increasing
    CMCCurve after = cmc(warped);
    for (std::size_t k = 0; k < base.rates.size(); ++k) {
        CHECK(base.rates[k] == after.rates[k]);
    }
}

TEST_CASE("rank-1 is perfect when every mate strictly leads its row") {
    ScoreMatrix m;
    m.probes = {"a", "b"};
    m.gallery = {"x", "y", "z"};
    m.scores = {0.9, 0.1, 0.2, 0.3, 0.8, 0.4};
    m.mate = {0, 1};
    CHECK(cmc(m).rates[0] == 1.0);
}

TEST_CASE("cmc plot round-trips through the data file") {
    CMCCurve c1{"raw", {0.25, 0.5, 1.0}};
    CMCCurve c2{"enhanced", {0.5, 0.75, 1.0}};
    const std::string base =
        (fs::temp_directory_path() / "lfe_cmc_test").string();
    emit_cmc_plot({c1, c2}, base);
    CHECK(fs::exists(base + ".tsv"));
    CHECK(fs::exists(base + ".svg"));
    auto loaded = load_cmc_data(base + ".tsv");
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].label == "raw");
    CHECK(loaded[1].label == "enhanced");
    REQUIRE(loaded[0].rates.size() == 3);
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(loaded[0].rates[k] == c1.rates[k]);
        CHECK(loaded[1].rates[k] == c2.rates[k]);
    }
    fs::remove(base + ".tsv");
    fs::remove(base + ".svg");
}

TEST_CASE("svg output is byte-deterministic") {
    CMCCurve c{"curve", {0.3, 0.6, 0.9, 1.0}};
    const std::string b1 = (fs::temp_directory_path() / "lfe_svg_a").string();
    const std::string b2 = (fs::temp_directory_path() / "lfe_svg_b").string();
    emit_cmc_plot({c}, b1);
    emit_cmc_plot({c}, b2);
    CHECK(testsupport::fnv1a(testsupport::file_bytes(b1 + ".svg")) ==
          testsupport::fnv1a(testsupport::file_bytes(b2 + ".svg")));
    for (const auto& b : {b1, b2}) {
        fs::remove(b + ".tsv");
        fs::remove(b + ".svg");
    }
}

TEST_CASE("score matrix serialization survives a reload by eye") {
    std::mt19937_64 rng(9);
    ScoreMatrix m;
    m.probes = {"p0"};
    m.gallery = {"g0", "g1"};
    m.scores = {1.25, 0.5};
    m.mate = {1};
    const std::string path =
        (fs::temp_directory_path() / "lfe_scores.tsv").string();
    save_score_matrix(m, path);
    const std::string bytes = testsupport::file_bytes(path);
    CHECK(bytes.find("p0") != std::string::npos);
    CHECK(bytes.find("g1") != std::string::npos);
    CHECK(bytes.find("1.25") != std::string::npos);
    fs::remove(path);
}

TEST_CASE("stored reference values match the published tables") {
    const auto& ann = reference_rank1_annotations();
    double proposed = -1.0, baseline = -1.0;
    for (const auto& a : ann) {
        if (a.label.find("proposed") != std::string::npos) {
            proposed = a.rank1_rate;
        }
        if (a.label.find("FingerGAN") != std::string::npos) {
            baseline = a.rank1_rate;
        }
    }
    CHECK(proposed == 0.48);
    CHECK(baseline == 0.35);

    const auto& counts = reference_minutiae_counts();
    bool found_enh = false, found_raw = false;
    for (const auto& c : counts) {
        if (c.genuine_recovered == 1982 && c.fake_introduced == 8361) {
            found_enh = true;
        }
        if (c.genuine_recovered == 1431 && c.fake_introduced == 11039) {
            found_raw = true;
        }
    }
    CHECK(found_enh);
    CHECK(found_raw);
}
