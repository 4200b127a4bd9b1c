#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lfe/minutiae.hpp"
#include "support/test_support.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

using namespace lfe;
namespace fs = std::filesystem;

namespace {
const double kPi = std::numbers::pi;
}

TEST_CASE("crossing number matches enumeration of all 256 ring patterns") {
    const int dy[8] = {-1, -1, 0, 1, 1, 1, 0, -1};
    const int dx[8] = {0, 1, 1, 1, 0, -1, -1, -1};
    for (int pattern = 0; pattern < 256; ++pattern) {
        GrayImage img(5, 5, 0.0);
        img.at(2, 2) = 1.0;
        for (int i = 0; i < 8; ++i) {
            if (pattern & (1 << i)) img.at(2 + dy[i], 2 + dx[i]) = 1.0;
        }
        // direct definition: transitions around the closed ring / 2
        int transitions = 0;
        for (int i = 0; i < 8; ++i) {
            const int a = (pattern >> i) & 1;
            const int b = (pattern >> ((i + 1) % 8)) & 1;
            transitions += std::abs(a - b);
        }
        CHECK(crossing_number(img, 2, 2) == transitions / 2);
    }
}

TEST_CASE("straight segment yields exactly two opposing endings") {
    GrayImage img(40, 40, 1.0);
    for (int x = 10; x < 30; ++x) img.at(20, x) = 0.0;  // dark 1-px ridge
    auto found = extract_minutiae(img);
    REQUIRE(found.size() == 2);
    CHECK(found[0].kind == MinutiaKind::ending);
    CHECK(found[1].kind == MinutiaKind::ending);
    // sorted by y then x: left end first, pointing right (dir 0); right end
    // points back along the ridge (dir pi)
    CHECK(angle_diff(found[0].direction, 0.0) < 0.2);
    CHECK(angle_diff(found[1].direction, kPi) < 0.2);
    CHECK(std::fabs(found[0].y - 20.0) <= 1.0);
    CHECK(std::fabs(found[1].y - 20.0) <= 1.0);
}

TEST_CASE("perfect Y produces one bifurcation and three endings") {
    GrayImage img(48, 48, 1.0);
    for (int x = 12; x <= 24; ++x) img.at(24, x) = 0.0;      // trunk
    for (int s = 1; s <= 10; ++s) img.at(24 - s, 24 + s) = 0.0;  // upper arm
    for (int s = 1; s <= 10; ++s) img.at(24 + s, 24 + s) = 0.0;  // lower arm
    auto found = extract_minutiae(img);
    int endings = 0, bifurcations = 0;
    for (const auto& m : found) {
        if (m.kind == MinutiaKind::ending) ++endings;
        if (m.kind == MinutiaKind::bifurcation) ++bifurcations;
    }
    CHECK(endings == 3);
    CHECK(bifurcations == 1);
}

TEST_CASE("planted print: at least 11 of 12 recovered accurately") {
    auto planted = testsupport::make_planted_print();
    auto found = extract_minutiae(planted.image);
    int recovered = 0;
    for (const auto& t : planted.truth) {
        for (const auto& m : found) {
            if (m.kind != t.kind) continue;
            if (std::hypot(m.x - t.x, m.y - t.y) > 8.0) continue;
            if (angle_diff(m.direction, t.direction) > 0.3) continue;
            ++recovered;
            break;
        }
    }
    CHECK(recovered >= 11);
}

TEST_CASE("extraction is deterministic with stable ordering") {
    auto planted = testsupport::make_planted_print();
    auto a = extract_minutiae(planted.image);
    auto b = extract_minutiae(planted.image);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].x == b[i].x);
        CHECK(a[i].y == b[i].y);
        CHECK(a[i].direction == b[i].direction);
        CHECK((a[i].kind == b[i].kind));
    }
    for (std::size_t i = 1; i < a.size(); ++i) {
        CHECK((a[i - 1].y < a[i].y ||
               (a[i - 1].y == a[i].y && a[i - 1].x <= a[i].x)));
    }
}

TEST_CASE("match boundary cases") {
    std::vector<Minutia> gt{{20, 20, 0.0, MinutiaKind::ending},
                            {40, 40, 1.0, MinutiaKind::bifurcation}};
    MatchReport perfect = match_minutiae(gt, gt, 12.0, kPi / 6.0);
    CHECK(perfect.genuine_recovered == 2);
    CHECK(perfect.fake_introduced == 0);

    MatchReport none = match_minutiae(gt, {}, 12.0, kPi / 6.0);
    CHECK(none.genuine_recovered == 0);
    CHECK(none.fake_introduced == 0);

    MatchReport all_fake = match_minutiae({}, gt, 12.0, kPi / 6.0);
    CHECK(all_fake.genuine_recovered == 0);
    CHECK(all_fake.fake_introduced == 2);
}

TEST_CASE("kind and angle gates are enforced") {
    std::vector<Minutia> gt{{20, 20, 0.0, MinutiaKind::ending}};
    std::vector<Minutia> wrong_kind{{20, 20, 0.0, MinutiaKind::bifurcation}};
    CHECK(match_minutiae(gt, wrong_kind, 12.0, kPi / 6.0).genuine_recovered == 0);
    std::vector<Minutia> wrong_angle{{20, 20, kPi, MinutiaKind::ending}};
    CHECK(match_minutiae(gt, wrong_angle, 12.0, kPi / 6.0).genuine_recovered == 0);
    // angle comparison wraps modulo 2*pi
    std::vector<Minutia> wrapped{{20, 20, 2.0 * kPi - 0.1, MinutiaKind::ending}};
    CHECK(match_minutiae(gt, wrapped, 12.0, kPi / 6.0).genuine_recovered == 1);
}

TEST_CASE("greedy pairing equals exhaustive assignment on clean instances") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> pos(20.0, 200.0);
    std::uniform_real_distribution<double> ang(0.0, 2.0 * kPi);
    for (int trial = 0; trial < 30; ++trial) {
        // well-separated gt so pairings are unambiguous
        std::vector<Minutia> gt;
        for (int i = 0; i < 6; ++i) {
            Minutia m;
            bool ok = false;
            while (!ok) {
                m = {pos(rng), pos(rng), ang(rng),
                     (rng() % 2) ? MinutiaKind::ending
                                 : MinutiaKind::bifurcation};
                ok = true;
                for (const auto& g : gt) {
                    if (std::hypot(g.x - m.x, g.y - m.y) < 40.0) ok = false;
                }
            }
            gt.push_back(m);
        }
        std::vector<Minutia> extracted;
        std::uniform_real_distribution<double> jitter(-4.0, 4.0);
        for (std::size_t i = 0; i < gt.size(); ++i) {
            if (i % 3 == trial % 3) continue;  // dropouts
            Minutia e = gt[i];
            e.x += jitter(rng);
            e.y += jitter(rng);
            e.direction += jitter(rng) * 0.05;
            extracted.push_back(e);
        }
        extracted.push_back({pos(rng) + 300.0, pos(rng), 0.0,
                             MinutiaKind::ending});  // decoy far away

        MatchReport rep = match_minutiae(gt, extracted, 12.0, kPi / 6.0);
        const int optimal =
            testsupport::assignment_oracle(gt, extracted, 12.0, kPi / 6.0);
        CHECK(rep.genuine_recovered == optimal);
        CHECK(rep.genuine_recovered + rep.fake_introduced ==
              static_cast<int>(extracted.size()));
    }
}

TEST_CASE("greedy stays within one pair of the optimum on dense instances") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> pos(30.0, 90.0);
    std::uniform_real_distribution<double> ang(-0.3, 0.3);
    for (int trial = 0; trial < 40; ++trial) {
        std::vector<Minutia> gt, extracted;
        for (int i = 0; i < 7; ++i) {
            gt.push_back({pos(rng), pos(rng), ang(rng), MinutiaKind::ending});
        }
        for (int i = 0; i < 8; ++i) {
            extracted.push_back(
                {pos(rng), pos(rng), ang(rng), MinutiaKind::ending});
        }
        MatchReport rep = match_minutiae(gt, extracted, 12.0, kPi / 6.0);
        const int optimal =
            testsupport::assignment_oracle(gt, extracted, 12.0, kPi / 6.0);
        CHECK(rep.genuine_recovered <= optimal);
        CHECK(rep.genuine_recovered >= optimal - 1);
    }
}

TEST_CASE("matching is invariant under a global translation") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> pos(20.0, 100.0);
    std::vector<Minutia> gt, extracted;
    for (int i = 0; i < 10; ++i) {
        Minutia m{pos(rng), pos(rng), 0.5, MinutiaKind::ending};
        gt.push_back(m);
        if (i % 2 == 0) {
            m.x += 3.0;
            extracted.push_back(m);
        }
    }
    MatchReport base = match_minutiae(gt, extracted, 12.0, kPi / 6.0);
    for (auto& m : gt) {
        m.x += 57.0;
        m.y -= 21.0;
    }
    for (auto& m : extracted) {
        m.x += 57.0;
        m.y -= 21.0;
    }
    MatchReport moved = match_minutiae(gt, extracted, 12.0, kPi / 6.0);
    CHECK(base.genuine_recovered == moved.genuine_recovered);
    CHECK(base.fake_introduced == moved.fake_introduced);
}

TEST_CASE("rendering: promotion, locality, and stable golden hash") {
    GrayImage img(32, 32, 0.5);
    RgbImage plain = render_minutiae(img, {});
    REQUIRE(plain.width == 32);
    for (int y = 0; y < 32; ++y) {
        for (int x = 0; x < 32; ++x) {
            const auto* px = plain.px(y, x);
            CHECK(px[0] == px[1]);
            CHECK(px[1] == px[2]);
        }
    }

    RgbImage one = render_minutiae(img, {{10, 10, 0.0, MinutiaKind::ending}});
    for (int y = 0; y < 32; ++y) {
        for (int x = 0; x < 32; ++x) {
            const auto* px = one.px(y, x);
            const bool reddish = px[0] > px[1] && px[0] > px[2];
            if (reddish) {
                CHECK(std::hypot(x - 10.0, y - 10.0) <= 6.0);
            }
        }
    }

    auto planted = testsupport::make_planted_print();
    auto found = extract_minutiae(planted.image);
    const std::string p1 = (fs::temp_directory_path() / "lfe_r1.ppm").string();
    const std::string p2 = (fs::temp_directory_path() / "lfe_r2.ppm").string();
    save_ppm(render_minutiae(planted.image, found), p1);
    save_ppm(render_minutiae(planted.image, found), p2);
    CHECK(testsupport::fnv1a(testsupport::file_bytes(p1)) ==
          testsupport::fnv1a(testsupport::file_bytes(p2)));
    fs::remove(p1);
    fs::remove(p2);
}

TEST_CASE("template files round-trip") {
    std::vector<Minutia> set{{10.5, 20.25, 1.25, MinutiaKind::ending},
                             {30.0, 40.0, 4.5, MinutiaKind::bifurcation}};
    const std::string path =
        (fs::temp_directory_path() / "lfe_template.tsv").string();
    save_template(set, path);
    const std::string bytes = testsupport::file_bytes(path);
    CHECK(bytes.rfind("#LFPM v1", 0) == 0);
    auto loaded = load_template(path);
    REQUIRE(loaded.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(loaded[i].x == set[i].x);
        CHECK(loaded[i].y == set[i].y);
        CHECK(loaded[i].direction == set[i].direction);
        CHECK((loaded[i].kind == set[i].kind));
    }
    fs::remove(path);
}

TEST_CASE("match report mirrors the published table layout") {
    MatchReport rep;
    rep.genuine_recovered = 4;
    rep.fake_introduced = 2;
    rep.pairs.push_back({0, 1, 2.5, 0.1});
    const std::string path =
        (fs::temp_directory_path() / "lfe_match_report.tsv").string();
    save_match_report(rep, path);
    const std::string bytes = testsupport::file_bytes(path);
    CHECK(bytes.find("Genuine minutiae recovered\t4") != std::string::npos);
    CHECK(bytes.find("Fake minutiae introduced\t2") != std::string::npos);
    fs::remove(path);
}
