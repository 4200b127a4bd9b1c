#include "lfe/minutiae.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace lfe {

double angle_diff(double a, double b) {
    double d = std::fmod(std::fabs(a - b), 2.0 * M_PI);
    return d > M_PI ? 2.0 * M_PI - d : d;
}

namespace {
const int kDy[8] = {-1, -1, 0, 1, 1, 1, 0, -1};
const int kDx[8] = {0, 1, 1, 1, 0, -1, -1, -1};
}  // namespace

int crossing_number(const GrayImage& skel, int y, int x) {
    int cn = 0;
    for (int i = 0; i < 8; ++i) {
        const int y1 = y + kDy[i], x1 = x + kDx[i];
        const int y2 = y + kDy[(i + 1) % 8], x2 = x + kDx[(i + 1) % 8];
        const int v1 = skel.in_bounds(y1, x1) && skel.at(y1, x1) > 0.5 ? 1 : 0;
        const int v2 = skel.in_bounds(y2, x2) && skel.at(y2, x2) > 0.5 ? 1 : 0;
        cn += std::abs(v1 - v2);
    }
    return cn / 2;
}

std::vector<Minutia> extract_minutiae(const GrayImage& img,
                                      const ExtractionConfig& cfg) {
    const GrayImage skel = thin(binarize(img));
    const int W = skel.width, H = skel.height;

    std::vector<Minutia> out;
    for (int y = cfg.border_px; y < H - cfg.border_px; ++y) {
        for (int x = cfg.border_px; x < W - cfg.border_px; ++x) {
            if (skel.at(y, x) < 0.5) continue;
            const int cn = crossing_number(skel, y, x);
            if (cn != 1 && cn != 3) continue;

            Minutia m;
            m.kind = cn == 1 ? MinutiaKind::ending : MinutiaKind::bifurcation;

            // sub-pixel position: centroid of the 3x3 skeleton neighbourhood
            double sx = 0.0, sy = 0.0;
            int count = 0;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    if (skel.in_bounds(y + dy, x + dx) &&
                        skel.at(y + dy, x + dx) > 0.5) {
                        sx += x + dx;
                        sy += y + dy;
                        ++count;
                    }
                }
            }
            m.x = sx / count;
            m.y = sy / count;

            // Direction from the skeleton mass within trace_px of the
            // feature: an ending's ridge lies entirely on one side, so the
            // centroid points along the ridge; a bifurcation's two arms
            // outweigh its single trunk, so the centroid points into the
            // fork and the trunk is the opposite way.
            double vx = 0.0, vy = 0.0;
            const int r = cfg.trace_px;
            for (int dy = -r; dy <= r; ++dy) {
                for (int dx = -r; dx <= r; ++dx) {
                    if (dx == 0 && dy == 0) continue;
                    if (dx * dx + dy * dy > r * r) continue;
                    if (skel.in_bounds(y + dy, x + dx) &&
                        skel.at(y + dy, x + dx) > 0.5) {
                        vx += dx;
                        vy += dy;
                    }
                }
            }
            if (vx == 0.0 && vy == 0.0) continue;  // isolated dot
            double dir = std::atan2(vy, vx);
            if (m.kind == MinutiaKind::bifurcation) dir += M_PI;
            if (dir < 0.0) dir += 2.0 * M_PI;
            m.direction = dir;
            out.push_back(m);
        }
    }

    // prune close opposing pairs (broken-ridge artefacts)
    std::vector<bool> removed(out.size(), false);
    for (std::size_t i = 0; i < out.size(); ++i) {
        for (std::size_t j = i + 1; j < out.size(); ++j) {
            if (removed[i] || removed[j]) continue;
            const double dx = out[i].x - out[j].x, dy = out[i].y - out[j].y;
            if (dx * dx + dy * dy > cfg.prune_dist_px * cfg.prune_dist_px) {
                continue;
            }
            if (angle_diff(out[i].direction, out[j].direction) >
                M_PI - M_PI / 4.0) {
                removed[i] = removed[j] = true;
            }
        }
    }
    std::vector<Minutia> pruned;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!removed[i]) pruned.push_back(out[i]);
    }
    std::sort(pruned.begin(), pruned.end(), [](const Minutia& a, const Minutia& b) {
        return a.y != b.y ? a.y < b.y : a.x < b.x;
    });
    return pruned;
}

MatchReport match_minutiae(const std::vector<Minutia>& gt,
                           const std::vector<Minutia>& extracted,
                           double tol_px, double tol_rad) {
    if (tol_px <= 0.0 || tol_rad <= 0.0 || tol_rad > M_PI) {
        throw ImageError("match_minutiae tolerances out of range");
    }
    struct Candidate {
        double dist;
        int gi, ei;
        double adiff;
    };
    std::vector<Candidate> cands;
    for (std::size_t g = 0; g < gt.size(); ++g) {
        for (std::size_t e = 0; e < extracted.size(); ++e) {
            if (gt[g].kind != extracted[e].kind) continue;
            const double dx = gt[g].x - extracted[e].x;
            const double dy = gt[g].y - extracted[e].y;
            const double d = std::sqrt(dx * dx + dy * dy);
            if (d > tol_px) continue;
            const double ad = angle_diff(gt[g].direction, extracted[e].direction);
            if (ad > tol_rad) continue;
            cands.push_back({d, static_cast<int>(g), static_cast<int>(e), ad});
        }
    }
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
        if (a.dist != b.dist) return a.dist < b.dist;
        if (a.gi != b.gi) return a.gi < b.gi;
        return a.ei < b.ei;
    });
    std::vector<bool> gt_used(gt.size(), false), ex_used(extracted.size(), false);
    MatchReport report;
    for (const auto& c : cands) {
        if (gt_used[c.gi] || ex_used[c.ei]) continue;
        gt_used[c.gi] = true;
        ex_used[c.ei] = true;
        report.pairs.push_back({c.gi, c.ei, c.dist, c.adiff});
    }
    report.genuine_recovered = static_cast<int>(report.pairs.size());
    report.fake_introduced =
        static_cast<int>(extracted.size()) - report.genuine_recovered;
    return report;
}

namespace {

void draw_dot(RgbImage& img, int cy, int cx, int radius, std::uint8_t r,
              std::uint8_t g, std::uint8_t b) {
    for (int y = std::max(0, cy - radius);
         y <= std::min(img.height - 1, cy + radius); ++y) {
        for (int x = std::max(0, cx - radius);
             x <= std::min(img.width - 1, cx + radius); ++x) {
            const int d2 = (y - cy) * (y - cy) + (x - cx) * (x - cx);
            // circle outline, 1px thick
            if (d2 <= radius * radius && d2 >= (radius - 1) * (radius - 1)) {
                auto* p = img.px(y, x);
                p[0] = r;
                p[1] = g;
                p[2] = b;
            }
        }
    }
}

}  // namespace

RgbImage render_minutiae(const GrayImage& img,
                         const std::vector<Minutia>& minutiae) {
    RgbImage out(img.width, img.height);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const auto v = static_cast<std::uint8_t>(
                std::lround(std::clamp(img.at(y, x), 0.0, 1.0) * 255.0));
            auto* p = out.px(y, x);
            p[0] = p[1] = p[2] = v;
        }
    }
    for (const auto& m : minutiae) {
        const bool ending = m.kind == MinutiaKind::ending;
        const std::uint8_t r = ending ? 255 : 0;
        const std::uint8_t b = ending ? 0 : 255;
        const int cx = static_cast<int>(std::lround(m.x));
        const int cy = static_cast<int>(std::lround(m.y));
        draw_dot(out, cy, cx, 4, r, 0, b);
        // direction tick
        for (int t = 0; t <= 6; ++t) {
            const int y = cy + static_cast<int>(std::lround(t * std::sin(m.direction)));
            const int x = cx + static_cast<int>(std::lround(t * std::cos(m.direction)));
            if (y >= 0 && y < out.height && x >= 0 && x < out.width) {
                auto* p = out.px(y, x);
                p[0] = r;
                p[1] = 0;
                p[2] = b;
            }
        }
    }
    return out;
}

void save_template(const std::vector<Minutia>& minutiae,
                   const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw ImageError("cannot write template: " + path);
    os << "#LFPM v1\n";
    os.precision(17);
    for (const auto& m : minutiae) {
        os << m.x << '\t' << m.y << '\t' << m.direction << '\t'
           << (m.kind == MinutiaKind::ending ? "ending" : "bifurcation")
           << '\n';
    }
}

std::vector<Minutia> load_template(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ImageError("cannot open template: " + path);
    std::string line;
    if (!std::getline(is, line) || line != "#LFPM v1") {
        throw ImageError("bad template header in " + path);
    }
    std::vector<Minutia> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        Minutia m;
        std::string kind;
        if (!(ls >> m.x >> m.y >> m.direction >> kind)) {
            throw ImageError("malformed template line: " + line);
        }
        if (kind == "ending") {
            m.kind = MinutiaKind::ending;
        } else if (kind == "bifurcation") {
            m.kind = MinutiaKind::bifurcation;
        } else {
            throw ImageError("unknown minutia kind: " + kind);
        }
        out.push_back(m);
    }
    return out;
}

void save_match_report(const MatchReport& report, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw ImageError("cannot write match report: " + path);
    os << "Genuine minutiae recovered\t" << report.genuine_recovered << '\n';
    os << "Fake minutiae introduced\t" << report.fake_introduced << '\n';
    os << "gt_index\textracted_index\tdistance_px\tangle_diff_rad\n";
    os.precision(17);
    for (const auto& p : report.pairs) {
        os << p.gt_index << '\t' << p.extracted_index << '\t' << p.distance_px
           << '\t' << p.angle_diff_rad << '\n';
    }
}

}  // namespace lfe
