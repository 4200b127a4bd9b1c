#include "lfe/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace lfe {

namespace {

struct AlignedPair {
    double weight;
    int ai, bi;
};

// Best one-to-one weighted pairing of `a` transformed by (rot about pivot,
// then translation) against `b`.
double score_alignment(const std::vector<Minutia>& a,
                       const std::vector<Minutia>& b, double rot, double px,
                       double py, double tx, double ty,
                       const SimilarityConfig& cfg) {
    const double cr = std::cos(rot), sr = std::sin(rot);
    std::vector<AlignedPair> cands;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double rx = (a[i].x - px) * cr - (a[i].y - py) * sr + px + tx;
        const double ry = (a[i].x - px) * sr + (a[i].y - py) * cr + py + ty;
        double rdir = a[i].direction + rot;
        for (std::size_t j = 0; j < b.size(); ++j) {
            if (a[i].kind != b[j].kind) continue;
            const double dx = rx - b[j].x, dy = ry - b[j].y;
            const double d2 = dx * dx + dy * dy;
            if (d2 > cfg.tol_px * cfg.tol_px) continue;
            if (angle_diff(rdir, b[j].direction) > cfg.tol_rad) continue;
            const double d = std::sqrt(d2);
            cands.push_back({1.0 / (1.0 + d / cfg.pair_weight_px),
                             static_cast<int>(i), static_cast<int>(j)});
        }
    }
    std::sort(cands.begin(), cands.end(), [](const AlignedPair& x, const AlignedPair& y) {
        if (x.weight != y.weight) return x.weight > y.weight;
        if (x.ai != y.ai) return x.ai < y.ai;
        return x.bi < y.bi;
    });
    std::vector<bool> a_used(a.size(), false), b_used(b.size(), false);
    double score = 0.0;
    for (const auto& c : cands) {
        if (a_used[c.ai] || b_used[c.bi]) continue;
        a_used[c.ai] = true;
        b_used[c.bi] = true;
        score += c.weight;
    }
    return score;
}

double directed_similarity(const std::vector<Minutia>& a,
                           const std::vector<Minutia>& b,
                           const SimilarityConfig& cfg) {
    if (a.empty() || b.empty()) return 0.0;
    const double step = cfg.rotation_step_deg * M_PI / 180.0;
    double best = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < b.size(); ++j) {
            if (a[i].kind != b[j].kind) continue;
            // rotation implied by this pairing, snapped to the step grid
            double rot = b[j].direction - a[i].direction;
            rot = std::round(rot / step) * step;
            // pivot at a[i]; translation lands a[i] on b[j]
            const double tx = b[j].x - a[i].x;
            const double ty = b[j].y - a[i].y;
            best = std::max(best, score_alignment(a, b, rot, a[i].x, a[i].y,
                                                  tx, ty, cfg));
        }
    }
    return best;
}

// Keeps the cap translation-invariant: the retained subset depends only on
// relative geometry (distance to the set centroid).
std::vector<Minutia> cap_to_centroid(const std::vector<Minutia>& set, int cap) {
    if (cap <= 0 || static_cast<int>(set.size()) <= cap) return set;
    double cx = 0.0, cy = 0.0;
    for (const auto& m : set) {
        cx += m.x;
        cy += m.y;
    }
    cx /= static_cast<double>(set.size());
    cy /= static_cast<double>(set.size());
    std::vector<int> order(set.size());
    for (std::size_t i = 0; i < set.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(), [&](int i, int j) {
        const double di = (set[i].x - cx) * (set[i].x - cx) +
                          (set[i].y - cy) * (set[i].y - cy);
        const double dj = (set[j].x - cx) * (set[j].x - cx) +
                          (set[j].y - cy) * (set[j].y - cy);
        return di < dj;
    });
    order.resize(cap);
    std::sort(order.begin(), order.end());  // preserve y-then-x ordering
    std::vector<Minutia> out;
    for (int i : order) out.push_back(set[i]);
    return out;
}

}  // namespace

double similarity(const std::vector<Minutia>& a, const std::vector<Minutia>& b,
                  const SimilarityConfig& cfg) {
    const std::vector<Minutia> ca = cap_to_centroid(a, cfg.max_minutiae);
    const std::vector<Minutia> cb = cap_to_centroid(b, cfg.max_minutiae);
    // mirrored search keeps the score symmetric
    return std::max(directed_similarity(ca, cb, cfg),
                    directed_similarity(cb, ca, cfg));
}

ScoreMatrix build_score_matrix(
    const std::vector<std::pair<std::string, std::vector<Minutia>>>& probes,
    const std::vector<std::pair<std::string, std::vector<Minutia>>>& gallery,
    const std::map<std::string, std::string>& mate_map,
    const SimilarityConfig& cfg) {
    if (probes.empty() || gallery.empty()) {
        throw ImageError("score matrix needs non-empty probe and gallery sets");
    }
    ScoreMatrix m;
    for (const auto& p : probes) m.probes.push_back(p.first);
    for (const auto& g : gallery) m.gallery.push_back(g.first);
    m.mate.resize(probes.size(), -1);
    for (std::size_t p = 0; p < probes.size(); ++p) {
        auto it = mate_map.find(probes[p].first);
        if (it == mate_map.end()) {
            throw ImageError("probe " + probes[p].first + " has no mate entry");
        }
        for (std::size_t g = 0; g < gallery.size(); ++g) {
            if (gallery[g].first == it->second) {
                m.mate[p] = static_cast<int>(g);
                break;
            }
        }
        if (m.mate[p] < 0) {
            throw ImageError("mate " + it->second + " of probe " +
                             probes[p].first + " missing from gallery");
        }
    }
    m.scores.resize(probes.size() * gallery.size());
#ifdef _OPENMP
#pragma omp parallel for collapse(2) schedule(dynamic)
#endif
    for (std::size_t p = 0; p < probes.size(); ++p) {
        for (std::size_t g = 0; g < gallery.size(); ++g) {
            m.scores[p * gallery.size() + g] =
                similarity(probes[p].second, gallery[g].second, cfg);
        }
    }
    return m;
}

CMCCurve cmc(const ScoreMatrix& matrix, const std::string& label) {
    const std::size_t G = matrix.gallery.size();
    CMCCurve curve;
    curve.label = label;
    curve.rates.assign(G, 0.0);
    for (std::size_t p = 0; p < matrix.probes.size(); ++p) {
        const double mate_score = matrix.score_at(static_cast<int>(p),
                                                  matrix.mate[p]);
        std::size_t rank = 1;
        for (std::size_t g = 0; g < G; ++g) {
            // ties rank the mate best among equals
            if (matrix.score_at(static_cast<int>(p), static_cast<int>(g)) >
                mate_score) {
                ++rank;
            }
        }
        for (std::size_t k = rank - 1; k < G; ++k) curve.rates[k] += 1.0;
    }
    for (double& r : curve.rates) {
        r /= static_cast<double>(matrix.probes.size());
    }
    return curve;
}

const std::vector<ReferenceAnnotation>& reference_rank1_annotations() {
    // stored published reference values for overlay only; never recomputed
    static const std::vector<ReferenceAnnotation> kRefs = {
        {"proposed (published)", 0.48},
        {"FingerGAN (published)", 0.35},
    };
    return kRefs;
}

const std::vector<ReferenceMinutiaeCounts>& reference_minutiae_counts() {
    // stored published reference values for comparison tables only
    static const std::vector<ReferenceMinutiaeCounts> kRefs = {
        {"FingerGAN (published)", 1431, 11039},
        {"proposed (published)", 1982, 8361},
    };
    return kRefs;
}

void emit_cmc_plot(const std::vector<CMCCurve>& curves,
                   const std::string& out_path_base) {
    if (curves.empty()) {
        throw ImageError("emit_cmc_plot requires at least one curve");
    }
    // data file
    {
        std::ofstream os(out_path_base + ".tsv", std::ios::trunc);
        if (!os) throw ImageError("cannot write " + out_path_base + ".tsv");
        os << "rank";
        for (const auto& c : curves) os << '\t' << c.label;
        os << '\n';
        os.precision(17);
        std::size_t max_len = 0;
        for (const auto& c : curves) max_len = std::max(max_len, c.rates.size());
        for (std::size_t k = 0; k < max_len; ++k) {
            os << (k + 1);
            for (const auto& c : curves) {
                os << '\t';
                if (k < c.rates.size()) os << c.rates[k];
            }
            os << '\n';
        }
    }
    // self-contained SVG line chart
    {
        std::ofstream os(out_path_base + ".svg", std::ios::trunc);
        if (!os) throw ImageError("cannot write " + out_path_base + ".svg");
        const int W = 640, H = 480, ml = 60, mr = 20, mt = 20, mb = 50;
        const int pw = W - ml - mr, ph = H - mt - mb;
        static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                        "#9467bd", "#ff7f0e", "#8c564b"};
        std::size_t max_len = 1;
        for (const auto& c : curves) max_len = std::max(max_len, c.rates.size());
        os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
           << "\" height=\"" << H << "\">\n";
        os << "<rect width=\"" << W << "\" height=\"" << H
           << "\" fill=\"white\"/>\n";
        os << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\""
           << ml + pw << "\" y2=\"" << mt + ph
           << "\" stroke=\"black\"/>\n";
        os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
           << "\" y2=\"" << mt + ph << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << ml + pw / 2 << "\" y=\"" << H - 12
           << "\" text-anchor=\"middle\" font-size=\"14\">rank</text>\n";
        os << "<text x=\"16\" y=\"" << mt + ph / 2
           << "\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 "
              "16 "
           << mt + ph / 2 << ")\">identification rate</text>\n";
        for (int tick = 0; tick <= 4; ++tick) {
            const double frac = tick / 4.0;
            const int y = mt + ph - static_cast<int>(frac * ph);
            os << "<text x=\"" << ml - 8 << "\" y=\"" << y + 4
               << "\" text-anchor=\"end\" font-size=\"12\">" << frac
               << "</text>\n";
        }
        for (std::size_t ci = 0; ci < curves.size(); ++ci) {
            const auto& c = curves[ci];
            os << "<polyline fill=\"none\" stroke=\"" << kColors[ci % 6]
               << "\" stroke-width=\"2\" points=\"";
            for (std::size_t k = 0; k < c.rates.size(); ++k) {
                const double fx =
                    max_len > 1 ? static_cast<double>(k) / (max_len - 1) : 0.5;
                const double x = ml + fx * pw;
                const double y = mt + ph - c.rates[k] * ph;
                os << x << "," << y << " ";
            }
            os << "\"/>\n";
            os << "<text x=\"" << ml + 12 << "\" y=\""
               << mt + 18 + 18 * static_cast<int>(ci) << "\" font-size=\"13\" fill=\""
               << kColors[ci % 6] << "\">" << c.label << "</text>\n";
        }
        os << "</svg>\n";
    }
}

std::vector<CMCCurve> load_cmc_data(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ImageError("cannot open CMC data: " + path);
    std::string line;
    if (!std::getline(is, line)) throw ImageError("empty CMC data: " + path);
    std::vector<CMCCurve> curves;
    {
        std::istringstream hs(line);
        std::string col;
        std::getline(hs, col, '\t');  // "rank"
        while (std::getline(hs, col, '\t')) {
            curves.push_back({col, {}});
        }
    }
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::getline(ls, cell, '\t');  // rank index
        for (auto& c : curves) {
            if (!std::getline(ls, cell, '\t')) break;
            if (!cell.empty()) c.rates.push_back(std::stod(cell));
        }
    }
    return curves;
}

void save_score_matrix(const ScoreMatrix& m, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw ImageError("cannot write score matrix: " + path);
    os << "probe\tmate";
    for (const auto& g : m.gallery) os << '\t' << g;
    os << '\n';
    os.precision(17);
    for (std::size_t p = 0; p < m.probes.size(); ++p) {
        os << m.probes[p] << '\t' << m.gallery[m.mate[p]];
        for (std::size_t g = 0; g < m.gallery.size(); ++g) {
            os << '\t' << m.scores[p * m.gallery.size() + g];
        }
        os << '\n';
    }
}

}  // namespace lfe
