#pragma once

#include "lfe/minutiae.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

namespace lfe {

struct SimilarityConfig {
    double rotation_step_deg = 10.0;
    double tol_px = 12.0;
    double tol_rad = std::numbers::pi / 6.0;
    double pair_weight_px = 4.0;  // pair weight 1/(1 + d/4)
    /// If > 0, each set is capped to the N minutiae nearest its centroid
    /// before the alignment search (keeps dense templates tractable).
    int max_minutiae = 0;
};

/// Alignment-search similarity between two minutiae sets: candidate
/// rotations (quantized) and translations come from minutia pairings; the
/// score is the best weighted paired count. Symmetric by construction.
double similarity(const std::vector<Minutia>& a, const std::vector<Minutia>& b,
                  const SimilarityConfig& cfg = {});

struct ScoreMatrix {
    std::vector<std::string> probes;
    std::vector<std::string> gallery;
    std::vector<double> scores;  // probes x gallery, row-major
    std::vector<int> mate;       // per-probe gallery index

    double score_at(int p, int g) const {
        return scores[static_cast<std::size_t>(p) * gallery.size() + g];
    }
};

ScoreMatrix build_score_matrix(
    const std::vector<std::pair<std::string, std::vector<Minutia>>>& probes,
    const std::vector<std::pair<std::string, std::vector<Minutia>>>& gallery,
    const std::map<std::string, std::string>& mate_map,
    const SimilarityConfig& cfg = {});

struct CMCCurve {
    std::string label;
    std::vector<double> rates;  // rank-indexed, length |gallery|
};

/// Rank of a probe's mate = 1 + number of strictly better gallery scores
/// (the mate wins ties); rate(k) = fraction of probes with rank <= k.
CMCCurve cmc(const ScoreMatrix& matrix, const std::string& label = "");

/// Published rank-1 reference annotations for plot overlays; stored values,
/// never recomputed in this toolkit.
struct ReferenceAnnotation {
    std::string label;
    double rank1_rate;
};
const std::vector<ReferenceAnnotation>& reference_rank1_annotations();

/// Published genuine/fake minutiae reference counts for report comparison
/// tables; stored values, never recomputed.
struct ReferenceMinutiaeCounts {
    std::string label;
    int genuine_recovered;
    int fake_introduced;
};
const std::vector<ReferenceMinutiaeCounts>& reference_minutiae_counts();

/// Writes curves as a tab-separated data file and a standalone SVG chart.
void emit_cmc_plot(const std::vector<CMCCurve>& curves,
                   const std::string& out_path_base);

std::vector<CMCCurve> load_cmc_data(const std::string& path);
void save_score_matrix(const ScoreMatrix& m, const std::string& path);

}  // namespace lfe
