#pragma once

#include "lfe/image.hpp"

#include <string>
#include <vector>

namespace lfe {

enum class MinutiaKind { ending, bifurcation };

struct Minutia {
    double x = 0.0;
    double y = 0.0;
    double direction = 0.0;  // [0, 2pi), along the ridge away from the feature
    MinutiaKind kind = MinutiaKind::ending;
};

struct MinutiaPair {
    int gt_index = -1;
    int extracted_index = -1;
    double distance_px = 0.0;
    double angle_diff_rad = 0.0;
};

struct MatchReport {
    int genuine_recovered = 0;
    int fake_introduced = 0;
    std::vector<MinutiaPair> pairs;
};

struct ExtractionConfig {
    int border_px = 8;          // excluded band at image borders
    int trace_px = 5;           // skeleton radius for the direction estimate
    double prune_dist_px = 5.0; // opposing close pairs are spurious
};

/// Crossing-number extraction on the thinned binary skeleton: CN=1 marks an
/// ending, CN=3 a bifurcation. Results sorted by y then x.
std::vector<Minutia> extract_minutiae(const GrayImage& img,
                                      const ExtractionConfig& cfg = {});

/// Greedy nearest-first one-to-one pairing; a pair needs distance <= tol_px,
/// identical kind and angular difference <= tol_rad.
MatchReport match_minutiae(const std::vector<Minutia>& gt,
                           const std::vector<Minutia>& extracted,
                           double tol_px, double tol_rad);

/// Endings drawn in red, bifurcations in blue, each with a direction tick.
RgbImage render_minutiae(const GrayImage& img,
                         const std::vector<Minutia>& minutiae);

/// "#LFPM v1" header, then tab-separated x, y, direction_rad, kind per line.
void save_template(const std::vector<Minutia>& minutiae,
                   const std::string& path);
std::vector<Minutia> load_template(const std::string& path);

/// Tab-separated summary plus pair listing.
void save_match_report(const MatchReport& report, const std::string& path);

double angle_diff(double a, double b);  // [0, pi], mod 2pi comparison

/// Half the sum of absolute differences around the 8-neighbour ring of
/// (y, x); 1 classifies an ending, 3 a bifurcation. Out-of-bounds
/// neighbours count as background.
int crossing_number(const GrayImage& skeleton, int y, int x);

}  // namespace lfe
