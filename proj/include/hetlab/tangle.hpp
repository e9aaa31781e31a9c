#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "hetlab/fourier.hpp"
#include "hetlab/maps.hpp"
#include "hetlab/model.hpp"

namespace hetlab {

// The supplied segment crosses the y = 0 manifold trace; callers split the
// parameter interval and process each half separately.
struct SplitAtManifold : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// Intersection counting failed to stabilize under grid refinement.
struct NumericallyDegenerate : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// The first-return height never changes sign over the bracket.
struct NoHomoclinicity : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Curve segment given as a graph y = eta(theta) over [theta_lo, theta_hi];
// the parameter s in [0, 1] traverses theta linearly, clamped end_margin
// away from the ends (where the default bump touches zero).
struct SegmentSpec {
    ForcingProfile eta;
    double theta_lo = 0.0;
    double theta_hi = 0.0;
    double end_margin = 1e-6;
};

// M * sin^2(theta) over [0, pi]: smooth positive bump, maximum M, rising at
// the left intersection with the manifold and falling at the right one.
SegmentSpec default_unstable_segment(double M);

// 0.3 sin(theta): one rising and one falling transversal zero.
ForcingProfile default_stable_graph();

struct SpiralPoint {
    double s = 0.0;      // segment parameter
    double y = 0.0;
    double theta = 0.0;  // unreduced lift
};

// Image of a segment under the half-return In1 -> Out2.  The theta lift is
// V-shaped: it diverges toward both parameter ends and has one interior
// minimum, the fold.
struct SpiralCurve {
    std::vector<SpiralPoint> points;  // s increasing
    double max_radius = 0.0;          // max |y|
    double fold_s = 0.0;
    double fold_y = 0.0;
    double fold_theta = 0.0;
    bool degenerate = false;  // lift monotone, no interior fold (flat segment)
    bool tails_ok = false;    // both ends monotone and below 1e-6
    int dropped = 0;          // samples lost to singular/manifold hits
};

// Maps the segment through Loc_1, then Out1 -> In2, then Loc_2, with mu1 = 0
// and mu2 > 0.  Sampling is refined where the lift turns quickly, capped at
// 2^20 points.  Throws SplitAtManifold when eta changes sign inside the
// parameter window.
SpiralCurve unstable_image_spiral(const ModelConfig& cfg, const SegmentSpec& seg,
                                  int n_samples = 512);

std::string spiral_to_csv(const SpiralCurve& spiral);

// ln(max_radius) regressed on ln(M) for a family of bumps; consecutive-pair
// slopes decide the measured exponent, reported next to the candidates
// delta, delta1, delta2.
struct RadiusSlopeFit {
    std::vector<double> M_values;
    std::vector<double> radii;
    double slope = 0.0;        // least-squares slope
    double spread = 0.0;       // max - min over consecutive-pair slopes
    double cand_delta = 0.0;
    double cand_delta1 = 0.0;
    double cand_delta2 = 0.0;
};

RadiusSlopeFit spiral_radius_slopes(const ModelConfig& cfg, const std::vector<double>& Ms);

// One located tangency: the fold-arc intersection count with the stable
// graph jumps by 2 at mu2.  The quadratic coefficient of spiral-minus-graph
// at the touch point signs the family: the rising zero of eta_s produces one
// family, the falling zero the other, and the two interleave; per-family
// ratios converge to exp(-2*pi/(omega*K_G)).
struct TangencyEvent {
    double mu2 = 0.0;
    double quad_coeff = 0.0;
    bool nondegenerate = false;  // |quad_coeff| > 1e-6
    int count_before = 0;        // arc count just above mu2
    int count_after = 0;         // arc count just below mu2
};

struct TangleScan {
    std::vector<double> mu2_grid;   // decreasing
    std::vector<int> counts;        // fold-arc intersection count per grid point
    std::vector<TangencyEvent> tangencies;  // mu2 strictly decreasing
    std::vector<int> primary;       // indices of the first event's sign family
};

// Scans mu2 geometrically from mu2_hi down to mu2_lo, counting transversal
// intersections of the fold-neighborhood arc (a fixed lift window above the
// fold) with the graph of eta_s; count jumps of 2 are bisected to 1e-10
// relative, kept when the fold-tip height crosses the graph there (a jump
// from a zero sliding over the window edge does not), and recorded until
// `count` tangencies are found or the range is exhausted.
TangleScan tangency_sequence(const ModelConfig& cfg, const SegmentSpec& seg,
                             const ForcingProfile& eta_s, double mu2_hi, double mu2_lo,
                             int count);

std::string tangencies_to_json(const TangleScan& scan);

// Homoclinic locus of the first-return height of the unstable set: for each
// mu1, the mu2 where min over theta of the first-return y touches zero.
struct HomCurve {
    std::vector<double> mu1, mu2;
    double slope = 0.0;      // d ln(mu2) / d ln(mu1); equals delta2
    double intercept = 0.0;  // ln(mu2) at ln(mu1) = 0
};

HomCurve hom_curve(const ModelConfig& cfg, const std::vector<double>& mu1_grid);

// Vertical compression and angular stretch of a rectangle in Out2 under
// n_iterates of the G return.  theta variation is the lift range over the
// surviving bottom-edge samples; sample angles include the transversal
// zeros of phi2, where the lift grows like -omega*K_G*ln(y_lo).
struct PulseStretch {
    double theta_range = 0.0;
    double theta_min = 0.0, theta_max = 0.0;
    int wraps = 0;                 // floor(theta_range / 2 pi)
    double y_contraction = 0.0;    // image height / rectangle height (0 for flat)
    int singular_skips = 0;
    int samples = 0;               // surviving bottom-edge samples
};

PulseStretch pulse_rectangle_stretch(const ModelConfig& cfg, double theta_lo,
                                     double theta_hi, double y_lo, double y_hi,
                                     int n_iterates, int n_samples = 4096);

} // namespace hetlab
