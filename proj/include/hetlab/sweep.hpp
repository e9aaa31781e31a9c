#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "hetlab/fourier.hpp"
#include "hetlab/maps.hpp"
#include "hetlab/model.hpp"
#include "hetlab/tangle.hpp"

namespace hetlab {

// More than 10% of iterates were skipped (singular/manifold jitters) or the
// orbit left the map's domain, so the exponent estimate is not trustworthy.
struct UnreliableEstimate : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// The limit set is not a graph over theta (residual too large, or it fails to
// wind once around the annulus).
struct NotAGraph : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Lyap2 {
    double l1 = 0.0;  // largest exponent
    double l2 = 0.0;  // l2 <= l1; l1 + l2 = mean log |det J| < 0 for these maps
    int used = 0;
    int skipped = 0;
};

// Both Lyapunov exponents of the family-`which` return map from p0, computed
// with analytic Jacobians and per-step Gram-Schmidt reorthonormalization.
Lyap2 lyapunov_2d(const MapEngine& eng, char which, ReturnMapPoint p0,
                  int burn_in, int n);

struct Thresholds {
    double eps_curve = 0.02;  // |l1| <= eps_curve for invariant-curve
    double eps_sink = 0.05;   // l1 < -eps_sink for periodic-sink
    double eps_chaos = 0.02;  // l1 > eps_chaos for chaotic
    int period_cap = 64;
};

// label is one of: invariant-curve, periodic-sink, chaotic,
// singular-dominated, undetermined.
struct AttractorClass {
    std::string label = "undetermined";
    double lyap1 = 0.0;
    double lyap2 = 0.0;
    int winding = 0;  // 1 when the limit set winds once around the annulus
    int period = 0;   // 0 = no period detected
    int skipped = 0;  // singular/manifold iterates sidestepped, worst seed
};

struct ClassifyOptions {
    Thresholds thresholds;
    int seeds = 8;
    int burn_in = 2000;
    int iterates = 20000;
    std::uint64_t seed = 0;  // deterministic perturbation of the seed angles
};

// Classifies the attractor of one parameter cell by consensus over the seed
// orbits; any disagreement between seeds yields "undetermined".
AttractorClass classify_cell(const ModelConfig& cfg, char which,
                             const ClassifyOptions& opts = {});

struct LatticeCell {
    double a = 0.0;
    double mu = 0.0;
    AttractorClass cls;
};

// Scans a in [0, 2pi) on the mu-lattice of family `which` at index n_index:
// mu = exp(-(2*pi*n_index + a) / (omega K)).
std::vector<LatticeCell> scan_lattice(const ModelConfig& cfg, char which,
                                      int n_index, int cells,
                                      const ClassifyOptions& opts = {},
                                      int threads = 1);

struct SweepCell {
    double mu1 = 0.0;
    double mu2 = 0.0;
    double omega = 0.0;
    double a = 0.0;     // lattice phase of the active parameter
    char family = 'F';  // which return map classified this cell
    AttractorClass cls;
};

struct SweepResult {
    std::vector<double> mu1_grid;
    std::vector<double> mu2_grid;
    std::uint64_t seed = 0;
    int burn_in = 0;
    int iterates = 0;
    bool hom_valid = false;
    HomCurve hom;                  // fitted homoclinicity curve, when it exists
    std::vector<SweepCell> cells;  // index = i * mu2_grid.size() + j
};

// Classifies every (mu1, mu2) cell. Cells on the mu1-axis use F, cells on the
// mu2-axis use G, interior cells use G on the tangle side of the fitted Hom
// curve (mu2 > C mu1^delta2) and F otherwise. Deterministic for fixed seed.
SweepResult bifurcation_diagram(const ModelConfig& tmpl,
                                const std::vector<double>& mu1_grid,
                                const std::vector<double>& mu2_grid,
                                const ClassifyOptions& opts = {},
                                int threads = 1);

// Fraction of the quarter-disc {mu1, mu2 >= 0, |mu| <= r} lying on the tangle
// side of the Hom curve; tends to 1 as r -> 0 when hom.slope > 1.
double tangle_side_fraction(const HomCurve& hom, double radius);

// Header mu1,mu2,omega,a,label,lyap1,lyap2,winding,period. Bit-identical for
// identical grids and seeds.
std::string sweep_to_csv(const SweepResult& res);
// Gnuplot-compatible blocks "mu1 mu2 code label", blank line between rows.
std::string sweep_to_dat(const SweepResult& res);
// Minimal heatmap, one rect per cell, colored by label.
std::string sweep_to_svg(const SweepResult& res);

struct CurveExtract {
    ForcingProfile curve;   // fitted graph y = c(theta)
    double residual = 0.0;  // sup |y_i - c(theta_i)| over the tail orbit
    double sup_y = 0.0;
    int winding = 1;
    int points = 0;
};

// Fits a trigonometric graph to the attractor of the family-`which` return
// map. Throws NotAGraph when the sup residual exceeds 1e-3 or the limit set
// does not wind once around the annulus.
CurveExtract invariant_curve_extract(const ModelConfig& cfg, char which = 'F',
                                     int fit_order = 12, int burn_in = 2000,
                                     int n = 20000);

// Fractional part of the mean theta-lift advance per iterate, in [0, 1).
double rotation_number_2d(const ModelConfig& cfg, char which, int burn_in,
                          int n);

}  // namespace hetlab
