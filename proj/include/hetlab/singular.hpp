#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hetlab/maps.hpp"
#include "hetlab/model.hpp"

namespace hetlab {

struct DegenerateCritical : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ContinuationBroken : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Optional mu * psi(theta) contribution (finite-parameter family member).
struct PsiTerm {
    double mu = 0.0;
    ForcingProfile psi;
};

struct CircleMapSpec {
    double a = 0.0;          // additive phase parameter in [0, 2*pi)
    double L = 0.0;          // omega * K
    double xi = 0.0;
    ForcingProfile profile;  // Phi
    bool singular = false;   // profile vanishes somewhere (log singularities)
    std::optional<PsiTerm> psi_term;
};

// h_a(theta) = theta + xi + a + mu*psi(theta) - L*ln|Phi(theta)|.
class CircleMap {
public:
    explicit CircleMap(CircleMapSpec spec);

    const CircleMapSpec& spec() const { return spec_; }

    double value(double theta) const;  // unreduced (degree-one lift)
    double deriv(double theta) const;
    double deriv2(double theta) const;

    // |Phi(theta)| below tol: the map value is numerically unusable there.
    bool near_singularity(double theta, double tol = 1e-13) const;
    const std::vector<double>& profile_zeros() const { return zeros_; }

private:
    CircleMapSpec spec_;
    std::vector<double> zeros_;
};

// Singular limit of the selected return-map family at phase a; which is
// 'F' (positive profile) or 'G' (sign-changing profile).
CircleMap singular_limit_from_config(const ModelConfig& cfg, double a, char which);

// mu_(a,n) = exp(-(2*pi*n + a) / omegaK); strictly decreasing in n.
double mu_from_index(double a, int n, double omegaK);
std::vector<double> mu_lattice(double a, int n_min, int n_max, double omegaK);

struct ConvergenceRow {
    int n = 0;
    double mu = 0.0;
    double sup_f1 = 0.0;    // sup |F1| over the grid
    double sup_dist = 0.0;  // sup circle distance between F2 and h_a
};

// Convergence of the F return map to its singular limit along the mu
// lattice.  Grid: theta uniform, y in [0, mu] (the post-return absorbing
// range).  Requires mu2 = 0.
std::vector<ConvergenceRow> singular_limit_convergence(
    const ModelConfig& cfg, double a, int n_min, int n_max,
    int theta_grid = 512, int y_grid = 8);

// Zeros of h' refined to 1e-12; throws DegenerateCritical when |h''| at a
// root falls below 1e-8.  Sorted, in [0, 2*pi).
std::vector<double> critical_set(const CircleMap& map);

struct DiffeoReport {
    bool is_diffeo = false;
    double min_deriv = 0.0;
    double sup_profile_ratio = 0.0;  // sup |Phi'/Phi|
    double contraction_product = 0.0; // L * sup ratio; < 1 certifies a diffeo
};

DiffeoReport is_diffeomorphism(const CircleMap& map);

struct RotationResult {
    double rho = 0.0;          // in [0, 1)
    double error_bound = 0.0;  // O(1/n) bound on |estimate - rho|
    int n = 0;
    bool rational_within_bound = false;  // some p/q, q <= 100, inside the bound
    int q = 0;
};

RotationResult rotation_number(const CircleMap& map, double theta0 = 0.0, int n = 100000);

struct LyapunovResult {
    double lambda = 0.0;
    int n = 0;
    int singular_hits = 0;
    bool reliable = true;      // hits stayed under 1% of the iterates
    bool superstable = false;  // orbit ran through a zero derivative; lambda = -inf
};

LyapunovResult lyapunov_1d(const CircleMap& map, double theta0,
                           int burn_in = 1000, int n = 10000);

struct MisiurewiczWitness {
    double c = 0.0;      // critical point whose orbit violates the bound
    int n = 0;           // first offending iterate
    double point = 0.0;  // h^n(c)
    double dist = 0.0;   // distance to the critical set
};

struct MisiurewiczCertificate {
    std::string status;  // certified-to-horizon | refuted | inconclusive
    double delta0 = 0.0;
    int horizon = 0;
    double b0 = 0.0;
    double lambda0 = 0.0;
    double min_h2 = 0.0;           // min |h''| over C_{delta0}
    bool th_flag = false;          // exp(lambda0) > 2
    bool h7a_flag = false;         // exp(lambda0/3) > 2
    std::optional<MisiurewiczWitness> witness;
    std::vector<double> critical_points;
    std::string note;
};

MisiurewiczCertificate misiurewicz_check(const CircleMap& map, double delta0,
                                         int horizon = 50);

struct ExpansionFit {
    double lambda0 = 0.0;  // least-squares slope of ln|(h^n)'| vs n
    double b0 = 0.0;       // prefactor lowered until the bound holds on all samples
    int samples = 0;
};

// Pooled derivative-growth fit along orbit segments that stay outside
// C_delta, seeded from the critical values plus a 32-point grid.
ExpansionFit fit_expansion_rate(const CircleMap& map, const std::vector<double>& C,
                                double delta, int horizon);

std::string certificate_to_json(const MisiurewiczCertificate& cert);

struct CEScanResult {
    std::vector<double> a_values;
    std::vector<bool> ce_ok;
    double fraction = 0.0;
    double lambda = 0.0;
    double alpha = 0.0;
    bool lambda_cap_ok = false;  // lambda < lambda0 / 5
    bool alpha_cap_ok = false;   // alpha < lambda
};

// Fraction of the a-grid on which the two Collet-Eckmann style conditions
// hold up to the horizon, using delta0/b0 from a reference certificate.
CEScanResult ce_parameter_scan(const CircleMapSpec& base,
                               const MisiurewiczCertificate& ref,
                               double lambda, double alpha,
                               int horizon, int grid_size);

struct TransversalityRow {
    double c = 0.0;
    double xi_value = 0.0;     // d/da [h_a(c(a)) - beta_c(a)]
    double direct_term = 0.0;  // d/da h_a(c(a)); equals 1 for additive forcing
    double dbeta_da = 0.0;
};

// Central-difference transversality of the critical values against their
// itinerary-matched continuations (tracked to `depth` iterates).
std::vector<TransversalityRow> admissibility_transversality(
    const CircleMapSpec& base, double a_star, double h = 1e-6, int depth = 20);

} // namespace hetlab
