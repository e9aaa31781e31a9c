#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hetlab/config_io.hpp"
#include "hetlab/fourier.hpp"
#include "hetlab/model.hpp"

namespace hetlab {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 v) { return std::sqrt(v.x * v.x + v.y * v.y); }
// +pi/2 rotation; the global orientation convention for tau-perp.
inline Vec2 perp(Vec2 v) { return {-v.y, v.x}; }

enum class Trig { None, Cos, Sin };

// One monomial-times-trig term: coeff * x^px * y^py * trig(2*pi*k*s / T).
struct ExprTerm {
    double coeff = 0.0;
    int px = 0;
    int py = 0;
    Trig trig = Trig::None;
    int k = 1;
};

// Sum of ExprTerm, parsed from text such as "0.5*x - x^3 + 2*x*y^2*cos(3 t)".
// Factors are joined by '*'; each term holds at most one trig factor.
class Expression {
public:
    Expression() = default;
    static Expression parse(const std::string& text);

    double eval(double x, double y, double s, double T) const;
    double dx(double x, double y, double s, double T) const;
    double dy(double x, double y, double s, double T) const;

    bool autonomous() const;
    bool zero() const;
    const std::vector<ExprTerm>& terms() const { return terms_; }
    std::string to_string() const;

private:
    std::vector<ExprTerm> terms_;
};

struct SaddleInfo {
    Vec2 pos;
    double c = 0.0, e = 0.0;  // eigenvalues -c < 0 < e
    Vec2 u_c, u_e;            // unit eigenvectors
};

// Planar field g + two T-periodic forcing fields (P drives the first
// parameter, Q the second), with the two saddles of the unperturbed cycle.
struct PlanarSystem {
    Expression g1, g2;
    Expression P1, P2, Q1, Q2;
    double T = 0.0;
    SaddleInfo O1, O2;
    std::optional<Vec2> l1_via, l2_via;  // waypoint hints for branch selection

    Vec2 g(Vec2 p) const { return {g1.eval(p.x, p.y, 0, 1), g2.eval(p.x, p.y, 0, 1)}; }
    std::array<double, 4> jacobian(Vec2 p) const;  // row-major dg/d(x,y)
};

PlanarSystem planar_system_from_keyvalues(const KeyValueFile& kv);
PlanarSystem load_planar_system(const std::string& path);
std::vector<CheckResult> validate_planar(const PlanarSystem& sys);

struct NoConnection : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct TruncationTooShort : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct OrbitSample {
    double t = 0.0;
    Vec2 pos;
    Vec2 vel;   // field at pos (tail samples: linearized field)
    Vec2 tau;   // unit tangent
    double E = 0.0;  // perpendicular expansion rate tau_perp J tau_perp
};

class HeteroclinicOrbit {
public:
    int source = 1, target = 2;
    double T_cut = 0.0;
    double miss = 0.0;  // closest approach to the target saddle
    std::vector<OrbitSample> samples;  // t increasing over [-T_cut, T_cut]

    Vec2 position(double t) const;   // cubic Hermite between samples
    Vec2 tangent(double t) const;    // unit; falls back to sample tangents near saddles
    double E_at(double t) const;
    double weight_exponent(double t) const;  // V(t) = int_0^t E ds
    double weight(double t) const;           // exp(-V(t))

    // Dense cumulative integral of E, built once after shooting.
    void build_weight_grid(int n = 1 << 15);

private:
    friend HeteroclinicOrbit shoot_heteroclinic(const PlanarSystem& sys, int which,
                                                double T_cut, bool backward);
    std::function<Vec2(Vec2)> field_;                 // g, for tangents between samples
    std::function<std::array<double, 4>(Vec2)> jac_;  // dg, for E on the dense grid
    double grid_t0_ = 0.0, grid_dt_ = 0.0;
    std::vector<double> V_, E_grid_;
};

// Integrates from the source saddle's unstable direction (offset 1e-8, both
// signs tried, waypoint hint preferred) into the target saddle; samples are
// extended to exactly [-T_cut, T_cut] by eigen-direction tails.  T_cut = 0
// selects 1.2 * ln(1e12) / rate from the weight-decay rates (c_source
// backward, e_target forward).  backward = true integrates the reversed
// field from the target's stable direction instead.
HeteroclinicOrbit shoot_heteroclinic(const PlanarSystem& sys, int which,
                                     double T_cut = 0.0, bool backward = false);

// W(theta) for the orbit's own forcing (P along l1, Q along l2), adaptive
// Gauss-Kronrod quadrature.  Throws TruncationTooShort when the exponential
// weight has not decayed below 1e-12 at the cut.
double melnikov_W(const PlanarSystem& sys, const HeteroclinicOrbit& orbit, double theta);

// Dense-trapezoid reference quadrature of the same integrand.
double melnikov_W_brute(const PlanarSystem& sys, const HeteroclinicOrbit& orbit,
                        double theta, long nodes);

struct MelnikovTable {
    std::vector<double> theta, W1, W2;
};

MelnikovTable melnikov_table(const PlanarSystem& sys, const HeteroclinicOrbit& l1,
                             const HeteroclinicOrbit& l2, int grid = 512);
std::string melnikov_table_to_csv(const MelnikovTable& table);

enum class TangleCase { Case1, Case2, Case3, Case4 };
std::string to_string(TangleCase c);

struct SignReport {
    double min = 0.0, max = 0.0;
    double argmin = 0.0, argmax = 0.0;
    bool sign_changing = false;
    bool nongeneric = false;  // a zero with |W'| < 1e-8
    std::vector<double> zeros;
};

struct Classification {
    TangleCase which = TangleCase::Case4;
    SignReport W1, W2;
    bool nongeneric = false;
};

Classification classify_configuration(const PlanarSystem& sys, int grid = 512);

struct ProfileFit {
    ForcingProfile profile;  // theta rescaled from period T to 2*pi
    double residual = 0.0;   // sup |fit - samples| over the grid
    double w_max = 0.0;      // sup |W|
    bool poor_fit = false;   // residual > 1e-3 * w_max
};

ProfileFit profile_from_melnikov(const PlanarSystem& sys, const HeteroclinicOrbit& orbit,
                                 int order = 8, int grid = 512);

} // namespace hetlab
