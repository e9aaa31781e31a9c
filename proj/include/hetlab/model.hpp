#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "hetlab/fourier.hpp"

namespace hetlab {

// One dissipative saddle: eigenvalues -c < 0 < e with c > e > 0.
struct SaddleData {
    double c = 2.0;
    double e = 1.0;
};

// Bounded correction terms entering the local passage rates; w<j>_<i> is
// w_j at saddle i, evaluated at the passage entry angle.  All default to
// the zero profile.
struct WCorrections {
    ForcingProfile w1_1, w2_1, w1_2, w2_2;
    bool all_zero() const {
        return w1_1.is_zero() && w2_1.is_zero() && w1_2.is_zero() && w2_2.is_zero();
    }
    bool all_constant() const {
        return w1_1.is_constant() && w2_1.is_constant() && w1_2.is_constant() && w2_2.is_constant();
    }
};

// Cross-section half-widths (magnified coordinates).  In-sections span
// y in [-1/C, C], out-sections y in [0, C'] (saddle 1) and [-1/C', C']
// (saddle 2).
struct SectionBounds {
    double in1 = 10.0;
    double in2 = 10.0;
    double out1 = 10.0;
    double out2 = 10.0;
};

struct ModelConfig {
    SaddleData saddle1;
    SaddleData saddle2;
    double mu1 = 0.0;
    double mu2 = 0.0;
    double omega = 1.0;
    double xi1 = 0.0;
    double xi2 = 0.0;
    double b1 = 1.0;
    double b2 = 1.0;
    double eps0 = 1.0;
    ForcingProfile phi1;   // splitting profile driven by mu1 (positive regime)
    ForcingProfile psi1;   // angular correction driven by mu1
    ForcingProfile phi2;   // splitting profile driven by mu2 (sign-changing regime)
    ForcingProfile psi2;   // angular correction driven by mu2
    WCorrections w;
    SectionBounds sections;

    double mu_norm() const { return std::max(std::abs(mu1), std::abs(mu2)); }
};

struct DerivedConstants {
    double delta1 = 0.0;
    double delta2 = 0.0;
    double delta = 0.0;   // delta1 * delta2
    double K_F = 0.0;     // 1/(e2+w2_2) + delta2/(e1+w2_1)
    double K_G = 0.0;     // 1/(e1+w2_1) + delta1/(e2+w2_2)
    double xi = 0.0;      // xi1 + xi2
};

struct CheckResult {
    std::string id;
    bool pass = true;
    std::string witness;  // value that settles the check, e.g. the violating minimum
};

struct ValidationReport {
    std::vector<CheckResult> checks;
    bool ok = true;
    const CheckResult* find(const std::string& id) const {
        for (const auto& c : checks)
            if (c.id == id) return &c;
        return nullptr;
    }
};

// Hypothesis checks on the flow-level data.  Sign conditions on the forcing
// profiles are only enforced for the parameters that are switched on.
ValidationReport validate(const ModelConfig& cfg);

// Rate constants of the return maps; corrections evaluated at angle zero
// (singular-limit convention).
DerivedConstants derive_constants(const ModelConfig& cfg);

} // namespace hetlab
