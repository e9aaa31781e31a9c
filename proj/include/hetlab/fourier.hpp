#pragma once

#include <vector>

namespace hetlab {

// Trigonometric polynomial  c0 + sum_k (a_k cos(k t) + b_k sin(k t)).
// Derivatives of any order are exact (term by term).
class ForcingProfile {
public:
    ForcingProfile() = default;
    ForcingProfile(double constant_term,
                   std::vector<double> cosine_coeffs,
                   std::vector<double> sine_coeffs);

    static ForcingProfile zero() { return ForcingProfile(); }
    static ForcingProfile constant(double c) { return ForcingProfile(c, {}, {}); }

    double eval(double theta) const;
    // order >= 0; order 0 is eval.
    double deriv(double theta, int order) const;

    bool is_zero() const;
    bool is_constant() const;
    int harmonics() const { return static_cast<int>(std::max(ca_.size(), cb_.size())); }

    // Extrema located on a 4096-point grid and refined by golden-section
    // search in the bracketing cells.
    double min_on_circle() const;
    double max_on_circle() const;
    double argmin_on_circle() const;
    double argmax_on_circle() const;

    // Strict positivity of the minimum.
    bool positive() const;

    // Zeros where the profile crosses with |derivative| above tol; roots
    // refined by bisection to 1e-12 wherever a grid sign change brackets one.
    std::vector<double> transversal_zeros(double deriv_tol = 1e-10) const;
    // At least two transversal zeros.
    bool sign_changing() const;

    double constant_term() const { return c0_; }
    const std::vector<double>& cosine_coeffs() const { return ca_; }
    const std::vector<double>& sine_coeffs() const { return cb_; }

    bool operator==(const ForcingProfile&) const = default;

private:
    double c0_ = 0.0;
    std::vector<double> ca_;
    std::vector<double> cb_;
};

} // namespace hetlab
