#include "hetlab/fourier.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hetlab/angles.hpp"
#include "hetlab/numutil.hpp"

namespace hetlab {

namespace {
constexpr int kScanGrid = 4096;
}

ForcingProfile::ForcingProfile(double constant_term,
                               std::vector<double> cosine_coeffs,
                               std::vector<double> sine_coeffs)
    : c0_(constant_term), ca_(std::move(cosine_coeffs)), cb_(std::move(sine_coeffs)) {}

double ForcingProfile::eval(double theta) const {
    double s = c0_;
    const size_t n = std::max(ca_.size(), cb_.size());
    for (size_t k = 1; k <= n; ++k) {
        const double a = k <= ca_.size() ? ca_[k - 1] : 0.0;
        const double b = k <= cb_.size() ? cb_[k - 1] : 0.0;
        if (a != 0.0) s += a * std::cos(k * theta);
        if (b != 0.0) s += b * std::sin(k * theta);
    }
    return s;
}

double ForcingProfile::deriv(double theta, int order) const {
    if (order < 0) throw std::invalid_argument("ForcingProfile::deriv: negative order");
    if (order == 0) return eval(theta);
    double s = 0.0;
    const size_t n = std::max(ca_.size(), cb_.size());
    for (size_t k = 1; k <= n; ++k) {
        // d/dt rotates the coefficient pair: (a, b) -> (k b, -k a).
        double a = k <= ca_.size() ? ca_[k - 1] : 0.0;
        double b = k <= cb_.size() ? cb_[k - 1] : 0.0;
        const double kd = static_cast<double>(k);
        for (int m = 0; m < order; ++m) {
            const double na = kd * b;
            const double nb = -kd * a;
            a = na; b = nb;
        }
        if (a != 0.0) s += a * std::cos(k * theta);
        if (b != 0.0) s += b * std::sin(k * theta);
    }
    return s;
}

bool ForcingProfile::is_zero() const {
    if (c0_ != 0.0) return false;
    for (double v : ca_) if (v != 0.0) return false;
    for (double v : cb_) if (v != 0.0) return false;
    return true;
}

bool ForcingProfile::is_constant() const {
    for (double v : ca_) if (v != 0.0) return false;
    for (double v : cb_) if (v != 0.0) return false;
    return true;
}

double ForcingProfile::argmin_on_circle() const {
    if (is_constant()) return 0.0;
    const double h = TWO_PI / kScanGrid;
    double best = eval(0.0), best_t = 0.0;
    for (int i = 1; i < kScanGrid; ++i) {
        const double t = i * h;
        const double v = eval(t);
        if (v < best) { best = v; best_t = t; }
    }
    return golden_minimize([this](double t) { return eval(t); }, best_t - h, best_t + h);
}

double ForcingProfile::argmax_on_circle() const {
    if (is_constant()) return 0.0;
    const double h = TWO_PI / kScanGrid;
    double best = eval(0.0), best_t = 0.0;
    for (int i = 1; i < kScanGrid; ++i) {
        const double t = i * h;
        const double v = eval(t);
        if (v > best) { best = v; best_t = t; }
    }
    return golden_minimize([this](double t) { return -eval(t); }, best_t - h, best_t + h);
}

double ForcingProfile::min_on_circle() const { return eval(argmin_on_circle()); }
double ForcingProfile::max_on_circle() const { return eval(argmax_on_circle()); }

bool ForcingProfile::positive() const { return min_on_circle() > 0.0; }

std::vector<double> ForcingProfile::transversal_zeros(double deriv_tol) const {
    std::vector<double> zeros;
    if (is_constant()) return zeros;
    const double h = TWO_PI / kScanGrid;
    double prev = eval(0.0);
    for (int i = 1; i <= kScanGrid; ++i) {
        const double t0 = (i - 1) * h;
        const double t1 = i * h;
        const double cur = eval(t1);
        if (prev == 0.0) {
            if (std::abs(deriv(t0, 1)) > deriv_tol) zeros.push_back(wrap_angle(t0));
        } else if ((prev > 0.0) != (cur > 0.0)) {
            const double r = bisect_root([this](double t) { return eval(t); }, t0, t1, 200, 1e-14);
            if (std::abs(deriv(r, 1)) > deriv_tol) zeros.push_back(wrap_angle(r));
        }
        prev = cur;
    }
    std::sort(zeros.begin(), zeros.end());
    // Collapse duplicates produced by zeros sitting on grid nodes (including
    // the wrap-around pair near 0 and 2*pi).
    std::vector<double> out;
    for (double z : zeros) {
        if (out.empty() || circle_dist(z, out.back()) > 1e-9) out.push_back(z);
    }
    if (out.size() > 1 && circle_dist(out.front(), out.back()) <= 1e-9) out.pop_back();
    return out;
}

bool ForcingProfile::sign_changing() const { return transversal_zeros().size() >= 2; }

} // namespace hetlab
