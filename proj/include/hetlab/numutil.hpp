#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <thread>
#include <utility>
#include <vector>

namespace hetlab {

// Golden-section minimization on [lo, hi].
template <typename F>
double golden_minimize(F&& f, double lo, double hi, int iters = 80) {
    constexpr double invphi = 0.6180339887498949;
    double a = lo, b = hi;
    double x1 = b - invphi * (b - a);
    double x2 = a + invphi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int i = 0; i < iters; ++i) {
        if (f1 < f2) {
            b = x2; x2 = x1; f2 = f1;
            x1 = b - invphi * (b - a); f1 = f(x1);
        } else {
            a = x1; x1 = x2; f1 = f2;
            x2 = a + invphi * (b - a); f2 = f(x2);
        }
    }
    return f1 < f2 ? x1 : x2;
}

// Bisection for a sign change bracketed by [lo, hi]; f(lo) and f(hi) must
// have opposite signs.  Returns the midpoint of the final bracket.
template <typename F>
double bisect_root(F&& f, double lo, double hi, int iters = 200, double xtol = 0.0) {
    double flo = f(lo);
    double fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo > 0.0) == (fhi > 0.0))
        throw std::invalid_argument("bisect_root: endpoints do not bracket a sign change");
    for (int i = 0; i < iters; ++i) {
        double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm > 0.0) == (flo > 0.0)) { lo = mid; flo = fm; }
        else { hi = mid; }
        if (xtol > 0.0 && hi - lo < xtol) break;
    }
    return 0.5 * (lo + hi);
}

// Least-squares straight line y = slope*x + intercept.
struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
};

inline LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
    const size_t n = xs.size();
    if (n < 2 || ys.size() != n) throw std::invalid_argument("fit_line: need >= 2 points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < n; ++i) {
        sx += xs[i]; sy += ys[i];
        sxx += xs[i] * xs[i]; sxy += xs[i] * ys[i];
    }
    const double d = n * sxx - sx * sx;
    if (d == 0.0) throw std::invalid_argument("fit_line: degenerate abscissae");
    LineFit out;
    out.slope = (n * sxy - sx * sy) / d;
    out.intercept = (sy - out.slope * sx) / n;
    return out;
}

// Deterministic index-parallel loop: results must be written by index so the
// outcome does not depend on thread scheduling.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body) {
    if (threads <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    const int t = std::min<std::size_t>(threads, n);
    std::vector<std::thread> pool;
    pool.reserve(t);
    for (int k = 0; k < t; ++k) {
        pool.emplace_back([&, k]() {
            for (std::size_t i = k; i < n; i += t) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

// FNV-1a 64-bit hash; used for config fingerprints in run manifests.
inline std::uint64_t fnv1a64(const void* data, std::size_t len) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 1469598103934665603ULL;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace hetlab
