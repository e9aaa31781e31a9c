#pragma once

#include <cmath>

namespace hetlab {

inline constexpr double PI = 3.14159265358979323846;
inline constexpr double TWO_PI = 6.28318530717958647692;

// Reduce an angle to [0, 2*pi).
inline double wrap_angle(double theta) {
    double r = std::fmod(theta, TWO_PI);
    if (r < 0.0) r += TWO_PI;
    // fmod can return TWO_PI after the correction when theta is a tiny
    // negative number; normalize that edge away.
    if (r >= TWO_PI) r -= TWO_PI;
    return r;
}

// Signed circle difference a - b reduced to (-pi, pi].
inline double circle_diff(double a, double b) {
    double d = std::fmod(a - b, TWO_PI);
    if (d <= -PI) d += TWO_PI;
    if (d > PI) d -= TWO_PI;
    return d;
}

// Distance on the circle, in [0, pi].
inline double circle_dist(double a, double b) {
    return std::abs(circle_diff(a, b));
}

// Signed power: s^d := sign(s) * |s|^d.  Keeps odd-power behaviour for
// non-integer exponents (used for map branches below the stable manifold).
inline double signed_pow(double s, double d) {
    if (s == 0.0) return 0.0;
    return s > 0.0 ? std::pow(s, d) : -std::pow(-s, d);
}

} // namespace hetlab
