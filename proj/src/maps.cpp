#include "hetlab/maps.hpp"

#include <cmath>
#include <cstdio>

#include "hetlab/angles.hpp"

namespace hetlab {

namespace {
constexpr double kSingularTol = 1e-14;  // magnified units
}

const char* to_string(MapStatus s) {
    switch (s) {
        case MapStatus::Ok: return "Ok";
        case MapStatus::StableManifoldHit: return "StableManifoldHit";
        case MapStatus::OutOfSection: return "OutOfSection";
        case MapStatus::SingularHit: return "SingularHit";
        case MapStatus::DomainError: return "DomainError";
    }
    return "?";
}

Jac2 operator*(const Jac2& a, const Jac2& b) {
    Jac2 r;
    r.dy_dy = a.dy_dy * b.dy_dy + a.dy_dth * b.dth_dy;
    r.dy_dth = a.dy_dy * b.dy_dth + a.dy_dth * b.dth_dth;
    r.dth_dy = a.dth_dy * b.dy_dy + a.dth_dth * b.dth_dy;
    r.dth_dth = a.dth_dy * b.dy_dth + a.dth_dth * b.dth_dth;
    return r;
}

MapEngine::MapEngine(ModelConfig cfg) : cfg_(std::move(cfg)), dc_(derive_constants(cfg_)) {}

bool MapEngine::closed_form_F_applies() const {
    return cfg_.b1 == 1.0 && cfg_.b2 == 1.0 && cfg_.eps0 == 1.0 &&
           cfg_.w.all_constant() && cfg_.mu2 == 0.0;
}

bool MapEngine::closed_form_G_applies() const {
    return cfg_.b1 == 1.0 && cfg_.b2 == 1.0 && cfg_.eps0 == 1.0 &&
           cfg_.w.all_constant() && cfg_.mu1 == 0.0;
}

MapResult MapEngine::local_map(int i, ReturnMapPoint p) const {
    MapResult r;
    if (p.y <= 0.0) {
        r.status = MapStatus::StableManifoldHit;
        r.p = p;
        return r;
    }
    return local_signed(i, p);
}

// Passage map including the mirrored branch below the stable manifold
// (sign convention s^d = sign(s)|s|^d).  y == 0 is a singular hit.
MapResult MapEngine::local_signed(int i, ReturnMapPoint p) const {
    MapResult r;
    r.p = p;
    const double m = cfg_.mu_norm();
    if (m <= 0.0) {
        r.status = MapStatus::DomainError;  // magnified coordinates need mu != 0
        return r;
    }
    if (std::abs(p.y) < kSingularTol) {
        r.status = MapStatus::SingularHit;
        return r;
    }
    const SaddleData& s = (i == 1) ? cfg_.saddle1 : cfg_.saddle2;
    const ForcingProfile& w1 = (i == 1) ? cfg_.w.w1_1 : cfg_.w.w1_2;
    const ForcingProfile& w2 = (i == 1) ? cfg_.w.w2_1 : cfg_.w.w2_2;
    const double ew = s.e + w2.eval(p.theta);
    const double cw = s.c + w1.eval(p.theta);
    const double delta_i = cw / ew;
    const double in_cap = (i == 1) ? cfg_.sections.in1 : cfg_.sections.in2;
    if (enforce_sections && (p.y > in_cap || p.y < -1.0 / in_cap)) {
        r.status = MapStatus::OutOfSection;
        return r;
    }
    const double ratio = cfg_.eps0 / (m * std::abs(p.y));
    if (ratio < 1.0) {
        // Entry above the exit level: the trajectory leaves the neighbourhood
        // without a saddle passage.
        r.status = MapStatus::DomainError;
        return r;
    }
    const double ybar = (cfg_.eps0 / m) * std::pow(ratio, -delta_i);
    r.p.y = p.y > 0.0 ? ybar : -ybar;
    r.p.theta = p.theta + (cfg_.omega / ew) * std::log(ratio);
    r.flight_time = std::log(ratio) / ew;
    const double out_cap = (i == 1) ? cfg_.sections.out1 : cfg_.sections.out2;
    if (enforce_sections && std::abs(r.p.y) > out_cap) r.status = MapStatus::OutOfSection;
    return r;
}

MapResult MapEngine::global_map_12(ReturnMapPoint p) const {
    MapResult r;
    const double m = cfg_.mu_norm();
    const double ratio = m > 0.0 ? cfg_.mu1 / m : 0.0;
    r.p.y = cfg_.b1 * p.y + ratio * cfg_.phi1.eval(p.theta);
    r.p.theta = p.theta + cfg_.xi1 + cfg_.mu1 * cfg_.psi1.eval(p.theta);
    r.below_manifold = r.p.y < 0.0;
    const double cap = cfg_.sections.in2;
    if (enforce_sections && (r.p.y > cap || r.p.y < -1.0 / cap))
        r.status = MapStatus::OutOfSection;
    return r;
}

MapResult MapEngine::global_map_21(ReturnMapPoint p) const {
    MapResult r;
    const double m = cfg_.mu_norm();
    const double ratio = m > 0.0 ? cfg_.mu2 / m : 0.0;
    r.p.y = cfg_.b2 * p.y + ratio * cfg_.phi2.eval(p.theta);
    r.p.theta = p.theta + cfg_.xi2 + cfg_.mu2 * cfg_.psi2.eval(p.theta);
    r.below_manifold = r.p.y < 0.0;
    const double cap = cfg_.sections.in1;
    if (enforce_sections && (r.p.y > cap || r.p.y < -1.0 / cap))
        r.status = MapStatus::OutOfSection;
    return r;
}

MapResult MapEngine::compose_F(ReturnMapPoint p) const {
    MapResult g1 = global_map_12(p);
    if (g1.status != MapStatus::Ok) return g1;
    MapResult l2 = local_map(2, g1.p);
    if (l2.status != MapStatus::Ok) return l2;
    MapResult g2 = global_map_21(l2.p);
    if (g2.status != MapStatus::Ok) { g2.flight_time = l2.flight_time; return g2; }
    MapResult l1 = local_map(1, g2.p);
    l1.flight_time += l2.flight_time;
    l1.below_manifold = g1.below_manifold || g2.below_manifold;
    return l1;
}

MapResult MapEngine::compose_G(ReturnMapPoint p) const {
    MapResult g1 = global_map_21(p);
    if (g1.status != MapStatus::Ok) return g1;
    // The G branch continues below the manifold via the mirrored passage.
    MapResult l1 = local_signed(1, g1.p);
    if (l1.status != MapStatus::Ok) return l1;
    MapResult g2 = global_map_12(l1.p);
    if (g2.status != MapStatus::Ok) { g2.flight_time = l1.flight_time; return g2; }
    MapResult l2 = local_signed(2, g2.p);
    l2.flight_time += l1.flight_time;
    l2.below_manifold = g1.below_manifold || g2.below_manifold;
    return l2;
}

MapResult MapEngine::return_map_F(ReturnMapPoint p) const {
    MapResult r;
    if (!(cfg_.mu1 > 0.0)) {
        r.status = MapStatus::DomainError;
        r.p = p;
        return r;
    }
    if (!closed_form_F_applies()) return compose_F(p);
    const double m = cfg_.mu_norm();  // equals mu1 here
    const double base = p.y + cfg_.phi1.eval(p.theta);
    if (base <= 0.0) {
        r.status = MapStatus::DomainError;  // negative base: positivity overridden
        r.p = p;
        return r;
    }
    const double lkf = cfg_.omega * dc_.K_F;
    r.p.y = std::pow(m, dc_.delta - 1.0) * std::pow(base, dc_.delta);
    r.p.theta = p.theta + dc_.xi + cfg_.mu1 * cfg_.psi1.eval(p.theta)
                - lkf * std::log(m) - lkf * std::log(base);
    r.flight_time = dc_.K_F * std::log(1.0 / (m * base));
    if (enforce_sections && r.p.y > cfg_.sections.out1) r.status = MapStatus::OutOfSection;
    return r;
}

MapResult MapEngine::return_map_G(ReturnMapPoint p) const {
    MapResult r;
    if (!(cfg_.mu2 > 0.0)) {
        r.status = MapStatus::DomainError;
        r.p = p;
        return r;
    }
    if (!closed_form_G_applies()) return compose_G(p);
    const double m = cfg_.mu_norm();  // equals mu2 here
    const double base = p.y + cfg_.phi2.eval(p.theta);
    if (std::abs(base) < kSingularTol) {
        r.status = MapStatus::SingularHit;
        r.p = p;
        return r;
    }
    const double lkg = cfg_.omega * dc_.K_G;
    r.p.y = std::pow(m, dc_.delta - 1.0) * signed_pow(base, dc_.delta);
    r.p.theta = p.theta + dc_.xi + cfg_.mu2 * cfg_.psi2.eval(p.theta)
                - lkg * std::log(m) - lkg * std::log(std::abs(base));
    r.flight_time = dc_.K_G * std::log(1.0 / (m * std::abs(base)));
    r.below_manifold = base < 0.0;
    if (enforce_sections && std::abs(r.p.y) > cfg_.sections.out2)
        r.status = MapStatus::OutOfSection;
    return r;
}

Jac2 MapEngine::jac_local(int i, ReturnMapPoint p) const {
    // Constant corrections assumed (non-constant ones route through the
    // finite-difference cross-checks in the tests).
    const SaddleData& s = (i == 1) ? cfg_.saddle1 : cfg_.saddle2;
    const ForcingProfile& w1 = (i == 1) ? cfg_.w.w1_1 : cfg_.w.w1_2;
    const ForcingProfile& w2 = (i == 1) ? cfg_.w.w2_1 : cfg_.w.w2_2;
    const double ew = s.e + w2.eval(p.theta);
    const double cw = s.c + w1.eval(p.theta);
    const double d = cw / ew;
    const double m = cfg_.mu_norm();
    Jac2 j;
    j.dy_dy = std::pow(m / cfg_.eps0, d - 1.0) * d * std::pow(std::abs(p.y), d - 1.0);
    j.dy_dth = 0.0;
    j.dth_dy = -(cfg_.omega / ew) / p.y;
    j.dth_dth = 1.0;
    return j;
}

Jac2 MapEngine::jac_global12(ReturnMapPoint p) const {
    const double m = cfg_.mu_norm();
    const double ratio = m > 0.0 ? cfg_.mu1 / m : 0.0;
    Jac2 j;
    j.dy_dy = cfg_.b1;
    j.dy_dth = ratio * cfg_.phi1.deriv(p.theta, 1);
    j.dth_dy = 0.0;
    j.dth_dth = 1.0 + cfg_.mu1 * cfg_.psi1.deriv(p.theta, 1);
    return j;
}

Jac2 MapEngine::jac_global21(ReturnMapPoint p) const {
    const double m = cfg_.mu_norm();
    const double ratio = m > 0.0 ? cfg_.mu2 / m : 0.0;
    Jac2 j;
    j.dy_dy = cfg_.b2;
    j.dy_dth = ratio * cfg_.phi2.deriv(p.theta, 1);
    j.dth_dy = 0.0;
    j.dth_dth = 1.0 + cfg_.mu2 * cfg_.psi2.deriv(p.theta, 1);
    return j;
}

Jac2 MapEngine::jac_composed(char which, ReturnMapPoint p) const {
    ReturnMapPoint q = p;
    Jac2 total;
    auto step = [&](const Jac2& j, const MapResult& r) {
        total = j * total;
        q = r.p;
    };
    if (which == 'F') {
        MapResult r = global_map_12(q); step(jac_global12(p), r);
        MapResult l = local_signed(2, q); step(jac_local(2, q), l);
        MapResult g = global_map_21(q); step(jac_global21(q), g);
        MapResult e = local_signed(1, q); step(jac_local(1, q), e);
    } else {
        MapResult r = global_map_21(q); step(jac_global21(p), r);
        MapResult l = local_signed(1, q); step(jac_local(1, q), l);
        MapResult g = global_map_12(q); step(jac_global12(q), g);
        MapResult e = local_signed(2, q); step(jac_local(2, q), e);
    }
    return total;
}

Jac2 MapEngine::jacobian_F(ReturnMapPoint p) const {
    if (!closed_form_F_applies()) return jac_composed('F', p);
    const double m = cfg_.mu_norm();
    const double base = p.y + cfg_.phi1.eval(p.theta);
    const double dphi = cfg_.phi1.deriv(p.theta, 1);
    const double lkf = cfg_.omega * dc_.K_F;
    const double front = std::pow(m, dc_.delta - 1.0) * dc_.delta * std::pow(base, dc_.delta - 1.0);
    Jac2 j;
    j.dy_dy = front;
    j.dy_dth = front * dphi;
    j.dth_dy = -lkf / base;
    j.dth_dth = 1.0 + cfg_.mu1 * cfg_.psi1.deriv(p.theta, 1) - lkf * dphi / base;
    return j;
}

Jac2 MapEngine::jacobian_G(ReturnMapPoint p) const {
    if (!closed_form_G_applies()) return jac_composed('G', p);
    const double m = cfg_.mu_norm();
    const double base = p.y + cfg_.phi2.eval(p.theta);
    const double dphi = cfg_.phi2.deriv(p.theta, 1);
    const double lkg = cfg_.omega * dc_.K_G;
    const double front =
        std::pow(m, dc_.delta - 1.0) * dc_.delta * std::pow(std::abs(base), dc_.delta - 1.0);
    Jac2 j;
    j.dy_dy = front;
    j.dy_dth = front * dphi;
    j.dth_dy = -lkg / base;
    j.dth_dth = 1.0 + cfg_.mu2 * cfg_.psi2.deriv(p.theta, 1) - lkg * dphi / base;
    return j;
}

OrbitResult run_orbit(const MapEngine& eng, char which, ReturnMapPoint p0,
                      int burn_in, int n) {
    OrbitResult out;
    out.rows.reserve(n);
    ReturnMapPoint p{p0.y, wrap_angle(p0.theta)};
    const int total = burn_in + n;
    for (int k = 0; k < total; ++k) {
        MapResult r = (which == 'F') ? eng.return_map_F(p) : eng.return_map_G(p);
        if (r.status == MapStatus::SingularHit || r.status == MapStatus::StableManifoldHit) {
            ++out.skipped;
            out.last_status = r.status;
            p.theta = wrap_angle(p.theta + 1e-9);
            --k;  // retry the same index after the jitter
            if (out.skipped > total) break;  // give up on pathological orbits
            continue;
        }
        if (r.status != MapStatus::Ok) {
            out.last_status = r.status;
            break;
        }
        p = {r.p.y, wrap_angle(r.p.theta)};
        if (k >= burn_in)
            out.rows.push_back({k - burn_in, p.y, p.theta, r.flight_time});
    }
    return out;
}

std::string orbit_to_csv(const OrbitResult& orbit) {
    std::string out = "n,y,theta,flight_time\n";
    char buf[160];
    for (const auto& row : orbit.rows) {
        std::snprintf(buf, sizeof buf, "%d,%.12g,%.12g,%.12g\n",
                      row.n, row.y, row.theta, row.flight_time);
        out += buf;
    }
    return out;
}

} // namespace hetlab
