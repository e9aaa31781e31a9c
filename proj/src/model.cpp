#include "hetlab/model.hpp"

#include <cmath>
#include <cstdio>

#include "hetlab/angles.hpp"

namespace hetlab {

namespace {

std::string fmt(const char* f, double a, double b = 0.0) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a, b);
    return buf;
}

void check_saddle(ValidationReport& rep, const char* id, const SaddleData& s) {
    CheckResult r{id, true, {}};
    if (!(s.e > 0.0) || !(s.c > s.e)) {
        r.pass = false;
        r.witness = fmt("c=%.17g, e=%.17g (need c > e > 0)", s.c, s.e);
    } else {
        r.witness = fmt("c - e = %.17g", s.c - s.e);
    }
    rep.checks.push_back(std::move(r));
}

} // namespace

ValidationReport validate(const ModelConfig& cfg) {
    ValidationReport rep;

    check_saddle(rep, "saddle1-dissipative", cfg.saddle1);
    check_saddle(rep, "saddle2-dissipative", cfg.saddle2);

    {
        CheckResult r{"omega-positive", cfg.omega > 0.0 && std::isfinite(cfg.omega),
                      fmt("omega=%.17g", cfg.omega)};
        r.pass = cfg.omega > 0.0 && std::isfinite(cfg.omega);
        rep.checks.push_back(std::move(r));
    }
    {
        CheckResult r{"eps0-positive", cfg.eps0 > 0.0, fmt("eps0=%.17g", cfg.eps0)};
        rep.checks.push_back(std::move(r));
    }
    {
        CheckResult r{"b-nondegenerate", cfg.b1 != 0.0 && cfg.b2 != 0.0,
                      fmt("b1=%.17g, b2=%.17g", cfg.b1, cfg.b2)};
        rep.checks.push_back(std::move(r));
    }
    {
        CheckResult r{"mu-nonnegative", cfg.mu1 >= 0.0 && cfg.mu2 >= 0.0,
                      fmt("mu1=%.17g, mu2=%.17g", cfg.mu1, cfg.mu2)};
        rep.checks.push_back(std::move(r));
    }
    {
        const SectionBounds& s = cfg.sections;
        const bool ok = s.in1 > 0 && s.in2 > 0 && s.out1 > 0 && s.out2 > 0;
        rep.checks.push_back({"sections-positive", ok,
                              fmt("in1=%.17g, out2=%.17g", s.in1, s.out2)});
    }

    // Splitting-profile sign structure, enforced only for active parameters.
    if (cfg.mu1 > 0.0) {
        CheckResult r{"phi1-positive", true, {}};
        const double tmin = cfg.phi1.argmin_on_circle();
        const double vmin = cfg.phi1.eval(tmin);
        r.pass = vmin > 0.0;
        r.witness = fmt("min phi1 = %.17g at theta = %.17g", vmin, tmin);
        rep.checks.push_back(std::move(r));
    }
    if (cfg.mu2 > 0.0) {
        CheckResult r{"phi2-sign-changing", true, {}};
        const auto zeros = cfg.phi2.transversal_zeros();
        r.pass = zeros.size() >= 2;
        r.witness = fmt("transversal zeros = %.17g", static_cast<double>(zeros.size()));
        rep.checks.push_back(std::move(r));
    }

    // Contraction exponents must exceed one after corrections.
    {
        const DerivedConstants dc = derive_constants(cfg);
        CheckResult r{"delta-expanding", dc.delta1 > 1.0 && dc.delta2 > 1.0,
                      fmt("delta1=%.17g, delta2=%.17g", dc.delta1, dc.delta2)};
        rep.checks.push_back(std::move(r));
    }

    rep.ok = true;
    for (const auto& c : rep.checks) rep.ok = rep.ok && c.pass;
    return rep;
}

DerivedConstants derive_constants(const ModelConfig& cfg) {
    DerivedConstants dc;
    const double e1 = cfg.saddle1.e + cfg.w.w2_1.eval(0.0);
    const double e2 = cfg.saddle2.e + cfg.w.w2_2.eval(0.0);
    const double c1 = cfg.saddle1.c + cfg.w.w1_1.eval(0.0);
    const double c2 = cfg.saddle2.c + cfg.w.w1_2.eval(0.0);
    dc.delta1 = c1 / e1;
    dc.delta2 = c2 / e2;
    dc.delta = dc.delta1 * dc.delta2;
    dc.K_F = 1.0 / e2 + dc.delta2 / e1;
    dc.K_G = 1.0 / e1 + dc.delta1 / e2;
    dc.xi = cfg.xi1 + cfg.xi2;
    return dc;
}

} // namespace hetlab
