#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "hetlab/angles.hpp"
#include "hetlab/config_io.hpp"
#include "hetlab/model.hpp"
#include "hetlab/singular.hpp"

using namespace hetlab;

namespace {

ModelConfig base_config() {
    return load_model_config(std::string(FIXTURE_DIR) + "/base.cfg");
}

ModelConfig chaos30_config() {
    ModelConfig cfg = base_config();
    cfg.omega = 10.0;  // omega * K_F = 30
    return cfg;
}

// Least-squares slope of y against x.
double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// f(theta + beta) as a trigonometric polynomial in theta.
ForcingProfile shift_profile(const ForcingProfile& f, double beta) {
    std::vector<double> ca = f.cosine_coeffs();
    std::vector<double> sa = f.sine_coeffs();
    const size_t m = std::max(ca.size(), sa.size());
    ca.resize(m, 0.0);
    sa.resize(m, 0.0);
    std::vector<double> cb(m), sb(m);
    for (size_t j = 0; j < m; ++j) {
        const double k = static_cast<double>(j + 1);
        cb[j] = ca[j] * std::cos(k * beta) + sa[j] * std::sin(k * beta);
        sb[j] = -ca[j] * std::sin(k * beta) + sa[j] * std::cos(k * beta);
    }
    return ForcingProfile(f.constant_term(), cb, sb);
}

}  // namespace

TEST_CASE("map formula, derivatives, and degree-one lift") {
    CircleMapSpec spec;
    spec.a = 0.3;
    spec.L = 2.0;
    spec.xi = 0.5;
    spec.profile = ForcingProfile(2.0, {}, {1.0});
    spec.psi_term = PsiTerm{0.01, ForcingProfile(0.0, {1.0}, {})};
    CircleMap h(spec);

    for (double th : {0.0, 0.9, 2.5, 4.4, 6.1}) {
        const double want =
            th + 0.5 + 0.3 + 0.01 * std::cos(th) - 2.0 * std::log(2.0 + std::sin(th));
        CHECK(h.value(th) == doctest::Approx(want).epsilon(1e-14));

        const double fd = (h.value(th + 5e-7) - h.value(th - 5e-7)) / 1e-6;
        CHECK(h.deriv(th) == doctest::Approx(fd).epsilon(1e-7));
        const double fd2 = (h.deriv(th + 5e-7) - h.deriv(th - 5e-7)) / 1e-6;
        CHECK(h.deriv2(th) == doctest::Approx(fd2).epsilon(1e-6));

        // Degree-one lift.
        CHECK(h.value(th + TWO_PI) - h.value(th) == doctest::Approx(TWO_PI).epsilon(1e-13));
    }

    // The parameter enters additively: d/da h == 1.
    CircleMapSpec up = spec;
    up.a += 1e-6;
    CircleMap hu(up);
    CHECK((hu.value(1.1) - h.value(1.1)) / 1e-6 == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("constant profile gives a rigid rotation") {
    CircleMapSpec spec;
    spec.a = 0.7;
    spec.L = 3.0;
    spec.xi = 0.3 + 0.4;
    spec.profile = ForcingProfile::constant(2.0);
    CircleMap h(spec);

    CHECK(h.deriv(1.234) == 1.0);
    CHECK(critical_set(h).empty());

    auto rep = is_diffeomorphism(h);
    CHECK(rep.is_diffeo);
    CHECK(rep.min_deriv == doctest::Approx(1.0));
    CHECK(rep.sup_profile_ratio == doctest::Approx(0.0));
    CHECK(rep.contraction_product == doctest::Approx(0.0));

    const double expect = wrap_angle(0.7 + 0.7 - 3.0 * std::log(2.0)) / TWO_PI;
    auto rot = rotation_number(h, 0.0, 20000);
    CHECK(std::abs(rot.rho - expect) < 1e-6);
    CHECK(rot.rho >= 0.0);
    CHECK(rot.rho < 1.0);

    auto ly = lyapunov_1d(h, 0.1);
    CHECK(ly.lambda == 0.0);
    CHECK(ly.reliable);
    CHECK(!ly.superstable);
    CHECK(ly.singular_hits == 0);
}

TEST_CASE("singular limit from config matches the closed form") {
    auto cfg = base_config();
    const double a = 0.9;

    auto hF = singular_limit_from_config(cfg, a, 'F');
    CHECK(hF.spec().L == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(!hF.spec().singular);
    CHECK(hF.profile_zeros().empty());
    for (double th : {0.1, 1.7, 3.0, 5.5}) {
        const double want = th + 0.7 + a - 3.0 * std::log(2.0 + std::sin(th));
        CHECK(hF.value(th) == doctest::Approx(want).epsilon(1e-12));
    }

    auto hG = singular_limit_from_config(cfg, a, 'G');
    CHECK(hG.spec().L == doctest::Approx(3.0).epsilon(1e-14));
    CHECK(hG.spec().singular);
    REQUIRE(hG.profile_zeros().size() == 2);
    CHECK(circle_dist(hG.profile_zeros()[0], 0.0) < 1e-9);
    CHECK(circle_dist(hG.profile_zeros()[1], PI) < 1e-9);
    for (double th : {0.4, 2.0, 4.0}) {
        const double want = th + 0.7 + a - 3.0 * std::log(std::abs(std::sin(th)));
        CHECK(hG.value(th) == doctest::Approx(want).epsilon(1e-12));
    }

    // Log spikes: |h'| blows up like L/dist near a profile zero.
    CHECK(hG.near_singularity(0.0));
    CHECK(hG.near_singularity(PI));
    CHECK(!hG.near_singularity(1.0));
    CHECK(std::abs(hG.deriv(1e-4)) > 1e3);
    CHECK(std::abs(hG.deriv(PI - 1e-4)) > 1e3);
}

TEST_CASE("critical set matches the analytic roots") {
    // h' = 1 - 3 cos/(2+sin) = 0  <=>  3 cos th - sin th = 2
    //  <=>  sqrt(10) cos(th + atan(1/3)) = 2.
    auto h = singular_limit_from_config(base_config(), 0.25, 'F');
    auto C = critical_set(h);
    REQUIRE(C.size() == 2);
    const double phase = std::atan(1.0 / 3.0);
    const double half = std::acos(2.0 / std::sqrt(10.0));
    const double r1 = wrap_angle(half - phase);
    const double r2 = wrap_angle(-half - phase);
    CHECK(C[0] == doctest::Approx(std::min(r1, r2)).epsilon(1e-10));
    CHECK(C[1] == doctest::Approx(std::max(r1, r2)).epsilon(1e-10));
    CHECK(std::is_sorted(C.begin(), C.end()));
    for (double c : C) {
        CHECK(std::abs(h.deriv(c)) < 1e-9);
        CHECK(std::abs(h.deriv2(c)) > 1e-8);
    }
}

TEST_CASE("degenerate critical point is rejected") {
    // Critical standard family h = theta + a - sin(theta): h'(0) = h''(0) = 0.
    CircleMapSpec spec;
    spec.a = 0.2;
    spec.profile = ForcingProfile::constant(1.0);
    spec.psi_term = PsiTerm{1.0, ForcingProfile(0.0, {}, {-1.0})};
    CircleMap h(spec);
    CHECK(h.deriv(0.0) == 0.0);
    CHECK(h.deriv2(0.0) == 0.0);
    CHECK_THROWS_AS(critical_set(h), DegenerateCritical);
}

TEST_CASE("diffeomorphism margin tracks L times the profile ratio") {
    // sup |phi1'/phi1| = 1/sqrt(3) for 2 + sin.
    auto cfg = base_config();

    cfg.omega = 0.5;  // L = 1.5, product = sqrt(3)/2 < 1
    auto h_lo = singular_limit_from_config(cfg, 0.4, 'F');
    auto rep_lo = is_diffeomorphism(h_lo);
    CHECK(rep_lo.sup_profile_ratio == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-6));
    CHECK(rep_lo.contraction_product == doctest::Approx(std::sqrt(3.0) / 2.0).epsilon(1e-6));
    CHECK(rep_lo.is_diffeo);
    CHECK(rep_lo.min_deriv > 0.0);
    CHECK(critical_set(h_lo).empty());

    cfg.omega = 1.0;  // L = 3, product = sqrt(3) > 1
    auto h_hi = singular_limit_from_config(cfg, 0.4, 'F');
    auto rep_hi = is_diffeomorphism(h_hi);
    CHECK(rep_hi.contraction_product == doctest::Approx(std::sqrt(3.0)).epsilon(1e-6));
    CHECK(!rep_hi.is_diffeo);
    CHECK(rep_hi.min_deriv < 0.0);

    // Log singularities disqualify outright.
    auto hG = singular_limit_from_config(cfg, 0.4, 'G');
    auto rep_g = is_diffeomorphism(hG);
    CHECK(!rep_g.is_diffeo);
    CHECK(std::isinf(rep_g.sup_profile_ratio));
}

TEST_CASE("mu lattice values, ordering, and back-substitution") {
    CHECK(mu_from_index(0.0, 3, TWO_PI) == doctest::Approx(std::exp(-3.0)).epsilon(1e-15));

    const double omegaK = 30.0;
    const double a = 0.7;
    auto lat = mu_lattice(a, 1, 6, omegaK);
    REQUIRE(lat.size() == 6);
    for (int n = 1; n <= 6; ++n) {
        const double want = std::exp(-(TWO_PI * n + a) / omegaK);
        CHECK(lat[n - 1] == doctest::Approx(want).epsilon(1e-15));
        CHECK(lat[n - 1] == doctest::Approx(mu_from_index(a, n, omegaK)).epsilon(1e-15));
    }
    for (size_t i = 0; i + 1 < lat.size(); ++i) CHECK(lat[i + 1] < lat[i]);

    // a recovers from mu up to the 2*pi*n winding.
    for (double mu : lat) CHECK(circle_dist(wrap_angle(-omegaK * std::log(mu)), a) < 1e-10);
}

TEST_CASE("return map converges to the singular limit along the lattice") {
    auto cfg = base_config();  // L = 3, delta = 4, mu2 = 0
    const double a = 0.7;
    auto rows = singular_limit_convergence(cfg, a, 1, 8);
    REQUIRE(rows.size() == 8);

    std::vector<double> ln_mu, ln_f1;
    for (size_t i = 0; i < rows.size(); ++i) {
        CHECK(rows[i].n == static_cast<int>(i) + 1);
        CHECK(rows[i].mu == doctest::Approx(mu_from_index(a, rows[i].n, 3.0)).epsilon(1e-14));
        CHECK(rows[i].sup_f1 > 0.0);
        CHECK(rows[i].sup_dist > 0.0);
        if (i > 0) CHECK(rows[i].sup_dist < rows[i - 1].sup_dist);
        ln_mu.push_back(std::log(rows[i].mu));
        ln_f1.push_back(std::log(rows[i].sup_f1));
    }

    // sup |F1| ~ mu^(delta-1): slope 3.  Early rows carry the O(mu) bias of
    // the correction terms, so fit from n = 3 on.
    std::vector<double> xs(ln_mu.begin() + 2, ln_mu.end());
    std::vector<double> ys(ln_f1.begin() + 2, ln_f1.end());
    CHECK(fit_slope(xs, ys) == doctest::Approx(3.0).epsilon(0.02 / 3.0));

    // sup-distance contracts by e^{-2*pi/L} per step at first order.
    const double want_ratio = std::exp(-TWO_PI / 3.0);
    const double last_ratio = rows[7].sup_dist / rows[6].sup_dist;
    CHECK(last_ratio == doctest::Approx(want_ratio).epsilon(0.05));
}

TEST_CASE("on the lattice the angular return map wraps onto the limit") {
    auto cfg = base_config();
    const double a = 0.7;
    const int n = 4;
    cfg.mu1 = mu_from_index(a, n, 3.0);
    MapEngine eng(cfg);
    auto h = singular_limit_from_config(cfg, a, 'F');
    for (double th : {0.2, 1.3, 2.9, 5.1}) {
        auto r = eng.return_map_F({0.0, th});
        REQUIRE(r.status == MapStatus::Ok);
        CHECK(circle_dist(wrap_angle(r.p.theta), wrap_angle(h.value(th))) < 1e-9);
    }
}

TEST_CASE("rotation number is stable against the iterate budget") {
    auto cfg = base_config();
    cfg.omega = 0.5;  // diffeo regime
    auto h = singular_limit_from_config(cfg, 0.4, 'F');
    auto r1 = rotation_number(h, 0.0, 10000);
    auto r2 = rotation_number(h, 0.0, 100000);
    CHECK(std::abs(r1.rho - r2.rho) < 1e-3);
    CHECK(r2.error_bound < r1.error_bound);
    CHECK(r1.n == 10000);
}

TEST_CASE("zero derivative on the orbit yields the superstable sentinel") {
    // Superstable fixed point of the critical standard map at a = 0.
    CircleMapSpec spec;
    spec.profile = ForcingProfile::constant(1.0);
    spec.psi_term = PsiTerm{1.0, ForcingProfile(0.0, {}, {-1.0})};
    CircleMap h(spec);
    auto ly = lyapunov_1d(h, 0.0, 0, 100);
    CHECK(ly.superstable);
    CHECK(std::isinf(ly.lambda));
    CHECK(ly.lambda < 0.0);
}

TEST_CASE("lyapunov exponent is conjugacy invariant in the expanding regime") {
    auto cfg = chaos30_config();
    const double a_star = TWO_PI * 0.5 / 256.0;
    auto h = singular_limit_from_config(cfg, a_star, 'F');
    auto ly = lyapunov_1d(h, 0.1, 1000, 20000);
    CHECK(ly.reliable);
    CHECK(ly.lambda > 0.1);

    const double beta = 0.83;
    CircleMapSpec shifted = h.spec();
    shifted.profile = shift_profile(h.spec().profile, beta);
    if (shifted.psi_term)
        shifted.psi_term->psi = shift_profile(shifted.psi_term->psi, beta);
    CircleMap g(shifted);
    // g = R_{-beta} o h o R_beta, so the exponents agree.
    auto lyg = lyapunov_1d(g, wrap_angle(0.1 - beta), 1000, 20000);
    CHECK(lyg.lambda == doctest::Approx(ly.lambda).epsilon(2e-2 / ly.lambda));
}

TEST_CASE("engineered critical collision is refuted at the first iterate") {
    auto cfg = chaos30_config();
    auto h0 = singular_limit_from_config(cfg, 0.0, 'F');
    auto crit = critical_set(h0);
    REQUIRE(crit.size() == 2);

    // Choose a so that h_a(c0) = c1 exactly.
    const double a_bad = wrap_angle(crit[1] - h0.value(crit[0]));
    auto hbad = singular_limit_from_config(cfg, a_bad, 'F');
    auto cert = misiurewicz_check(hbad, 1e-3, 50);
    CHECK(cert.status == "refuted");
    REQUIRE(cert.witness.has_value());
    CHECK(cert.witness->n == 1);
    CHECK(cert.witness->dist < 1e-8);
    CHECK(circle_dist(cert.witness->point, crit[1]) < 1e-6);
}

TEST_CASE("expanding parameter certifies to horizon with positive growth") {
    auto cfg = chaos30_config();
    const double a_star = TWO_PI * 0.5 / 256.0;
    auto h = singular_limit_from_config(cfg, a_star, 'F');
    auto cert = misiurewicz_check(h, 1e-3, 50);
    CHECK(cert.status == "certified-to-horizon");
    CHECK(cert.horizon == 50);
    CHECK(cert.delta0 == doctest::Approx(1e-3));
    CHECK(cert.critical_points.size() == 2);
    CHECK(cert.lambda0 > 0.0);
    CHECK(cert.b0 > 0.0);
    CHECK(cert.min_h2 > 1e-8);
    // Frozen regression values for this parameter.
    CHECK(std::exp(cert.lambda0) == doctest::Approx(7.46).epsilon(0.10));
    CHECK(cert.th_flag == (std::exp(cert.lambda0) > 2.0));
    CHECK(cert.th_flag);
    CHECK(cert.h7a_flag == (std::exp(cert.lambda0 / 3.0) > 2.0));
    CHECK(!cert.witness.has_value());

    auto json = certificate_to_json(cert);
    CHECK(json.find("certified-to-horizon") != std::string::npos);
    CHECK(json.find("lambda0") != std::string::npos);
}

TEST_CASE("parameter scan finds a positive Collet-Eckmann fraction") {
    auto cfg = chaos30_config();
    const double a_star = TWO_PI * 0.5 / 256.0;
    auto h = singular_limit_from_config(cfg, a_star, 'F');
    auto cert = misiurewicz_check(h, 1e-3, 50);
    REQUIRE(cert.status == "certified-to-horizon");

    auto ce = ce_parameter_scan(h.spec(), cert, 0.5 * std::log(2.0), 0.2, 30, 64);
    REQUIRE(ce.a_values.size() == 64);
    REQUIRE(ce.ce_ok.size() == 64);
    CHECK(ce.lambda == doctest::Approx(0.5 * std::log(2.0)));
    CHECK(ce.alpha == doctest::Approx(0.2));
    CHECK(ce.lambda_cap_ok);
    CHECK(ce.alpha_cap_ok);
    int ok = 0;
    for (bool b : ce.ce_ok) ok += b ? 1 : 0;
    CHECK(ce.fraction == doctest::Approx(static_cast<double>(ok) / 64.0).epsilon(1e-12));
    CHECK(ce.fraction > 0.0);
    // Frozen regression value: 58 of 64 cells pass at this horizon.
    CHECK(ce.fraction == doctest::Approx(0.90625).epsilon(0.05));
}

TEST_CASE("critical values cross their continuations transversally") {
    auto cfg = chaos30_config();
    const double a_star = TWO_PI * 0.5 / 256.0;
    auto h = singular_limit_from_config(cfg, a_star, 'F');
    auto rows = admissibility_transversality(h.spec(), a_star);
    REQUIRE(rows.size() == 2);
    for (const auto& row : rows) {
        CHECK(row.direct_term == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(std::abs(row.xi_value) > 1e-6);
        CHECK(row.dbeta_da ==
              doctest::Approx(row.direct_term - row.xi_value).epsilon(1e-9));
    }
    // Frozen regression values.
    CHECK(rows[0].c == doctest::Approx(1.470796).epsilon(1e-3));
    CHECK(rows[0].xi_value == doctest::Approx(0.864710).epsilon(1e-2));
    CHECK(rows[1].c == doctest::Approx(4.745747).epsilon(1e-3));
    CHECK(rows[1].xi_value == doctest::Approx(0.937576).epsilon(1e-2));
}

TEST_CASE("rigid rotations have no critical values to continue") {
    auto cfg = base_config();
    cfg.phi1 = ForcingProfile::constant(2.0);
    auto h = singular_limit_from_config(cfg, 0.7, 'F');
    auto rows = admissibility_transversality(h.spec(), 0.7);
    CHECK(rows.empty());

    auto rot = rotation_number(h, 0.0, 20000);
    const double expect = wrap_angle(0.7 + 0.7 - 3.0 * std::log(2.0)) / TWO_PI;
    CHECK(std::abs(rot.rho - expect) < 1e-6);
}
