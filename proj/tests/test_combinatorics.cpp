#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "hetlab/angles.hpp"
#include "hetlab/combinatorics.hpp"
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

// Closed-arc containment up to a lift shift: [lo, hi] + 2*pi*k inside [A, B].
bool arc_contains(double A, double B, double lo, double hi, double tol = 1e-9) {
    const double kmin = std::ceil((A - lo - tol) / TWO_PI);
    const double kmax = std::floor((B - hi + tol) / TWO_PI);
    return kmin <= kmax;
}

// Sampled image of h over [lo, hi]; valid because h is monotone there.
std::pair<double, double> brute_image(const CircleMap& h, double lo, double hi) {
    double mn = h.value(lo), mx = mn;
    const int N = 200000;
    for (int i = 1; i <= N; ++i) {
        const double v = h.value(lo + (hi - lo) * i / N);
        mn = std::min(mn, v);
        mx = std::max(mx, v);
    }
    return {mn, mx};
}

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

TEST_CASE("transition matrix matches a sampled-image oracle") {
    auto h = singular_limit_from_config(base_config(), 0.25, 'F');
    auto g = transition_matrix(h);
    REQUIRE(g.breakpoints.size() == 2);
    REQUIRE(g.intervals.size() == 2);
    REQUIRE(g.Q.size() == 2);

    // Breakpoints are exactly the critical set (no profile zeros for F).
    auto C = critical_set(h);
    for (size_t i = 0; i < 2; ++i)
        CHECK(g.breakpoints[i] == doctest::Approx(C[i]).epsilon(1e-12));

    // Intervals partition the circle in lift coordinates.
    for (size_t i = 0; i < 2; ++i) {
        CHECK(g.intervals[i].second > g.intervals[i].first);
        CHECK(g.intervals[i].first == doctest::Approx(g.breakpoints[i]).epsilon(1e-12));
    }
    const double total = (g.intervals[0].second - g.intervals[0].first) +
                         (g.intervals[1].second - g.intervals[1].first);
    CHECK(total == doctest::Approx(TWO_PI).epsilon(1e-12));

    for (size_t i = 0; i < 2; ++i) {
        auto [A, B] = brute_image(h, g.intervals[i].first, g.intervals[i].second);
        for (size_t m = 0; m < 2; ++m) {
            const int want =
                arc_contains(A, B, g.intervals[m].first, g.intervals[m].second) ? 1 : 0;
            CHECK(g.Q[i][m] == want);
        }
    }

    // At L = 3 the short branch image covers no full interval, so the graph
    // cannot mix.
    CHECK(g.Q[0] == std::vector<int>{1, 1});
    CHECK(g.Q[1] == std::vector<int>{0, 0});
    CHECK(!g.mixing_N.has_value());
}

TEST_CASE("strongly expanding map mixes in one step") {
    auto h = singular_limit_from_config(chaos30_config(), 0.3, 'F');
    auto g = transition_matrix(h);
    REQUIRE(g.Q.size() == 2);
    for (const auto& row : g.Q)
        for (int v : row) CHECK(v == 1);
    REQUIRE(g.mixing_N.has_value());
    CHECK(*g.mixing_N == 1);
    CHECK(g.lambda0 > 0.0);
    CHECK(g.h7a == (std::exp(g.lambda0 / 3.0) > 2.0));

    auto text = transition_graph_to_text(g);
    CHECK(text.find('1') != std::string::npos);
    auto json = transition_graph_to_json(g);
    CHECK(json.find("mixing_N") != std::string::npos);
}

TEST_CASE("log-singular branches map onto half lines") {
    auto h = singular_limit_from_config(base_config(), 0.25, 'G');
    auto g = transition_matrix(h);
    // Two profile zeros plus two critical points of the G limit.
    REQUIRE(g.breakpoints.size() == 4);
    // Every interval touches a zero, so every row is full.
    for (const auto& row : g.Q)
        for (int v : row) CHECK(v == 1);
    REQUIRE(g.mixing_N.has_value());
    CHECK(*g.mixing_N == 1);

    // Zeros of sin and criticals at tan(theta) = 3 interleave.
    CHECK(g.breakpoints[0] == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(g.breakpoints[1] == doctest::Approx(std::atan(3.0)).epsilon(1e-9));
    CHECK(g.breakpoints[2] == doctest::Approx(PI).epsilon(1e-9));
    CHECK(g.breakpoints[3] == doctest::Approx(PI + std::atan(3.0)).epsilon(1e-9));
}

TEST_CASE("diffeomorphisms produce the degenerate graph") {
    auto cfg = base_config();
    cfg.phi1 = ForcingProfile::constant(2.0);
    auto h = singular_limit_from_config(cfg, 0.7, 'F');
    auto g = transition_matrix(h);
    CHECK(g.breakpoints.empty());
    CHECK(g.intervals.empty());
    CHECK(g.Q.empty());
    CHECK(!g.mixing_N.has_value());
}

TEST_CASE("graph structure is conjugacy invariant") {
    auto h = singular_limit_from_config(chaos30_config(), 0.3, 'F');
    auto g = transition_matrix(h);

    CircleMapSpec shifted = h.spec();
    shifted.profile = shift_profile(h.spec().profile, 0.83);
    auto g2 = transition_matrix(CircleMap(shifted));

    REQUIRE(g2.Q.size() == g.Q.size());
    auto row_sums = [](const TransitionGraph& t) {
        std::vector<int> s;
        for (const auto& row : t.Q) {
            int acc = 0;
            for (int v : row) acc += v;
            s.push_back(acc);
        }
        std::sort(s.begin(), s.end());
        return s;
    };
    CHECK(row_sums(g2) == row_sums(g));
    CHECK(g2.mixing_N.has_value() == g.mixing_N.has_value());
    if (g.mixing_N) CHECK(*g2.mixing_N == *g.mixing_N);
}

TEST_CASE("jdelta entries resolve and reach the critical components") {
    auto h = singular_limit_from_config(chaos30_config(), 0.3, 'F');
    auto jd = build_jdelta(h, 1e-3, 4096);
    CHECK(jd.delta == doctest::Approx(1e-3));
    REQUIRE(jd.critical_points.size() == 2);
    REQUIRE(jd.entries.size() == 4);  // two sides per critical point

    for (const auto& e : jd.entries) {
        CHECK(e.resolved);
        CHECK(e.failure.empty());
        CHECK(e.n >= 1);
        CHECK(e.j >= 0);
        CHECK(e.j < 2);
        CHECK(e.J_hi > e.J_lo);
        // J sits inside the declared one-sided component.
        const double c = jd.critical_points[e.vertex];
        if (e.side < 0) {
            CHECK(e.J_lo >= c - 1e-3 - 1e-12);
            CHECK(e.J_hi <= c + 1e-12);
        } else {
            CHECK(e.J_lo >= c - 1e-12);
            CHECK(e.J_hi <= c + 1e-3 + 1e-12);
        }
        CHECK(!e.diam_trace.empty());
        if (e.diam_trace.size() > 2)
            CHECK(e.diam_trace.back() > e.diam_trace.front());
    }

    CHECK(jd.edges.size() == 4);

    // accessible_vertices agrees with reachability computed from the edges.
    auto acc = accessible_vertices(jd);
    REQUIRE(acc.size() == 2);
    bool reach[2][2] = {{false, false}, {false, false}};
    for (int v = 0; v < 2; ++v) reach[v][v] = true;
    for (int pass = 0; pass < 2; ++pass)
        for (auto [u, w] : jd.edges)
            for (int s = 0; s < 2; ++s)
                if (reach[s][u]) reach[s][w] = true;
    for (int v = 0; v < 2; ++v) {
        const bool want = reach[0][v] && reach[1][v];
        CHECK(acc[v] == want);
    }

    auto json = jdelta_to_json(jd);
    CHECK(json.find("entries") != std::string::npos);
    CHECK(!jdelta_to_text(jd).empty());
}

TEST_CASE("jdelta rejects a delta wider than the critical gaps") {
    auto h = singular_limit_from_config(chaos30_config(), 0.3, 'F');
    CHECK_THROWS_AS(build_jdelta(h, 1.6, 4096), std::invalid_argument);
}

TEST_CASE("superstable sinks near a certified parameter") {
    auto cfg = chaos30_config();
    const double a_star = TWO_PI * 0.5 / 256.0;
    auto sinks = find_superstable_sinks(cfg, a_star, 0.5, 8);
    REQUIRE(!sinks.empty());
    CHECK(sinks.size() <= 256);

    double prev_mu = std::numeric_limits<double>::infinity();
    int rank = 0;
    for (const auto& s : sinks) {
        ++rank;
        CHECK(s.a >= a_star - 0.5 - 1e-9);
        CHECK(s.a <= a_star + 0.5 + 1e-9);
        CHECK(s.period >= 1);
        CHECK(s.period <= 8);
        REQUIRE(static_cast<int>(s.orbit.size()) == s.period);
        CHECK(s.multiplier < 1e-6);
        CHECK(s.n_index == rank);
        CHECK(s.mu < prev_mu);
        prev_mu = s.mu;

        // mu back-substitutes to a modulo 2*pi.
        CHECK(circle_dist(wrap_angle(-30.0 * std::log(s.mu)), s.a) < 1e-10);

        // The orbit starts on a critical point and closes up.
        auto h = singular_limit_from_config(cfg, s.a, 'F');
        auto C = critical_set(h);
        double dmin = TWO_PI;
        for (double c : C) dmin = std::min(dmin, circle_dist(s.orbit[0], c));
        CHECK(dmin < 1e-6);
        double th = s.orbit[0];
        double mult = 1.0;
        for (int k = 0; k < s.period; ++k) {
            CHECK(circle_dist(th, s.orbit[k]) < 1e-7);
            mult *= std::abs(h.deriv(th));
            th = wrap_angle(h.value(th));
        }
        CHECK(circle_dist(th, s.orbit[0]) < 1e-7);
        CHECK(std::abs(mult - s.multiplier) < 1e-9);
    }

    // The cycle is strongly attracting in the time average.
    const auto& s0 = sinks.front();
    auto h = singular_limit_from_config(cfg, s0.a, 'F');
    auto ly = lyapunov_1d(h, s0.orbit[0], 0, 50 * s0.period);
    CHECK(ly.lambda < -1.0);
}

TEST_CASE("rigid rotations have no superstable sinks") {
    auto cfg = chaos30_config();
    cfg.phi1 = ForcingProfile::constant(2.0);
    auto sinks = find_superstable_sinks(cfg, 0.3, 0.5, 8);
    CHECK(sinks.empty());
}
