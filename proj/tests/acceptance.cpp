// Acceptance gate: one line per criterion, "PASS criterion-N: ..." or
// "FAIL criterion-N: ... -- reason". Exit code is the number of failures.
// Tolerances are part of the contract; do not loosen them here.
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hetlab/angles.hpp"
#include "hetlab/combinatorics.hpp"
#include "hetlab/config_io.hpp"
#include "hetlab/maps.hpp"
#include "hetlab/melnikov.hpp"
#include "hetlab/model.hpp"
#include "hetlab/singular.hpp"
#include "hetlab/sweep.hpp"
#include "hetlab/tangle.hpp"

namespace fs = std::filesystem;
using namespace hetlab;

namespace {

struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void req(bool cond, const std::string& msg) {
    if (!cond) throw Failure(msg);
}

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

ModelConfig fixture(const std::string& name) {
    return load_model_config(std::string(FIXTURE_DIR) + "/" + name);
}

std::string fixture_path(const std::string& name) {
    return std::string(FIXTURE_DIR) + "/" + name;
}

double rel_err(double a, double b) {
    const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
    return std::abs(a - b) / scale;
}

// Least-squares slope of y against x.
double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const size_t n = x.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < n; ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    req(in.good(), "cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---- criterion bodies ----------------------------------------------------

void criterion_constants() {
    const DerivedConstants dc = derive_constants(fixture("base.cfg"));
    req(dc.K_F == 3.0, "K_F = " + num(dc.K_F) + ", want exactly 3");
    req(dc.K_G == 3.0, "K_G = " + num(dc.K_G) + ", want exactly 3");
    req(dc.delta == 4.0, "delta = " + num(dc.delta) + ", want exactly 4");
}

void criterion_composition() {
    std::mt19937_64 rng(1234);
    std::uniform_real_distribution<double> uy(0.02, 0.3);
    std::uniform_real_distribution<double> uth(0.0, TWO_PI);

    auto compare = [&](const ModelConfig& cfg, char which) {
        MapEngine eng(cfg);
        req(which == 'F' ? eng.closed_form_F_applies()
                         : eng.closed_form_G_applies(),
            "closed form does not apply to the fixture");
        double worst = 0.0;
        for (int i = 0; i < 10000; ++i) {
            const ReturnMapPoint p{uy(rng), uth(rng)};
            const MapResult closed =
                which == 'F' ? eng.return_map_F(p) : eng.return_map_G(p);
            const MapResult comp =
                which == 'F' ? eng.compose_F(p) : eng.compose_G(p);
            req(closed.status == MapStatus::Ok && comp.status == MapStatus::Ok,
                "non-Ok status at y=" + num(p.y) + ", theta=" + num(p.theta));
            worst = std::max(worst, rel_err(closed.p.y, comp.p.y));
            worst = std::max(worst,
                             std::abs(closed.p.theta - comp.p.theta) /
                                 std::max(1.0, std::abs(closed.p.theta)));
        }
        req(worst < 1e-10, std::string(1, which) +
                               " closed form vs composition: rel err " +
                               num(worst));
    };
    compare(fixture("base.cfg"), 'F');
    compare(fixture("gchaos20.cfg"), 'G');
}

void criterion_singular_convergence() {
    const auto rows = singular_limit_convergence(fixture("base.cfg"), 0.7, 1, 8);
    req(rows.size() == 8, "expected 8 lattice rows");

    // Asymptotic slope of sup|F1| in ln mu1 (pre-asymptotic rows n < 3 skipped).
    std::vector<double> x, y;
    for (const auto& r : rows)
        if (r.n >= 3) {
            x.push_back(std::log(r.mu));
            y.push_back(std::log(r.sup_f1));
        }
    const double slope = fit_slope(x, y);
    req(std::abs(slope - 3.0) <= 0.02,
        "sup|F1| slope " + num(slope) + ", want 3 +- 0.02");

    for (size_t i = 1; i < rows.size(); ++i)
        req(rows[i].sup_dist < rows[i - 1].sup_dist,
            "sup_dist not decreasing at n=" + num(rows[i].n));
}

void criterion_invariant_curve() {
    const ModelConfig cfg = fixture("curve_regime.cfg");
    const AttractorClass cls = classify_cell(cfg, 'F');
    req(cls.label == "invariant-curve", "label " + cls.label);
    req(cls.winding == 1, "winding " + num(cls.winding));

    const CurveExtract ex = invariant_curve_extract(cfg);
    req(ex.residual < 1e-4, "curve residual " + num(ex.residual));

    const double r1 = rotation_number_2d(cfg, 'F', 2000, 10000);
    const double r2 = rotation_number_2d(cfg, 'F', 2000, 100000);
    req(std::abs(r1 - r2) < 1e-3,
        "rotation estimates differ by " + num(std::abs(r1 - r2)));
}

double chaotic_fraction(const ModelConfig& cfg, int n_index) {
    ClassifyOptions opts;
    opts.seeds = 2;
    opts.burn_in = 500;
    opts.iterates = 4000;
    const auto cells = scan_lattice(cfg, 'F', n_index, 200, opts, 1);
    int hot = 0;
    for (const auto& c : cells)
        if (c.cls.lyap1 > 0.02) ++hot;
    return hot / 200.0;
}

void criterion_chaotic_fraction() {
    const double f30 = chaotic_fraction(fixture("chaos30.cfg"), 15);
    const double f60 = chaotic_fraction(fixture("chaos60.cfg"), 30);
    req(f30 >= 0.10, "fraction at omega*K_F=30 is " + num(f30));
    req(f60 >= f30, "fraction dropped: " + num(f30) + " -> " + num(f60));
}

void criterion_sinks() {
    const ModelConfig cfg = fixture("chaos30.cfg");
    const double a_star = TWO_PI * 0.5 / 256.0;
    const auto sinks = find_superstable_sinks(cfg, a_star, 0.5, 8);
    req(!sinks.empty(), "no sinks found near the certified parameter");

    bool deep = false;
    for (const auto& s : sinks) deep = deep || s.multiplier < 1e-6;
    req(deep, "no orbit with multiplier < 1e-6");

    for (size_t i = 1; i < sinks.size(); ++i)
        req(sinks[i].mu < sinks[i - 1].mu, "mu sequence not decreasing");
    for (const auto& s : sinks) {
        const double d = std::remainder(-30.0 * std::log(s.mu) - s.a, TWO_PI);
        req(std::abs(d) < 1e-10,
            "lattice identity off by " + num(std::abs(d)));
    }

    // The globally attracting low-period sink; its cell is a sink of the
    // two-dimensional map as well.
    const SinkRecord* pick = nullptr;
    for (const auto& s : sinks)
        if (s.period == 3 && std::abs(s.a - (-0.48336746)) < 1e-4) pick = &s;
    req(pick != nullptr, "period-3 sink not found");

    ModelConfig cell = cfg;
    cell.mu1 = pick->mu;
    MapEngine eng(cell);
    eng.enforce_sections = false;
    const Lyap2 ly = lyapunov_2d(eng, 'F', {0.0, pick->orbit[0]}, 2000, 20000);
    req(ly.l1 < -1.0, "Lambda1 = " + num(ly.l1) + ", want < -1");
}

void criterion_misiurewicz() {
    const ModelConfig cfg = fixture("chaos30.cfg");

    // Engineered collision: send the first critical point onto the second.
    const CircleMap h0 = singular_limit_from_config(cfg, 0.0, 'F');
    const auto crit = critical_set(h0);
    req(crit.size() == 2, "expected two critical points");
    const double a_bad = wrap_angle(crit[1] - h0.value(crit[0]));
    const auto bad =
        misiurewicz_check(singular_limit_from_config(cfg, a_bad, 'F'), 1e-3, 50);
    req(bad.status == "refuted", "collision fixture status " + bad.status);
    req(bad.witness && bad.witness->n == 1,
        "collision detected at n=" + num(bad.witness ? bad.witness->n : -1));

    const double a_star = TWO_PI * 0.5 / 256.0;
    const CircleMap h = singular_limit_from_config(cfg, a_star, 'F');
    const auto cert = misiurewicz_check(h, 1e-3, 50);
    req(cert.status == "certified-to-horizon", "status " + cert.status);
    req(std::exp(cert.lambda0) > 1.0,
        "exp(lambda0) = " + num(std::exp(cert.lambda0)));

    const auto ce = ce_parameter_scan(h.spec(), cert, 0.5 * std::log(2.0), 0.2,
                                      30, 64);
    req(ce.fraction > 0.0, "CE fraction is zero");
}

void criterion_mixing() {
    const CircleMap h =
        singular_limit_from_config(fixture("chaos30.cfg"), 0.3, 'F');
    const TransitionGraph g = transition_matrix(h);
    req(!g.Q.empty(), "empty transition matrix");
    for (const auto& row : g.Q)
        for (int q : row) req(q == 1, "Q has a zero entry");
    req(g.mixing_N && *g.mixing_N == 1,
        "mixing_N = " + (g.mixing_N ? num(*g.mixing_N) : std::string("none")));
}

void criterion_g_expansion() {
    const ModelConfig cfg = fixture("gchaos20.cfg");
    int positive = 0;
    for (int i = 0; i < 100; ++i) {
        const double a = TWO_PI * (i + 0.5) / 100.0;
        const CircleMap h = singular_limit_from_config(cfg, a, 'G');
        if (lyapunov_1d(h, 0.03, 500, 5000).lambda > 0.0) ++positive;
    }
    req(positive >= 80, "positive exponents at " + num(positive) + "/100");
}

void criterion_tangle_geometry() {
    const ModelConfig cfg = fixture("tangle.cfg");
    const RadiusSlopeFit fit = spiral_radius_slopes(cfg, {0.3, 0.5, 0.7});
    req(fit.spread < 0.05, "slope spread " + num(fit.spread));

    const double L = derive_constants(cfg).K_G * cfg.omega;
    const double want = std::exp(-TWO_PI / L);
    const TangleScan scan =
        tangency_sequence(cfg, default_unstable_segment(0.5),
                          default_stable_graph(), 1e-4, 1e-9, 12);
    req(scan.tangencies.size() >= 5, "too few tangencies located");
    for (size_t i = 2; i < scan.tangencies.size(); ++i) {
        // Families interleave; same-family neighbors sit two apart.
        const double ratio =
            scan.tangencies[i].mu2 / scan.tangencies[i - 2].mu2;
        req(std::abs(ratio - want) <= 0.01 * want,
            "ratio " + num(ratio) + " at tangency " + num(i + 1) + ", want " +
                num(want));
    }
}

void criterion_hom_curve() {
    std::vector<double> grid;
    for (int i = 0; i <= 6; ++i) grid.push_back(1e-4 * std::pow(10.0, i / 3.0));

    const std::pair<const char*, double> cases[] = {
        {"hom15.cfg", 1.5}, {"hom2.cfg", 2.0}, {"hom3.cfg", 3.0}};
    HomCurve hom2;
    for (const auto& [name, want] : cases) {
        const HomCurve hc = hom_curve(fixture(name), grid);
        req(std::abs(hc.slope - want) <= 0.05,
            std::string(name) + ": slope " + num(hc.slope) + ", want " +
                num(want));
        if (want == 2.0) hom2 = hc;
    }

    double prev = 0.0;
    for (double r : {1e-1, 1e-2, 1e-3}) {
        const double frac = tangle_side_fraction(hom2, r);
        req(frac > prev, "fraction not increasing at r=" + num(r));
        req(frac < 1.0, "fraction reached 1 at r=" + num(r));
        prev = frac;
    }
    req(prev > 0.99, "fraction at r=1e-3 is " + num(prev));
}

void criterion_melnikov() {
    // Zero forcing integrates to zero.
    {
        const PlanarSystem sys = load_planar_system(fixture_path("planar_zero.cfg"));
        for (int which : {1, 2}) {
            const HeteroclinicOrbit orbit = shoot_heteroclinic(sys, which);
            for (int i = 0; i < 6; ++i) {
                const double th = sys.T * i / 6.0;
                const double w = melnikov_W(sys, orbit, th);
                req(std::abs(w) < 1e-12, "|W| = " + num(std::abs(w)));
            }
        }
    }

    const PlanarSystem sys = load_planar_system(fixture_path("planar_case2.cfg"));
    for (int which : {1, 2}) {
        const HeteroclinicOrbit orbit = shoot_heteroclinic(sys, which);
        for (double frac : {0.05, 0.3, 0.55, 0.8}) {
            const double th = sys.T * frac;
            const double fast = melnikov_W(sys, orbit, th);
            const double brute = melnikov_W_brute(sys, orbit, th, 1000000);
            req(rel_err(fast, brute) < 1e-6,
                "W" + num(which) + "(" + num(th) + "): rel err " +
                    num(rel_err(fast, brute)));
        }
    }

    const Classification cls = classify_configuration(sys);
    req(cls.which == TangleCase::Case2, "classified " + to_string(cls.which));
    req(!cls.W1.sign_changing, "W1 reported sign-changing");
    req(cls.W2.sign_changing, "W2 reported single-signed");
}

void criterion_reproducibility() {
    const fs::path tmp =
        fs::temp_directory_path() /
        ("hetlab_accept_" + std::to_string(::getpid()));
    const fs::path one = tmp / "one", two = tmp / "two";
    fs::create_directories(one);
    fs::create_directories(two);

    const std::string base = std::string("'") + CLI_PATH +
                             "' run sweep --grid 4x4 --mu1-max 1e-3 "
                             "--mu2-max 1e-5 --seeds 2 --burn-in 300 --n 1000 "
                             "--seed 2024 --config '" +
                             fixture_path("base.cfg") + "' --out '";
    for (const fs::path& dir : {one, two}) {
        const int status = std::system(
            (base + dir.string() + "' > /dev/null 2>&1").c_str());
        req(status != -1 && WIFEXITED(status) && WEXITSTATUS(status) == 0,
            "sweep run failed");
    }

    const bool same_csv = slurp(one / "sweep.csv") == slurp(two / "sweep.csv");
    const bool same_dat = slurp(one / "sweep.dat") == slurp(two / "sweep.dat");
    const bool same_svg = slurp(one / "sweep.svg") == slurp(two / "sweep.svg");
    std::error_code ec;
    fs::remove_all(tmp, ec);
    req(same_csv, "sweep.csv differs between seeded runs");
    req(same_dat, "sweep.dat differs between seeded runs");
    req(same_svg, "sweep.svg differs between seeded runs");
}

} // namespace

int main() {
    struct Entry {
        const char* summary;
        std::function<void()> body;
    };
    const Entry entries[] = {
        {"derived constants K_F = K_G = 3, delta = 4 exactly",
         criterion_constants},
        {"closed forms match factor composition on 1e4 points (rel < 1e-10)",
         criterion_composition},
        {"singular-limit convergence: sup|F1| slope delta-1 +- 0.02, "
         "sup dist decreasing",
         criterion_singular_convergence},
        {"invariant-curve regime: classify, extract (res < 1e-4), stable "
         "rotation number",
         criterion_invariant_curve},
        {"chaotic fraction >= 10% at omega*K_F = 30 and monotone to 60",
         criterion_chaotic_fraction},
        {"superstable sinks: multiplier < 1e-6, lattice identity 1e-10, "
         "Lambda1 < -1",
         criterion_sinks},
        {"Misiurewicz collision refuted at n = 1; certificate expands; CE "
         "fraction > 0",
         criterion_misiurewicz},
        {"transition matrix all-ones with mixing_N = 1 at omega*K_F = 30",
         criterion_mixing},
        {"G-family expansion: Lyapunov > 0 on >= 80 of 100 phases",
         criterion_g_expansion},
        {"spiral slope spread < 0.05; tangency ratios within 1% of "
         "exp(-2pi/(omega*K_G))",
         criterion_tangle_geometry},
        {"hom exponents 1.5/2/3 within 0.05; tangle-side fraction rises "
         "toward 1",
         criterion_hom_curve},
        {"Melnikov: zero forcing < 1e-12; quadrature vs 1e6-node brute < "
         "1e-6; Case 2",
         criterion_melnikov},
        {"seeded sweep runs emit byte-identical data files",
         criterion_reproducibility},
    };

    int failures = 0;
    int id = 0;
    for (const Entry& e : entries) {
        ++id;
        const auto t0 = std::chrono::steady_clock::now();
        std::string reason;
        try {
            e.body();
        } catch (const std::exception& ex) {
            reason = ex.what();
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        if (reason.empty()) {
            std::printf("PASS criterion-%d: %s [%.1f s]\n", id, e.summary, secs);
        } else {
            ++failures;
            std::printf("FAIL criterion-%d: %s -- %s [%.1f s]\n", id, e.summary,
                        reason.c_str(), secs);
        }
        std::fflush(stdout);
    }
    std::printf("%d/13 criteria passed\n", 13 - failures);
    return failures;
}
