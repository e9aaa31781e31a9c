#include "hetlab/singular.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "hetlab/angles.hpp"
#include "hetlab/numutil.hpp"
#include "json.hpp"

namespace hetlab {

namespace {
constexpr int kScanGrid = 4096;
constexpr double kSingularPhiTol = 1e-13;
constexpr double kDegenerateH2 = 1e-8;

double dist_to_set(double theta, const std::vector<double>& set) {
    double best = std::numeric_limits<double>::infinity();
    for (double s : set) best = std::min(best, circle_dist(theta, s));
    return best;
}
} // namespace

CircleMap::CircleMap(CircleMapSpec spec) : spec_(std::move(spec)) {
    if (spec_.singular) zeros_ = spec_.profile.transversal_zeros();
}

double CircleMap::value(double theta) const {
    double v = theta + spec_.xi + spec_.a;
    if (spec_.psi_term) v += spec_.psi_term->mu * spec_.psi_term->psi.eval(theta);
    if (spec_.L != 0.0) v -= spec_.L * std::log(std::abs(spec_.profile.eval(theta)));
    return v;
}

double CircleMap::deriv(double theta) const {
    double d = 1.0;
    if (spec_.psi_term) d += spec_.psi_term->mu * spec_.psi_term->psi.deriv(theta, 1);
    if (spec_.L != 0.0) {
        const double p = spec_.profile.eval(theta);
        d -= spec_.L * spec_.profile.deriv(theta, 1) / p;
    }
    return d;
}

double CircleMap::deriv2(double theta) const {
    double d = 0.0;
    if (spec_.psi_term) d += spec_.psi_term->mu * spec_.psi_term->psi.deriv(theta, 2);
    if (spec_.L != 0.0) {
        const double p = spec_.profile.eval(theta);
        const double p1 = spec_.profile.deriv(theta, 1);
        const double p2 = spec_.profile.deriv(theta, 2);
        d -= spec_.L * (p2 * p - p1 * p1) / (p * p);
    }
    return d;
}

bool CircleMap::near_singularity(double theta, double tol) const {
    if (!spec_.singular || spec_.L == 0.0) return false;
    return std::abs(spec_.profile.eval(theta)) < tol;
}

CircleMap singular_limit_from_config(const ModelConfig& cfg, double a, char which) {
    const DerivedConstants dc = derive_constants(cfg);
    CircleMapSpec spec;
    spec.a = a;
    spec.xi = dc.xi;
    if (which == 'F') {
        spec.L = cfg.omega * dc.K_F;
        spec.profile = cfg.phi1;
        spec.singular = false;
    } else if (which == 'G') {
        spec.L = cfg.omega * dc.K_G;
        spec.profile = cfg.phi2;
        spec.singular = true;
    } else {
        throw std::invalid_argument("singular_limit_from_config: which must be 'F' or 'G'");
    }
    return CircleMap(std::move(spec));
}

double mu_from_index(double a, int n, double omegaK) {
    return std::exp(-(TWO_PI * n + a) / omegaK);
}

std::vector<double> mu_lattice(double a, int n_min, int n_max, double omegaK) {
    std::vector<double> out;
    for (int n = n_min; n <= n_max; ++n) out.push_back(mu_from_index(a, n, omegaK));
    return out;
}

std::vector<ConvergenceRow> singular_limit_convergence(
    const ModelConfig& cfg, double a, int n_min, int n_max,
    int theta_grid, int y_grid) {
    if (cfg.mu2 != 0.0)
        throw std::invalid_argument("singular_limit_convergence: needs mu2 = 0");
    const DerivedConstants dc = derive_constants(cfg);
    const double omegaK = cfg.omega * dc.K_F;
    const CircleMap limit = singular_limit_from_config(cfg, a, 'F');

    std::vector<ConvergenceRow> rows;
    for (int n = n_min; n <= n_max; ++n) {
        ConvergenceRow row;
        row.n = n;
        row.mu = mu_from_index(a, n, omegaK);
        ModelConfig c = cfg;
        c.mu1 = row.mu;
        MapEngine eng(c);
        eng.enforce_sections = false;
        for (int i = 0; i < theta_grid; ++i) {
            const double th = TWO_PI * i / theta_grid;
            const double href = wrap_angle(limit.value(th));
            for (int j = 0; j <= y_grid; ++j) {
                const double y = row.mu * j / y_grid;
                const MapResult r = eng.return_map_F({y, th});
                row.sup_f1 = std::max(row.sup_f1, std::abs(r.p.y));
                row.sup_dist = std::max(row.sup_dist, circle_dist(wrap_angle(r.p.theta), href));
            }
        }
        rows.push_back(row);
    }
    return rows;
}

std::vector<double> critical_set(const CircleMap& map) {
    std::vector<double> roots;
    const auto& zeros = map.profile_zeros();
    const double h = TWO_PI / kScanGrid;
    auto cell_has_singularity = [&](double lo, double hi) {
        for (double z : zeros) {
            // z (mod 2pi) inside [lo, hi]?
            double zz = z;
            while (zz < lo - TWO_PI) zz += TWO_PI;
            while (zz > hi + TWO_PI) zz -= TWO_PI;
            if ((zz >= lo && zz <= hi) || (zz + TWO_PI >= lo && zz + TWO_PI <= hi)) return true;
        }
        return false;
    };
    double prev = map.deriv(0.0);
    for (int i = 1; i <= kScanGrid; ++i) {
        const double lo = (i - 1) * h;
        const double hi = i * h;
        if (cell_has_singularity(lo, hi)) {
            prev = map.deriv(hi);
            continue;
        }
        const double cur = map.deriv(hi);
        const bool bracket = (prev == 0.0) ? false : (prev > 0.0) != (cur > 0.0);
        if (prev == 0.0) {
            roots.push_back(wrap_angle(lo));
        } else if (bracket) {
            double r = bisect_root([&](double t) { return map.deriv(t); }, lo, hi, 200, 1e-13);
            // Newton polish against h''.
            for (int k = 0; k < 3; ++k) {
                const double d2 = map.deriv2(r);
                if (d2 == 0.0) break;
                const double step = map.deriv(r) / d2;
                if (std::abs(step) > h) break;
                r -= step;
            }
            roots.push_back(wrap_angle(r));
        }
        prev = cur;
    }
    std::sort(roots.begin(), roots.end());
    std::vector<double> out;
    for (double r : roots)
        if (out.empty() || circle_dist(r, out.back()) > 1e-10) out.push_back(r);
    if (out.size() > 1 && circle_dist(out.front(), out.back()) <= 1e-10) out.pop_back();
    for (double r : out) {
        const double d2 = map.deriv2(r);
        if (std::abs(d2) < kDegenerateH2) {
            char buf[128];
            std::snprintf(buf, sizeof buf,
                          "critical point %.12g has |h''| = %.3g < %.1g", r, std::abs(d2),
                          kDegenerateH2);
            throw DegenerateCritical(buf);
        }
    }
    return out;
}

DiffeoReport is_diffeomorphism(const CircleMap& map) {
    DiffeoReport rep;
    const auto& spec = map.spec();
    if (spec.singular && spec.L != 0.0 && !map.profile_zeros().empty()) {
        rep.is_diffeo = false;
        rep.min_deriv = -std::numeric_limits<double>::infinity();
        rep.sup_profile_ratio = std::numeric_limits<double>::infinity();
        rep.contraction_product = std::numeric_limits<double>::infinity();
        return rep;
    }
    double min_d = std::numeric_limits<double>::infinity();
    double min_at = 0.0;
    double max_ratio = 0.0;
    double max_ratio_at = 0.0;
    for (int i = 0; i < kScanGrid; ++i) {
        const double t = TWO_PI * i / kScanGrid;
        const double d = map.deriv(t);
        if (d < min_d) { min_d = d; min_at = t; }
        const double p = spec.profile.eval(t);
        const double ratio = p != 0.0 ? std::abs(spec.profile.deriv(t, 1) / p)
                                      : std::numeric_limits<double>::infinity();
        if (ratio > max_ratio) { max_ratio = ratio; max_ratio_at = t; }
    }
    const double h = TWO_PI / kScanGrid;
    const double t_min =
        golden_minimize([&](double t) { return map.deriv(t); }, min_at - h, min_at + h);
    min_d = std::min(min_d, map.deriv(t_min));
    const double t_max = golden_minimize(
        [&](double t) {
            const double p = spec.profile.eval(t);
            return p != 0.0 ? -std::abs(spec.profile.deriv(t, 1) / p)
                            : -std::numeric_limits<double>::infinity();
        },
        max_ratio_at - h, max_ratio_at + h);
    {
        const double p = spec.profile.eval(t_max);
        if (p != 0.0)
            max_ratio = std::max(max_ratio, std::abs(spec.profile.deriv(t_max, 1) / p));
    }
    rep.min_deriv = min_d;
    rep.sup_profile_ratio = max_ratio;
    rep.contraction_product = std::abs(spec.L) * max_ratio;
    rep.is_diffeo = min_d > 0.0;
    return rep;
}

RotationResult rotation_number(const CircleMap& map, double theta0, int n) {
    RotationResult out;
    out.n = n;
    double th = theta0;
    for (int i = 0; i < n; ++i) th = map.value(th);
    double rho = (th - theta0) / (TWO_PI * n);
    rho -= std::floor(rho);
    out.rho = rho;
    out.error_bound = 1.0 / n;
    // Best rational approximation with q <= 100.
    for (int q = 1; q <= 100; ++q) {
        const double p = std::round(rho * q);
        if (std::abs(rho - p / q) <= out.error_bound) {
            out.rational_within_bound = true;
            out.q = q;
            break;
        }
    }
    return out;
}

LyapunovResult lyapunov_1d(const CircleMap& map, double theta0, int burn_in, int n) {
    LyapunovResult out;
    out.n = n;
    double th = wrap_angle(theta0);
    int done = 0;
    double sum = 0.0;
    int guard = 0;
    const int guard_cap = 10 * (burn_in + n) + 1000;
    int k = -burn_in;
    while (done < n && ++guard < guard_cap) {
        if (map.near_singularity(th, kSingularPhiTol)) {
            ++out.singular_hits;
            th = wrap_angle(th + 1e-9);
            continue;
        }
        const double d = map.deriv(th);
        if (k >= 0) {
            if (d == 0.0) {
                out.superstable = true;
                out.lambda = -std::numeric_limits<double>::infinity();
                return out;
            }
            sum += std::log(std::abs(d));
            ++done;
        }
        th = wrap_angle(map.value(th));
        ++k;
    }
    out.lambda = done > 0 ? sum / done : 0.0;
    out.reliable = out.singular_hits <= (burn_in + n) / 100;
    return out;
}

MisiurewiczCertificate misiurewicz_check(const CircleMap& map, double delta0, int horizon) {
    MisiurewiczCertificate cert;
    cert.delta0 = delta0;
    cert.horizon = horizon;

    std::vector<double> C;
    try {
        C = critical_set(map);
    } catch (const DegenerateCritical& e) {
        cert.status = "inconclusive";
        cert.note = e.what();
        return cert;
    }
    cert.critical_points = C;
    if (C.empty()) {
        cert.status = "certified-to-horizon";
        cert.note = "vacuous: empty critical set";
        return cert;
    }

    // (1a) second derivative bounded away from zero on C_{delta0}.
    double min_h2 = std::numeric_limits<double>::infinity();
    for (double c : C) {
        for (int i = 0; i <= 64; ++i) {
            const double t = c - delta0 + 2.0 * delta0 * i / 64.0;
            min_h2 = std::min(min_h2, std::abs(map.deriv2(t)));
        }
    }
    cert.min_h2 = min_h2;
    if (min_h2 < kDegenerateH2) {
        cert.status = "inconclusive";
        cert.note = "second derivative not bounded away from zero on C_delta0";
        return cert;
    }

    // (1b) critical orbits stay delta0 away from the critical set.
    for (double c : C) {
        double x = wrap_angle(map.value(c));
        for (int n = 1; n <= horizon; ++n) {
            if (map.near_singularity(x, kSingularPhiTol)) {
                cert.status = "inconclusive";
                cert.note = "critical orbit hit a logarithmic singularity";
                return cert;
            }
            const double d = dist_to_set(x, C);
            if (d < delta0) {
                cert.status = "refuted";
                cert.witness = MisiurewiczWitness{c, n, x, d};
                return cert;
            }
            x = wrap_angle(map.value(x));
        }
    }

    const ExpansionFit fit = fit_expansion_rate(map, C, delta0, horizon);
    if (fit.samples < 4) {
        cert.status = "inconclusive";
        cert.note = "not enough out-of-C_delta orbit data for the growth fit";
        return cert;
    }
    cert.lambda0 = fit.lambda0;
    cert.b0 = fit.b0;

    if (cert.lambda0 <= 0.0) {
        cert.status = "refuted";
        cert.note = "fitted expansion rate is not positive";
        return cert;
    }
    cert.th_flag = std::exp(cert.lambda0) > 2.0;
    cert.h7a_flag = std::exp(cert.lambda0 / 3.0) > 2.0;
    cert.status = "certified-to-horizon";
    return cert;
}

ExpansionFit fit_expansion_rate(const CircleMap& map, const std::vector<double>& C,
                                double delta, int horizon) {
    ExpansionFit out;
    std::vector<double> xs, ys;  // (n, ln |(h^n)'|) while the orbit stays off C_delta
    std::vector<std::pair<double, double>> entering;  // samples landing inside C_delta
    std::vector<double> starts;
    for (double c : C) starts.push_back(wrap_angle(map.value(c)));
    for (int i = 0; i < 32; ++i) {
        const double t = TWO_PI * i / 32.0;
        if (dist_to_set(t, C) >= delta) starts.push_back(t);
    }
    for (double s0 : starts) {
        double x = s0;
        double acc = 0.0;
        for (int n = 1; n <= horizon; ++n) {
            if (map.near_singularity(x, kSingularPhiTol)) break;
            const double d = map.deriv(x);
            if (d == 0.0) break;
            acc += std::log(std::abs(d));
            x = wrap_angle(map.value(x));
            if (dist_to_set(x, C) < delta) {
                entering.emplace_back(n, acc);
                break;
            }
            xs.push_back(n);
            ys.push_back(acc);
        }
    }
    out.samples = static_cast<int>(xs.size());
    if (xs.size() < 2) return out;
    const LineFit fit = fit_line(xs, ys);
    out.lambda0 = fit.slope;
    // Lower the prefactor until the bound holds on every sample.
    double min_off = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < xs.size(); ++i)
        min_off = std::min(min_off, ys[i] - fit.slope * xs[i]);
    double ln_b0 = min_off - std::log(delta);
    for (const auto& [n, acc] : entering)
        ln_b0 = std::min(ln_b0, acc - fit.slope * n);
    out.b0 = std::exp(ln_b0);
    return out;
}

std::string certificate_to_json(const MisiurewiczCertificate& cert) {
    nlohmann::json j;
    j["status"] = cert.status;
    j["delta0"] = cert.delta0;
    j["horizon"] = cert.horizon;
    j["b0"] = cert.b0;
    j["lambda0"] = cert.lambda0;
    j["min_second_derivative"] = std::isfinite(cert.min_h2) ? cert.min_h2 : 0.0;
    j["exp_lambda0_gt_2"] = cert.th_flag;
    j["exp_lambda0_third_gt_2"] = cert.h7a_flag;
    j["critical_points"] = cert.critical_points;
    if (cert.witness) {
        j["witness"] = {{"c", cert.witness->c},
                        {"n", cert.witness->n},
                        {"point", cert.witness->point},
                        {"dist", cert.witness->dist}};
    }
    if (!cert.note.empty()) j["note"] = cert.note;
    return j.dump(2);
}

CEScanResult ce_parameter_scan(const CircleMapSpec& base,
                               const MisiurewiczCertificate& ref,
                               double lambda, double alpha,
                               int horizon, int grid_size) {
    CEScanResult out;
    out.lambda = lambda;
    out.alpha = alpha;
    out.lambda_cap_ok = ref.lambda0 > 0.0 && lambda < ref.lambda0 / 5.0;
    out.alpha_cap_ok = alpha < lambda;

    // The additive parameter leaves the critical set unchanged.
    CircleMapSpec s0 = base;
    s0.a = 0.0;
    const CircleMap m0(s0);
    const std::vector<double> C = critical_set(m0);
    const double floor_ce2 = 2.0 * ref.b0 * ref.delta0;

    int ok_count = 0;
    for (int i = 0; i < grid_size; ++i) {
        const double a = TWO_PI * i / grid_size;
        CircleMapSpec s = base;
        s.a = a;
        const CircleMap h(s);
        bool ok = !C.empty();
        for (double c : C) {
            if (!ok) break;
            double x = wrap_angle(h.value(c));
            double acc = 0.0;  // ln |(h^n)'(h(c))|
            for (int n = 1; n <= horizon && ok; ++n) {
                if (h.near_singularity(x, kSingularPhiTol)) { ok = false; break; }
                // CE1 at iterate n.
                const double need = std::min(ref.delta0 / 2.0, std::exp(-alpha * n));
                if (dist_to_set(x, C) < need) { ok = false; break; }
                const double d = h.deriv(x);
                if (d == 0.0) { ok = false; break; }
                acc += std::log(std::abs(d));
                // CE2 at iterate n.
                if (acc < std::log(floor_ce2) + lambda * n) { ok = false; break; }
                x = wrap_angle(h.value(x));
            }
        }
        out.a_values.push_back(a);
        out.ce_ok.push_back(ok);
        if (ok) ++ok_count;
    }
    out.fraction = grid_size > 0 ? static_cast<double>(ok_count) / grid_size : 0.0;
    return out;
}

std::vector<TransversalityRow> admissibility_transversality(
    const CircleMapSpec& base, double a_star, double h, int depth) {
    CircleMapSpec s = base;
    s.a = a_star;
    const CircleMap map(s);
    const std::vector<double> C = critical_set(map);

    auto beta_continuation = [&](double a_shift, const std::vector<double>& ref) {
        CircleMapSpec sp = base;
        sp.a = a_star + a_shift;
        const CircleMap hp(sp);
        // Backward Newton shadowing along the reference orbit.
        double y = ref.back();
        for (int k = static_cast<int>(ref.size()) - 2; k >= 0; --k) {
            const double xk = ref[k];
            double target_gap = circle_diff(y, wrap_angle(hp.value(xk)));
            double yk = xk;
            bool converged = false;
            const double guard = 0.5 * std::max(1e-12, dist_to_set(xk, C));
            // 1e-11 sits above the rounding floor of g/h' near low-derivative
            // points yet contributes < 1e-5 absolute error to the h = 1e-6
            // central differences.
            for (int it = 0; it < 50; ++it) {
                const double g = (hp.value(yk) - hp.value(xk)) - target_gap;
                const double dg = hp.deriv(yk);
                if (dg == 0.0) break;
                double step = g / dg;
                const double cap = 0.5 * guard;
                if (std::abs(step) > cap) step = step > 0 ? cap : -cap;
                yk -= step;
                if (std::abs(step) < 1e-11) { converged = true; break; }
            }
            if (!converged || std::abs(yk - xk) > guard)
                throw ContinuationBroken("itinerary-matched continuation failed");
            y = yk;
        }
        return y;
    };

    std::vector<TransversalityRow> rows;
    for (double c : C) {
        // Reference critical-value orbit.
        std::vector<double> ref;
        double x = wrap_angle(map.value(c));
        for (int k = 0; k < depth; ++k) {
            if (map.near_singularity(x, kSingularPhiTol))
                throw ContinuationBroken("critical orbit hit a singularity");
            ref.push_back(x);
            x = wrap_angle(map.value(x));
        }
        const double beta_p = beta_continuation(+h, ref);
        const double beta_m = beta_continuation(-h, ref);

        // The critical set of an additively forced family is parameter
        // independent, so c(a +- h) = c.
        CircleMapSpec sp = base; sp.a = a_star + h;
        CircleMapSpec sm = base; sm.a = a_star - h;
        const double direct =
            (CircleMap(sp).value(c) - CircleMap(sm).value(c)) / (2.0 * h);
        const double dbeta = circle_diff(beta_p, beta_m) / (2.0 * h);

        TransversalityRow row;
        row.c = c;
        row.direct_term = direct;
        row.dbeta_da = dbeta;
        row.xi_value = direct - dbeta;
        rows.push_back(row);
    }
    return rows;
}

} // namespace hetlab
