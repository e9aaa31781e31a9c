#include "hetlab/sweep.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>

#include "hetlab/angles.hpp"
#include "hetlab/numutil.hpp"
#include "hetlab/singular.hpp"

namespace hetlab {

namespace {

constexpr int kTailLen = 1000;     // limit-set sample used for winding/period
constexpr double kJitter = 1e-9;   // theta nudge past singular/manifold hits
constexpr int kRetryCap = 64;      // consecutive jitters before giving up
constexpr double kPeriodTol = 1e-6;
constexpr double kCoverTol = 0.1;  // allowed shortfall of circle coverage

MapResult step(const MapEngine& eng, char which, ReturnMapPoint p) {
    return which == 'F' ? eng.return_map_F(p) : eng.return_map_G(p);
}

Jac2 jac(const MapEngine& eng, char which, ReturnMapPoint p) {
    return which == 'F' ? eng.jacobian_F(p) : eng.jacobian_G(p);
}

// Advances p by one iterate, jittering theta past singular or manifold hits.
// Returns the number of jitters spent; throws on domain or section errors.
int advance(const MapEngine& eng, char which, ReturnMapPoint& p) {
    for (int retry = 0; retry <= kRetryCap; ++retry) {
        const MapResult r = step(eng, which, p);
        switch (r.status) {
            case MapStatus::Ok:
                p = r.p;
                return retry;
            case MapStatus::SingularHit:
            case MapStatus::StableManifoldHit:
                p.theta += kJitter;
                break;
            case MapStatus::OutOfSection:
                throw UnreliableEstimate("orbit left the section bounds");
            case MapStatus::DomainError:
                throw UnreliableEstimate("return map domain error");
        }
    }
    throw UnreliableEstimate("orbit pinned to the singular set");
}

struct TailPoint {
    double y = 0.0;
    double theta = 0.0;  // wrapped
};

struct SeedRun {
    Lyap2 ly;
    std::vector<TailPoint> tail;
};

// One orbit: Lyapunov pair via Gram-Schmidt on analytic Jacobians, plus the
// final kTailLen states for winding and period detection.
SeedRun seed_run(const MapEngine& eng, char which, ReturnMapPoint p0,
                 int burn_in, int n) {
    ReturnMapPoint p{p0.y, wrap_angle(p0.theta)};
    SeedRun out;
    for (int i = 0; i < burn_in; ++i) {
        out.ly.skipped += advance(eng, which, p);
        p.theta = wrap_angle(p.theta);
    }
    double v1y = 1.0, v1t = 0.0, v2y = 0.0, v2t = 1.0;
    double sum1 = 0.0, sum2 = 0.0;
    out.tail.reserve(kTailLen);
    for (int i = 0; i < n; ++i) {
        const Jac2 j = jac(eng, which, p);
        out.ly.skipped += advance(eng, which, p);
        p.theta = wrap_angle(p.theta);
        double w1y = j.dy_dy * v1y + j.dy_dth * v1t;
        double w1t = j.dth_dy * v1y + j.dth_dth * v1t;
        double w2y = j.dy_dy * v2y + j.dy_dth * v2t;
        double w2t = j.dth_dy * v2y + j.dth_dth * v2t;
        const double r1 = std::max(std::hypot(w1y, w1t), 1e-300);
        w1y /= r1;
        w1t /= r1;
        const double proj = w2y * w1y + w2t * w1t;
        w2y -= proj * w1y;
        w2t -= proj * w1t;
        const double r2 = std::max(std::hypot(w2y, w2t), 1e-300);
        sum1 += std::log(r1);
        sum2 += std::log(r2);
        v1y = w1y;
        v1t = w1t;
        v2y = w2y / r2;
        v2t = w2t / r2;
        ++out.ly.used;
        if (n - i <= kTailLen) out.tail.push_back({p.y, p.theta});
    }
    if (out.ly.skipped * 10 > burn_in + n)
        throw UnreliableEstimate("more than 10% of iterates were skipped");
    out.ly.l1 = sum1 / out.ly.used;
    out.ly.l2 = sum2 / out.ly.used;
    return out;
}

// winding = 1 when the reduced-theta tail covers the circle up to a gap of
// kCoverTol * 2pi, i.e. the limit set is non-contractible.
int tail_winding(const std::vector<TailPoint>& tail) {
    if (tail.size() < 8) return 0;
    std::vector<double> th(tail.size());
    for (std::size_t i = 0; i < tail.size(); ++i) th[i] = tail[i].theta;
    std::sort(th.begin(), th.end());
    double max_gap = th.front() + TWO_PI - th.back();
    for (std::size_t i = 1; i < th.size(); ++i)
        max_gap = std::max(max_gap, th[i] - th[i - 1]);
    return max_gap <= kCoverTol * TWO_PI ? 1 : 0;
}

// Smallest p <= cap with near-returns (tolerance kPeriodTol) sustained over
// the whole tail; 0 when none qualifies.
int tail_period(const std::vector<TailPoint>& tail, int cap) {
    const int len = static_cast<int>(tail.size());
    for (int p = 1; p <= cap && p < len; ++p) {
        const int checks = std::min(len - p, 5 * p);
        bool ok = true;
        for (int k = 1; k <= checks && ok; ++k) {
            const TailPoint& u = tail[len - k];
            const TailPoint& v = tail[len - k - p];
            if (std::abs(u.y - v.y) > kPeriodTol ||
                circle_dist(u.theta, v.theta) > kPeriodTol)
                ok = false;
        }
        if (ok) return p;
    }
    return 0;
}

std::string seed_label(const Lyap2& ly, int winding, int period,
                       const Thresholds& thr) {
    if (ly.l1 > thr.eps_chaos) return "chaotic";
    if (ly.l1 < -thr.eps_sink && period > 0) return "periodic-sink";
    if (std::abs(ly.l1) <= thr.eps_curve && winding == 1)
        return "invariant-curve";
    return "undetermined";
}

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    return v[(v.size() - 1) / 2];
}

int label_code(const std::string& label) {
    if (label == "invariant-curve") return 1;
    if (label == "periodic-sink") return 2;
    if (label == "chaotic") return 3;
    if (label == "singular-dominated") return 4;
    return 0;
}

const char* label_color(const std::string& label) {
    switch (label_code(label)) {
        case 1: return "#4363d8";
        case 2: return "#3cb44b";
        case 3: return "#e6194b";
        case 4: return "#f58231";
        default: return "#cccccc";
    }
}

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

// Solves the symmetric system A x = b in place by Gaussian elimination with
// partial pivoting; returns false when a pivot collapses (rank-deficient fit,
// e.g. the orbit visits too few angles).
bool solve_dense(std::vector<double>& A, std::vector<double>& b, int m) {
    for (int col = 0; col < m; ++col) {
        int piv = col;
        for (int r = col + 1; r < m; ++r)
            if (std::abs(A[r * m + col]) > std::abs(A[piv * m + col])) piv = r;
        if (std::abs(A[piv * m + col]) < 1e-12) return false;
        if (piv != col) {
            for (int c = 0; c < m; ++c)
                std::swap(A[piv * m + c], A[col * m + c]);
            std::swap(b[piv], b[col]);
        }
        for (int r = col + 1; r < m; ++r) {
            const double f = A[r * m + col] / A[col * m + col];
            if (f == 0.0) continue;
            for (int c = col; c < m; ++c) A[r * m + c] -= f * A[col * m + c];
            b[r] -= f * b[col];
        }
    }
    for (int r = m - 1; r >= 0; --r) {
        double s = b[r];
        for (int c = r + 1; c < m; ++c) s -= A[r * m + c] * b[c];
        b[r] = s / A[r * m + r];
    }
    return true;
}

}  // namespace

Lyap2 lyapunov_2d(const MapEngine& eng, char which, ReturnMapPoint p0,
                  int burn_in, int n) {
    if (which != 'F' && which != 'G')
        throw std::invalid_argument("lyapunov_2d: which must be 'F' or 'G'");
    if (n <= 0) throw std::invalid_argument("lyapunov_2d: n must be positive");
    return seed_run(eng, which, p0, burn_in, n).ly;
}

AttractorClass classify_cell(const ModelConfig& cfg, char which,
                             const ClassifyOptions& opts) {
    if (which != 'F' && which != 'G')
        throw std::invalid_argument("classify_cell: which must be 'F' or 'G'");
    if (opts.seeds < 1)
        throw std::invalid_argument("classify_cell: need at least one seed");
    MapEngine eng(cfg);
    eng.enforce_sections = false;

    const double seed_shift = 1e-6 * static_cast<double>(opts.seed % 997);
    std::vector<std::string> labels;
    std::vector<double> l1s, l2s;
    std::vector<int> windings, periods;
    int worst_skipped = 0;
    for (int k = 0; k < opts.seeds; ++k) {
        const double theta0 = TWO_PI * k / opts.seeds + 0.03 + seed_shift;
        std::string label;
        try {
            const SeedRun run =
                seed_run(eng, which, {0.0, theta0}, opts.burn_in, opts.iterates);
            const int winding = tail_winding(run.tail);
            const int period = tail_period(run.tail, opts.thresholds.period_cap);
            label = seed_label(run.ly, winding, period, opts.thresholds);
            l1s.push_back(run.ly.l1);
            l2s.push_back(run.ly.l2);
            windings.push_back(winding);
            periods.push_back(period);
            worst_skipped = std::max(worst_skipped, run.ly.skipped);
        } catch (const UnreliableEstimate&) {
            label = "singular-dominated";
        }
        labels.push_back(label);
    }

    AttractorClass out;
    out.skipped = worst_skipped;
    const bool agree =
        std::all_of(labels.begin(), labels.end(),
                    [&](const std::string& s) { return s == labels.front(); });
    out.label = agree ? labels.front() : "undetermined";
    out.lyap1 = median_of(l1s);
    out.lyap2 = median_of(l2s);
    if (!windings.empty())
        out.winding =
            std::count(windings.begin(), windings.end(), 1) * 2 >
                    static_cast<long>(windings.size())
                ? 1
                : 0;
    if (out.label == "periodic-sink") {
        std::map<int, int> votes;
        for (int p : periods)
            if (p > 0) ++votes[p];
        int best = 0, best_votes = 0;
        for (const auto& [p, v] : votes)
            if (v > best_votes) best = p, best_votes = v;
        out.period = best;
    }
    return out;
}

std::vector<LatticeCell> scan_lattice(const ModelConfig& cfg, char which,
                                      int n_index, int cells,
                                      const ClassifyOptions& opts,
                                      int threads) {
    if (cells < 1) throw std::invalid_argument("scan_lattice: empty grid");
    const DerivedConstants dc = derive_constants(cfg);
    const double omega_k =
        cfg.omega * (which == 'F' ? dc.K_F : dc.K_G);
    std::vector<LatticeCell> out(cells);
    parallel_for(cells, threads, [&](std::size_t i) {
        const double a = TWO_PI * (static_cast<double>(i) + 0.5) / cells;
        const double mu = mu_from_index(a, n_index, omega_k);
        ModelConfig c = cfg;
        if (which == 'F') {
            c.mu1 = mu;
            c.mu2 = 0.0;
        } else {
            c.mu2 = mu;
            c.mu1 = 0.0;
        }
        out[i] = {a, mu, classify_cell(c, which, opts)};
    });
    return out;
}

SweepResult bifurcation_diagram(const ModelConfig& tmpl,
                                const std::vector<double>& mu1_grid,
                                const std::vector<double>& mu2_grid,
                                const ClassifyOptions& opts, int threads) {
    if (mu1_grid.empty() || mu2_grid.empty())
        throw std::invalid_argument("bifurcation_diagram: empty grid");
    for (double m : mu1_grid)
        if (m < 0.0)
            throw std::invalid_argument("bifurcation_diagram: negative mu1");
    for (double m : mu2_grid)
        if (m < 0.0)
            throw std::invalid_argument("bifurcation_diagram: negative mu2");

    SweepResult res;
    res.mu1_grid = mu1_grid;
    res.mu2_grid = mu2_grid;
    res.seed = opts.seed;
    res.burn_in = opts.burn_in;
    res.iterates = opts.iterates;

    // The Hom curve splits interior cells into the F side and the tangle (G)
    // side; without a sign-changing phi2 there is no curve and F is used.
    double lo = 0.0, hi = 0.0;
    for (double m : mu1_grid)
        if (m > 0.0) {
            lo = lo == 0.0 ? m : std::min(lo, m);
            hi = std::max(hi, m);
        }
    if (hi > 0.0 && tmpl.phi2.sign_changing()) {
        if (lo == hi) lo = hi / 10.0;
        std::vector<double> hg;
        for (int i = 0; i < 6; ++i)
            hg.push_back(lo * std::pow(hi / lo, i / 5.0));
        try {
            res.hom = hom_curve(tmpl, hg);
            res.hom_valid = true;
        } catch (const std::exception&) {
            res.hom_valid = false;
        }
    }

    const DerivedConstants dc = derive_constants(tmpl);
    const std::size_t n1 = mu1_grid.size(), n2 = mu2_grid.size();
    res.cells.resize(n1 * n2);
    parallel_for(n1 * n2, threads, [&](std::size_t idx) {
        const std::size_t i = idx / n2, j = idx % n2;
        SweepCell cell;
        cell.mu1 = mu1_grid[i];
        cell.mu2 = mu2_grid[j];
        cell.omega = tmpl.omega;
        if (cell.mu1 == 0.0 && cell.mu2 == 0.0) {
            res.cells[idx] = cell;  // no dynamics at the origin cell
            return;
        }
        if (cell.mu2 == 0.0) {
            cell.family = 'F';
        } else if (cell.mu1 == 0.0) {
            cell.family = 'G';
        } else if (res.hom_valid) {
            const bool tangle_side =
                std::log(cell.mu2) >
                res.hom.intercept + res.hom.slope * std::log(cell.mu1);
            cell.family = tangle_side ? 'G' : 'F';
        } else {
            cell.family = 'F';
        }
        cell.a = cell.family == 'F'
                     ? wrap_angle(-tmpl.omega * dc.K_F * std::log(cell.mu1))
                     : wrap_angle(-tmpl.omega * dc.K_G * std::log(cell.mu2));
        ModelConfig c = tmpl;
        c.mu1 = cell.mu1;
        c.mu2 = cell.mu2;
        cell.cls = classify_cell(c, cell.family, opts);
        res.cells[idx] = cell;
    });
    return res;
}

double tangle_side_fraction(const HomCurve& hom, double radius) {
    if (radius <= 0.0)
        throw std::invalid_argument("tangle_side_fraction: radius <= 0");
    const int n = 8192;
    const double c = std::exp(hom.intercept);
    double below = 0.0;
    for (int k = 0; k < n; ++k) {
        const double m1 = radius * (k + 0.5) / n;
        const double disc = std::sqrt(std::max(0.0, radius * radius - m1 * m1));
        below += std::min(c * std::pow(m1, hom.slope), disc) * (radius / n);
    }
    const double quarter = PI * radius * radius / 4.0;
    return std::clamp(1.0 - below / quarter, 0.0, 1.0);
}

std::string sweep_to_csv(const SweepResult& res) {
    std::string out = "mu1,mu2,omega,a,label,lyap1,lyap2,winding,period\n";
    for (const SweepCell& c : res.cells) {
        out += fmt(c.mu1) + "," + fmt(c.mu2) + "," + fmt(c.omega) + "," +
               fmt(c.a) + "," + c.cls.label + "," + fmt(c.cls.lyap1) + "," +
               fmt(c.cls.lyap2) + "," + std::to_string(c.cls.winding) + "," +
               std::to_string(c.cls.period) + "\n";
    }
    return out;
}

std::string sweep_to_dat(const SweepResult& res) {
    std::string out =
        "# mu1 mu2 code label  (code: 0 undetermined, 1 invariant-curve,"
        " 2 periodic-sink, 3 chaotic, 4 singular-dominated)\n";
    const std::size_t n2 = res.mu2_grid.size();
    for (std::size_t i = 0; i < res.mu1_grid.size(); ++i) {
        for (std::size_t j = 0; j < n2; ++j) {
            const SweepCell& c = res.cells[i * n2 + j];
            out += fmt(c.mu1) + " " + fmt(c.mu2) + " " +
                   std::to_string(label_code(c.cls.label)) + " " +
                   c.cls.label + "\n";
        }
        out += "\n";
    }
    return out;
}

std::string sweep_to_svg(const SweepResult& res) {
    const int cell = 12, margin = 20;
    const int n1 = static_cast<int>(res.mu1_grid.size());
    const int n2 = static_cast<int>(res.mu2_grid.size());
    const int w = 2 * margin + n1 * cell, h = 2 * margin + n2 * cell;
    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                      std::to_string(w) + "\" height=\"" + std::to_string(h) +
                      "\">\n";
    for (int i = 0; i < n1; ++i) {
        for (int j = 0; j < n2; ++j) {
            const SweepCell& c = res.cells[i * n2 + j];
            // mu2 increases upward
            const int x = margin + i * cell;
            const int y = margin + (n2 - 1 - j) * cell;
            out += "  <rect x=\"" + std::to_string(x) + "\" y=\"" +
                   std::to_string(y) + "\" width=\"" + std::to_string(cell - 1) +
                   "\" height=\"" + std::to_string(cell - 1) + "\" fill=\"" +
                   label_color(c.cls.label) + "\"/>\n";
        }
    }
    out += "</svg>\n";
    return out;
}

CurveExtract invariant_curve_extract(const ModelConfig& cfg, char which,
                                     int fit_order, int burn_in, int n) {
    if (fit_order < 1 || fit_order > 64)
        throw std::invalid_argument("invariant_curve_extract: bad fit order");
    MapEngine eng(cfg);
    eng.enforce_sections = false;
    const OrbitResult orb = run_orbit(eng, which, {0.0, 0.03}, burn_in, n);
    if (orb.rows.size() < static_cast<std::size_t>(n) / 2)
        throw NotAGraph("orbit left the domain before the fit window");
    if (orb.skipped * 10 > burn_in + n)
        throw UnreliableEstimate("more than 10% of iterates were skipped");

    std::vector<TailPoint> tail;
    const std::size_t keep = std::min<std::size_t>(orb.rows.size(), kTailLen);
    for (std::size_t i = orb.rows.size() - keep; i < orb.rows.size(); ++i)
        tail.push_back({orb.rows[i].y, orb.rows[i].theta});
    if (tail_winding(tail) != 1)
        throw NotAGraph("limit set does not wind once around the annulus");

    const int m = 2 * fit_order + 1;
    std::vector<double> A(static_cast<std::size_t>(m) * m, 0.0), b(m, 0.0);
    std::vector<double> basis(m);
    for (const OrbitRow& row : orb.rows) {
        basis[0] = 1.0;
        for (int k = 1; k <= fit_order; ++k) {
            basis[2 * k - 1] = std::cos(k * row.theta);
            basis[2 * k] = std::sin(k * row.theta);
        }
        for (int r = 0; r < m; ++r) {
            for (int c2 = 0; c2 <= r; ++c2) A[r * m + c2] += basis[r] * basis[c2];
            b[r] += row.y * basis[r];
        }
    }
    for (int r = 0; r < m; ++r)
        for (int c2 = r + 1; c2 < m; ++c2) A[r * m + c2] = A[c2 * m + r];
    if (!solve_dense(A, b, m))
        throw NotAGraph("degenerate fit: orbit covers too few angles");

    std::vector<double> cosc(fit_order), sinc(fit_order);
    for (int k = 1; k <= fit_order; ++k) {
        cosc[k - 1] = b[2 * k - 1];
        sinc[k - 1] = b[2 * k];
    }
    CurveExtract out;
    out.curve = ForcingProfile(b[0], cosc, sinc);
    out.points = static_cast<int>(orb.rows.size());
    for (const OrbitRow& row : orb.rows) {
        out.residual =
            std::max(out.residual, std::abs(row.y - out.curve.eval(row.theta)));
        out.sup_y = std::max(out.sup_y, std::abs(row.y));
    }
    if (out.residual > 1e-3)
        throw NotAGraph("sup residual " + fmt(out.residual) +
                        " exceeds the graph tolerance 1e-3");
    out.winding = 1;
    return out;
}

double rotation_number_2d(const ModelConfig& cfg, char which, int burn_in,
                          int n) {
    if (n <= 0)
        throw std::invalid_argument("rotation_number_2d: n must be positive");
    MapEngine eng(cfg);
    eng.enforce_sections = false;
    ReturnMapPoint p{0.0, 0.03};
    for (int i = 0; i < burn_in; ++i) {
        advance(eng, which, p);
        p.theta = wrap_angle(p.theta);
    }
    const double lift0 = p.theta;
    for (int i = 0; i < n; ++i) advance(eng, which, p);
    const double turns = (p.theta - lift0) / (TWO_PI * n);
    return turns - std::floor(turns);
}

}  // namespace hetlab
