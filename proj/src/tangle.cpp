#include "hetlab/tangle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>

#include "hetlab/angles.hpp"
#include "hetlab/numutil.hpp"
#include "json.hpp"

namespace hetlab {

namespace {

constexpr int kPointCap = 1 << 20;
constexpr double kLiftTol = 0.05;     // adaptive sampling target per cell
constexpr double kTailLevel = 1e-6;
// Lift window above the fold.  Deliberately incommensurate with pi: a window
// of exactly pi makes a graph zero leave at the tip the moment the next one
// enters at the top edge, freezing the intersection count.
constexpr double kArcWindow = 2.0;
constexpr double kInf = std::numeric_limits<double>::infinity();

// In1 -> Out2 through Loc_1, the first connection, Loc_2.  Odd in y, so a
// negative segment half maps through |y| with the sign restored.
class HalfMap {
public:
    HalfMap(const ModelConfig& cfg, const SegmentSpec& seg) : eng_(cfg), seg_(&seg) {
        if (cfg.mu1 != 0.0 || cfg.mu2 <= 0.0)
            throw std::invalid_argument("image spiral needs mu1 = 0 and mu2 > 0");
        if (!(seg.theta_hi > seg.theta_lo))
            throw std::invalid_argument("segment window is empty");
        eng_.enforce_sections = false;
    }

    const MapEngine& engine() const { return eng_; }

    double theta_at(double s) const {
        return seg_->theta_lo + s * (seg_->theta_hi - seg_->theta_lo);
    }
    double height_at(double s) const { return seg_->eta.eval(theta_at(s)); }

    bool eval(double s, SpiralPoint& out) const {
        const double th0 = theta_at(s);
        const double y0 = seg_->eta.eval(th0);
        const double ay = std::abs(y0);
        if (ay < 1e-13) return false;
        MapResult r = eng_.local_map(1, {ay, th0});
        if (r.status != MapStatus::Ok) return false;
        r = eng_.global_map_12(r.p);
        if (r.status != MapStatus::Ok) return false;
        r = eng_.local_map(2, r.p);
        if (r.status != MapStatus::Ok) return false;
        out.s = s;
        out.y = y0 < 0.0 ? -r.p.y : r.p.y;
        out.theta = r.p.theta;
        return true;
    }

    double lift(double s) const {
        SpiralPoint p;
        return eval(s, p) ? p.theta : kInf;
    }
    double absy(double s) const {
        SpiralPoint p;
        return eval(s, p) ? std::abs(p.y) : 0.0;
    }

private:
    MapEngine eng_;
    const SegmentSpec* seg_;
};

void check_single_sign(const SegmentSpec& seg) {
    int pos = 0, neg = 0;
    double cross_theta = 0.0;
    double prev = 0.0;
    for (int i = 0; i <= 4096; ++i) {
        const double th = seg.theta_lo + (seg.theta_hi - seg.theta_lo) * i / 4096.0;
        const double v = seg.eta.eval(th);
        if (v > 1e-13) ++pos;
        if (v < -1e-13) ++neg;
        if (i > 0 && prev * v < 0.0) cross_theta = th;
        prev = v;
    }
    if (pos > 0 && neg > 0) {
        char buf[96];
        std::snprintf(buf, sizeof buf,
                      "segment crosses the manifold near theta = %.6g; split there",
                      cross_theta);
        throw SplitAtManifold(buf);
    }
}

// Coarse scan plus golden refinement of the interior lift minimum.  Returns
// false when the minimum sits at the window edge (monotone lift).
bool find_fold(const HalfMap& hm, double s0, double s1, SpiralPoint& fold) {
    constexpr int n = 64;
    int best = 0;
    double best_lift = kInf;
    for (int i = 0; i <= n; ++i) {
        const double s = s0 + (s1 - s0) * i / n;
        const double l = hm.lift(s);
        if (l < best_lift) {
            best_lift = l;
            best = i;
        }
    }
    if (best == 0 || best == n) return false;
    const double sa = s0 + (s1 - s0) * (best - 1) / n;
    const double sb = s0 + (s1 - s0) * (best + 1) / n;
    const double s_star = golden_minimize([&](double s) { return hm.lift(s); }, sa, sb, 120);
    return hm.eval(s_star, fold);
}

} // namespace

SegmentSpec default_unstable_segment(double M) {
    if (!(M > 0.0 && M < 1.0))
        throw std::invalid_argument("segment height M must lie in (0, 1)");
    // M sin^2(theta) = M/2 - (M/2) cos(2 theta).
    SegmentSpec seg;
    seg.eta = ForcingProfile(M / 2.0, {0.0, -M / 2.0}, {});
    seg.theta_lo = 0.0;
    seg.theta_hi = PI;
    return seg;
}

ForcingProfile default_stable_graph() { return ForcingProfile(0.0, {}, {0.3}); }

SpiralCurve unstable_image_spiral(const ModelConfig& cfg, const SegmentSpec& seg,
                                  int n_samples) {
    if (n_samples < 16) throw std::invalid_argument("n_samples must be at least 16");
    check_single_sign(seg);
    HalfMap hm(cfg, seg);

    SpiralCurve sp;
    const double s0 = seg.end_margin;
    const double s1 = 1.0 - seg.end_margin;
    if (!(s1 > s0)) throw std::invalid_argument("end_margin leaves no parameter range");

    struct Sample {
        double s = 0.0;
        SpiralPoint p;
        bool ok = false;
    };
    auto make = [&](double s) {
        Sample smp;
        smp.s = s;
        smp.ok = hm.eval(s, smp.p);
        if (!smp.ok) ++sp.dropped;
        return smp;
    };

    // In-order emission; cells split while the lift step is coarse.
    std::function<void(const Sample&, const Sample&, int)> subdivide =
        [&](const Sample& a, const Sample& b, int depth) {
            const bool refinable = a.ok && b.ok &&
                                   std::abs(b.p.theta - a.p.theta) > kLiftTol &&
                                   b.s - a.s > 1e-11 && depth < 40 &&
                                   static_cast<int>(sp.points.size()) < kPointCap;
            if (refinable) {
                const Sample mid = make(0.5 * (a.s + b.s));
                if (mid.ok) {
                    subdivide(a, mid, depth + 1);
                    subdivide(mid, b, depth + 1);
                    return;
                }
            }
            if (b.ok) sp.points.push_back(b.p);
        };

    Sample prev = make(s0);
    if (prev.ok) sp.points.push_back(prev.p);
    for (int i = 1; i < n_samples; ++i) {
        Sample next = make(s0 + (s1 - s0) * i / (n_samples - 1.0));
        subdivide(prev, next, 0);
        prev = next;
    }
    if (sp.points.size() < 8) throw NumericallyDegenerate("spiral sampling collapsed");

    // Fold: the unique interior minimum of the lift.
    SpiralPoint fold;
    if (find_fold(hm, s0, s1, fold)) {
        sp.fold_s = fold.s;
        sp.fold_y = fold.y;
        sp.fold_theta = fold.theta;
    } else {
        sp.degenerate = true;
    }

    // Maximum radius, golden-refined around the sampled peak.
    size_t i_max = 0;
    for (size_t i = 0; i < sp.points.size(); ++i)
        if (std::abs(sp.points[i].y) > std::abs(sp.points[i_max].y)) i_max = i;
    double sa = sp.points[i_max > 0 ? i_max - 1 : 0].s;
    double sb = sp.points[std::min(i_max + 1, sp.points.size() - 1)].s;
    if (sb > sa) {
        const double s_peak =
            golden_minimize([&](double s) { return -hm.absy(s); }, sa, sb, 90);
        sp.max_radius = hm.absy(s_peak);
    }
    sp.max_radius = std::max(sp.max_radius, std::abs(sp.points[i_max].y));

    // Tail decay: outermost points below the level and monotone toward the end.
    auto tail_ok = [&](bool front) {
        const size_t n = sp.points.size();
        const size_t m = std::min<size_t>(8, n / 2);
        double prev_y = kInf;
        for (size_t k = 0; k < m; ++k) {
            const double y = std::abs(sp.points[front ? k : n - 1 - k].y);
            if (y > prev_y + 1e-15) return false;
            prev_y = y;
        }
        return std::abs(sp.points[front ? 0 : n - 1].y) < kTailLevel;
    };
    sp.tails_ok = tail_ok(true) && tail_ok(false);
    return sp;
}

std::string spiral_to_csv(const SpiralCurve& spiral) {
    std::string out = "s,y,theta_lift\n";
    char buf[120];
    for (const auto& p : spiral.points) {
        std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g\n", p.s, p.y, p.theta);
        out += buf;
    }
    return out;
}

RadiusSlopeFit spiral_radius_slopes(const ModelConfig& cfg, const std::vector<double>& Ms) {
    if (Ms.size() < 2) throw std::invalid_argument("need at least two segment heights");
    RadiusSlopeFit fit;
    fit.M_values = Ms;
    for (double M : Ms) {
        const SpiralCurve sp = unstable_image_spiral(cfg, default_unstable_segment(M));
        fit.radii.push_back(sp.max_radius);
    }
    std::vector<double> lx, ly;
    for (size_t i = 0; i < Ms.size(); ++i) {
        lx.push_back(std::log(Ms[i]));
        ly.push_back(std::log(fit.radii[i]));
    }
    fit.slope = fit_line(lx, ly).slope;
    double lo = kInf, hi = -kInf;
    for (size_t i = 0; i + 1 < Ms.size(); ++i) {
        const double s = (ly[i + 1] - ly[i]) / (lx[i + 1] - lx[i]);
        lo = std::min(lo, s);
        hi = std::max(hi, s);
    }
    fit.spread = hi - lo;
    const DerivedConstants dc = derive_constants(cfg);
    fit.cand_delta = dc.delta;
    fit.cand_delta1 = dc.delta1;
    fit.cand_delta2 = dc.delta2;
    return fit;
}

namespace {

// Intersection counter for one mu2: fold-arc of the spiral against the
// eta_s graph, walked branch by branch on a uniform lift grid.
class ArcCounter {
public:
    ArcCounter(const ModelConfig& cfg, const SegmentSpec& seg, const ForcingProfile& eta_s)
        : hm_(cfg, seg), eta_s_(&eta_s) {
        const double s0 = seg.end_margin, s1 = 1.0 - seg.end_margin;
        if (!find_fold(hm_, s0, s1, fold_))
            throw NumericallyDegenerate("no interior fold; cannot count intersections");
        // Arc ends: lift rises by the window on each side of the fold.
        const double target = fold_.theta + kArcWindow;
        s_left_ = edge(s0, fold_.s, target);
        s_right_ = edge(s1, fold_.s, target);
    }

    const SpiralPoint& fold() const { return fold_; }

    // Height of the fold tip above the stable graph; a sign flip in mu2 is
    // the tangency itself, separating it from a zero sliding over the window
    // edge (both jump the count by 2).
    double tip_gap() const { return fold_.y - eta_s_->eval(fold_.theta); }

    double f(double s) const {
        SpiralPoint p;
        if (!hm_.eval(s, p)) return kInf;
        return p.y - eta_s_->eval(p.theta);
    }

    // Transversal crossings on both branches; each sign change on the lift
    // grid counts once.  step is the lift-grid resolution.
    int count(double step) const {
        return branch_count(s_left_, fold_.s, step) + branch_count(fold_.s, s_right_, step);
    }

    // Count with one refinement check; refuses to settle only beyond the cap.
    int stable_count() const {
        double step = 0.02;
        int n = count(step);
        while (true) {
            const int finer = count(step / 2.0);
            if (finer == n) return n;
            n = finer;
            step /= 2.0;
            if (kArcWindow / step > kPointCap / 4)
                throw NumericallyDegenerate("intersection count does not stabilize");
        }
    }

    // Local quadratic coefficient of f at the touch point.  Restricted to a
    // short lift window above the fold: the collapsing pair lives there, and
    // the nearest unrelated crossing is about pi away.
    double quad_coeff_at_touch() const {
        const double target = fold_.theta + 0.5;
        const double a = edge(s_left_, fold_.s, target);
        const double b = edge(s_right_, fold_.s, target);
        const double s_hat =
            golden_minimize([&](double s) { return std::abs(f(s)); }, a, b, 140);
        const double h = 1e-3 * (b - a);
        return (f(s_hat + h) - 2.0 * f(s_hat) + f(s_hat - h)) / (2.0 * h * h);
    }

private:
    double edge(double s_outer, double s_fold, double target_lift) const {
        // lift is monotone between the fold and the window end; when even the
        // outermost sample is inside the window the arc is clipped there.
        if (hm_.lift(s_outer) <= target_lift) return s_outer;
        return bisect_root(
            [&](double s) { return hm_.lift(s) - target_lift; }, s_outer, s_fold, 200, 0.0);
    }

    int branch_count(double sa, double sb, double step) const {
        SpiralPoint pa, pb;
        if (!hm_.eval(sa, pa) || !hm_.eval(sb, pb)) return 0;
        const double la = pa.theta, lb = pb.theta;
        const int n = std::max(2, static_cast<int>(std::ceil(std::abs(lb - la) / step)));
        int flips = 0;
        double prev = f(sa);
        double s_prev = sa;
        for (int i = 1; i <= n; ++i) {
            // March in lift, not in s: crossings cluster where the lift
            // passes the graph's zeros.
            const double target = la + (lb - la) * i / n;
            double s;
            if (i == n) {
                s = sb;
            } else {
                s = bisect_root(
                    [&](double q) { return hm_.lift(q) - target; }, s_prev, sb, 100, 0.0);
            }
            const double v = f(s);
            if (std::isfinite(v)) {
                if (std::isfinite(prev) && prev != 0.0 && v != 0.0 &&
                    (prev > 0.0) != (v > 0.0))
                    ++flips;
                if (v != 0.0) prev = v;
            }
            s_prev = s;
        }
        return flips;
    }

    HalfMap hm_;
    const ForcingProfile* eta_s_;
    SpiralPoint fold_;
    double s_left_ = 0.0, s_right_ = 0.0;
};

} // namespace

TangleScan tangency_sequence(const ModelConfig& cfg, const SegmentSpec& seg,
                             const ForcingProfile& eta_s, double mu2_hi, double mu2_lo,
                             int count) {
    if (!(mu2_hi > mu2_lo && mu2_lo > 0.0))
        throw std::invalid_argument("mu2 range must satisfy hi > lo > 0");
    if (count < 1) throw std::invalid_argument("count must be positive");

    const DerivedConstants dc = derive_constants(cfg);
    const double lkg = cfg.omega * dc.K_G;
    const double step_ratio = std::exp(-TWO_PI / (lkg * 48.0));

    auto count_at = [&](double mu2) {
        ModelConfig c = cfg;
        c.mu2 = mu2;
        ArcCounter ac(c, seg, eta_s);
        return ac.stable_count();
    };
    auto tip_gap_at = [&](double mu2) {
        ModelConfig c = cfg;
        c.mu2 = mu2;
        return ArcCounter(c, seg, eta_s).tip_gap();
    };

    TangleScan scan;
    double mu = mu2_hi;
    int n_prev = count_at(mu);
    scan.mu2_grid.push_back(mu);
    scan.counts.push_back(n_prev);

    while (mu > mu2_lo && static_cast<int>(scan.tangencies.size()) < count) {
        const double mu_next = std::max(mu * step_ratio, mu2_lo * 0.999999);
        const int n_next = count_at(mu_next);
        scan.mu2_grid.push_back(mu_next);
        scan.counts.push_back(n_next);
        if (n_next != n_prev) {
            // Bisect the step; a jump of 2 is a tangency, 1 is a crossing
            // sliding over the window edge.
            double a = mu, b = mu_next;
            int na = n_prev, nb = n_next;
            while ((a - b) / a > 1e-10) {
                const double m = std::sqrt(a * b);
                int nm;
                try {
                    nm = count_at(m);
                } catch (const NumericallyDegenerate&) {
                    // Unresolvable sliver: the midpoint sits essentially on
                    // the transition; shrink toward it from above.
                    b = m;
                    continue;
                }
                if (nm == na) {
                    a = m;
                } else {
                    b = m;
                    nb = nm;
                }
            }
            if (std::abs(nb - na) == 2 &&
                (tip_gap_at(a) > 0.0) != (tip_gap_at(b) > 0.0)) {
                TangencyEvent ev;
                ev.mu2 = std::sqrt(a * b);
                ev.count_before = na;
                ev.count_after = nb;
                ModelConfig c = cfg;
                c.mu2 = ev.mu2;
                ArcCounter ac(c, seg, eta_s);
                ev.quad_coeff = ac.quad_coeff_at_touch();
                ev.nondegenerate = std::abs(ev.quad_coeff) > 1e-6;
                scan.tangencies.push_back(ev);
            } else if (std::abs(nb - na) > 2) {
                throw NumericallyDegenerate("intersection count jumped by more than 2");
            }
        }
        mu = mu_next;
        n_prev = n_next;
        if (mu <= mu2_lo) break;
    }

    if (!scan.tangencies.empty()) {
        const bool first_positive = scan.tangencies.front().quad_coeff > 0.0;
        for (size_t i = 0; i < scan.tangencies.size(); ++i)
            if ((scan.tangencies[i].quad_coeff > 0.0) == first_positive)
                scan.primary.push_back(static_cast<int>(i));
    }
    return scan;
}

std::string tangencies_to_json(const TangleScan& scan) {
    nlohmann::json j;
    j["mu2_grid"] = scan.mu2_grid;
    j["counts"] = scan.counts;
    j["tangencies"] = nlohmann::json::array();
    for (const auto& ev : scan.tangencies) {
        j["tangencies"].push_back({{"mu2", ev.mu2},
                                   {"quad_coeff", ev.quad_coeff},
                                   {"nondegenerate", ev.nondegenerate},
                                   {"count_before", ev.count_before},
                                   {"count_after", ev.count_after}});
    }
    j["primary"] = scan.primary;
    return j.dump(2);
}

HomCurve hom_curve(const ModelConfig& cfg, const std::vector<double>& mu1_grid) {
    if (mu1_grid.empty()) throw std::invalid_argument("mu1 grid is empty");
    for (double m1 : mu1_grid)
        if (!(m1 > 0.0))
            throw std::invalid_argument("the homoclinic locus is defined for mu1 > 0");
    if (!cfg.phi2.sign_changing())
        throw NoHomoclinicity("phi2 never changes sign; the balance cannot vanish");

    // Physical first-return height of the unstable set's trace (y = 0 on
    // Out1), minimized over the starting angle.  Concave and decreasing in
    // mu2 once the negative part of phi2 takes over, so the root is unique.
    auto min_height = [&](double m1, double m2) {
        ModelConfig c = cfg;
        c.mu1 = m1;
        c.mu2 = m2;
        MapEngine eng(c);
        eng.enforce_sections = false;
        const double m = c.mu_norm();
        auto height = [&](double th) {
            MapResult r = eng.global_map_12({0.0, th});
            if (r.status != MapStatus::Ok) return kInf;
            r = eng.local_map(2, r.p);
            if (r.status != MapStatus::Ok) return kInf;
            r = eng.global_map_21(r.p);
            return m * r.p.y;
        };
        double best = kInf;
        double arg = 0.0;
        constexpr int n = 4096;
        for (int i = 0; i < n; ++i) {
            const double th = TWO_PI * i / n;
            const double v = height(th);
            if (v < best) {
                best = v;
                arg = th;
            }
        }
        const double th_star =
            golden_minimize(height, arg - TWO_PI / n, arg + TWO_PI / n, 80);
        return std::min(best, height(th_star));
    };

    HomCurve hc;
    for (double m1 : mu1_grid) {
        double lo = 0.0;
        double hi = std::pow(m1, derive_constants(cfg).delta2);
        if (min_height(m1, 0.0) <= 0.0)
            throw NoHomoclinicity("first-return height is not positive at mu2 = 0");
        int grow = 0;
        while (min_height(m1, hi) > 0.0) {
            hi *= 2.0;
            if (++grow > 60)
                throw NoHomoclinicity("first-return height never changes sign over the bracket");
        }
        for (int it = 0; it < 80 && (hi - lo) > 1e-14 * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (mid == lo || mid == hi) break;
            (min_height(m1, mid) > 0.0 ? lo : hi) = mid;
        }
        hc.mu1.push_back(m1);
        hc.mu2.push_back(0.5 * (lo + hi));
    }
    if (hc.mu1.size() >= 2) {
        std::vector<double> lx, ly;
        for (size_t i = 0; i < hc.mu1.size(); ++i) {
            lx.push_back(std::log(hc.mu1[i]));
            ly.push_back(std::log(hc.mu2[i]));
        }
        const LineFit f = fit_line(lx, ly);
        hc.slope = f.slope;
        hc.intercept = f.intercept;
    }
    return hc;
}

PulseStretch pulse_rectangle_stretch(const ModelConfig& cfg, double theta_lo,
                                     double theta_hi, double y_lo, double y_hi,
                                     int n_iterates, int n_samples) {
    if (cfg.mu1 != 0.0 || cfg.mu2 <= 0.0)
        throw std::invalid_argument("pulse stretch needs mu1 = 0 and mu2 > 0");
    if (!(theta_hi > theta_lo) || !(y_lo > 0.0) || y_hi < y_lo)
        throw std::invalid_argument("degenerate rectangle");
    if (n_iterates < 1 || n_samples < 2)
        throw std::invalid_argument("need at least one iterate and two samples");

    MapEngine eng(cfg);
    eng.enforce_sections = false;

    // Sample angles; the zeros of phi2 are forced in so the lift there shows
    // the -omega*K_G*ln(y_lo) growth exactly.
    std::vector<double> thetas;
    for (int i = 0; i < n_samples; ++i)
        thetas.push_back(theta_lo + (theta_hi - theta_lo) * i / (n_samples - 1.0));
    for (double z : cfg.phi2.transversal_zeros()) {
        for (double t = z + TWO_PI * std::floor((theta_lo - z) / TWO_PI); t <= theta_hi;
             t += TWO_PI)
            if (t >= theta_lo) thetas.push_back(t);
    }
    std::sort(thetas.begin(), thetas.end());

    PulseStretch out;
    double th_min = kInf, th_max = -kInf;
    double widest = 0.0;
    for (double th : thetas) {
        ReturnMapPoint bot{y_lo, th};
        ReturnMapPoint top{y_hi, th};
        bool bot_ok = true, top_ok = y_hi > y_lo;
        for (int k = 0; k < n_iterates; ++k) {
            if (bot_ok) {
                const MapResult r = eng.return_map_G(bot);
                if (r.status != MapStatus::Ok) {
                    bot_ok = false;
                    if (r.status == MapStatus::SingularHit) ++out.singular_skips;
                } else {
                    bot = r.p;
                }
            }
            if (top_ok) {
                const MapResult r = eng.return_map_G(top);
                if (r.status != MapStatus::Ok) {
                    top_ok = false;
                    if (r.status == MapStatus::SingularHit) ++out.singular_skips;
                } else {
                    top = r.p;
                }
            }
        }
        if (bot_ok) {
            ++out.samples;
            th_min = std::min(th_min, bot.theta);
            th_max = std::max(th_max, bot.theta);
            if (top_ok) widest = std::max(widest, std::abs(top.y - bot.y));
        }
    }
    if (out.samples > 0) {
        out.theta_min = th_min;
        out.theta_max = th_max;
        out.theta_range = th_max - th_min;
        out.wraps = static_cast<int>(std::floor(out.theta_range / TWO_PI));
    }
    out.y_contraction = y_hi > y_lo ? widest / (y_hi - y_lo) : 0.0;
    return out;
}

} // namespace hetlab
