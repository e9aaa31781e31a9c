#include "hetlab/melnikov.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/numeric/odeint.hpp>

#include "hetlab/angles.hpp"
#include "hetlab/numutil.hpp"

namespace hetlab {

namespace {

constexpr double kWeightFloor = 1e-12;    // required weight decay at the cut
constexpr double kOffset = 1e-8;          // shooting offset along the eigenvector
constexpr double kSampleDt = 0.05;        // uniform sampling step, integrated part
constexpr double kTailDt = 0.1;           // sampling step on the linearized tails

double ipow(double x, int n) {
    double r = 1.0;
    for (int i = 0; i < n; ++i) r *= x;
    return r;
}

double trig_eval(Trig t, int k, double s, double T) {
    if (t == Trig::None) return 1.0;
    const double arg = TWO_PI * k * s / T;
    return t == Trig::Cos ? std::cos(arg) : std::sin(arg);
}

} // namespace

Expression Expression::parse(const std::string& text) {
    Expression out;
    size_t i = 0;
    const size_t n = text.size();
    auto skip_ws = [&] {
        while (i < n && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    };
    auto fail = [&](const std::string& what) {
        throw ConfigError("expression: " + what + " at position " + std::to_string(i) +
                          " in \"" + text + "\"");
    };

    skip_ws();
    if (i == n) fail("empty expression");
    double sign = 1.0;
    if (text[i] == '+' || text[i] == '-') {
        sign = text[i] == '-' ? -1.0 : 1.0;
        ++i;
    }
    while (true) {
        ExprTerm term;
        term.coeff = sign;
        bool has_factor = false;
        while (true) {
            skip_ws();
            if (i >= n) break;
            const char ch = text[i];
            if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '.') {
                char* end = nullptr;
                const double v = std::strtod(text.c_str() + i, &end);
                if (end == text.c_str() + i) fail("bad number");
                i = end - text.c_str();
                term.coeff *= v;
                has_factor = true;
            } else if (ch == 'x' || ch == 'y') {
                ++i;
                int p = 1;
                skip_ws();
                if (i < n && text[i] == '^') {
                    ++i;
                    skip_ws();
                    if (i >= n || !std::isdigit(static_cast<unsigned char>(text[i])))
                        fail("bad exponent");
                    p = 0;
                    while (i < n && std::isdigit(static_cast<unsigned char>(text[i])))
                        p = 10 * p + (text[i++] - '0');
                }
                (ch == 'x' ? term.px : term.py) += p;
                has_factor = true;
            } else if (ch == 'c' || ch == 's') {
                const Trig trig = ch == 'c' ? Trig::Cos : Trig::Sin;
                const char* name = ch == 'c' ? "cos(" : "sin(";
                if (text.compare(i, 4, name) != 0) fail("expected cos( or sin(");
                if (term.trig != Trig::None) fail("one trig factor per term");
                i += 4;
                skip_ws();
                int k = 1;
                if (i < n && std::isdigit(static_cast<unsigned char>(text[i]))) {
                    k = 0;
                    while (i < n && std::isdigit(static_cast<unsigned char>(text[i])))
                        k = 10 * k + (text[i++] - '0');
                    skip_ws();
                    if (i < n && text[i] == '*') {
                        ++i;
                        skip_ws();
                    }
                }
                if (i >= n || text[i] != 't') fail("expected t in trig argument");
                ++i;
                skip_ws();
                if (i >= n || text[i] != ')') fail("expected )");
                ++i;
                term.trig = trig;
                term.k = k;
                has_factor = true;
            } else {
                break;
            }
            skip_ws();
            if (i < n && text[i] == '*') {
                ++i;
                continue;
            }
            break;
        }
        if (!has_factor) fail("empty term");
        out.terms_.push_back(term);
        skip_ws();
        if (i >= n) break;
        if (text[i] == '+' || text[i] == '-') {
            sign = text[i] == '-' ? -1.0 : 1.0;
            ++i;
        } else {
            fail("expected + or -");
        }
    }
    return out;
}

double Expression::eval(double x, double y, double s, double T) const {
    double v = 0.0;
    for (const auto& t : terms_)
        v += t.coeff * ipow(x, t.px) * ipow(y, t.py) * trig_eval(t.trig, t.k, s, T);
    return v;
}

double Expression::dx(double x, double y, double s, double T) const {
    double v = 0.0;
    for (const auto& t : terms_)
        if (t.px > 0)
            v += t.coeff * t.px * ipow(x, t.px - 1) * ipow(y, t.py) *
                 trig_eval(t.trig, t.k, s, T);
    return v;
}

double Expression::dy(double x, double y, double s, double T) const {
    double v = 0.0;
    for (const auto& t : terms_)
        if (t.py > 0)
            v += t.coeff * t.py * ipow(x, t.px) * ipow(y, t.py - 1) *
                 trig_eval(t.trig, t.k, s, T);
    return v;
}

bool Expression::autonomous() const {
    for (const auto& t : terms_)
        if (t.trig != Trig::None && t.coeff != 0.0) return false;
    return true;
}

bool Expression::zero() const {
    for (const auto& t : terms_)
        if (t.coeff != 0.0) return false;
    return true;
}

std::string Expression::to_string() const {
    std::string out;
    char buf[64];
    for (const auto& t : terms_) {
        if (!out.empty()) out += t.coeff < 0 ? " - " : " + ";
        else if (t.coeff < 0) out += "-";
        std::snprintf(buf, sizeof buf, "%.12g", std::abs(t.coeff));
        out += buf;
        if (t.px > 0) {
            out += "*x";
            if (t.px > 1) {
                std::snprintf(buf, sizeof buf, "^%d", t.px);
                out += buf;
            }
        }
        if (t.py > 0) {
            out += "*y";
            if (t.py > 1) {
                std::snprintf(buf, sizeof buf, "^%d", t.py);
                out += buf;
            }
        }
        if (t.trig != Trig::None) {
            std::snprintf(buf, sizeof buf, "*%s(%d t)", t.trig == Trig::Cos ? "cos" : "sin",
                          t.k);
            out += buf;
        }
    }
    return out.empty() ? "0" : out;
}

std::array<double, 4> PlanarSystem::jacobian(Vec2 p) const {
    return {g1.dx(p.x, p.y, 0, 1), g1.dy(p.x, p.y, 0, 1),
            g2.dx(p.x, p.y, 0, 1), g2.dy(p.x, p.y, 0, 1)};
}

namespace {

SaddleInfo make_saddle(const PlanarSystem& sys, Vec2 guess) {
    SaddleInfo s;
    Vec2 p = guess;
    for (int it = 0; it < 12; ++it) {
        const Vec2 f = sys.g(p);
        const auto J = sys.jacobian(p);
        const double det = J[0] * J[3] - J[1] * J[2];
        if (det == 0.0) break;
        p = p - (1.0 / det) * Vec2{J[3] * f.x - J[1] * f.y, -J[2] * f.x + J[0] * f.y};
    }
    s.pos = p;
    const auto J = sys.jacobian(p);
    const double tr = J[0] + J[3];
    const double det = J[0] * J[3] - J[1] * J[2];
    const double disc = tr * tr - 4.0 * det;
    if (disc <= 0.0) throw ConfigError("saddle eigenvalues are not real");
    const double rt = std::sqrt(disc);
    const double lam_p = 0.5 * (tr + rt);
    const double lam_m = 0.5 * (tr - rt);
    s.e = lam_p;
    s.c = -lam_m;
    auto eigvec = [&](double lam) {
        Vec2 v1{J[1], lam - J[0]};
        Vec2 v2{lam - J[3], J[2]};
        Vec2 v = norm(v1) >= norm(v2) ? v1 : v2;
        const double nv = norm(v);
        if (nv == 0.0) return Vec2{1.0, 0.0};
        return (1.0 / nv) * v;
    };
    s.u_e = eigvec(lam_p);
    s.u_c = eigvec(lam_m);
    return s;
}

} // namespace

PlanarSystem planar_system_from_keyvalues(const KeyValueFile& kv) {
    PlanarSystem sys;
    sys.T = kv.get_double("T");
    if (sys.T <= 0.0) throw ConfigError("T must be positive");
    sys.g1 = Expression::parse(kv.get_string("g1"));
    sys.g2 = Expression::parse(kv.get_string("g2"));
    sys.P1 = Expression::parse(kv.has("P1") ? kv.get_string("P1") : "0");
    sys.P2 = Expression::parse(kv.has("P2") ? kv.get_string("P2") : "0");
    sys.Q1 = Expression::parse(kv.has("Q1") ? kv.get_string("Q1") : "0");
    sys.Q2 = Expression::parse(kv.has("Q2") ? kv.get_string("Q2") : "0");
    if (!sys.g1.autonomous() || !sys.g2.autonomous())
        throw ConfigError("g1/g2 must be autonomous (no trig factors)");
    auto point = [&](const char* key) {
        const auto v = kv.get_list(key);
        if (v.size() != 2) throw ConfigError(std::string(key) + " must be [x, y]");
        return Vec2{v[0], v[1]};
    };
    const Vec2 o1 = point("O1");
    const Vec2 o2 = point("O2");
    if (kv.has("l1_via")) sys.l1_via = point("l1_via");
    if (kv.has("l2_via")) sys.l2_via = point("l2_via");
    const auto unused = kv.unused_keys();
    if (!unused.empty()) {
        std::string msg = "unknown keys:";
        for (const auto& k : unused) msg += " " + k;
        throw ConfigError(msg);
    }
    sys.O1 = make_saddle(sys, o1);
    sys.O2 = make_saddle(sys, o2);
    return sys;
}

PlanarSystem load_planar_system(const std::string& path) {
    KeyValueFile kv = KeyValueFile::parse_file(path);
    return planar_system_from_keyvalues(kv);
}

std::vector<CheckResult> validate_planar(const PlanarSystem& sys) {
    std::vector<CheckResult> checks;
    char buf[160];
    auto add = [&](const char* id, bool pass, const std::string& witness) {
        checks.push_back({id, pass, witness});
    };

    for (int i = 1; i <= 2; ++i) {
        const SaddleInfo& s = i == 1 ? sys.O1 : sys.O2;
        const double res = norm(sys.g(s.pos));
        std::snprintf(buf, sizeof buf, "|g(O%d)| = %.3g", i, res);
        add(i == 1 ? "equilibrium-O1" : "equilibrium-O2", res < 1e-10, buf);
        std::snprintf(buf, sizeof buf, "c%d = %.12g, e%d = %.12g", i, s.c, i, s.e);
        add(i == 1 ? "saddle-O1-dissipative" : "saddle-O2-dissipative",
            s.c > s.e && s.e > 0.0, buf);
    }

    // (P5): forcing and its first spatial derivatives vanish at both saddles
    // for all t (checked on a 16-point time sample).
    double worst = 0.0;
    for (const Expression* f : {&sys.P1, &sys.P2, &sys.Q1, &sys.Q2}) {
        for (const SaddleInfo* s : {&sys.O1, &sys.O2}) {
            for (int j = 0; j < 16; ++j) {
                const double t = sys.T * j / 16.0;
                worst = std::max(worst, std::abs(f->eval(s->pos.x, s->pos.y, t, sys.T)));
                worst = std::max(worst, std::abs(f->dx(s->pos.x, s->pos.y, t, sys.T)));
                worst = std::max(worst, std::abs(f->dy(s->pos.x, s->pos.y, t, sys.T)));
            }
        }
    }
    std::snprintf(buf, sizeof buf, "max |forcing, D forcing| at saddles = %.3g", worst);
    add("forcing-vanishes-at-saddles", worst < 1e-10, buf);
    return checks;
}

Vec2 HeteroclinicOrbit::position(double t) const {
    const auto& s = samples;
    if (s.empty()) return {};
    if (t <= s.front().t) return s.front().pos;
    if (t >= s.back().t) return s.back().pos;
    size_t hi = std::upper_bound(s.begin(), s.end(), t,
                                 [](double v, const OrbitSample& a) { return v < a.t; }) -
                s.begin();
    const OrbitSample& a = s[hi - 1];
    const OrbitSample& b = s[hi];
    const double h = b.t - a.t;
    if (h <= 0.0) return a.pos;
    const double u = (t - a.t) / h;
    const double h00 = (1 + 2 * u) * (1 - u) * (1 - u);
    const double h10 = u * (1 - u) * (1 - u);
    const double h01 = u * u * (3 - 2 * u);
    const double h11 = u * u * (u - 1);
    return h00 * a.pos + (h * h10) * a.vel + h01 * b.pos + (h * h11) * b.vel;
}

Vec2 HeteroclinicOrbit::tangent(double t) const {
    const auto& s = samples;
    if (s.empty()) return {1.0, 0.0};
    // Near the saddles the field evaluation cancels catastrophically; fall
    // back to the stored sample tangents there (constant eigendirections).
    if (t <= s.front().t) return s.front().tau;
    if (t >= s.back().t) return s.back().tau;
    if (field_) {
        const Vec2 v = field_(position(t));
        const double nv = norm(v);
        if (nv > 1e-10) return (1.0 / nv) * v;
    }
    size_t hi = std::upper_bound(s.begin(), s.end(), t,
                                 [](double w, const OrbitSample& a) { return w < a.t; }) -
                s.begin();
    const OrbitSample& a = s[hi - 1];
    const OrbitSample& b = s[hi];
    const double u = (t - a.t) / (b.t - a.t);
    Vec2 m = (1 - u) * a.tau + u * b.tau;
    const double nm = norm(m);
    return nm > 0.0 ? (1.0 / nm) * m : a.tau;
}

double HeteroclinicOrbit::weight_exponent(double t) const {
    if (V_.empty()) return 0.0;
    const double t_end = grid_t0_ + grid_dt_ * (V_.size() - 1);
    if (t <= grid_t0_) return V_.front() + E_grid_.front() * (t - grid_t0_);
    if (t >= t_end) return V_.back() + E_grid_.back() * (t - t_end);
    const double u_full = (t - grid_t0_) / grid_dt_;
    size_t k = std::min(static_cast<size_t>(u_full), V_.size() - 2);
    const double u = u_full - k;
    // Cubic Hermite: the nodal derivative of V is E.
    const double h00 = (1 + 2 * u) * (1 - u) * (1 - u);
    const double h10 = u * (1 - u) * (1 - u);
    const double h01 = u * u * (3 - 2 * u);
    const double h11 = u * u * (u - 1);
    return h00 * V_[k] + grid_dt_ * h10 * E_grid_[k] + h01 * V_[k + 1] +
           grid_dt_ * h11 * E_grid_[k + 1];
}

double HeteroclinicOrbit::weight(double t) const { return std::exp(-weight_exponent(t)); }

double HeteroclinicOrbit::E_at(double t) const {
    const auto& s = samples;
    if (s.empty()) return 0.0;
    if (t <= s.front().t) return s.front().E;
    if (t >= s.back().t) return s.back().E;
    if (!jac_) {
        // Linear interpolation between sample values.
        size_t hi = std::upper_bound(s.begin(), s.end(), t,
                                     [](double v, const OrbitSample& a) { return v < a.t; }) -
                    s.begin();
        const OrbitSample& a = s[hi - 1];
        const OrbitSample& b = s[hi];
        const double u = (t - a.t) / (b.t - a.t);
        return (1 - u) * a.E + u * b.E;
    }
    const Vec2 p = position(t);
    const Vec2 tp = perp(tangent(t));
    const std::array<double, 4> J = jac_(p);
    return tp.x * (J[0] * tp.x + J[1] * tp.y) + tp.y * (J[2] * tp.x + J[3] * tp.y);
}

void HeteroclinicOrbit::build_weight_grid(int n) {
    if (samples.size() < 2) return;
    grid_t0_ = samples.front().t;
    const double t1 = samples.back().t;
    grid_dt_ = (t1 - grid_t0_) / n;
    E_grid_.assign(n + 1, 0.0);
    for (int k = 0; k <= n; ++k) E_grid_[k] = E_at(grid_t0_ + k * grid_dt_);
    // Cumulative Simpson with midpoint evaluations, anchored at t = 0.
    std::vector<double> W(n + 1, 0.0);
    for (int k = 0; k < n; ++k) {
        const double tm = grid_t0_ + (k + 0.5) * grid_dt_;
        W[k + 1] = W[k] + grid_dt_ / 6.0 * (E_grid_[k] + 4.0 * E_at(tm) + E_grid_[k + 1]);
    }
    // V(t) = W(t) - W(0), with W(0) Hermite-interpolated to match
    // weight_exponent's own reconstruction.
    const double u0 = (0.0 - grid_t0_) / grid_dt_;
    const size_t k0 = std::min(static_cast<size_t>(std::max(0.0, u0)),
                               static_cast<size_t>(n - 1));
    const double u = u0 - k0;
    const double h00 = (1 + 2 * u) * (1 - u) * (1 - u);
    const double h10 = u * (1 - u) * (1 - u);
    const double h01 = u * u * (3 - 2 * u);
    const double h11 = u * u * (u - 1);
    const double W0 = h00 * W[k0] + grid_dt_ * h10 * E_grid_[k0] + h01 * W[k0 + 1] +
                      grid_dt_ * h11 * E_grid_[k0 + 1];
    V_.assign(n + 1, 0.0);
    for (int k = 0; k <= n; ++k) V_[k] = W[k] - W0;
}

namespace {

using OdeState = std::array<double, 2>;

struct ShotResult {
    std::vector<OrbitSample> raw;  // t ascending from 0 at the start point
    double miss = std::numeric_limits<double>::infinity();
    double via_dist = std::numeric_limits<double>::infinity();
    bool reached = false;
};

ShotResult integrate_shot(const PlanarSystem& sys, Vec2 start, Vec2 target,
                          std::optional<Vec2> via, double dir) {
    namespace ode = boost::numeric::odeint;
    auto rhs = [&](const OdeState& s, OdeState& d, double) {
        const Vec2 f = sys.g({s[0], s[1]});
        d[0] = dir * f.x;
        d[1] = dir * f.y;
    };
    auto stepper = ode::make_dense_output(1e-12, 1e-12, ode::runge_kutta_dopri5<OdeState>());
    OdeState s{start.x, start.y};
    stepper.initialize(s, 0.0, 1e-4);

    ShotResult out;
    const double span = norm(target - start) + 1.0;
    double next_t = 0.0;
    double min_dist = std::numeric_limits<double>::infinity();
    double t_best = 0.0;
    auto record = [&](double t, const OdeState& st) {
        const Vec2 p{st[0], st[1]};
        OrbitSample os;
        os.t = t;
        os.pos = p;
        os.vel = dir * sys.g(p);
        out.raw.push_back(os);
        if (via) out.via_dist = std::min(out.via_dist, norm(p - *via));
    };
    while (true) {
        stepper.do_step(rhs);
        const double t_now = stepper.current_time();
        while (next_t <= t_now) {
            OdeState si;
            stepper.calc_state(next_t, si);
            record(next_t, si);
            next_t += kSampleDt;
        }
        const Vec2 p{stepper.current_state()[0], stepper.current_state()[1]};
        const double dist = norm(p - target);
        if (dist < min_dist) {
            min_dist = dist;
            t_best = t_now;
        }
        if (dist < 1e-8) {
            record(t_now, stepper.current_state());
            out.reached = true;
            break;
        }
        if (min_dist < 1e-5 && dist > 10.0 * min_dist) break;   // converged then ejected
        if (norm(p - start) > 20.0 * span || t_now > 500.0) break;  // escape / timeout
    }
    out.miss = min_dist;
    if (!out.reached) {
        // Truncate at the closest approach.
        while (!out.raw.empty() && out.raw.back().t > t_best) out.raw.pop_back();
    }
    return out;
}

} // namespace

HeteroclinicOrbit shoot_heteroclinic(const PlanarSystem& sys, int which, double T_cut,
                                     bool backward) {
    if (which != 1 && which != 2)
        throw std::invalid_argument("shoot_heteroclinic: which must be 1 or 2");
    const SaddleInfo& src = which == 1 ? sys.O1 : sys.O2;
    const SaddleInfo& tgt = which == 1 ? sys.O2 : sys.O1;
    const std::optional<Vec2> via = which == 1 ? sys.l1_via : sys.l2_via;

    // Forward shots leave along the source's unstable direction; backward
    // shots run the reversed field from the target's stable direction.
    const SaddleInfo& from = backward ? tgt : src;
    const SaddleInfo& to = backward ? src : tgt;
    const Vec2 u_dir = backward ? from.u_c : from.u_e;
    const double dir = backward ? -1.0 : 1.0;

    ShotResult best;
    double best_sign = 1.0;
    for (double sign : {+1.0, -1.0}) {
        ShotResult r = integrate_shot(sys, from.pos + (sign * kOffset) * u_dir, to.pos,
                                      via, dir);
        const bool better = via ? (r.miss < 1e-4 && r.via_dist < best.via_dist)
                                : (r.miss < best.miss);
        if (better || (best.raw.empty() && !r.raw.empty())) {
            best = std::move(r);
            best_sign = sign;
        }
    }
    if (best.miss > 1e-4) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "NoConnection: miss distance %.3g", best.miss);
        throw NoConnection(buf);
    }

    // One-dimensional boundary refinement on the start angle when the plain
    // eigendirection shot is not already converged.
    if (!best.reached && best.miss > 1e-6) {
        const Vec2 u2 = backward ? from.u_e : from.u_c;
        auto miss_of = [&](double phi) {
            const Vec2 d = std::cos(phi) * (best_sign * u_dir) + std::sin(phi) * u2;
            return integrate_shot(sys, from.pos + kOffset * d, to.pos, via, dir).miss;
        };
        const double phi = golden_minimize(miss_of, -0.3, 0.3, 60);
        const Vec2 d = std::cos(phi) * (best_sign * u_dir) + std::sin(phi) * u2;
        ShotResult refined = integrate_shot(sys, from.pos + kOffset * d, to.pos, via, dir);
        if (refined.miss < best.miss) best = std::move(refined);
        if (best.miss > 1e-4) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "NoConnection: miss distance %.3g after refinement",
                          best.miss);
            throw NoConnection(buf);
        }
    }

    HeteroclinicOrbit orbit;
    orbit.source = which == 1 ? 1 : 2;
    orbit.target = which == 1 ? 2 : 1;
    orbit.miss = best.miss;
    orbit.field_ = [sysc = sys](Vec2 p) { return sysc.g(p); };
    orbit.jac_ = [sysc = sys](Vec2 p) { return sysc.jacobian(p); };

    std::vector<OrbitSample> body = std::move(best.raw);
    if (backward) {
        // Reverse time so the samples run source -> target.
        std::reverse(body.begin(), body.end());
        for (auto& s : body) {
            s.t = -s.t;
            s.vel = -1.0 * s.vel;
        }
        const double t0 = body.front().t;
        for (auto& s : body) s.t -= t0;
    }
    if (body.size() < 8) throw NoConnection("NoConnection: degenerate trajectory");

    // Shift t = 0 to the maximum-speed sample.
    size_t k_max = 0;
    for (size_t k = 0; k < body.size(); ++k)
        if (norm(body[k].vel) > norm(body[k_max].vel)) k_max = k;
    const double t_shift = body[k_max].t;
    for (auto& s : body) s.t -= t_shift;

    const double ln_floor = -std::log(kWeightFloor);
    // True weight-decay rates: c_source backward, e_target forward.
    const double c_s = (which == 1 ? sys.O1 : sys.O2).c;
    const double e_t = (which == 1 ? sys.O2 : sys.O1).e;
    if (T_cut <= 0.0) T_cut = 1.2 * std::max(ln_floor / c_s, ln_floor / e_t);
    orbit.T_cut = T_cut;

    const SaddleInfo& sfrom = which == 1 ? sys.O1 : sys.O2;
    const SaddleInfo& sto = which == 1 ? sys.O2 : sys.O1;

    // The integration may overhang the window on either side (the escape from
    // the 1e-8 seed offset can take longer than the weight-decay span); the
    // overhang is deep in the linear regime, so drop it.
    {
        auto lo = std::find_if(body.begin(), body.end(),
                               [&](const OrbitSample& s) { return s.t >= -T_cut; });
        if (lo != body.begin()) body.erase(body.begin(), lo);
        while (body.size() > 2 && body.back().t > T_cut) body.pop_back();
        if (body.size() < 2) throw NoConnection("NoConnection: degenerate trajectory");
    }

    // Backward tail: displacement decays like exp(e_source * (t - t_first))
    // along the unstable eigendirection.
    std::vector<OrbitSample> head;
    {
        const OrbitSample& first = body.front();
        Vec2 disp = first.pos - sfrom.pos;
        const double amp = dot(disp, sfrom.u_e);
        for (double t = -T_cut; t < first.t - 1e-9; t += kTailDt) {
            const double d = amp * std::exp(sfrom.e * (t - first.t));
            OrbitSample os;
            os.t = t;
            os.pos = sfrom.pos + d * sfrom.u_e;
            os.vel = (d * sfrom.e) * sfrom.u_e;
            head.push_back(os);
        }
    }
    // Forward tail: decay along the target's stable eigendirection.
    std::vector<OrbitSample> tail;
    {
        const OrbitSample& last = body.back();
        Vec2 disp = last.pos - sto.pos;
        const double amp = dot(disp, sto.u_c);
        for (double t = last.t + kTailDt; t < T_cut - 0.5 * kTailDt; t += kTailDt) {
            const double d = amp * std::exp(-sto.c * (t - last.t));
            OrbitSample os;
            os.t = t;
            os.pos = sto.pos + d * sto.u_c;
            os.vel = (-d * sto.c) * sto.u_c;
            tail.push_back(os);
        }
        // Exact endpoint sample: the span [-T_cut, T_cut] is a contract.
        if (T_cut - last.t > 1e-9) {
            const double d = amp * std::exp(-sto.c * (T_cut - last.t));
            OrbitSample os;
            os.t = T_cut;
            os.pos = sto.pos + d * sto.u_c;
            os.vel = (-d * sto.c) * sto.u_c;
            tail.push_back(os);
        }
    }
    orbit.samples = std::move(head);
    orbit.samples.insert(orbit.samples.end(), body.begin(), body.end());
    orbit.samples.insert(orbit.samples.end(), tail.begin(), tail.end());

    // Unit tangents: from velocities where they are trustworthy, otherwise
    // propagate the neighbour's direction (tails keep the eigendirection).
    Vec2 prev_tau = sfrom.u_e;
    if (dot(prev_tau, orbit.samples[orbit.samples.size() / 2].pos - sfrom.pos) < 0.0)
        prev_tau = -1.0 * prev_tau;
    for (auto& s : orbit.samples) {
        const double nv = norm(s.vel);
        s.tau = nv > 1e-300 ? (1.0 / nv) * s.vel : prev_tau;
        if (dot(s.tau, prev_tau) < 0.0 && nv <= 1e-10) s.tau = -1.0 * s.tau;
        prev_tau = s.tau;
    }
    for (auto& s : orbit.samples) {
        const Vec2 tp = perp(s.tau);
        const auto J = sys.jacobian(s.pos);
        s.E = tp.x * (J[0] * tp.x + J[1] * tp.y) + tp.y * (J[2] * tp.x + J[3] * tp.y);
    }
    orbit.build_weight_grid();
    return orbit;
}

namespace {

double integrand(const PlanarSystem& sys, const HeteroclinicOrbit& orbit, double theta,
                 double t) {
    const Vec2 p = orbit.position(t);
    const Vec2 tp = perp(orbit.tangent(t));
    const double s = t + theta;
    Vec2 f;
    if (orbit.source == 1) {
        f = {sys.P1.eval(p.x, p.y, s, sys.T), sys.P2.eval(p.x, p.y, s, sys.T)};
    } else {
        f = {sys.Q1.eval(p.x, p.y, s, sys.T), sys.Q2.eval(p.x, p.y, s, sys.T)};
    }
    return dot(f, tp) * orbit.weight(t);
}

} // namespace

double melnikov_W(const PlanarSystem& sys, const HeteroclinicOrbit& orbit, double theta) {
    if (orbit.weight(-orbit.T_cut) > kWeightFloor || orbit.weight(orbit.T_cut) > kWeightFloor)
        throw TruncationTooShort("weight above 1e-12 at the cut");
    auto f = [&](double t) { return integrand(sys, orbit, theta, t); };
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        f, -orbit.T_cut, orbit.T_cut, 12, 1e-10);
}

double melnikov_W_brute(const PlanarSystem& sys, const HeteroclinicOrbit& orbit,
                        double theta, long nodes) {
    const double a = -orbit.T_cut, b = orbit.T_cut;
    const double h = (b - a) / nodes;
    double sum = 0.5 * (integrand(sys, orbit, theta, a) + integrand(sys, orbit, theta, b));
    for (long k = 1; k < nodes; ++k) sum += integrand(sys, orbit, theta, a + k * h);
    return sum * h;
}

MelnikovTable melnikov_table(const PlanarSystem& sys, const HeteroclinicOrbit& l1,
                             const HeteroclinicOrbit& l2, int grid) {
    MelnikovTable t;
    for (int i = 0; i < grid; ++i) {
        const double theta = sys.T * i / grid;
        t.theta.push_back(theta);
        t.W1.push_back(melnikov_W(sys, l1, theta));
        t.W2.push_back(melnikov_W(sys, l2, theta));
    }
    return t;
}

std::string melnikov_table_to_csv(const MelnikovTable& table) {
    std::string out = "theta,W1,W2\n";
    char buf[120];
    for (size_t i = 0; i < table.theta.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g\n", table.theta[i], table.W1[i],
                      table.W2[i]);
        out += buf;
    }
    return out;
}

std::string to_string(TangleCase c) {
    switch (c) {
        case TangleCase::Case1: return "Case1";
        case TangleCase::Case2: return "Case2";
        case TangleCase::Case3: return "Case3";
        case TangleCase::Case4: return "Case4";
    }
    return "Case4";
}

namespace {

SignReport sign_report(const PlanarSystem& sys, const HeteroclinicOrbit& orbit, int grid) {
    SignReport rep;
    std::vector<double> theta(grid), w(grid);
    for (int i = 0; i < grid; ++i) {
        theta[i] = sys.T * i / grid;
        w[i] = melnikov_W(sys, orbit, theta[i]);
    }
    int i_min = 0, i_max = 0;
    for (int i = 1; i < grid; ++i) {
        if (w[i] < w[i_min]) i_min = i;
        if (w[i] > w[i_max]) i_max = i;
    }
    auto W = [&](double th) { return melnikov_W(sys, orbit, th); };
    const double h = sys.T / grid;
    rep.argmin = golden_minimize(W, theta[i_min] - h, theta[i_min] + h, 60);
    rep.min = W(rep.argmin);
    rep.argmax = golden_minimize([&](double th) { return -W(th); }, theta[i_max] - h,
                                 theta[i_max] + h, 60);
    rep.max = W(rep.argmax);
    rep.sign_changing = rep.min < 0.0 && rep.max > 0.0;
    if (rep.sign_changing) {
        for (int i = 0; i < grid; ++i) {
            const double w0 = w[i], w1 = w[(i + 1) % grid];
            if (w0 == 0.0 || (w0 > 0.0) == (w1 > 0.0)) continue;
            const double z = bisect_root(
                [&](double th) { return W(th); }, theta[i], theta[i] + h, 100, 1e-12);
            rep.zeros.push_back(z);
            const double dW = (W(z + 1e-6) - W(z - 1e-6)) / 2e-6;
            if (std::abs(dW) < 1e-8) rep.nongeneric = true;
        }
    }
    return rep;
}

} // namespace

Classification classify_configuration(const PlanarSystem& sys, int grid) {
    const HeteroclinicOrbit l1 = shoot_heteroclinic(sys, 1);
    const HeteroclinicOrbit l2 = shoot_heteroclinic(sys, 2);
    Classification out;
    out.W1 = sign_report(sys, l1, grid);
    out.W2 = sign_report(sys, l2, grid);
    const bool w1_split = !out.W1.sign_changing;  // same sign: manifolds pulled apart
    const bool w2_split = !out.W2.sign_changing;
    if (!w1_split && !w2_split) out.which = TangleCase::Case1;
    else if (w1_split && !w2_split) out.which = TangleCase::Case2;
    else if (!w1_split && w2_split) out.which = TangleCase::Case3;
    else out.which = TangleCase::Case4;
    out.nongeneric = out.W1.nongeneric || out.W2.nongeneric;
    return out;
}

ProfileFit profile_from_melnikov(const PlanarSystem& sys, const HeteroclinicOrbit& orbit,
                                 int order, int grid) {
    ProfileFit fit;
    std::vector<double> w(grid);
    for (int i = 0; i < grid; ++i) {
        w[i] = melnikov_W(sys, orbit, sys.T * i / grid);
        fit.w_max = std::max(fit.w_max, std::abs(w[i]));
    }
    // Uniform-grid least squares = discrete Fourier projections.
    double c0 = 0.0;
    for (double v : w) c0 += v;
    c0 /= grid;
    std::vector<double> ac(order, 0.0), bc(order, 0.0);
    for (int k = 1; k <= order; ++k) {
        double a = 0.0, b = 0.0;
        for (int i = 0; i < grid; ++i) {
            const double ang = TWO_PI * k * i / grid;
            a += w[i] * std::cos(ang);
            b += w[i] * std::sin(ang);
        }
        ac[k - 1] = 2.0 * a / grid;
        bc[k - 1] = 2.0 * b / grid;
    }
    fit.profile = ForcingProfile(c0, ac, bc);
    for (int i = 0; i < grid; ++i)
        fit.residual = std::max(fit.residual,
                                std::abs(fit.profile.eval(TWO_PI * i / grid) - w[i]));
    fit.poor_fit = fit.w_max > 0.0 && fit.residual > 1e-3 * fit.w_max;
    return fit;
}

} // namespace hetlab
