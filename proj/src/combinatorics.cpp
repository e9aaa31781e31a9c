#include "hetlab/combinatorics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "hetlab/angles.hpp"
#include "hetlab/numutil.hpp"
#include "json.hpp"

namespace hetlab {

namespace {

constexpr double kRootTol = 1e-12;

// [m_lo + 2*pi*k, m_hi + 2*pi*k] inside [lo, hi] for some integer k.
bool interval_contains_mod(double lo, double hi, double m_lo, double m_hi) {
    if (hi - lo >= TWO_PI) return true;
    const int k_min = static_cast<int>(std::ceil((lo - m_lo) / TWO_PI)) - 1;
    const int k_max = static_cast<int>(std::floor((hi - m_hi) / TWO_PI)) + 1;
    for (int k = k_min; k <= k_max; ++k) {
        if (m_lo + TWO_PI * k >= lo - 1e-14 && m_hi + TWO_PI * k <= hi + 1e-14) return true;
    }
    return false;
}

// Circle distance from theta to the union of [c - delta, c + delta].
bool in_c_delta(double theta, const std::vector<double>& C, double delta) {
    for (double c : C)
        if (circle_dist(theta, c) <= delta) return true;
    return false;
}

std::vector<std::vector<int>> bool_mat_mul(const std::vector<std::vector<int>>& A,
                                           const std::vector<std::vector<int>>& B) {
    const size_t r = A.size();
    std::vector<std::vector<int>> out(r, std::vector<int>(r, 0));
    for (size_t i = 0; i < r; ++i)
        for (size_t k = 0; k < r; ++k)
            if (A[i][k])
                for (size_t m = 0; m < r; ++m)
                    if (B[k][m]) out[i][m] = 1;
    return out;
}

bool all_positive(const std::vector<std::vector<int>>& A) {
    for (const auto& row : A)
        for (int v : row)
            if (!v) return false;
    return true;
}

} // namespace

TransitionGraph transition_matrix(const CircleMap& map) {
    TransitionGraph g;
    const std::vector<double> C = critical_set(map);
    std::vector<double> bps = C;
    std::vector<bool> is_zero(bps.size(), false);
    for (double z : map.profile_zeros()) {
        bps.push_back(wrap_angle(z));
        is_zero.push_back(true);
    }
    {
        std::vector<size_t> idx(bps.size());
        for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return bps[a] < bps[b]; });
        std::vector<double> sb;
        std::vector<bool> sz;
        for (size_t i : idx) {
            sb.push_back(bps[i]);
            sz.push_back(is_zero[i]);
        }
        bps.swap(sb);
        is_zero.swap(sz);
    }
    g.breakpoints = bps;
    const size_t r = bps.size();
    if (r == 0) return g;  // diffeomorphism: degenerate graph

    for (size_t i = 0; i < r; ++i) {
        const double lo = bps[i];
        const double hi = (i + 1 < r) ? bps[i + 1] : bps[0] + TWO_PI;
        g.intervals.emplace_back(lo, hi);
    }

    g.Q.assign(r, std::vector<int>(r, 0));
    for (size_t i = 0; i < r; ++i) {
        const auto [lo, hi] = g.intervals[i];
        const bool lo_sing = is_zero[i];
        const bool hi_sing = is_zero[(i + 1) % r];
        if (lo_sing || hi_sing) {
            // Logarithmic endpoint: the branch image is a half line.
            for (size_t m = 0; m < r; ++m) g.Q[i][m] = 1;
            continue;
        }
        double a = map.value(lo);
        double b = map.value(hi);
        if (a > b) std::swap(a, b);
        for (size_t m = 0; m < r; ++m) {
            const auto [m_lo, m_hi] = g.intervals[m];
            g.Q[i][m] = interval_contains_mod(a, b, m_lo, m_hi) ? 1 : 0;
        }
    }

    auto P = g.Q;
    for (int n = 1; n <= 32; ++n) {
        if (all_positive(P)) {
            g.mixing_N = n;
            break;
        }
        if (n < 32) P = bool_mat_mul(P, g.Q);
    }

    // Expansion-rate report against the (H7)(a) threshold.
    if (!C.empty()) {
        double min_gap = TWO_PI;
        for (size_t i = 0; i < C.size(); ++i)
            min_gap = std::min(min_gap, circle_dist(C[i], C[(i + 1) % C.size()]));
        const double delta = std::min(1e-3, min_gap / 4.0);
        const ExpansionFit fit = fit_expansion_rate(map, C, delta, 30);
        g.lambda0 = fit.lambda0;
        g.h7a = std::exp(fit.lambda0 / 3.0) > 2.0;
    }
    return g;
}

std::string transition_graph_to_text(const TransitionGraph& g) {
    std::string out;
    char buf[160];
    std::snprintf(buf, sizeof buf, "intervals %zu\n", g.intervals.size());
    out += buf;
    for (size_t i = 0; i < g.intervals.size(); ++i) {
        std::snprintf(buf, sizeof buf, "J%zu [%.12g, %.12g] ->", i + 1,
                      g.intervals[i].first, g.intervals[i].second);
        out += buf;
        for (size_t m = 0; m < g.Q[i].size(); ++m)
            if (g.Q[i][m]) {
                std::snprintf(buf, sizeof buf, " J%zu", m + 1);
                out += buf;
            }
        out += '\n';
    }
    if (g.mixing_N)
        std::snprintf(buf, sizeof buf, "mixing_N %d\n", *g.mixing_N);
    else
        std::snprintf(buf, sizeof buf, "mixing_N none\n");
    out += buf;
    std::snprintf(buf, sizeof buf, "lambda0 %.12g\nexp_lambda0_third_gt_2 %s\n",
                  g.lambda0, g.h7a ? "true" : "false");
    out += buf;
    return out;
}

std::string transition_graph_to_json(const TransitionGraph& g) {
    nlohmann::json j;
    j["breakpoints"] = g.breakpoints;
    auto& iv = j["intervals"] = nlohmann::json::array();
    for (const auto& [lo, hi] : g.intervals) iv.push_back({lo, hi});
    j["Q"] = g.Q;
    if (g.mixing_N)
        j["mixing_N"] = *g.mixing_N;
    else
        j["mixing_N"] = nullptr;
    j["lambda0"] = g.lambda0;
    j["exp_lambda0_third_gt_2"] = g.h7a;
    return j.dump(2);
}

namespace {

// Lift of h^n via repeated application of the degree-one lift.
double lift_iter(const CircleMap& map, double x, int n) {
    for (int k = 0; k < n; ++k) x = map.value(x);
    return x;
}

// Solve lift(h^n)(x) = target on [lo, hi] where the iterate is monotone.
double pullback(const CircleMap& map, int n, double lo, double hi, double target) {
    double f_lo = lift_iter(map, lo, n) - target;
    double f_hi = lift_iter(map, hi, n) - target;
    if (f_lo == 0.0) return lo;
    if (f_hi == 0.0) return hi;
    if ((f_lo > 0.0) == (f_hi > 0.0))
        throw std::runtime_error("pullback: target not bracketed");
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double f_mid = lift_iter(map, mid, n) - target;
        if (f_mid == 0.0 || hi - lo < kRootTol) return mid;
        if ((f_mid > 0.0) == (f_lo > 0.0)) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

} // namespace

JDeltaGraph build_jdelta(const CircleMap& map, double delta, int step_cap) {
    if (!map.profile_zeros().empty())
        throw std::invalid_argument("build_jdelta: requires a smooth family "
                                    "(log singularities break monotone tracking)");
    JDeltaGraph g;
    g.delta = delta;
    g.critical_points = critical_set(map);
    const auto& C = g.critical_points;
    const int q = static_cast<int>(C.size());
    if (q == 0) return g;

    double min_gap = TWO_PI;
    for (int i = 0; i < q; ++i)
        min_gap = std::min(min_gap, circle_dist(C[i], C[(i + 1) % q]));
    if (q > 1 && delta >= min_gap / 2.0)
        throw std::invalid_argument("build_jdelta: delta must be below half the "
                                    "smallest critical-point gap");
    if (delta <= 0.0) throw std::invalid_argument("build_jdelta: delta must be positive");

    constexpr int kDepthCap = 20;

    for (int i = 0; i < q; ++i) {
        for (int side : {-1, +1}) {
            JDeltaEntry e;
            e.vertex = i;
            e.side = side;

            // Current piece [p_lo, p_hi] of the one-sided component, in lift
            // coordinates; anchor_at_lo marks which image endpoint descends
            // from the critical point.
            double p_lo = side < 0 ? C[i] - delta : C[i];
            double p_hi = side < 0 ? C[i] : C[i] + delta;
            bool anchor_at_lo = side > 0;
            int n = 0;
            int depth = 0;
            bool done = false;

            while (!done) {
                if (n >= step_cap) {
                    e.failure = "NoIntersectionWithinCap";
                    break;
                }
                ++n;
                double a = lift_iter(map, p_lo, n);
                double b = lift_iter(map, p_hi, n);
                bool img_anchor_at_lo = anchor_at_lo;
                if (a > b) {
                    std::swap(a, b);
                    img_anchor_at_lo = !img_anchor_at_lo;
                }
                if (n <= step_cap && e.diam_trace.size() < 64) e.diam_trace.push_back(b - a);

                // Does the image meet C_delta?
                bool meets = b - a >= TWO_PI;
                if (!meets) {
                    for (int jj = 0; jj < q && !meets; ++jj) {
                        const double m_lo = C[jj] - delta;
                        const int k_min = static_cast<int>(std::ceil((a - (C[jj] + delta)) / TWO_PI));
                        const int k_max = static_cast<int>(std::floor((b - m_lo) / TWO_PI));
                        if (k_min <= k_max) meets = true;
                    }
                }
                if (!meets) continue;

                // Case 1: a full component C_delta^(j) sits inside the image.
                int j_full = -1;
                double j_target_lo = 0.0;
                for (int jj = 0; jj < q; ++jj) {
                    if (b - a >= TWO_PI) {
                        double t = C[jj] - delta;
                        while (t < a) t += TWO_PI;
                        if (t + 2.0 * delta <= b) {
                            j_full = jj;
                            j_target_lo = t;
                            break;
                        }
                        continue;
                    }
                    const int k_min = static_cast<int>(std::ceil((a - (C[jj] - delta)) / TWO_PI)) - 1;
                    const int k_max = static_cast<int>(std::floor((b - (C[jj] + delta)) / TWO_PI)) + 1;
                    for (int k = k_min; k <= k_max && j_full < 0; ++k) {
                        const double t_lo = C[jj] - delta + TWO_PI * k;
                        if (t_lo >= a - 1e-14 && t_lo + 2.0 * delta <= b + 1e-14) {
                            j_full = jj;
                            j_target_lo = t_lo;
                        }
                    }
                    if (j_full >= 0) break;
                }
                if (j_full >= 0) {
                    double x1 = pullback(map, n, p_lo, p_hi, j_target_lo);
                    double x2 = pullback(map, n, p_lo, p_hi, j_target_lo + 2.0 * delta);
                    if (x1 > x2) std::swap(x1, x2);
                    e.J_lo = x1;
                    e.J_hi = x2;
                    e.n = n;
                    e.j = j_full;
                    e.resolved = true;
                    done = true;
                    continue;
                }

                // Case 2: a full monotonicity interval sits inside the image;
                // one extra step through that branch.
                int l_mono = -1;
                double l_target_lo = 0.0, l_target_hi = 0.0;
                for (int ll = 0; ll < q; ++ll) {
                    const double m_lo = C[ll];
                    const double m_hi = (ll + 1 < q) ? C[ll + 1] : C[0] + TWO_PI;
                    if (b - a >= TWO_PI) {
                        double t = m_lo;
                        while (t < a) t += TWO_PI;
                        if (t + (m_hi - m_lo) <= b) {
                            l_mono = ll;
                            l_target_lo = t;
                            l_target_hi = t + (m_hi - m_lo);
                            break;
                        }
                        continue;
                    }
                    const int k_min = static_cast<int>(std::ceil((a - m_lo) / TWO_PI)) - 1;
                    const int k_max = static_cast<int>(std::floor((b - m_hi) / TWO_PI)) + 1;
                    for (int k = k_min; k <= k_max && l_mono < 0; ++k) {
                        if (m_lo + TWO_PI * k >= a - 1e-14 && m_hi + TWO_PI * k <= b + 1e-14) {
                            l_mono = ll;
                            l_target_lo = m_lo + TWO_PI * k;
                            l_target_hi = m_hi + TWO_PI * k;
                        }
                    }
                    if (l_mono >= 0) break;
                }
                if (l_mono >= 0) {
                    // Pull the monotonicity interval back to the source piece,
                    // then check whether its one-step image covers a component.
                    double x1 = pullback(map, n, p_lo, p_hi, l_target_lo);
                    double x2 = pullback(map, n, p_lo, p_hi, l_target_hi);
                    if (x1 > x2) std::swap(x1, x2);
                    double ia = map.value(l_target_lo);
                    double ib = map.value(l_target_hi);
                    if (ia > ib) std::swap(ia, ib);
                    int j2 = -1;
                    double j2_lo = 0.0;
                    for (int jj = 0; jj < q && j2 < 0; ++jj) {
                        if (ib - ia >= TWO_PI) {
                            double t = C[jj] - delta;
                            while (t < ia) t += TWO_PI;
                            if (t + 2.0 * delta <= ib) {
                                j2 = jj;
                                j2_lo = t;
                            }
                            continue;
                        }
                        const int k_min =
                            static_cast<int>(std::ceil((ia - (C[jj] - delta)) / TWO_PI)) - 1;
                        const int k_max =
                            static_cast<int>(std::floor((ib - (C[jj] + delta)) / TWO_PI)) + 1;
                        for (int k = k_min; k <= k_max && j2 < 0; ++k) {
                            const double t_lo = C[jj] - delta + TWO_PI * k;
                            if (t_lo >= ia - 1e-14 && t_lo + 2.0 * delta <= ib + 1e-14) {
                                j2 = jj;
                                j2_lo = t_lo;
                            }
                        }
                    }
                    if (j2 >= 0) {
                        double y1 = pullback(map, n + 1, x1, x2, j2_lo);
                        double y2 = pullback(map, n + 1, x1, x2, j2_lo + 2.0 * delta);
                        if (y1 > y2) std::swap(y1, y2);
                        e.J_lo = y1;
                        e.J_hi = y2;
                        e.n = n + 1;
                        e.j = j2;
                        e.resolved = true;
                        done = true;
                        continue;
                    }
                    // Moderate expansion: the branch image misses every full
                    // component; fall through to the truncation case.
                }

                // Case 3: truncate to the component of the image outside
                // C_delta anchored at the critical-value endpoint, then keep
                // iterating the corresponding source subinterval.
                if (++depth > kDepthCap) {
                    e.failure = "SubdivisionDepthExceeded";
                    break;
                }
                const double anchor = img_anchor_at_lo ? a : b;
                // March from the anchor into the image until C_delta starts.
                double cut = img_anchor_at_lo ? b : a;
                double best_len = -1.0;
                for (int jj = 0; jj < q; ++jj) {
                    // Nearest entry point of [C_jj - delta, C_jj + delta] when
                    // walking from the anchor toward the other endpoint.
                    for (int which = 0; which < 2; ++which) {
                        const double edge = which == 0 ? C[jj] - delta : C[jj] + delta;
                        double t = edge + TWO_PI * std::floor((a - edge) / TWO_PI);
                        for (; t <= b + 1e-12; t += TWO_PI) {
                            if (t < a - 1e-12) continue;
                            const double len = std::abs(t - anchor);
                            if (!in_c_delta(wrap_angle(0.5 * (anchor + t)), C, delta) &&
                                len > 1e-12) {
                                if (best_len < 0.0 || len < best_len) {
                                    best_len = len;
                                    cut = t;
                                }
                            }
                            break;
                        }
                    }
                }
                if (best_len < 0.0) {
                    // Anchor endpoint itself lies inside C_delta; contradicts
                    // the Misiurewicz distance condition at this delta.
                    e.failure = "NoIntersectionWithinCap";
                    break;
                }
                // Pull the cut point back to the source piece and truncate.
                const double x_cut = pullback(map, n, p_lo, p_hi, cut);
                const double x_anchor_is_lo =
                    std::abs(lift_iter(map, p_lo, n) - anchor) <
                    std::abs(lift_iter(map, p_hi, n) - anchor);
                if (x_anchor_is_lo)
                    p_hi = x_cut;
                else
                    p_lo = x_cut;
                if (p_hi - p_lo < 1e-13) {
                    e.failure = "SubdivisionDepthExceeded";
                    break;
                }
            }
            g.entries.push_back(std::move(e));
        }
    }

    for (const auto& e : g.entries)
        if (e.resolved) g.edges.emplace_back(e.vertex, e.j);
    std::sort(g.edges.begin(), g.edges.end());
    g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
    g.accessible = accessible_vertices(g);
    return g;
}

std::vector<bool> accessible_vertices(const JDeltaGraph& g) {
    const int q = static_cast<int>(g.critical_points.size());
    std::vector<std::vector<int>> rev(q);
    for (const auto& [from, to] : g.edges)
        if (from >= 0 && from < q && to >= 0 && to < q) rev[to].push_back(from);
    std::vector<bool> out(q, false);
    for (int v = 0; v < q; ++v) {
        std::vector<bool> seen(q, false);
        std::vector<int> stack{v};
        seen[v] = true;
        while (!stack.empty()) {
            const int u = stack.back();
            stack.pop_back();
            for (int w : rev[u])
                if (!seen[w]) {
                    seen[w] = true;
                    stack.push_back(w);
                }
        }
        out[v] = std::all_of(seen.begin(), seen.end(), [](bool s) { return s; });
    }
    return out;
}

std::string jdelta_to_text(const JDeltaGraph& g) {
    std::string out;
    char buf[200];
    std::snprintf(buf, sizeof buf, "delta %.12g\nvertices %zu\n", g.delta,
                  g.critical_points.size());
    out += buf;
    for (size_t v = 0; v < g.critical_points.size(); ++v) {
        std::snprintf(buf, sizeof buf, "v%zu c=%.12g accessible=%s ->", v + 1,
                      g.critical_points[v],
                      (v < g.accessible.size() && g.accessible[v]) ? "yes" : "no");
        out += buf;
        for (const auto& [from, to] : g.edges)
            if (from == static_cast<int>(v)) {
                std::snprintf(buf, sizeof buf, " v%d", to + 1);
                out += buf;
            }
        out += '\n';
    }
    for (const auto& e : g.entries) {
        if (e.resolved)
            std::snprintf(buf, sizeof buf,
                          "entry v%d side%+d J=[%.12g, %.12g] n=%d j=v%d\n", e.vertex + 1,
                          e.side, e.J_lo, e.J_hi, e.n, e.j + 1);
        else
            std::snprintf(buf, sizeof buf, "entry v%d side%+d unresolved (%s)\n",
                          e.vertex + 1, e.side, e.failure.c_str());
        out += buf;
    }
    return out;
}

std::string jdelta_to_json(const JDeltaGraph& g) {
    nlohmann::json j;
    j["delta"] = g.delta;
    j["critical_points"] = g.critical_points;
    j["accessible"] = g.accessible;
    auto& entries = j["entries"] = nlohmann::json::array();
    for (const auto& e : g.entries) {
        nlohmann::json je;
        je["vertex"] = e.vertex;
        je["side"] = e.side;
        je["resolved"] = e.resolved;
        if (e.resolved) {
            je["J"] = {e.J_lo, e.J_hi};
            je["n"] = e.n;
            je["j"] = e.j;
        } else {
            je["failure"] = e.failure;
        }
        je["diam_trace"] = e.diam_trace;
        entries.push_back(je);
    }
    auto& edges = j["edges"] = nlohmann::json::array();
    for (const auto& [from, to] : g.edges) edges.push_back({from, to});
    return j.dump(2);
}

std::vector<SinkRecord> find_superstable_sinks(const ModelConfig& cfg, double a_hat,
                                               double search_radius, int period_cap) {
    const CircleMap probe = singular_limit_from_config(cfg, 0.0, 'F');
    std::vector<double> C = critical_set(probe);
    std::vector<SinkRecord> sinks;
    if (C.empty()) return sinks;

    // Polish the critical points to machine precision: the multiplier bound
    // depends on |h'(c)| times up to period_cap - 1 expansion factors.
    for (double& c : C) {
        for (int it = 0; it < 6; ++it) {
            const double d2 = probe.deriv2(c);
            if (d2 == 0.0) break;
            c -= probe.deriv(c) / d2;
        }
        c = wrap_angle(c);
    }

    auto make_map = [&](double a) { return singular_limit_from_config(cfg, a, 'F'); };

    auto orbit_gap = [&](double a, double c, int p) {
        const CircleMap h = make_map(a);
        double x = c;
        for (int k = 0; k < p; ++k) x = h.value(x);
        return circle_diff(wrap_angle(x), c);
    };

    const double lo = a_hat - search_radius;
    const double hi = a_hat + search_radius;
    for (int p = 1; p <= period_cap; ++p) {
        const int grid = 4096 * p;
        for (double c : C) {
            double prev_a = lo;
            double prev_g = orbit_gap(prev_a, c, p);
            for (int i = 1; i <= grid; ++i) {
                const double a = lo + (hi - lo) * i / grid;
                const double gcur = orbit_gap(a, c, p);
                // Bracket only genuine zero crossings of the wrapped gap, not
                // the branch cut at +-pi.
                if ((prev_g > 0.0) != (gcur > 0.0) &&
                    std::abs(prev_g) + std::abs(gcur) < PI) {
                    double a0 = prev_a, a1 = a, g0 = prev_g;
                    for (int it = 0; it < 100; ++it) {
                        const double am = 0.5 * (a0 + a1);
                        const double gm = orbit_gap(am, c, p);
                        if (gm == 0.0 || a1 - a0 < 1e-14) {
                            a0 = a1 = am;
                            break;
                        }
                        if ((gm > 0.0) == (g0 > 0.0)) {
                            a0 = am;
                            g0 = gm;
                        } else {
                            a1 = am;
                        }
                    }
                    const double a_root = 0.5 * (a0 + a1);
                    if (std::abs(orbit_gap(a_root, c, p)) < 1e-9) {
                        // Reject if a shorter period already returns.
                        bool minimal = true;
                        for (int d = 1; d < p && minimal; ++d)
                            if (p % d == 0 && std::abs(orbit_gap(a_root, c, d)) < 1e-9)
                                minimal = false;
                        bool duplicate = false;
                        for (const auto& s : sinks)
                            if (std::abs(s.a - a_root) < 1e-10) duplicate = true;
                        if (minimal && !duplicate) {
                            SinkRecord rec;
                            rec.a = a_root;
                            rec.period = p;
                            const CircleMap h = make_map(a_root);
                            double x = c;
                            double mult = 1.0;
                            for (int k = 0; k < p; ++k) {
                                rec.orbit.push_back(wrap_angle(x));
                                mult *= h.deriv(x);
                                x = h.value(x);
                            }
                            rec.multiplier = std::abs(mult);
                            // h'(c) ~ 1e-14 times seven expansion factors can
                            // exceed 1e-6; such hits are superstable but not
                            // certifiable at double precision, so drop them.
                            if (rec.multiplier < 1e-6) sinks.push_back(std::move(rec));
                        }
                    }
                }
                prev_a = a;
                prev_g = gcur;
            }
        }
    }

    std::sort(sinks.begin(), sinks.end(),
              [](const SinkRecord& x, const SinkRecord& y) { return x.a < y.a; });
    // Strongly expanding maps hit thousands of superstable windows; keep the
    // first 256 so the n-indexed mu values stay far above underflow (mu = 0
    // would break the strict-decrease contract).
    if (sinks.size() > 256) sinks.resize(256);
    const DerivedConstants dc = derive_constants(cfg);
    const double omegaK = cfg.omega * dc.K_F;
    for (size_t i = 0; i < sinks.size(); ++i) {
        sinks[i].n_index = static_cast<int>(i) + 1;
        sinks[i].mu = mu_from_index(sinks[i].a, sinks[i].n_index, omegaK);
    }
    return sinks;
}

} // namespace hetlab
