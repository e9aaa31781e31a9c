#include "hetlab.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <optional>
#include <string>

#include "hetlab/angles.hpp"
#include "hetlab/combinatorics.hpp"
#include "hetlab/config_io.hpp"
#include "hetlab/maps.hpp"
#include "hetlab/melnikov.hpp"
#include "hetlab/model.hpp"
#include "hetlab/singular.hpp"
#include "hetlab/sweep.hpp"
#include "hetlab/tangle.hpp"
#include "json.hpp"

using nlohmann::json;

struct hl_model {
    hetlab::ModelConfig cfg;
};

struct hl_planar {
    hetlab::PlanarSystem sys;
    // connecting orbits are shot once and reused across table/classify calls
    std::optional<hetlab::HeteroclinicOrbit> l1, l2;
};

namespace {

thread_local std::string g_error;
thread_local std::string g_error_name;

void clear_error() {
    g_error.clear();
    g_error_name.clear();
}

int fail(const char* name, const std::string& msg, int code) {
    g_error_name = name;
    g_error = msg;
    return code;
}

// Runs f under the shared exception-to-status mapping.
template <typename F>
int guarded(F&& f) {
    try {
        clear_error();
        f();
        return HL_OK;
    } catch (const hetlab::ConfigError& e) {
        return fail("ConfigError", e.what(), HL_ERR_PARSE);
    } catch (const hetlab::NoHomoclinicity& e) {
        return fail("NoHomoclinicity", e.what(), HL_ERR_DOMAIN);
    } catch (const hetlab::SplitAtManifold& e) {
        return fail("SplitAtManifold", e.what(), HL_ERR_DOMAIN);
    } catch (const hetlab::NumericallyDegenerate& e) {
        return fail("NumericallyDegenerate", e.what(), HL_ERR_DOMAIN);
    } catch (const hetlab::NoConnection& e) {
        return fail("NoConnection", e.what(), HL_ERR_DOMAIN);
    } catch (const hetlab::TruncationTooShort& e) {
        return fail("TruncationTooShort", e.what(), HL_ERR_DOMAIN);
    } catch (const hetlab::UnreliableEstimate& e) {
        return fail("UnreliableEstimate", e.what(), HL_ERR_DOMAIN);
    } catch (const hetlab::NotAGraph& e) {
        return fail("NotAGraph", e.what(), HL_ERR_DOMAIN);
    } catch (const hetlab::DegenerateCritical& e) {
        return fail("DegenerateCritical", e.what(), HL_ERR_DOMAIN);
    } catch (const hetlab::ContinuationBroken& e) {
        return fail("ContinuationBroken", e.what(), HL_ERR_DOMAIN);
    } catch (const std::invalid_argument& e) {
        return fail("InvalidArgument", e.what(), HL_ERR_PARSE);
    } catch (const std::exception& e) {
        return fail("Error", e.what(), HL_ERR_DOMAIN);
    }
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out == nullptr) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

int require(bool ok, const char* what) {
    if (ok) return HL_OK;
    return fail("InvalidArgument", what, HL_ERR_PARSE);
}

json profile_json(const hetlab::ForcingProfile& p) {
    return json{{"c0", p.constant_term()},
                {"cos", p.cosine_coeffs()},
                {"sin", p.sine_coeffs()}};
}

json checks_json(const std::vector<hetlab::CheckResult>& checks) {
    json arr = json::array();
    for (const auto& c : checks)
        arr.push_back({{"id", c.id}, {"pass", c.pass}, {"witness", c.witness}});
    return arr;
}

}  // namespace

extern "C" {

const char* hl_version(void) { return "0.1.0"; }

const char* hl_last_error(void) { return g_error.c_str(); }

const char* hl_last_error_name(void) { return g_error_name.c_str(); }

void hl_string_free(char* s) { std::free(s); }

int hl_model_load(const char* path, hl_model** out) {
    if (int rc = require(path && out, "null argument")) return rc;
    return guarded([&] {
        auto* m = new hl_model{hetlab::load_model_config(path)};
        *out = m;
    });
}

int hl_model_parse(const char* text, hl_model** out) {
    if (int rc = require(text && out, "null argument")) return rc;
    return guarded([&] {
        const auto kv = hetlab::KeyValueFile::parse_text(text);
        auto* m = new hl_model{hetlab::model_from_keyvalues(kv)};
        *out = m;
    });
}

void hl_model_free(hl_model* m) { delete m; }

int hl_model_validate_json(const hl_model* m, char** json_out) {
    if (int rc = require(m && json_out, "null argument")) return rc;
    return guarded([&] {
        const hetlab::ValidationReport rep = hetlab::validate(m->cfg);
        *json_out = dup_string(hetlab::validation_report_to_json(rep));
    });
}

int hl_model_constants_json(const hl_model* m, char** json_out) {
    if (int rc = require(m && json_out, "null argument")) return rc;
    return guarded([&] {
        const hetlab::DerivedConstants dc = hetlab::derive_constants(m->cfg);
        json j{{"delta1", dc.delta1}, {"delta2", dc.delta2},
               {"delta", dc.delta},   {"K_F", dc.K_F},
               {"K_G", dc.K_G},       {"xi", dc.xi},
               {"omega", m->cfg.omega}};
        j["omega_K_F"] = m->cfg.omega * dc.K_F;
        j["omega_K_G"] = m->cfg.omega * dc.K_G;
        if (m->cfg.phi1.positive()) {
            const auto map = hetlab::singular_limit_from_config(m->cfg, 0.0, 'F');
            const auto rep = hetlab::is_diffeomorphism(map);
            j["sup_phi1_ratio"] = rep.sup_profile_ratio;
            j["contraction_product"] = rep.contraction_product;
            j["invariant_curve_margin"] = 1.0 - rep.contraction_product;
        }
        *json_out = dup_string(j.dump(2));
    });
}

int hl_model_to_json(const hl_model* m, char** json_out) {
    if (int rc = require(m && json_out, "null argument")) return rc;
    return guarded([&] { *json_out = dup_string(hetlab::model_to_json(m->cfg)); });
}

int hl_model_hash(const hl_model* m, char** hex_out) {
    if (int rc = require(m && hex_out, "null argument")) return rc;
    return guarded([&] { *hex_out = dup_string(hetlab::model_hash(m->cfg)); });
}

int hl_map_eval(const hl_model* m, char which, double y, double theta,
                double out3[3], int* status_out) {
    if (int rc = require(m && out3 && status_out, "null argument")) return rc;
    if (int rc = require(which == 'F' || which == 'G', "which must be F or G"))
        return rc;
    return guarded([&] {
        hetlab::MapEngine eng(m->cfg);
        const hetlab::MapResult r = which == 'F' ? eng.return_map_F({y, theta})
                                                 : eng.return_map_G({y, theta});
        out3[0] = r.p.y;
        out3[1] = r.p.theta;
        out3[2] = r.flight_time;
        *status_out = static_cast<int>(r.status);
    });
}

int hl_map_jacobian(const hl_model* m, char which, double y, double theta,
                    double out4[4]) {
    if (int rc = require(m && out4, "null argument")) return rc;
    if (int rc = require(which == 'F' || which == 'G', "which must be F or G"))
        return rc;
    return guarded([&] {
        hetlab::MapEngine eng(m->cfg);
        const hetlab::Jac2 j = which == 'F' ? eng.jacobian_F({y, theta})
                                            : eng.jacobian_G({y, theta});
        out4[0] = j.dy_dy;
        out4[1] = j.dy_dth;
        out4[2] = j.dth_dy;
        out4[3] = j.dth_dth;
    });
}

int hl_orbit_csv(const hl_model* m, char which, double y0, double theta0,
                 int burn_in, int n, char** csv_out) {
    if (int rc = require(m && csv_out, "null argument")) return rc;
    if (int rc = require(which == 'F' || which == 'G', "which must be F or G"))
        return rc;
    if (int rc = require(burn_in >= 0 && n > 0, "need burn_in >= 0 and n > 0"))
        return rc;
    return guarded([&] {
        hetlab::MapEngine eng(m->cfg);
        eng.enforce_sections = false;
        const auto orbit = hetlab::run_orbit(eng, which, {y0, theta0}, burn_in, n);
        *csv_out = dup_string(hetlab::orbit_to_csv(orbit));
    });
}

int hl_singular_json(const hl_model* m, char which, double a, char** json_out) {
    if (int rc = require(m && json_out, "null argument")) return rc;
    if (int rc = require(which == 'F' || which == 'G', "which must be F or G"))
        return rc;
    return guarded([&] {
        const auto map = hetlab::singular_limit_from_config(m->cfg, a, which);
        json j{{"which", std::string(1, which)},
               {"a", map.spec().a},
               {"L", map.spec().L},
               {"xi", map.spec().xi},
               {"singular", map.spec().singular},
               {"profile", profile_json(map.spec().profile)}};

        const auto diffeo = hetlab::is_diffeomorphism(map);
        j["diffeomorphism"] = {
            {"is_diffeo", diffeo.is_diffeo},
            {"min_deriv", diffeo.min_deriv},
            {"sup_profile_ratio", diffeo.sup_profile_ratio},
            {"contraction_product", diffeo.contraction_product}};

        j["critical_set"] = hetlab::critical_set(map);

        const auto lyap = hetlab::lyapunov_1d(map, 0.1);
        j["lyapunov"] = {{"lambda", lyap.lambda},
                         {"n", lyap.n},
                         {"singular_hits", lyap.singular_hits},
                         {"reliable", lyap.reliable},
                         {"superstable", lyap.superstable}};

        if (diffeo.is_diffeo) {
            const auto rot = hetlab::rotation_number(map);
            j["rotation"] = {{"rho", rot.rho},
                             {"error_bound", rot.error_bound},
                             {"n", rot.n},
                             {"rational_within_bound", rot.rational_within_bound},
                             {"q", rot.q}};
        }

        const auto graph = hetlab::transition_matrix(map);
        json qj = json::array();
        for (const auto& row : graph.Q) qj.push_back(row);
        json gj{{"breakpoints", graph.breakpoints},
                {"Q", qj},
                {"lambda0", graph.lambda0},
                {"h7a", graph.h7a}};
        if (graph.mixing_N)
            gj["mixing_N"] = *graph.mixing_N;
        else
            gj["mixing_N"] = nullptr;
        j["transition_graph"] = gj;

        *json_out = dup_string(j.dump(2));
    });
}

int hl_scan_a_csv(const hl_model* m, char which, int cells, int burn_in,
                  int n, char** csv_out) {
    if (int rc = require(m && csv_out, "null argument")) return rc;
    if (int rc = require(which == 'F' || which == 'G', "which must be F or G"))
        return rc;
    if (int rc = require(cells > 0 && burn_in >= 0 && n > 0, "bad grid sizes"))
        return rc;
    return guarded([&] {
        std::string csv = "a,lyapunov,classification,singular_hits\n";
        char buf[128];
        for (int i = 0; i < cells; ++i) {
            const double a = hetlab::TWO_PI * (i + 0.5) / cells;
            const auto map = hetlab::singular_limit_from_config(m->cfg, a, which);
            const auto lyap = hetlab::lyapunov_1d(map, 0.1, burn_in, n);
            const char* cls = "marginal";
            if (lyap.superstable || lyap.lambda < -0.02) cls = "contracting";
            else if (lyap.lambda > 0.02) cls = "expanding";
            if (!lyap.reliable) cls = "unreliable";
            std::snprintf(buf, sizeof buf, "%.12g,%.12g,%s,%d\n", a,
                          lyap.lambda, cls, lyap.singular_hits);
            csv += buf;
        }
        *csv_out = dup_string(csv);
    });
}

int hl_sinks_json(const hl_model* m, double a_hat, double radius,
                  int period_cap, char** json_out) {
    if (int rc = require(m && json_out, "null argument")) return rc;
    return guarded([&] {
        const auto sinks =
            hetlab::find_superstable_sinks(m->cfg, a_hat, radius, period_cap);
        json arr = json::array();
        for (const auto& s : sinks)
            arr.push_back({{"a", s.a},
                           {"period", s.period},
                           {"orbit", s.orbit},
                           {"multiplier", s.multiplier},
                           {"n_index", s.n_index},
                           {"mu", s.mu}});
        json j{{"a_hat", a_hat},
               {"radius", radius},
               {"period_cap", period_cap},
               {"count", sinks.size()},
               {"sinks", arr}};
        *json_out = dup_string(j.dump(2));
    });
}

int hl_planar_load(const char* path, hl_planar** out) {
    if (int rc = require(path && out, "null argument")) return rc;
    return guarded([&] {
        auto* p = new hl_planar{hetlab::load_planar_system(path), {}, {}};
        *out = p;
    });
}

void hl_planar_free(hl_planar* p) { delete p; }

int hl_planar_validate_json(const hl_planar* p, char** json_out) {
    if (int rc = require(p && json_out, "null argument")) return rc;
    return guarded([&] {
        const auto checks = hetlab::validate_planar(p->sys);
        bool ok = true;
        for (const auto& c : checks) ok = ok && c.pass;
        json j{{"ok", ok}, {"checks", checks_json(checks)}};
        *json_out = dup_string(j.dump(2));
    });
}

namespace {

void ensure_orbits(hl_planar* p) {
    if (!p->l1) p->l1 = hetlab::shoot_heteroclinic(p->sys, 1);
    if (!p->l2) p->l2 = hetlab::shoot_heteroclinic(p->sys, 2);
}

json sign_report_json(const hetlab::SignReport& r) {
    return json{{"min", r.min},
                {"max", r.max},
                {"argmin", r.argmin},
                {"argmax", r.argmax},
                {"sign_changing", r.sign_changing},
                {"nongeneric", r.nongeneric},
                {"zeros", r.zeros}};
}

}  // namespace

int hl_melnikov_table_csv(hl_planar* p, int grid, char** csv_out) {
    if (int rc = require(p && csv_out, "null argument")) return rc;
    if (int rc = require(grid >= 8, "grid must be >= 8")) return rc;
    return guarded([&] {
        ensure_orbits(p);
        const auto table = hetlab::melnikov_table(p->sys, *p->l1, *p->l2, grid);
        *csv_out = dup_string(hetlab::melnikov_table_to_csv(table));
    });
}

int hl_melnikov_classify_json(hl_planar* p, int grid, char** json_out) {
    if (int rc = require(p && json_out, "null argument")) return rc;
    if (int rc = require(grid >= 8, "grid must be >= 8")) return rc;
    return guarded([&] {
        const auto cls = hetlab::classify_configuration(p->sys, grid);
        json j{{"case", hetlab::to_string(cls.which)},
               {"W1", sign_report_json(cls.W1)},
               {"W2", sign_report_json(cls.W2)},
               {"nongeneric", cls.nongeneric}};
        *json_out = dup_string(j.dump(2));
    });
}

int hl_tangle_spiral_csv(const hl_model* m, double M, int n_samples,
                         char** csv_out) {
    if (int rc = require(m && csv_out, "null argument")) return rc;
    return guarded([&] {
        const auto seg = hetlab::default_unstable_segment(M);
        const auto spiral = hetlab::unstable_image_spiral(m->cfg, seg, n_samples);
        *csv_out = dup_string(hetlab::spiral_to_csv(spiral));
    });
}

int hl_tangle_tangencies_json(const hl_model* m, double M, double mu2_hi,
                              double mu2_lo, int count, char** json_out) {
    if (int rc = require(m && json_out, "null argument")) return rc;
    return guarded([&] {
        const auto seg = hetlab::default_unstable_segment(M);
        const auto scan = hetlab::tangency_sequence(
            m->cfg, seg, hetlab::default_stable_graph(), mu2_hi, mu2_lo, count);
        *json_out = dup_string(hetlab::tangencies_to_json(scan));
    });
}

int hl_hom_json(const hl_model* m, double mu1_lo, double mu1_hi, int points,
                char** json_out) {
    if (int rc = require(m && json_out, "null argument")) return rc;
    if (int rc = require(points >= 2, "need at least 2 grid points")) return rc;
    if (int rc = require(mu1_lo > 0.0 && mu1_hi > mu1_lo, "bad mu1 range"))
        return rc;
    return guarded([&] {
        std::vector<double> grid(points);
        for (int i = 0; i < points; ++i)
            grid[i] = mu1_lo * std::pow(mu1_hi / mu1_lo,
                                        static_cast<double>(i) / (points - 1));
        const auto hom = hetlab::hom_curve(m->cfg, grid);
        json j{{"mu1", hom.mu1},
               {"mu2", hom.mu2},
               {"slope", hom.slope},
               {"intercept", hom.intercept}};
        *json_out = dup_string(j.dump(2));
    });
}

int hl_classify_json(const hl_model* m, char which, int seeds, int burn_in,
                     int iterates, unsigned long long seed, char** json_out) {
    if (int rc = require(m && json_out, "null argument")) return rc;
    if (int rc = require(which == 'F' || which == 'G', "which must be F or G"))
        return rc;
    return guarded([&] {
        hetlab::ClassifyOptions opts;
        if (seeds > 0) opts.seeds = seeds;
        if (burn_in > 0) opts.burn_in = burn_in;
        if (iterates > 0) opts.iterates = iterates;
        opts.seed = seed;
        const auto cls = hetlab::classify_cell(m->cfg, which, opts);
        json j{{"label", cls.label},     {"lyap1", cls.lyap1},
               {"lyap2", cls.lyap2},     {"winding", cls.winding},
               {"period", cls.period},   {"skipped", cls.skipped}};
        *json_out = dup_string(j.dump(2));
    });
}

int hl_sweep(const hl_model* m, int n1, int n2, double mu1_max,
             double mu2_max, int seeds, int burn_in, int iterates,
             unsigned long long seed, int threads, char** csv_out,
             char** dat_out, char** svg_out) {
    if (int rc = require(m && csv_out, "null argument")) return rc;
    if (int rc = require(n1 >= 1 && n2 >= 1, "grid must be at least 1x1"))
        return rc;
    if (int rc = require(mu1_max > 0.0 && mu2_max > 0.0, "mu maxima must be > 0"))
        return rc;
    return guarded([&] {
        std::vector<double> g1(n1), g2(n2);
        for (int i = 0; i < n1; ++i)
            g1[i] = n1 == 1 ? mu1_max : mu1_max * i / (n1 - 1);
        for (int j = 0; j < n2; ++j)
            g2[j] = n2 == 1 ? mu2_max : mu2_max * j / (n2 - 1);
        hetlab::ClassifyOptions opts;
        if (seeds > 0) opts.seeds = seeds;
        if (burn_in > 0) opts.burn_in = burn_in;
        if (iterates > 0) opts.iterates = iterates;
        opts.seed = seed;
        const auto res = hetlab::bifurcation_diagram(m->cfg, g1, g2, opts,
                                                     threads > 0 ? threads : 1);
        *csv_out = dup_string(hetlab::sweep_to_csv(res));
        if (dat_out) *dat_out = dup_string(hetlab::sweep_to_dat(res));
        if (svg_out) *svg_out = dup_string(hetlab::sweep_to_svg(res));
    });
}

}  // extern "C"
