#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <string>

#include "hetlab.h"
#include "json.hpp"

using nlohmann::json;

namespace {

std::string fixture(const char* name) {
    return std::string(FIXTURE_DIR) + "/" + name;
}

// Takes ownership of the C string.
std::string take(char* s) {
    REQUIRE(s != nullptr);
    std::string out(s);
    hl_string_free(s);
    return out;
}

const char* kWorkedF =
    "saddle1.c = 2.0\n"
    "saddle1.e = 1.0\n"
    "saddle2.c = 2.0\n"
    "saddle2.e = 1.0\n"
    "mu1 = 0.1\n"
    "mu2 = 0.0\n"
    "omega = 1.0\n"
    "xi1 = 0.0\n"
    "xi2 = 0.0\n"
    "phi1.constant = 2.0\n"
    "phi1.sine_coeffs = [1.0]\n"
    "phi2.sine_coeffs = [1.0]\n";

const char* kWorkedG =
    "saddle1.c = 2.0\n"
    "saddle1.e = 1.0\n"
    "saddle2.c = 2.0\n"
    "saddle2.e = 1.0\n"
    "mu1 = 0.0\n"
    "mu2 = 0.1\n"
    "omega = 1.0\n"
    "xi1 = 0.0\n"
    "xi2 = 0.0\n"
    "phi1.constant = 2.0\n"
    "phi1.sine_coeffs = [1.0]\n"
    "phi2.sine_coeffs = [1.0]\n";

}  // namespace

TEST_CASE("version string and error slots") {
    const char* v = hl_version();
    REQUIRE(v != nullptr);
    CHECK(std::strchr(v, '.') != nullptr);
    REQUIRE(hl_last_error() != nullptr);
    REQUIRE(hl_last_error_name() != nullptr);
}

TEST_CASE("model lifecycle, validation, constants, and hash") {
    hl_model* m = nullptr;
    REQUIRE(hl_model_load(fixture("base.cfg").c_str(), &m) == HL_OK);
    REQUIRE(m != nullptr);
    CHECK(std::string(hl_last_error()) == "");

    char* out = nullptr;
    REQUIRE(hl_model_validate_json(m, &out) == HL_OK);
    auto rep = json::parse(take(out));
    CHECK(rep["ok"].get<bool>());
    REQUIRE(rep["checks"].is_array());
    CHECK(!rep["checks"].empty());
    CHECK(rep["checks"][0].contains("id"));
    CHECK(rep["checks"][0].contains("pass"));

    out = nullptr;
    REQUIRE(hl_model_constants_json(m, &out) == HL_OK);
    auto consts = json::parse(take(out));
    CHECK(consts["K_F"].get<double>() == doctest::Approx(3.0));
    CHECK(consts["K_G"].get<double>() == doctest::Approx(3.0));
    CHECK(consts["delta"].get<double>() == doctest::Approx(4.0));
    CHECK(consts["omega_K_F"].get<double>() == doctest::Approx(3.0));
    CHECK(consts.contains("invariant_curve_margin"));

    out = nullptr;
    REQUIRE(hl_model_to_json(m, &out) == HL_OK);
    auto dump = json::parse(take(out));
    CHECK(dump.contains("mu1"));

    char* h1 = nullptr;
    REQUIRE(hl_model_hash(m, &h1) == HL_OK);
    const std::string hash1 = take(h1);
    CHECK(!hash1.empty());

    hl_model* m2 = nullptr;
    REQUIRE(hl_model_parse(kWorkedF, &m2) == HL_OK);
    char* h2 = nullptr;
    REQUIRE(hl_model_hash(m2, &h2) == HL_OK);
    CHECK(take(h2) != hash1);

    hl_model_free(m2);
    hl_model_free(m);
}

TEST_CASE("failures set status codes and error names") {
    hl_model* m = nullptr;
    CHECK(hl_model_load("/nonexistent/nope.cfg", &m) == HL_ERR_PARSE);
    CHECK(m == nullptr);
    CHECK(std::string(hl_last_error_name()) == "ConfigError");
    CHECK(std::string(hl_last_error()).find("nope.cfg") != std::string::npos);

    CHECK(hl_model_parse("mu1 = = 3\n", &m) == HL_ERR_PARSE);
    CHECK(hl_model_parse("saddle1.c = 2\nunknown_key = 1\n", &m) == HL_ERR_PARSE);

    CHECK(hl_model_load(nullptr, &m) == HL_ERR_PARSE);
    CHECK(std::string(hl_last_error_name()) == "InvalidArgument");
    CHECK(hl_model_load(fixture("base.cfg").c_str(), nullptr) == HL_ERR_PARSE);

    // A successful call clears the error slot.
    REQUIRE(hl_model_load(fixture("base.cfg").c_str(), &m) == HL_OK);
    CHECK(std::string(hl_last_error()) == "");
    CHECK(std::string(hl_last_error_name()) == "");
    hl_model_free(m);
}

TEST_CASE("map evaluation matches the worked closed forms") {
    hl_model* mf = nullptr;
    REQUIRE(hl_model_parse(kWorkedF, &mf) == HL_OK);
    double out3[3] = {0, 0, 0};
    int status = -1;
    REQUIRE(hl_map_eval(mf, 'F', 0.0, 0.0, out3, &status) == HL_OK);
    CHECK(status == 0);
    CHECK(out3[0] == doctest::Approx(0.016).epsilon(1e-12));
    CHECK(out3[1] == doctest::Approx(3.0 * std::log(5.0)).epsilon(1e-12));
    CHECK(out3[2] > 0.0);

    // Analytic Jacobian against finite differences of the evaluator.
    double J[4] = {0, 0, 0, 0};
    REQUIRE(hl_map_jacobian(mf, 'F', 0.001, 0.5, J) == HL_OK);
    const double h = 1e-7;
    double lo3[3], hi3[3];
    REQUIRE(hl_map_eval(mf, 'F', 0.001 - h, 0.5, lo3, &status) == HL_OK);
    REQUIRE(hl_map_eval(mf, 'F', 0.001 + h, 0.5, hi3, &status) == HL_OK);
    CHECK(J[0] == doctest::Approx((hi3[0] - lo3[0]) / (2 * h)).epsilon(1e-4));
    CHECK(J[2] == doctest::Approx((hi3[1] - lo3[1]) / (2 * h)).epsilon(1e-4));
    REQUIRE(hl_map_eval(mf, 'F', 0.001, 0.5 - h, lo3, &status) == HL_OK);
    REQUIRE(hl_map_eval(mf, 'F', 0.001, 0.5 + h, hi3, &status) == HL_OK);
    CHECK(J[1] == doctest::Approx((hi3[0] - lo3[0]) / (2 * h)).epsilon(1e-4));
    CHECK(J[3] == doctest::Approx((hi3[1] - lo3[1]) / (2 * h)).epsilon(1e-4));

    CHECK(hl_map_eval(mf, 'X', 0.0, 0.0, out3, &status) == HL_ERR_PARSE);
    hl_model_free(mf);

    hl_model* mg = nullptr;
    REQUIRE(hl_model_parse(kWorkedG, &mg) == HL_OK);
    REQUIRE(hl_map_eval(mg, 'G', 0.0, std::acos(0.0), out3, &status) == HL_OK);
    CHECK(status == 0);
    CHECK(out3[0] == doctest::Approx(0.001).epsilon(1e-12));

    // Phi2 vanishes at theta = 0: singular hit is data, not an error.
    REQUIRE(hl_map_eval(mg, 'G', 0.0, 0.0, out3, &status) == HL_OK);
    CHECK(status == 3);
    hl_model_free(mg);
}

TEST_CASE("orbit export carries the expected shape") {
    hl_model* m = nullptr;
    REQUIRE(hl_model_load(fixture("base.cfg").c_str(), &m) == HL_OK);
    char* csv = nullptr;
    REQUIRE(hl_orbit_csv(m, 'F', 0.0, 0.5, 5, 20, &csv) == HL_OK);
    const std::string text = take(csv);
    CHECK(text.rfind("n,y,theta,flight_time", 0) == 0);
    long rows = -1;  // header
    for (char c : text)
        if (c == '\n') ++rows;
    CHECK(rows == 20);

    CHECK(hl_orbit_csv(m, 'F', 0.0, 0.5, -1, 20, &csv) == HL_ERR_PARSE);
    CHECK(hl_orbit_csv(m, 'F', 0.0, 0.5, 0, 0, &csv) == HL_ERR_PARSE);
    hl_model_free(m);
}

TEST_CASE("singular-limit analysis round-trips through JSON") {
    hl_model* m = nullptr;
    REQUIRE(hl_model_load(fixture("base.cfg").c_str(), &m) == HL_OK);
    char* out = nullptr;
    REQUIRE(hl_singular_json(m, 'F', 0.25, &out) == HL_OK);
    auto j = json::parse(take(out));
    CHECK(j["L"].get<double>() == doctest::Approx(3.0));
    CHECK(!j["singular"].get<bool>());
    REQUIRE(j["critical_set"].is_array());
    CHECK(j["critical_set"].size() == 2);
    CHECK(!j["diffeomorphism"]["is_diffeo"].get<bool>());
    CHECK(j["transition_graph"]["Q"].size() == 2);
    CHECK(std::isfinite(j["lyapunov"]["lambda"].get<double>()));
    hl_model_free(m);

    // Constant phi1: a rigid rotation with a rotation-number block.
    hl_model* r = nullptr;
    REQUIRE(hl_model_parse(
                "saddle1.c = 2.0\nsaddle1.e = 1.0\n"
                "saddle2.c = 2.0\nsaddle2.e = 1.0\n"
                "mu1 = 0.001\nmu2 = 0.0\nomega = 1.0\n"
                "xi1 = 0.3\nxi2 = 0.4\n"
                "phi1.constant = 2.0\nphi2.sine_coeffs = [1.0]\n",
                &r) == HL_OK);
    REQUIRE(hl_singular_json(r, 'F', 0.7, &out) == HL_OK);
    auto jr = json::parse(take(out));
    CHECK(jr["diffeomorphism"]["is_diffeo"].get<bool>());
    CHECK(jr["critical_set"].empty());
    REQUIRE(jr.contains("rotation"));
    const double rho = jr["rotation"]["rho"].get<double>();
    CHECK(rho >= 0.0);
    CHECK(rho < 1.0);
    hl_model_free(r);
}

TEST_CASE("a-scan exports one classified row per cell") {
    hl_model* m = nullptr;
    REQUIRE(hl_model_load(fixture("chaos30.cfg").c_str(), &m) == HL_OK);
    char* out = nullptr;
    REQUIRE(hl_scan_a_csv(m, 'F', 8, 200, 1000, &out) == HL_OK);
    const std::string csv = take(out);
    CHECK(csv.rfind("a,lyapunov,classification,singular_hits", 0) == 0);
    long rows = -1;
    for (char c : csv)
        if (c == '\n') ++rows;
    CHECK(rows == 8);
    CHECK(csv.find("expanding") != std::string::npos);
    CHECK(hl_scan_a_csv(m, 'Q', 8, 200, 1000, &out) == HL_ERR_PARSE);
    hl_model_free(m);
}

TEST_CASE("sink scan exports lattice-indexed records") {
    hl_model* m = nullptr;
    REQUIRE(hl_model_load(fixture("chaos30.cfg").c_str(), &m) == HL_OK);
    char* out = nullptr;
    REQUIRE(hl_sinks_json(m, 0.0123, 0.5, 4, &out) == HL_OK);
    auto j = json::parse(take(out));
    CHECK(j["period_cap"].get<int>() == 4);
    REQUIRE(j["sinks"].is_array());
    REQUIRE(!j["sinks"].empty());
    CHECK(j["count"].get<size_t>() == j["sinks"].size());
    double prev = 1e300;
    for (const auto& s : j["sinks"]) {
        CHECK(s["period"].get<int>() >= 1);
        CHECK(s["period"].get<int>() <= 4);
        CHECK(s["multiplier"].get<double>() < 1e-6);
        const double mu = s["mu"].get<double>();
        CHECK(mu < prev);
        prev = mu;
    }
    hl_model_free(m);
}

TEST_CASE("planar pipeline classifies the focal fixture") {
    hl_planar* p = nullptr;
    REQUIRE(hl_planar_load(fixture("planar_case2.cfg").c_str(), &p) == HL_OK);
    REQUIRE(p != nullptr);

    char* out = nullptr;
    REQUIRE(hl_planar_validate_json(p, &out) == HL_OK);
    auto v = json::parse(take(out));
    CHECK(v["ok"].get<bool>());

    REQUIRE(hl_melnikov_classify_json(p, 128, &out) == HL_OK);
    auto cls = json::parse(take(out));
    CHECK(cls["case"].get<std::string>() == "Case2");
    CHECK(!cls["W1"]["sign_changing"].get<bool>());
    CHECK(cls["W2"]["sign_changing"].get<bool>());
    CHECK(cls["W1"]["min"].get<double>() > 0.0);

    REQUIRE(hl_melnikov_table_csv(p, 32, &out) == HL_OK);
    const std::string csv = take(out);
    CHECK(csv.rfind("theta,W1,W2", 0) == 0);

    CHECK(hl_melnikov_table_csv(p, 4, &out) == HL_ERR_PARSE);
    hl_planar_free(p);

    hl_planar* bad = nullptr;
    CHECK(hl_planar_load("/nonexistent/sys.cfg", &bad) == HL_ERR_PARSE);
    CHECK(bad == nullptr);
}

TEST_CASE("tangle exports: spiral, tangencies, and homoclinic curve") {
    hl_model* m = nullptr;
    REQUIRE(hl_model_load(fixture("tangle.cfg").c_str(), &m) == HL_OK);

    char* out = nullptr;
    REQUIRE(hl_tangle_spiral_csv(m, 0.5, 256, &out) == HL_OK);
    const std::string spiral = take(out);
    CHECK(spiral.rfind("s,y,theta_lift", 0) == 0);

    REQUIRE(hl_tangle_tangencies_json(m, 0.5, 1e-4, 1e-6, 3, &out) == HL_OK);
    auto scan = json::parse(take(out));
    REQUIRE(scan.contains("tangencies"));
    CHECK(scan["tangencies"].size() >= 2);
    hl_model_free(m);

    hl_model* hm = nullptr;
    REQUIRE(hl_model_load(fixture("hom2.cfg").c_str(), &hm) == HL_OK);
    REQUIRE(hl_hom_json(hm, 1e-4, 1e-2, 7, &out) == HL_OK);
    auto hom = json::parse(take(out));
    CHECK(hom["mu1"].size() == 7);
    CHECK(hom["slope"].get<double>() == doctest::Approx(2.0).epsilon(0.05));
    CHECK(hl_hom_json(hm, 0.0, 1e-2, 7, &out) == HL_ERR_PARSE);
    CHECK(hl_hom_json(hm, 1e-4, 1e-2, 1, &out) == HL_ERR_PARSE);
    hl_model_free(hm);
}

TEST_CASE("cell classification and sweep export") {
    hl_model* m = nullptr;
    REQUIRE(hl_model_load(fixture("curve_regime.cfg").c_str(), &m) == HL_OK);
    char* out = nullptr;
    REQUIRE(hl_classify_json(m, 'F', 2, 500, 4000, 1, &out) == HL_OK);
    auto cls = json::parse(take(out));
    CHECK(cls["label"].get<std::string>() == "invariant-curve");
    CHECK(cls["winding"].get<int>() == 1);
    hl_model_free(m);

    hl_model* b = nullptr;
    REQUIRE(hl_model_load(fixture("base.cfg").c_str(), &b) == HL_OK);
    char* csv1 = nullptr;
    char* dat = nullptr;
    char* svg = nullptr;
    REQUIRE(hl_sweep(b, 2, 2, 1e-3, 1e-3, 1, 200, 1000, 7, 1, &csv1, &dat, &svg) ==
            HL_OK);
    const std::string c1 = take(csv1);
    const std::string d1 = take(dat);
    const std::string s1 = take(svg);
    CHECK(c1.rfind("mu1,mu2,omega,a,label,lyap1,lyap2,winding,period", 0) == 0);
    CHECK(!d1.empty());
    CHECK(s1.find("<svg") != std::string::npos);

    char* csv2 = nullptr;
    REQUIRE(hl_sweep(b, 2, 2, 1e-3, 1e-3, 1, 200, 1000, 7, 1, &csv2, nullptr,
                     nullptr) == HL_OK);
    CHECK(take(csv2) == c1);

    CHECK(hl_sweep(b, 0, 2, 1e-3, 1e-3, 1, 200, 1000, 7, 1, &csv2, nullptr,
                   nullptr) == HL_ERR_PARSE);
    CHECK(hl_sweep(b, 2, 2, 0.0, 1e-3, 1, 200, 1000, 7, 1, &csv2, nullptr,
                   nullptr) == HL_ERR_PARSE);
    hl_model_free(b);
}
