#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hetlab.h"
#include "json.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct StrDeleter {
    void operator()(char* s) const { hl_string_free(s); }
};
using ApiString = std::unique_ptr<char, StrDeleter>;

struct ModelDeleter {
    void operator()(hl_model* m) const { hl_model_free(m); }
};
using ModelHandle = std::unique_ptr<hl_model, ModelDeleter>;

struct PlanarDeleter {
    void operator()(hl_planar* p) const { hl_planar_free(p); }
};
using PlanarHandle = std::unique_ptr<hl_planar, PlanarDeleter>;

int report_api_error(int rc) {
    std::cerr << hl_last_error_name() << ": " << hl_last_error() << "\n";
    return rc;
}

int write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        std::cerr << "IoError: cannot open " << path.string() << " for writing\n";
        return HL_ERR_PARSE;
    }
    out << content;
    out.close();
    if (!out) {
        std::cerr << "IoError: short write to " << path.string() << "\n";
        return HL_ERR_PARSE;
    }
    return HL_OK;
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string file_hash_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return "";
    std::ostringstream ss;
    ss << in.rdbuf();
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(ss.str())));
    return buf;
}

std::string timestamp_utc() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Common run options; every subcommand picks these up via fallthrough.
struct Common {
    std::string config;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    int threads = 1;
};

int load_model(const Common& c, ModelHandle& model) {
    if (c.config.empty()) {
        std::cerr << "UsageError: --config is required\n";
        return HL_ERR_PARSE;
    }
    hl_model* raw = nullptr;
    if (int rc = hl_model_load(c.config.c_str(), &raw))
        return report_api_error(rc);
    model.reset(raw);
    return HL_OK;
}

// Writes <name>.manifest.json next to the outputs. Data files are fully
// deterministic; the timestamp lives only here.
int write_manifest(const Common& c, const std::string& command,
                   const std::string& config_hash, const json& params,
                   const std::vector<std::string>& outputs) {
    json m{{"command", command},
           {"config", c.config},
           {"config_hash", config_hash},
           {"seed", c.seed},
           {"threads", c.threads},
           {"version", hl_version()},
           {"params", params},
           {"outputs", outputs},
           {"created", timestamp_utc()}};
    const std::string name =
        command.substr(command.find(' ') == std::string::npos
                           ? 0
                           : command.find(' ') + 1);
    return write_file(fs::path(c.out_dir) / (name + ".manifest.json"),
                      m.dump(2) + "\n");
}

int model_hash_hex(const ModelHandle& model, std::string& hex) {
    char* raw = nullptr;
    if (int rc = hl_model_hash(model.get(), &raw)) return report_api_error(rc);
    ApiString s(raw);
    hex = s.get();
    return HL_OK;
}

int ensure_out_dir(const Common& c) {
    std::error_code ec;
    fs::create_directories(c.out_dir, ec);
    if (ec) {
        std::cerr << "IoError: cannot create " << c.out_dir << ": "
                  << ec.message() << "\n";
        return HL_ERR_PARSE;
    }
    return HL_OK;
}

int cmd_validate(const Common& c) {
    ModelHandle model;
    if (int rc = load_model(c, model)) return rc;
    char* raw = nullptr;
    if (int rc = hl_model_validate_json(model.get(), &raw))
        return report_api_error(rc);
    ApiString s(raw);
    const json rep = json::parse(s.get());
    bool ok = rep.value("ok", false);
    for (const auto& check : rep.value("checks", json::array())) {
        std::cout << (check.value("pass", false) ? "pass" : "FAIL") << "  "
                  << check.value("id", std::string());
        const std::string witness = check.value("witness", std::string());
        if (!witness.empty()) std::cout << "  [" << witness << "]";
        std::cout << "\n";
    }
    std::cout << (ok ? "all hypotheses hold" : "hypothesis violated") << "\n";
    return ok ? HL_OK : HL_ERR_DOMAIN;
}

struct OrbitArgs {
    std::string which = "F";
    double y0 = 0.0, theta0 = 0.03;
    int burn_in = 0, n = 1000;
};

int cmd_orbit(const Common& c, const OrbitArgs& a) {
    ModelHandle model;
    if (int rc = load_model(c, model)) return rc;
    if (int rc = ensure_out_dir(c)) return rc;
    char* raw = nullptr;
    if (int rc = hl_orbit_csv(model.get(), a.which[0], a.y0, a.theta0,
                              a.burn_in, a.n, &raw))
        return report_api_error(rc);
    ApiString csv(raw);
    if (int rc = write_file(fs::path(c.out_dir) / "orbit.csv", csv.get()))
        return rc;
    std::string hash;
    if (int rc = model_hash_hex(model, hash)) return rc;
    return write_manifest(c, "run orbit", hash,
                          {{"which", a.which},
                           {"y0", a.y0},
                           {"theta0", a.theta0},
                           {"burn_in", a.burn_in},
                           {"n", a.n}},
                          {"orbit.csv"});
}

struct SingularArgs {
    std::string which = "F";
    double a = 0.0;
};

int cmd_singular(const Common& c, const SingularArgs& a) {
    ModelHandle model;
    if (int rc = load_model(c, model)) return rc;
    if (int rc = ensure_out_dir(c)) return rc;
    char* raw = nullptr;
    if (int rc = hl_singular_json(model.get(), a.which[0], a.a, &raw))
        return report_api_error(rc);
    ApiString js(raw);
    if (int rc = write_file(fs::path(c.out_dir) / "singular.json",
                            std::string(js.get()) + "\n"))
        return rc;
    std::string hash;
    if (int rc = model_hash_hex(model, hash)) return rc;
    return write_manifest(c, "run singular", hash,
                          {{"which", a.which}, {"a", a.a}}, {"singular.json"});
}

struct ScanArgs {
    std::string which = "F";
    int cells = 200, burn_in = 1000, n = 10000;
};

int cmd_scan_a(const Common& c, const ScanArgs& a) {
    ModelHandle model;
    if (int rc = load_model(c, model)) return rc;
    if (int rc = ensure_out_dir(c)) return rc;
    char* raw = nullptr;
    if (int rc = hl_scan_a_csv(model.get(), a.which[0], a.cells, a.burn_in,
                               a.n, &raw))
        return report_api_error(rc);
    ApiString csv(raw);
    if (int rc = write_file(fs::path(c.out_dir) / "scan_a.csv", csv.get()))
        return rc;
    std::string hash;
    if (int rc = model_hash_hex(model, hash)) return rc;
    return write_manifest(c, "run scan-a", hash,
                          {{"which", a.which},
                           {"cells", a.cells},
                           {"burn_in", a.burn_in},
                           {"n", a.n}},
                          {"scan_a.csv"});
}

struct SinksArgs {
    double a_hat = 0.0, radius = 0.5;
    int period_cap = 8;
};

int cmd_sinks(const Common& c, const SinksArgs& a) {
    ModelHandle model;
    if (int rc = load_model(c, model)) return rc;
    if (int rc = ensure_out_dir(c)) return rc;
    char* raw = nullptr;
    if (int rc = hl_sinks_json(model.get(), a.a_hat, a.radius, a.period_cap,
                               &raw))
        return report_api_error(rc);
    ApiString js(raw);
    if (int rc = write_file(fs::path(c.out_dir) / "sinks.json",
                            std::string(js.get()) + "\n"))
        return rc;
    std::string hash;
    if (int rc = model_hash_hex(model, hash)) return rc;
    return write_manifest(c, "run sinks", hash,
                          {{"a_hat", a.a_hat},
                           {"radius", a.radius},
                           {"period_cap", a.period_cap}},
                          {"sinks.json"});
}

struct MelnikovArgs {
    int grid = 512;
};

int cmd_melnikov(const Common& c, const MelnikovArgs& a) {
    if (c.config.empty()) {
        std::cerr << "UsageError: --config is required\n";
        return HL_ERR_PARSE;
    }
    hl_planar* raw_sys = nullptr;
    if (int rc = hl_planar_load(c.config.c_str(), &raw_sys))
        return report_api_error(rc);
    PlanarHandle sys(raw_sys);
    if (int rc = ensure_out_dir(c)) return rc;

    char* raw = nullptr;
    if (int rc = hl_planar_validate_json(sys.get(), &raw))
        return report_api_error(rc);
    const json validation = json::parse(ApiString(raw).get());

    raw = nullptr;
    if (int rc = hl_melnikov_table_csv(sys.get(), a.grid, &raw))
        return report_api_error(rc);
    ApiString csv(raw);
    if (int rc = write_file(fs::path(c.out_dir) / "melnikov.csv", csv.get()))
        return rc;

    raw = nullptr;
    if (int rc = hl_melnikov_classify_json(sys.get(), a.grid, &raw))
        return report_api_error(rc);
    json combined{{"validation", validation},
                  {"classification", json::parse(ApiString(raw).get())}};
    if (int rc = write_file(fs::path(c.out_dir) / "melnikov.json",
                            combined.dump(2) + "\n"))
        return rc;
    return write_manifest(c, "run melnikov", file_hash_hex(c.config),
                          {{"grid", a.grid}}, {"melnikov.csv", "melnikov.json"});
}

struct TangleArgs {
    double M = 0.5;
    int samples = 512;
    double mu2_hi = 0.0, mu2_lo = 0.0;
    int count = 0;
};

int cmd_tangle(const Common& c, const TangleArgs& a) {
    ModelHandle model;
    if (int rc = load_model(c, model)) return rc;
    if (int rc = ensure_out_dir(c)) return rc;
    char* raw = nullptr;
    if (int rc = hl_tangle_spiral_csv(model.get(), a.M, a.samples, &raw))
        return report_api_error(rc);
    ApiString csv(raw);
    if (int rc = write_file(fs::path(c.out_dir) / "tangle_spiral.csv",
                            csv.get()))
        return rc;
    std::vector<std::string> outputs{"tangle_spiral.csv"};
    if (a.count > 0) {
        raw = nullptr;
        if (int rc = hl_tangle_tangencies_json(model.get(), a.M, a.mu2_hi,
                                               a.mu2_lo, a.count, &raw))
            return report_api_error(rc);
        ApiString js(raw);
        if (int rc = write_file(fs::path(c.out_dir) / "tangle_tangencies.json",
                                std::string(js.get()) + "\n"))
            return rc;
        outputs.push_back("tangle_tangencies.json");
    }
    std::string hash;
    if (int rc = model_hash_hex(model, hash)) return rc;
    return write_manifest(c, "run tangle", hash,
                          {{"M", a.M},
                           {"samples", a.samples},
                           {"mu2_hi", a.mu2_hi},
                           {"mu2_lo", a.mu2_lo},
                           {"count", a.count}},
                          outputs);
}

struct HomArgs {
    double mu1_lo = 1e-4, mu1_hi = 1e-2;
    int points = 6;
};

int cmd_hom(const Common& c, const HomArgs& a) {
    ModelHandle model;
    if (int rc = load_model(c, model)) return rc;
    if (int rc = ensure_out_dir(c)) return rc;
    char* raw = nullptr;
    if (int rc = hl_hom_json(model.get(), a.mu1_lo, a.mu1_hi, a.points, &raw))
        return report_api_error(rc);
    ApiString js(raw);
    if (int rc = write_file(fs::path(c.out_dir) / "hom.json",
                            std::string(js.get()) + "\n"))
        return rc;
    std::string hash;
    if (int rc = model_hash_hex(model, hash)) return rc;
    return write_manifest(c, "run hom", hash,
                          {{"mu1_lo", a.mu1_lo},
                           {"mu1_hi", a.mu1_hi},
                           {"points", a.points}},
                          {"hom.json"});
}

struct SweepArgs {
    std::string grid = "10x10";
    double mu1_max = 0.01, mu2_max = 0.01;
    int seeds = 8, burn_in = 2000, n = 20000;
};

int cmd_sweep(const Common& c, const SweepArgs& a) {
    int n1 = 0, n2 = 0;
    char sep = 0;
    std::istringstream gs(a.grid);
    if (!(gs >> n1 >> sep >> n2) || sep != 'x' || n1 < 1 || n2 < 1) {
        std::cerr << "UsageError: --grid must look like 10x10\n";
        return HL_ERR_PARSE;
    }
    ModelHandle model;
    if (int rc = load_model(c, model)) return rc;
    if (int rc = ensure_out_dir(c)) return rc;
    char *csv_raw = nullptr, *dat_raw = nullptr, *svg_raw = nullptr;
    if (int rc = hl_sweep(model.get(), n1, n2, a.mu1_max, a.mu2_max, a.seeds,
                          a.burn_in, a.n, c.seed, c.threads, &csv_raw,
                          &dat_raw, &svg_raw))
        return report_api_error(rc);
    ApiString csv(csv_raw), dat(dat_raw), svg(svg_raw);
    if (int rc = write_file(fs::path(c.out_dir) / "sweep.csv", csv.get()))
        return rc;
    if (int rc = write_file(fs::path(c.out_dir) / "sweep.dat", dat.get()))
        return rc;
    if (int rc = write_file(fs::path(c.out_dir) / "sweep.svg", svg.get()))
        return rc;
    std::string hash;
    if (int rc = model_hash_hex(model, hash)) return rc;
    return write_manifest(c, "run sweep", hash,
                          {{"grid", a.grid},
                           {"mu1_max", a.mu1_max},
                           {"mu2_max", a.mu2_max},
                           {"seeds", a.seeds},
                           {"burn_in", a.burn_in},
                           {"n", a.n}},
                          {"sweep.csv", "sweep.dat", "sweep.svg"});
}

int cmd_report(const std::string& manifest_path) {
    std::ifstream in(manifest_path, std::ios::binary);
    if (!in) {
        std::cerr << "IoError: cannot read " << manifest_path << "\n";
        return HL_ERR_PARSE;
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    json m;
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
        m = json::object();
    } else {
        try {
            m = json::parse(text);
        } catch (const json::parse_error& e) {
            std::cerr << "ParseError: " << e.what() << "\n";
            return HL_ERR_PARSE;
        }
    }
    if (m.empty()) {
        std::cout << "empty manifest: nothing recorded\n";
        return HL_OK;
    }

    std::cout << "command:  " << m.value("command", std::string("?")) << "\n";
    std::cout << "version:  " << m.value("version", std::string("?")) << "\n";
    std::cout << "seed:     " << m.value("seed", 0ull) << "\n";
    const std::string config = m.value("config", std::string());
    if (!config.empty())
        std::cout << "config:   " << config << "  (hash "
                  << m.value("config_hash", std::string("?")) << ")\n";

    // Headline constants, when the config still loads as a cycle model.
    if (!config.empty()) {
        hl_model* raw_model = nullptr;
        if (hl_model_load(config.c_str(), &raw_model) == HL_OK) {
            ModelHandle model(raw_model);
            char* raw = nullptr;
            if (hl_model_constants_json(model.get(), &raw) == HL_OK) {
                const json k = json::parse(ApiString(raw).get());
                std::cout << "K_F = " << k.value("K_F", 0.0)
                          << ", K_G = " << k.value("K_G", 0.0)
                          << ", delta = " << k.value("delta", 0.0) << "\n";
                if (k.contains("invariant_curve_margin"))
                    std::cout << "invariant-curve margin = "
                              << k["invariant_curve_margin"].get<double>()
                              << "\n";
            }
        }
    }

    const fs::path base = fs::path(manifest_path).parent_path();
    std::vector<std::string> missing;
    for (const auto& entry : m.value("outputs", json::array())) {
        const std::string name = entry.get<std::string>();
        const fs::path path = base / name;
        if (!fs::exists(path)) {
            missing.push_back(name);
            continue;
        }
        std::cout << "output:   " << name << "  (" << fs::file_size(path)
                  << " bytes)\n";
        // Per-region cell counts for sweep tables.
        if (name.size() > 4 && name.substr(name.size() - 4) == ".csv") {
            std::ifstream csv(path);
            std::string header;
            std::getline(csv, header);
            if (header.rfind("mu1,mu2,omega,a,label", 0) == 0) {
                std::map<std::string, int> counts;
                int total = 0;
                std::string line;
                while (std::getline(csv, line)) {
                    if (line.empty()) continue;
                    int commas = 0;
                    std::size_t start = 0;
                    for (std::size_t i = 0; i < line.size(); ++i) {
                        if (line[i] != ',') continue;
                        ++commas;
                        if (commas == 4) start = i + 1;
                        if (commas == 5) {
                            ++counts[line.substr(start, i - start)];
                            ++total;
                            break;
                        }
                    }
                }
                std::cout << "cells:    " << total << "\n";
                for (const auto& [label, count] : counts)
                    std::cout << "          " << label << ": " << count << "\n";
            }
        }
    }
    for (const std::string& name : missing)
        std::cout << "missing:  " << name << "\n";
    return HL_OK;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"heteroclinic-cycle return-map laboratory"};
    app.require_subcommand(1);
    app.fallthrough();

    Common common;
    app.add_option("--config", common.config, "model or system config file");
    app.add_option("--seed", common.seed, "deterministic run seed");
    app.add_option("--threads", common.threads, "worker thread count");
    app.add_option("--out", common.out_dir, "output directory");

    auto* validate = app.add_subcommand("validate", "check model hypotheses");

    auto* run = app.add_subcommand("run", "run an operation and emit files");
    run->require_subcommand(1);
    run->fallthrough();

    OrbitArgs orbit_args;
    auto* orbit = run->add_subcommand("orbit", "iterate a return map");
    orbit->add_option("--which", orbit_args.which, "F or G")
        ->check(CLI::IsMember({"F", "G"}));
    orbit->add_option("--y0", orbit_args.y0, "initial y");
    orbit->add_option("--theta0", orbit_args.theta0, "initial theta");
    orbit->add_option("--burn-in", orbit_args.burn_in, "discarded iterates");
    orbit->add_option("--n", orbit_args.n, "recorded iterates");

    SingularArgs singular_args;
    auto* singular = run->add_subcommand("singular", "singular-limit analysis");
    singular->add_option("--which", singular_args.which, "F or G")
        ->check(CLI::IsMember({"F", "G"}));
    singular->add_option("--a", singular_args.a, "phase parameter");

    ScanArgs scan_args;
    auto* scan = run->add_subcommand("scan-a", "Lyapunov scan over a");
    scan->add_option("--which", scan_args.which, "F or G")
        ->check(CLI::IsMember({"F", "G"}));
    scan->add_option("--cells", scan_args.cells, "a-grid size");
    scan->add_option("--burn-in", scan_args.burn_in, "discarded iterates");
    scan->add_option("--n", scan_args.n, "iterates per cell");

    SinksArgs sinks_args;
    auto* sinks = run->add_subcommand("sinks", "superstable sink search");
    sinks->add_option("--a-hat", sinks_args.a_hat, "search center")->required();
    sinks->add_option("--radius", sinks_args.radius, "search radius");
    sinks->add_option("--period-cap", sinks_args.period_cap, "max period");

    MelnikovArgs melnikov_args;
    auto* melnikov = run->add_subcommand("melnikov", "splitting functions");
    melnikov->add_option("--grid", melnikov_args.grid, "theta grid size");

    TangleArgs tangle_args;
    auto* tangle = run->add_subcommand("tangle", "image spiral and tangencies");
    tangle->add_option("--M", tangle_args.M, "segment height");
    tangle->add_option("--samples", tangle_args.samples, "spiral samples");
    tangle->add_option("--mu2-hi", tangle_args.mu2_hi, "tangency scan start");
    tangle->add_option("--mu2-lo", tangle_args.mu2_lo, "tangency scan end");
    tangle->add_option("--count", tangle_args.count, "tangencies to collect");

    HomArgs hom_args;
    auto* hom = run->add_subcommand("hom", "homoclinicity curve fit");
    hom->add_option("--mu1-lo", hom_args.mu1_lo, "smallest mu1");
    hom->add_option("--mu1-hi", hom_args.mu1_hi, "largest mu1");
    hom->add_option("--points", hom_args.points, "grid points");

    SweepArgs sweep_args;
    auto* sweep = run->add_subcommand("sweep", "bifurcation diagram");
    sweep->add_option("--grid", sweep_args.grid, "cells, e.g. 10x10");
    sweep->add_option("--mu1-max", sweep_args.mu1_max, "mu1 range top");
    sweep->add_option("--mu2-max", sweep_args.mu2_max, "mu2 range top");
    sweep->add_option("--seeds", sweep_args.seeds, "seeds per cell");
    sweep->add_option("--burn-in", sweep_args.burn_in, "discarded iterates");
    sweep->add_option("--n", sweep_args.n, "iterates per seed");

    std::string manifest_path;
    auto* report = app.add_subcommand("report", "summarize a run manifest");
    report->add_option("manifest", manifest_path, "manifest JSON path")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return HL_ERR_PARSE;
    }

    if (validate->parsed()) return cmd_validate(common);
    if (report->parsed()) return cmd_report(manifest_path);
    if (orbit->parsed()) return cmd_orbit(common, orbit_args);
    if (singular->parsed()) return cmd_singular(common, singular_args);
    if (scan->parsed()) return cmd_scan_a(common, scan_args);
    if (sinks->parsed()) return cmd_sinks(common, sinks_args);
    if (melnikov->parsed()) return cmd_melnikov(common, melnikov_args);
    if (tangle->parsed()) return cmd_tangle(common, tangle_args);
    if (hom->parsed()) return cmd_hom(common, hom_args);
    if (sweep->parsed()) return cmd_sweep(common, sweep_args);
    std::cerr << "UsageError: no subcommand\n";
    return HL_ERR_PARSE;
}
