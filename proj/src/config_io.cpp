#include "hetlab/config_io.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "hetlab/numutil.hpp"
#include "json.hpp"

namespace hetlab {

namespace {

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

double parse_double(const std::string& key, const std::string& raw) {
    try {
        size_t pos = 0;
        const double v = std::stod(raw, &pos);
        while (pos < raw.size() && std::isspace(static_cast<unsigned char>(raw[pos]))) ++pos;
        if (pos != raw.size()) throw ConfigError("");
        return v;
    } catch (...) {
        throw ConfigError("config: key '" + key + "' is not a number: '" + raw + "'");
    }
}

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

KeyValueFile KeyValueFile::parse_text(const std::string& text) {
    KeyValueFile kv;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty() || val.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key or value");
        if (kv.entries_.count(key))
            throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        kv.entries_[key] = val;
    }
    return kv;
}

KeyValueFile KeyValueFile::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_text(ss.str());
}

bool KeyValueFile::has(const std::string& key) const { return entries_.count(key) != 0; }

double KeyValueFile::get_double(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError("config: missing key '" + key + "'");
    used_[key] = true;
    return parse_double(key, it->second);
}

double KeyValueFile::get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}

std::vector<double> KeyValueFile::get_list(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError("config: missing key '" + key + "'");
    used_[key] = true;
    const std::string& raw = it->second;
    if (raw.size() < 2 || raw.front() != '[' || raw.back() != ']')
        throw ConfigError("config: key '" + key + "' is not a [list]");
    std::vector<double> out;
    std::string body = raw.substr(1, raw.size() - 2);
    std::istringstream in(body);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (item.empty()) {
            if (out.empty() && trim(body).empty()) break;  // empty list
            throw ConfigError("config: key '" + key + "' has an empty list element");
        }
        out.push_back(parse_double(key, item));
    }
    return out;
}

std::vector<double> KeyValueFile::get_list(const std::string& key, std::vector<double> fallback) const {
    return has(key) ? get_list(key) : std::move(fallback);
}

std::string KeyValueFile::get_string(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError("config: missing key '" + key + "'");
    used_[key] = true;
    return it->second;
}

std::vector<std::string> KeyValueFile::unused_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_) {
        (void)v;
        if (!used_.count(k)) out.push_back(k);
    }
    return out;
}

namespace {

ForcingProfile profile_from_kv(const KeyValueFile& kv, const std::string& prefix) {
    const double c = kv.get_double(prefix + ".constant", 0.0);
    auto ca = kv.get_list(prefix + ".cosine_coeffs", {});
    auto cb = kv.get_list(prefix + ".sine_coeffs", {});
    return ForcingProfile(c, std::move(ca), std::move(cb));
}

void profile_to_kv(std::ostringstream& out, const std::string& prefix, const ForcingProfile& p) {
    out << prefix << ".constant = " << num(p.constant_term()) << "\n";
    auto list = [&out](const std::string& key, const std::vector<double>& v) {
        out << key << " = [";
        for (size_t i = 0; i < v.size(); ++i) {
            if (i) out << ", ";
            out << num(v[i]);
        }
        out << "]\n";
    };
    list(prefix + ".cosine_coeffs", p.cosine_coeffs());
    list(prefix + ".sine_coeffs", p.sine_coeffs());
}

nlohmann::json profile_to_jsonv(const ForcingProfile& p) {
    return {{"constant", p.constant_term()},
            {"cosine_coeffs", p.cosine_coeffs()},
            {"sine_coeffs", p.sine_coeffs()}};
}

ForcingProfile profile_from_jsonv(const nlohmann::json& j) {
    if (j.is_null()) return ForcingProfile::zero();
    return ForcingProfile(j.value("constant", 0.0),
                          j.value("cosine_coeffs", std::vector<double>{}),
                          j.value("sine_coeffs", std::vector<double>{}));
}

} // namespace

ModelConfig model_from_keyvalues(const KeyValueFile& kv) {
    ModelConfig cfg;
    cfg.saddle1.c = kv.get_double("saddle1.c");
    cfg.saddle1.e = kv.get_double("saddle1.e");
    cfg.saddle2.c = kv.get_double("saddle2.c");
    cfg.saddle2.e = kv.get_double("saddle2.e");
    cfg.mu1 = kv.get_double("mu1", 0.0);
    cfg.mu2 = kv.get_double("mu2", 0.0);
    cfg.omega = kv.get_double("omega", 1.0);
    cfg.xi1 = kv.get_double("xi1", 0.0);
    cfg.xi2 = kv.get_double("xi2", 0.0);
    cfg.b1 = kv.get_double("b1", 1.0);
    cfg.b2 = kv.get_double("b2", 1.0);
    cfg.eps0 = kv.get_double("eps0", 1.0);
    cfg.phi1 = profile_from_kv(kv, "phi1");
    cfg.psi1 = profile_from_kv(kv, "psi1");
    cfg.phi2 = profile_from_kv(kv, "phi2");
    cfg.psi2 = profile_from_kv(kv, "psi2");
    cfg.w.w1_1 = profile_from_kv(kv, "w_corrections.w1_1");
    cfg.w.w2_1 = profile_from_kv(kv, "w_corrections.w2_1");
    cfg.w.w1_2 = profile_from_kv(kv, "w_corrections.w1_2");
    cfg.w.w2_2 = profile_from_kv(kv, "w_corrections.w2_2");
    cfg.sections.in1 = kv.get_double("sections.in1", 10.0);
    cfg.sections.in2 = kv.get_double("sections.in2", 10.0);
    cfg.sections.out1 = kv.get_double("sections.out1", 10.0);
    cfg.sections.out2 = kv.get_double("sections.out2", 10.0);
    const auto leftover = kv.unused_keys();
    if (!leftover.empty()) {
        std::string msg = "config: unknown key(s):";
        for (const auto& k : leftover) msg += " '" + k + "'";
        throw ConfigError(msg);
    }
    return cfg;
}

ModelConfig load_model_config(const std::string& path) {
    return model_from_keyvalues(KeyValueFile::parse_file(path));
}

std::string model_to_keyvalues(const ModelConfig& cfg) {
    std::ostringstream out;
    out << "saddle1.c = " << num(cfg.saddle1.c) << "\n";
    out << "saddle1.e = " << num(cfg.saddle1.e) << "\n";
    out << "saddle2.c = " << num(cfg.saddle2.c) << "\n";
    out << "saddle2.e = " << num(cfg.saddle2.e) << "\n";
    out << "mu1 = " << num(cfg.mu1) << "\n";
    out << "mu2 = " << num(cfg.mu2) << "\n";
    out << "omega = " << num(cfg.omega) << "\n";
    out << "xi1 = " << num(cfg.xi1) << "\n";
    out << "xi2 = " << num(cfg.xi2) << "\n";
    out << "b1 = " << num(cfg.b1) << "\n";
    out << "b2 = " << num(cfg.b2) << "\n";
    out << "eps0 = " << num(cfg.eps0) << "\n";
    profile_to_kv(out, "phi1", cfg.phi1);
    profile_to_kv(out, "psi1", cfg.psi1);
    profile_to_kv(out, "phi2", cfg.phi2);
    profile_to_kv(out, "psi2", cfg.psi2);
    profile_to_kv(out, "w_corrections.w1_1", cfg.w.w1_1);
    profile_to_kv(out, "w_corrections.w2_1", cfg.w.w2_1);
    profile_to_kv(out, "w_corrections.w1_2", cfg.w.w1_2);
    profile_to_kv(out, "w_corrections.w2_2", cfg.w.w2_2);
    out << "sections.in1 = " << num(cfg.sections.in1) << "\n";
    out << "sections.in2 = " << num(cfg.sections.in2) << "\n";
    out << "sections.out1 = " << num(cfg.sections.out1) << "\n";
    out << "sections.out2 = " << num(cfg.sections.out2) << "\n";
    return out.str();
}

std::string model_to_json(const ModelConfig& cfg) {
    nlohmann::json j;
    j["saddle1"] = {{"c", cfg.saddle1.c}, {"e", cfg.saddle1.e}};
    j["saddle2"] = {{"c", cfg.saddle2.c}, {"e", cfg.saddle2.e}};
    j["mu1"] = cfg.mu1;
    j["mu2"] = cfg.mu2;
    j["omega"] = cfg.omega;
    j["xi1"] = cfg.xi1;
    j["xi2"] = cfg.xi2;
    j["b1"] = cfg.b1;
    j["b2"] = cfg.b2;
    j["eps0"] = cfg.eps0;
    j["phi1"] = profile_to_jsonv(cfg.phi1);
    j["psi1"] = profile_to_jsonv(cfg.psi1);
    j["phi2"] = profile_to_jsonv(cfg.phi2);
    j["psi2"] = profile_to_jsonv(cfg.psi2);
    j["w_corrections"] = {{"w1_1", profile_to_jsonv(cfg.w.w1_1)},
                          {"w2_1", profile_to_jsonv(cfg.w.w2_1)},
                          {"w1_2", profile_to_jsonv(cfg.w.w1_2)},
                          {"w2_2", profile_to_jsonv(cfg.w.w2_2)}};
    j["sections"] = {{"in1", cfg.sections.in1},
                     {"in2", cfg.sections.in2},
                     {"out1", cfg.sections.out1},
                     {"out2", cfg.sections.out2}};
    return j.dump(2);
}

ModelConfig model_from_json(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: bad JSON: ") + e.what());
    }
    ModelConfig cfg;
    try {
        cfg.saddle1.c = j.at("saddle1").at("c").get<double>();
        cfg.saddle1.e = j.at("saddle1").at("e").get<double>();
        cfg.saddle2.c = j.at("saddle2").at("c").get<double>();
        cfg.saddle2.e = j.at("saddle2").at("e").get<double>();
        cfg.mu1 = j.value("mu1", 0.0);
        cfg.mu2 = j.value("mu2", 0.0);
        cfg.omega = j.value("omega", 1.0);
        cfg.xi1 = j.value("xi1", 0.0);
        cfg.xi2 = j.value("xi2", 0.0);
        cfg.b1 = j.value("b1", 1.0);
        cfg.b2 = j.value("b2", 1.0);
        cfg.eps0 = j.value("eps0", 1.0);
        cfg.phi1 = profile_from_jsonv(j.value("phi1", nlohmann::json()));
        cfg.psi1 = profile_from_jsonv(j.value("psi1", nlohmann::json()));
        cfg.phi2 = profile_from_jsonv(j.value("phi2", nlohmann::json()));
        cfg.psi2 = profile_from_jsonv(j.value("psi2", nlohmann::json()));
        if (j.contains("w_corrections")) {
            const auto& w = j["w_corrections"];
            cfg.w.w1_1 = profile_from_jsonv(w.value("w1_1", nlohmann::json()));
            cfg.w.w2_1 = profile_from_jsonv(w.value("w2_1", nlohmann::json()));
            cfg.w.w1_2 = profile_from_jsonv(w.value("w1_2", nlohmann::json()));
            cfg.w.w2_2 = profile_from_jsonv(w.value("w2_2", nlohmann::json()));
        }
        if (j.contains("sections")) {
            const auto& s = j["sections"];
            cfg.sections.in1 = s.value("in1", 10.0);
            cfg.sections.in2 = s.value("in2", 10.0);
            cfg.sections.out1 = s.value("out1", 10.0);
            cfg.sections.out2 = s.value("out2", 10.0);
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: bad JSON structure: ") + e.what());
    }
    return cfg;
}

std::string validation_report_to_json(const ValidationReport& rep) {
    nlohmann::json j;
    j["ok"] = rep.ok;
    j["checks"] = nlohmann::json::array();
    for (const auto& c : rep.checks) {
        j["checks"].push_back({{"id", c.id}, {"pass", c.pass}, {"witness", c.witness}});
    }
    return j.dump(2);
}

std::string model_hash(const ModelConfig& cfg) {
    const std::string canon = model_to_json(cfg);
    const std::uint64_t h = fnv1a64(canon.data(), canon.size());
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace hetlab
