#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "hetlab/model.hpp"

namespace hetlab {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Minimal key-value file:  `key = value`, `key = [v1, v2, ...]`, `#` comments.
// Values keep their raw text; typed access converts on demand.
class KeyValueFile {
public:
    static KeyValueFile parse_file(const std::string& path);
    static KeyValueFile parse_text(const std::string& text);

    bool has(const std::string& key) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    std::vector<double> get_list(const std::string& key) const;
    std::vector<double> get_list(const std::string& key, std::vector<double> fallback) const;
    std::string get_string(const std::string& key) const;

    const std::map<std::string, std::string>& entries() const { return entries_; }
    // Keys that were never read; used to reject typos.
    std::vector<std::string> unused_keys() const;

private:
    std::map<std::string, std::string> entries_;
    mutable std::map<std::string, bool> used_;
};

// ModelConfig <-> key-value text / JSON.  Key names follow the field names
// of the types (dotted for nesting).
ModelConfig model_from_keyvalues(const KeyValueFile& kv);
ModelConfig load_model_config(const std::string& path);
std::string model_to_keyvalues(const ModelConfig& cfg);
std::string model_to_json(const ModelConfig& cfg);
ModelConfig model_from_json(const std::string& json_text);

std::string validation_report_to_json(const ValidationReport& rep);

// Fingerprint of the canonical JSON serialization.
std::string model_hash(const ModelConfig& cfg);

} // namespace hetlab
