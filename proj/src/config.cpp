#include "evitram/config.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "evitram/types.hpp"

namespace evitram {

namespace {

std::string trim(const std::string& s) {
    size_t begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    size_t end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

}  // namespace

ConfigMap ConfigMap::parse_text(const std::string& text, const std::string& origin) {
    ConfigMap cfg;
    cfg.origin_ = origin;
    std::stringstream ss(text);
    std::string line;
    int line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw config_error(origin + ":" + std::to_string(line_no) +
                               ": expected 'key = value', got '" + stripped + "'");
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty())
            throw config_error(origin + ":" + std::to_string(line_no) + ": empty key");
        if (cfg.values_.count(key))
            throw config_error(origin + ":" + std::to_string(line_no) + ": duplicate key '" +
                               key + "'");
        cfg.values_[key] = value;
    }
    return cfg;
}

ConfigMap ConfigMap::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_text(buffer.str(), path);
}

bool ConfigMap::has(const std::string& key) const { return values_.count(key) > 0; }

std::string ConfigMap::get_string(const std::string& key, const std::string& fallback) const {
    consumed_.insert(key);
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

std::string ConfigMap::require_string(const std::string& key) const {
    consumed_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end())
        throw config_error(origin_ + ": missing required key '" + key + "'");
    return it->second;
}

long long ConfigMap::get_int(const std::string& key, long long fallback) const {
    consumed_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    errno = 0;
    char* end = nullptr;
    const long long v = std::strtoll(it->second.c_str(), &end, 10);
    if (end == it->second.c_str() || *end != '\0' || errno == ERANGE)
        throw config_error(origin_ + ": key '" + key + "' is not an integer: '" + it->second +
                           "'");
    return v;
}

std::uint64_t ConfigMap::get_u64(const std::string& key, std::uint64_t fallback) const {
    consumed_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    errno = 0;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(it->second.c_str(), &end, 10);
    if (end == it->second.c_str() || *end != '\0' || errno == ERANGE)
        throw config_error(origin_ + ": key '" + key + "' is not an unsigned integer: '" +
                           it->second + "'");
    return v;
}

double ConfigMap::get_double(const std::string& key, double fallback) const {
    consumed_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(it->second.c_str(), &end);
    if (end == it->second.c_str() || *end != '\0' || errno == ERANGE)
        throw config_error(origin_ + ": key '" + key + "' is not a number: '" + it->second +
                           "'");
    return v;
}

bool ConfigMap::get_bool(const std::string& key, bool fallback) const {
    consumed_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
    if (it->second == "false" || it->second == "0" || it->second == "no") return false;
    throw config_error(origin_ + ": key '" + key + "' is not a boolean: '" + it->second + "'");
}

std::vector<int> ConfigMap::get_int_list(const std::string& key,
                                         const std::vector<int>& fallback) const {
    consumed_.insert(key);
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<int> out;
    std::stringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        errno = 0;
        char* end = nullptr;
        const long v = std::strtol(item.c_str(), &end, 10);
        if (end == item.c_str() || *end != '\0' || errno == ERANGE)
            throw config_error(origin_ + ": key '" + key + "' has non-integer item '" + item +
                               "'");
        out.push_back(static_cast<int>(v));
    }
    if (out.empty())
        throw config_error(origin_ + ": key '" + key + "' is an empty list");
    return out;
}

std::vector<std::string> ConfigMap::keys_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    const std::string full = prefix + ".";
    for (const auto& [key, value] : values_)
        if (key.rfind(full, 0) == 0) out.push_back(key);
    return out;
}

void ConfigMap::set(const std::string& key, const std::string& value) { values_[key] = value; }

void ConfigMap::ensure_all_consumed() const {
    std::string unknown;
    for (const auto& [key, value] : values_)
        if (!consumed_.count(key)) unknown += (unknown.empty() ? "" : ", ") + key;
    if (!unknown.empty())
        throw config_error(origin_ + ": unknown key(s): " + unknown);
}

}  // namespace evitram
