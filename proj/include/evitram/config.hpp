#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace evitram {

// Flat key = value configuration text with dotted section keys, '#'
// comments, and blank lines. Lookups mark keys as consumed so a caller can
// reject misspelled or unknown keys after building its config.
class ConfigMap {
  public:
    ConfigMap() = default;

    static ConfigMap parse_file(const std::string& path);
    static ConfigMap parse_text(const std::string& text, const std::string& origin = "<text>");

    bool has(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& fallback) const;
    std::string require_string(const std::string& key) const;
    long long get_int(const std::string& key, long long fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    std::vector<int> get_int_list(const std::string& key, const std::vector<int>& fallback) const;

    // Keys beginning with `prefix.` (sorted).
    std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

    void set(const std::string& key, const std::string& value);

    // Throws config_error naming every key never consumed by a getter.
    void ensure_all_consumed() const;

    // All key/value pairs, sorted by key (for echoing resolved configs).
    const std::map<std::string, std::string>& entries() const { return values_; }

  private:
    std::map<std::string, std::string> values_;
    mutable std::set<std::string> consumed_;
    std::string origin_ = "<empty>";
};

}  // namespace evitram
