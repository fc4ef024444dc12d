#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace qbsdej::cli {

// Parsed form of a config file.  The format is line oriented:
//
//   # comment
//   [section]
//   key value...
//
// Values keep everything after the key token, so lists are written as
// whitespace separated numbers ("marks 0.5 -1.0") and expressions may
// contain spaces ("expr z*z / 2").  Duplicate keys within a section are
// rejected; section order and raw bytes are preserved so reports can hash
// the exact input.
class Config {
public:
    static Config parse(const std::string& text);
    static Config load(const std::string& path);

    const std::string& raw() const { return raw_; }

    bool has_section(const std::string& section) const;
    bool has(const std::string& section, const std::string& key) const;

    // Required accessors throw std::invalid_argument naming the missing or
    // malformed entry.
    std::string get_string(const std::string& section, const std::string& key) const;
    double get_double(const std::string& section, const std::string& key) const;
    long long get_int(const std::string& section, const std::string& key) const;
    std::uint64_t get_u64(const std::string& section, const std::string& key) const;
    bool get_bool(const std::string& section, const std::string& key) const;
    std::vector<double> get_doubles(const std::string& section, const std::string& key) const;

    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    long long get_int(const std::string& section, const std::string& key, long long fallback) const;
    std::uint64_t get_u64(const std::string& section, const std::string& key,
                          std::uint64_t fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
    std::vector<double> get_doubles(const std::string& section, const std::string& key,
                                    const std::vector<double>& fallback) const;

private:
    const std::string* find(const std::string& section, const std::string& key) const;

    std::string raw_;
    std::map<std::string, std::map<std::string, std::string>> sections_;
};

}  // namespace qbsdej::cli
