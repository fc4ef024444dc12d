#include "config.hpp"

#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace qbsdej::cli {
namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

[[noreturn]] void fail(const std::string& what) {
    throw std::invalid_argument("config: " + what);
}

double parse_double(const std::string& section, const std::string& key, const std::string& tok) {
    errno = 0;
    char* end = nullptr;
    double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0' || errno == ERANGE)
        fail("entry '" + key + "' in [" + section + "] is not a number: '" + tok + "'");
    return v;
}

}  // namespace

Config Config::parse(const std::string& text) {
    Config cfg;
    cfg.raw_ = text;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                fail("line " + std::to_string(lineno) + ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                fail("line " + std::to_string(lineno) + ": empty section name");
            cfg.sections_[section];  // a section may be present but empty
            continue;
        }
        if (section.empty())
            fail("line " + std::to_string(lineno) + ": entry before any [section] header");
        std::size_t split = 0;
        while (split < line.size() && !std::isspace(static_cast<unsigned char>(line[split])))
            ++split;
        std::string key = line.substr(0, split);
        std::string value = trim(split < line.size() ? line.substr(split) : std::string());
        if (value.empty())
            fail("line " + std::to_string(lineno) + ": entry '" + key + "' has no value");
        auto& sec = cfg.sections_[section];
        if (sec.count(key))
            fail("duplicate entry '" + key + "' in [" + section + "]");
        sec.emplace(key, value);
    }
    return cfg;
}

Config Config::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

bool Config::has_section(const std::string& section) const {
    return sections_.count(section) != 0;
}

bool Config::has(const std::string& section, const std::string& key) const {
    return find(section, key) != nullptr;
}

const std::string* Config::find(const std::string& section, const std::string& key) const {
    auto sit = sections_.find(section);
    if (sit == sections_.end()) return nullptr;
    auto kit = sit->second.find(key);
    if (kit == sit->second.end()) return nullptr;
    return &kit->second;
}

std::string Config::get_string(const std::string& section, const std::string& key) const {
    const std::string* v = find(section, key);
    if (!v) fail("missing entry '" + key + "' in [" + section + "]");
    return *v;
}

double Config::get_double(const std::string& section, const std::string& key) const {
    return parse_double(section, key, get_string(section, key));
}

long long Config::get_int(const std::string& section, const std::string& key) const {
    const std::string tok = get_string(section, key);
    errno = 0;
    char* end = nullptr;
    long long v = std::strtoll(tok.c_str(), &end, 10);
    if (end == tok.c_str() || *end != '\0' || errno == ERANGE)
        fail("entry '" + key + "' in [" + section + "] is not an integer: '" + tok + "'");
    return v;
}

std::uint64_t Config::get_u64(const std::string& section, const std::string& key) const {
    const std::string tok = get_string(section, key);
    errno = 0;
    char* end = nullptr;
    unsigned long long v = std::strtoull(tok.c_str(), &end, 10);
    if (end == tok.c_str() || *end != '\0' || errno == ERANGE || tok.front() == '-')
        fail("entry '" + key + "' in [" + section + "] is not an unsigned integer: '" + tok + "'");
    return static_cast<std::uint64_t>(v);
}

bool Config::get_bool(const std::string& section, const std::string& key) const {
    const std::string tok = get_string(section, key);
    if (tok == "true" || tok == "1" || tok == "yes") return true;
    if (tok == "false" || tok == "0" || tok == "no") return false;
    fail("entry '" + key + "' in [" + section + "] is not a boolean: '" + tok + "'");
}

std::vector<double> Config::get_doubles(const std::string& section, const std::string& key) const {
    std::istringstream in(get_string(section, key));
    std::vector<double> out;
    std::string tok;
    while (in >> tok) out.push_back(parse_double(section, key, tok));
    if (out.empty()) fail("entry '" + key + "' in [" + section + "] holds no numbers");
    return out;
}

std::string Config::get_string(const std::string& section, const std::string& key,
                               const std::string& fallback) const {
    const std::string* v = find(section, key);
    return v ? *v : fallback;
}

double Config::get_double(const std::string& section, const std::string& key,
                          double fallback) const {
    return has(section, key) ? get_double(section, key) : fallback;
}

long long Config::get_int(const std::string& section, const std::string& key,
                          long long fallback) const {
    return has(section, key) ? get_int(section, key) : fallback;
}

std::uint64_t Config::get_u64(const std::string& section, const std::string& key,
                              std::uint64_t fallback) const {
    return has(section, key) ? get_u64(section, key) : fallback;
}

bool Config::get_bool(const std::string& section, const std::string& key, bool fallback) const {
    return has(section, key) ? get_bool(section, key) : fallback;
}

std::vector<double> Config::get_doubles(const std::string& section, const std::string& key,
                                        const std::vector<double>& fallback) const {
    return has(section, key) ? get_doubles(section, key) : fallback;
}

}  // namespace qbsdej::cli
