#include "reports.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "qbsdej/numerics.hpp"

namespace qbsdej::cli {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string config_hash_hex(const std::string& raw) {
    const std::uint64_t h = fnv1a(raw.data(), raw.size());
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

nlohmann::json report_base(const std::string& task, const std::string& config_hash,
                           std::uint64_t seed) {
    nlohmann::json j;
    j["task"] = task;
    j["version"] = "0.1.0";
    j["config_hash"] = config_hash;
    j["seed"] = seed;
    return j;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open output file: " + path.string());
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string render_csv(const CsvTable& table) {
    std::string s;
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        if (c) s += ',';
        s += table.columns[c];
    }
    s += '\n';
    for (const auto& row : table.rows) {
        if (row.size() != table.columns.size())
            throw std::runtime_error("csv row width mismatch");
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) s += ',';
            s += format_double(row[c]);
        }
        s += '\n';
    }
    return s;
}

}  // namespace

void ReportSet::write_all(const std::string& out_dir) const {
    std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    write_file(dir / json_name, json.dump(2) + "\n");
    for (const auto& [name, table] : csv) write_file(dir / name, render_csv(table));
}

}  // namespace qbsdej::cli
