#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace qbsdej::cli {

// Reports are deterministic by construction: JSON objects serialize with
// sorted keys (nlohmann::json's default map ordering), doubles use the
// shortest round-trip form, CSV cells use %.17g, and no timestamps or host
// details are recorded.  Rerunning a task on the same config must produce
// byte-identical files.

std::string format_double(double v);

// FNV-1a over the raw config bytes, rendered as 16 hex digits.
std::string config_hash_hex(const std::string& raw);

// Common envelope every report carries.
nlohmann::json report_base(const std::string& task, const std::string& config_hash,
                           std::uint64_t seed);

struct CsvTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

// A fully computed report set; nothing touches the filesystem until
// write_all, so failed tasks leave no partial outputs behind.
struct ReportSet {
    std::string json_name;
    nlohmann::json json;
    std::vector<std::pair<std::string, CsvTable>> csv;

    void write_all(const std::string& out_dir) const;
};

}  // namespace qbsdej::cli
