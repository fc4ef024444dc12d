#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace qbsdej::cli {

struct RunOptions {
    std::string task;
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;  // overrides [model] seed
};

// Executes one task end to end and writes its report files.  Returns the
// process exit code: 0 success, 2 config error, 3 numerical failure,
// 4 property violation.  Reports are computed fully before anything is
// written, so failures leave no partial outputs.
int run_task(const RunOptions& opts);

}  // namespace qbsdej::cli
