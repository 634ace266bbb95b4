#pragma once

#include <optional>
#include <string>

#include "rdlab/config.hpp"
#include "rdlab/report.hpp"

namespace rdlab {

struct RunOptions {
    std::string out_dir_override;
    std::optional<std::uint64_t> seed_override;
    int threads = 0;  // 0: env/hardware default
    bool write_files = true;
};

// Validates the whole configuration, runs the enabled analyses, writes the
// JSON report and CSV tables, and returns the collected assertions.
RunReport run_experiment(const Config& cfg, const RunOptions& opt = {});

}  // namespace rdlab
