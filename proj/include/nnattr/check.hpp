#pragma once

// Engine-vs-oracle validity sweep over the architecture grid, shared by the
// CLI check subcommand and the acceptance tests.

#include <cstdint>
#include <string>
#include <vector>

namespace nnattr {

struct CheckRow {
    std::string name;
    double worst = 0.0;   // worst observed error across the grid
    double tolerance = 0.0;
    std::int64_t cases = 0;
    bool pass = false;
};

struct CheckReport {
    std::vector<CheckRow> rows;
    bool all_pass = true;
};

/// Runs gradient/DeepLift/LRP validity checks over `n_seeds` grids starting
/// at base_seed, in double precision. threads caps worker threads (>= 1).
/// When emit_dir is non-empty the grid models and datasets are written there.
CheckReport run_validity_check(std::uint64_t base_seed, int n_seeds, int threads,
                               const std::string& emit_dir = "");

std::string format_check_report(const CheckReport& report);

} // namespace nnattr
