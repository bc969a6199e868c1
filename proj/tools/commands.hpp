#pragma once

// Subcommand bodies, separated from argument parsing so they can be driven
// from tests. Exit codes: 0 success, 1 check or runtime failure,
// 2 usage/config error.

#include <filesystem>
#include <iosfwd>
#include <string>

#include "checks.hpp"

namespace lgl::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// LGL_THREADS if set to a positive integer, else hardware concurrency.
int threads_from_env();

int cmd_check(const CheckOptions& options, std::ostream& out, std::ostream& err);

// Writes <out_dir>/runs.csv.
int cmd_train(const std::filesystem::path& config_path, const std::filesystem::path& out_dir, int threads,
              std::ostream& out, std::ostream& err);

// Writes <out_dir>/sweep.csv and <out_dir>/summary.csv.
int cmd_sweep(const std::filesystem::path& config_path, const std::filesystem::path& out_dir, int threads,
              std::ostream& out, std::ostream& err);

int cmd_plot(const std::filesystem::path& csv_path, const std::string& metric,
             const std::filesystem::path& out_path, std::ostream& out, std::ostream& err);

} // namespace lgl::cli
