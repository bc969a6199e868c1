#pragma once

// Run-record serialization: the per-epoch CSV, sweep summaries, and static
// SVG line charts. All output is a pure function of the records, so equal
// inputs produce byte-identical files.

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lgl/errors.hpp"
#include "lgl/harness.hpp"

namespace lgl {

inline constexpr std::string_view kCsvHeader =
    "run_id,rule,eta,steps,init,temperature,seed,epoch,train_loss,eval_loss,latent_exact,latent_f1,wall_ms";

// Sentinel written into metric columns of a diverged epoch.
inline constexpr std::string_view kDivergedSentinel = "diverged";

// printf("%.9g").
std::string format_float(double value);

void write_run_csv(std::ostream& out, std::span<const RunRecord> records);

// Final-epoch mean and sample standard deviation per estimator cell over seeds.
void write_summary_csv(std::ostream& out, std::span<const RunRecord> records);

class SchemaError : public Error {
public:
    using Error::Error;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Column position; throws SchemaError listing the available columns.
    std::size_t column(std::string_view name) const;
};

// Plain comma-separated parsing (no quoting; the run CSV never needs it).
CsvTable parse_csv(std::istream& in);

// One polyline per estimator cell (rule, eta, steps, init, temperature):
// the metric averaged over seeds at each epoch. Non-numeric entries
// (diverged epochs) are skipped.
std::string render_metric_svg(const CsvTable& table, std::string_view metric);

// Writes to a sibling temporary and renames over the destination.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

} // namespace lgl
