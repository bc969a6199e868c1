#include "commands.hpp"

#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#include "lgl/errors.hpp"
#include "lgl/harness.hpp"
#include "lgl/report.hpp"
#include "run_config.hpp"

namespace lgl::cli {

namespace {

std::vector<RunJob> expand_jobs(const RunConfig& config) {
    std::vector<RunJob> jobs;
    int run_id = 0;
    for (const auto& estimator : config.estimators) {
        for (auto seed : config.seeds) {
            jobs.push_back({run_id++, estimator, seed});
        }
    }
    return jobs;
}

struct Outcome {
    std::vector<RunRecord> records;
    int diverged = 0;
    std::size_t rows = 0;
};

Outcome execute(const RunConfig& config, int threads) {
    const Task task = generate_task(config.task);
    const auto jobs = expand_jobs(config);
    Outcome outcome;
    outcome.records = run_jobs(task, jobs, config.train, threads);
    for (const auto& r : outcome.records) {
        outcome.diverged += r.diverged ? 1 : 0;
        outcome.rows += r.epochs.size();
    }
    return outcome;
}

template <typename Body>
int guarded(std::ostream& err, Body&& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const SchemaError& e) {
        err << "schema error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const CapExceeded& e) {
        err << "config error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        err << "config error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

} // namespace

int threads_from_env() {
    if (const char* value = std::getenv("LGL_THREADS")) {
        char* end = nullptr;
        const long n = std::strtol(value, &end, 10);
        if (end != value && *end == '\0' && n > 0) {
            return static_cast<int>(n);
        }
    }
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

int cmd_check(const CheckOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto results = run_checks(options, out);
        int failed = 0;
        int total = 0;
        for (const auto& r : results) {
            failed += r.failed;
            total += r.passed + r.failed;
        }
        out << "check: " << (total - failed) << "/" << total << " cases passed across " << results.size()
            << " suite(s)\n";
        return failed == 0 ? kExitOk : kExitFailure;
    });
}

int cmd_train(const std::filesystem::path& config_path, const std::filesystem::path& out_dir, int threads,
              std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const RunConfig config = load_run_config(config_path.string(), ConfigMode::Train);
        const Outcome outcome = execute(config, threads);
        std::filesystem::create_directories(out_dir);
        std::ostringstream csv;
        write_run_csv(csv, outcome.records);
        const auto path = out_dir / "runs.csv";
        write_file_atomic(path, csv.str());
        out << "train: " << outcome.records.size() << " runs (" << outcome.diverged << " diverged), "
            << outcome.rows << " rows -> " << path.string() << '\n';
        return kExitOk;
    });
}

int cmd_sweep(const std::filesystem::path& config_path, const std::filesystem::path& out_dir, int threads,
              std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const RunConfig config = load_run_config(config_path.string(), ConfigMode::Sweep);
        const Outcome outcome = execute(config, threads);
        std::filesystem::create_directories(out_dir);
        std::ostringstream csv;
        write_run_csv(csv, outcome.records);
        std::ostringstream summary;
        write_summary_csv(summary, outcome.records);
        const auto csv_path = out_dir / "sweep.csv";
        const auto summary_path = out_dir / "summary.csv";
        write_file_atomic(csv_path, csv.str());
        write_file_atomic(summary_path, summary.str());
        out << "sweep: " << config.estimators.size() << " cells x " << config.seeds.size() << " seeds = "
            << outcome.records.size() << " runs (" << outcome.diverged << " diverged) -> " << csv_path.string()
            << ", " << summary_path.string() << '\n';
        return kExitOk;
    });
}

int cmd_plot(const std::filesystem::path& csv_path, const std::string& metric,
             const std::filesystem::path& out_path, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        std::ifstream in(csv_path);
        if (!in) {
            throw ConfigError("cannot read " + csv_path.string());
        }
        const CsvTable table = parse_csv(in);
        const std::string svg = render_metric_svg(table, metric);
        if (out_path.has_parent_path()) {
            std::filesystem::create_directories(out_path.parent_path());
        }
        write_file_atomic(out_path, svg);
        out << "plot: " << metric << " -> " << out_path.string() << '\n';
        return kExitOk;
    });
}

} // namespace lgl::cli
