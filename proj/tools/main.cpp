#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
    using namespace lgl::cli;

    CLI::App app{"lgl: surrogate-gradient estimators for argmax latent structure"};
    app.require_subcommand(1);

    CheckOptions check_options;
    std::string suite;
    std::string fault;
    auto* check = app.add_subcommand("check", "Run the oracle suites");
    check->add_option("--suite", suite, "Run only this suite")->check(CLI::IsMember(suite_names()));
    check->add_option("--inject-fault", fault, "Negative control: corrupt a routine (simplex|polytope)")
        ->group("");

    std::string config_path;
    std::string out_dir;
    auto* train = app.add_subcommand("train", "Train every (estimator, seed) pair of a config");
    train->add_option("--config", config_path, "Run config (JSON)")->required();
    train->add_option("--out", out_dir, "Output directory")->required();

    auto* sweep = app.add_subcommand("sweep", "Grid sweep over estimator axes x seeds");
    sweep->add_option("--config", config_path, "Sweep config (JSON)")->required();
    sweep->add_option("--out", out_dir, "Output directory")->required();

    std::string csv_path;
    std::string metric;
    std::string out_path;
    auto* plot = app.add_subcommand("plot", "Render a metric-vs-epoch SVG from a run CSV");
    plot->add_option("--csv", csv_path, "Run CSV")->required();
    plot->add_option("--metric", metric, "Metric column, e.g. eval_loss")->required();
    plot->add_option("--out", out_path, "Output SVG path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    if (*check) {
        if (!suite.empty()) {
            check_options.suite = suite;
        }
        if (!fault.empty()) {
            check_options.inject_fault = fault;
        }
        return cmd_check(check_options, std::cout, std::cerr);
    }
    if (*train) {
        return cmd_train(config_path, out_dir, threads_from_env(), std::cout, std::cerr);
    }
    if (*sweep) {
        return cmd_sweep(config_path, out_dir, threads_from_env(), std::cout, std::cerr);
    }
    return cmd_plot(csv_path, metric, out_path, std::cout, std::cerr);
}
