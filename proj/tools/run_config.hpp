#pragma once

// Run configuration documents (JSON). Parsing is strict: unknown keys,
// wrong types, and empty grid axes are ConfigErrors.
//
//   {
//     "task":       {"kind": "categorical_bottleneck",
//                    "family": {"family": "categorical", "K": 4},
//                    "input_dim": 8, "output_dim": 4, "noise_sigma": 0.0,
//                    "n_train": 200, "n_eval": 100, "seed": 1},
//     "model":      {"hidden": 32, "activation": "tanh", "decoder_uses_x": false},
//     "optimizer":  {"lr": 0.1, "epochs": 200, "batch": 10},
//     "estimators": [{"rule": "spigot", "eta": 1.0, "steps": 1, "init": "map",
//                     "temperature": 1.0, "schedule": "constant"}],
//     "seeds":      [0, 1, 2],
//     "timing":     false
//   }
//
// A sweep document replaces "estimators" by "grid", whose axes ("rule",
// "eta", "steps", "init", "temperature", "schedule") are lists; missing
// axes take the single default value.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "lgl/estimators.hpp"
#include "lgl/harness.hpp"

namespace lgl::cli {

struct RunConfig {
    TaskSpec task;
    TrainOptions train;
    std::vector<EstimatorConfig> estimators;
    std::vector<std::uint64_t> seeds;
};

enum class ConfigMode { Train, Sweep };

RunConfig parse_run_config(std::string_view text, ConfigMode mode);
RunConfig load_run_config(const std::string& path, ConfigMode mode);

FamilySpec parse_family_json(std::string_view text);
EstimatorConfig parse_estimator_json(std::string_view text);
std::string estimator_to_json(const EstimatorConfig& config);

} // namespace lgl::cli
