#pragma once

// Synthetic latent-structure tasks and the training loop that plugs a
// surrogate-gradient rule into the encoder update.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "lgl/estimators.hpp"
#include "lgl/linalg.hpp"
#include "lgl/model.hpp"
#include "lgl/polytope.hpp"

namespace lgl {

enum class TaskKind { CategoricalBottleneck, SubsetRegression, TreeRegression };

std::string_view to_string(TaskKind kind);
TaskKind parse_task_kind(std::string_view name);

struct TaskSpec {
    TaskKind kind = TaskKind::CategoricalBottleneck;
    FamilySpec family = FamilySpec::categorical(4);
    Index input_dim = 8;
    Index output_dim = 4;
    double noise_sigma = 0.0;
    int n_train = 200;
    int n_eval = 100;
    std::uint64_t seed = 0;

    // Throws ConfigError on non-positive sizes, negative noise, or a family
    // that does not match the task kind.
    void validate() const;
};

struct Sample {
    Vector x;
    Vector y_star;
    Index z_star = 0; // evaluation only
};

struct Task {
    TaskSpec spec;
    StructureFamily family;
    LossKind loss = LossKind::SquaredError;
    std::vector<Sample> train;
    std::vector<Sample> eval;
};

// CategoricalBottleneck: k* uniform, x = c_{k*} + N(0, s^2 I), y* = onehot(pi(k*)).
// Subset/TreeRegression: z* uniform on Z, x = A z* + N(0, s^2), y* = B z* + N(0, s^2).
// Deterministic in spec.seed.
Task generate_task(const TaskSpec& spec);

struct OptimizerConfig {
    double lr = 0.1;
    int epochs = 50;
    int batch = 10;

    void validate() const;
};

struct ModelOptions {
    Index hidden = 32;
    Activation activation = Activation::Tanh;
    // Off by default: a decoder that sees x can bypass the latent entirely.
    bool decoder_uses_x = false;
};

struct EpochMetrics {
    int epoch = 0;
    double train_loss = 0.0;
    double eval_loss = 0.0;
    double latent_exact = 0.0;
    double latent_f1 = 0.0;
    bool diverged = false;
};

struct RunRecord {
    int run_id = 0;
    EstimatorConfig estimator;
    std::uint64_t seed = 0;
    std::vector<EpochMetrics> epochs; // epoch 0 is the untrained model
    double wall_ms = 0.0;
    bool diverged = false;
};

struct TrainResult {
    RunRecord record;
    LatentModel model;
};

struct TrainOptions {
    OptimizerConfig optimizer;
    ModelOptions model;
    // Record wall-clock time; off keeps outputs byte-reproducible.
    bool timing = false;
};

// One SGD run. Metrics are taken at the MAP operating point for every rule.
// A non-finite loss ends the run with a diverged epoch instead of throwing.
TrainResult train_run(const Task& task, std::uint64_t model_seed, const EstimatorConfig& estimator,
                      const TrainOptions& options);

// Encoder surrogate gradient and exact decoder gradient for one sample
// under the given rule; the building block of train_run.
struct SampleGradient {
    DecoderParams decoder;
    Vector surrogate;
    double loss = 0.0;
};
SampleGradient sample_gradient(const LatentModel& model, const Sample& sample, const EstimatorConfig& estimator);

struct RunJob {
    int run_id = 0;
    EstimatorConfig estimator;
    std::uint64_t seed = 0;
};

// Runs independent jobs on up to `threads` workers; results come back in
// job order regardless of scheduling.
std::vector<RunRecord> run_jobs(const Task& task, std::span<const RunJob> jobs, const TrainOptions& options,
                                int threads);

struct LatentMetrics {
    double exact = 0.0;
    double f1 = 0.0;
};

// Exact-match rate and micro-averaged F1 over the 1-parts.
LatentMetrics evaluate_latent(const StructureFamily& family, std::span<const Index> predicted,
                              std::span<const Index> truth);

// Latent vertices are identifiable only up to relabeling, so predictions are
// mapped to ground truth by the one-to-one vertex assignment that maximizes
// agreement on a reference set. Returns predicted-vertex -> truth-vertex
// pairs; vertices absent from the reference set keep their label.
std::vector<std::pair<Index, Index>> fit_latent_alignment(std::span<const Index> predicted,
                                                          std::span<const Index> truth);
std::vector<Index> apply_latent_alignment(std::span<const std::pair<Index, Index>> alignment,
                                          std::span<const Index> predicted);

// Min-cost perfect assignment on a square cost matrix (Hungarian method).
// Returns row -> column.
std::vector<Index> solve_assignment(const Matrix& cost);

} // namespace lgl
