#include "lgl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "lgl/errors.hpp"
#include "lgl/rng.hpp"

namespace lgl {

namespace {

constexpr std::uint64_t kTaskParamStream = 0;
constexpr std::uint64_t kTaskTrainStream = 1;
constexpr std::uint64_t kTaskEvalStream = 2;
constexpr std::uint64_t kShuffleStream = 7;

Matrix normal_matrix(Index rows, Index cols, Rng& rng) {
    Matrix m(rows, cols);
    for (Index r = 0; r < rows; ++r) {
        for (Index c = 0; c < cols; ++c) {
            m(r, c) = rng.normal();
        }
    }
    return m;
}

Vector normal_vector(Index n, double sigma, Rng& rng) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) {
        v(i) = sigma * rng.normal();
    }
    return v;
}

struct TaskParams {
    Matrix centers;              // categorical: D_x x K
    std::vector<Index> class_of; // categorical: latent class -> output class
    Matrix input_map;            // regression: D_x x K
    Matrix output_map;           // regression: D_y x K
};

TaskParams draw_params(const TaskSpec& spec, const StructureFamily& family, Rng& rng) {
    TaskParams params;
    const Index K = family.dim();
    if (spec.kind == TaskKind::CategoricalBottleneck) {
        params.centers = normal_matrix(spec.input_dim, K, rng);
        params.class_of.resize(static_cast<std::size_t>(K));
        if (spec.output_dim == K) {
            std::iota(params.class_of.begin(), params.class_of.end(), Index{0});
            rng.shuffle(std::span<Index>(params.class_of));
        } else {
            for (auto& c : params.class_of) {
                c = static_cast<Index>(rng.index(static_cast<std::size_t>(spec.output_dim)));
            }
        }
    } else {
        params.input_map = normal_matrix(spec.input_dim, K, rng);
        params.output_map = normal_matrix(spec.output_dim, K, rng);
    }
    return params;
}

std::vector<Sample> draw_samples(const TaskSpec& spec, const StructureFamily& family, const TaskParams& params,
                                 int count, Rng& rng) {
    std::vector<Sample> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        Sample s;
        s.z_star = static_cast<Index>(rng.index(static_cast<std::size_t>(family.size())));
        if (spec.kind == TaskKind::CategoricalBottleneck) {
            s.x = params.centers.col(s.z_star) + normal_vector(spec.input_dim, spec.noise_sigma, rng);
            s.y_star = Vector::Zero(spec.output_dim);
            s.y_star(params.class_of[static_cast<std::size_t>(s.z_star)]) = 1.0;
        } else {
            const Vector z = family.vertex(s.z_star);
            s.x = params.input_map * z + normal_vector(spec.input_dim, spec.noise_sigma, rng);
            s.y_star = params.output_map * z + normal_vector(spec.output_dim, spec.noise_sigma, rng);
        }
        out.push_back(std::move(s));
    }
    return out;
}

bool is_categorical(const StructureFamily& family) { return family.kind() == FamilyKind::Categorical; }

// In-place SGD step: params -= lr * grad.
void apply(DecoderParams& params, const DecoderParams& grad, double lr) {
    params.w1 -= lr * grad.w1;
    params.b1 -= lr * grad.b1;
    params.w2 -= lr * grad.w2;
    params.b2 -= lr * grad.b2;
}

DecoderParams zeros_like(const DecoderParams& p) {
    return {Matrix::Zero(p.w1.rows(), p.w1.cols()), Vector::Zero(p.b1.size()), Matrix::Zero(p.w2.rows(), p.w2.cols()),
            Vector::Zero(p.b2.size())};
}

void accumulate(DecoderParams& acc, const DecoderParams& g, double weight) {
    acc.w1 += weight * g.w1;
    acc.b1 += weight * g.b1;
    acc.w2 += weight * g.w2;
    acc.b2 += weight * g.b2;
}

struct Evaluation {
    double loss = 0.0;
    std::vector<Index> predicted;
    std::vector<Index> truth;
};

Evaluation evaluate(const LatentModel& model, const std::vector<Sample>& samples) {
    Evaluation ev;
    ev.predicted.reserve(samples.size());
    ev.truth.reserve(samples.size());
    double total = 0.0;
    for (const auto& sample : samples) {
        const Vector scores = encode(model, sample.x);
        if (!scores.allFinite()) {
            ev.loss = std::numeric_limits<double>::quiet_NaN();
            return ev;
        }
        const Index z_hat = map_decode(model.family, scores);
        total += forward(model, sample.x, model.family.vertex(z_hat), sample.y_star).loss;
        ev.predicted.push_back(z_hat);
        ev.truth.push_back(sample.z_star);
    }
    ev.loss = samples.empty() ? 0.0 : total / static_cast<double>(samples.size());
    return ev;
}

EpochMetrics measure(const LatentModel& model, const Task& task, int epoch) {
    EpochMetrics m;
    m.epoch = epoch;
    const Evaluation train = evaluate(model, task.train);
    const Evaluation eval = evaluate(model, task.eval);
    m.train_loss = train.loss;
    m.eval_loss = eval.loss;
    if (!std::isfinite(train.loss) || !std::isfinite(eval.loss)) {
        m.diverged = true;
        return m;
    }
    const auto alignment = fit_latent_alignment(train.predicted, train.truth);
    const auto aligned = apply_latent_alignment(alignment, eval.predicted);
    const LatentMetrics latent = evaluate_latent(task.family, aligned, eval.truth);
    m.latent_exact = latent.exact;
    m.latent_f1 = latent.f1;
    return m;
}

} // namespace

std::string_view to_string(TaskKind kind) {
    switch (kind) {
    case TaskKind::CategoricalBottleneck:
        return "categorical_bottleneck";
    case TaskKind::SubsetRegression:
        return "subset_regression";
    case TaskKind::TreeRegression:
        return "tree_regression";
    }
    return "unknown";
}

TaskKind parse_task_kind(std::string_view name) {
    for (TaskKind kind : {TaskKind::CategoricalBottleneck, TaskKind::SubsetRegression, TaskKind::TreeRegression}) {
        if (to_string(kind) == name) {
            return kind;
        }
    }
    throw ConfigError("unknown task kind '" + std::string(name) +
                      "' (expected categorical_bottleneck, subset_regression or tree_regression)");
}

void TaskSpec::validate() const {
    if (input_dim < 1 || output_dim < 1 || n_train < 1 || n_eval < 1) {
        throw ConfigError("task sizes (input_dim, output_dim, n_train, n_eval) must be positive");
    }
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
        throw ConfigError("task noise_sigma must be a finite number >= 0");
    }
    const FamilyKind expected = kind == TaskKind::CategoricalBottleneck ? FamilyKind::Categorical
                                : kind == TaskKind::SubsetRegression    ? FamilyKind::KSubset
                                                                        : FamilyKind::Arborescence;
    if (family.kind != expected) {
        throw ConfigError("task kind " + std::string(to_string(kind)) + " does not accept family " + family.name());
    }
}

void OptimizerConfig::validate() const {
    if (!(lr > 0.0) || !std::isfinite(lr)) {
        throw ConfigError("optimizer lr must be a positive finite number");
    }
    if (epochs < 0) {
        throw ConfigError("optimizer epochs must be >= 0");
    }
    if (batch < 1) {
        throw ConfigError("optimizer batch must be >= 1");
    }
}

Task generate_task(const TaskSpec& spec) {
    spec.validate();
    Task task{spec, StructureFamily(spec.family), LossKind::SquaredError, {}, {}};
    task.loss = spec.kind == TaskKind::CategoricalBottleneck ? LossKind::SoftmaxCrossEntropy : LossKind::SquaredError;
    Rng param_rng(Rng::derive(spec.seed, kTaskParamStream));
    const TaskParams params = draw_params(spec, task.family, param_rng);
    Rng train_rng(Rng::derive(spec.seed, kTaskTrainStream));
    task.train = draw_samples(spec, task.family, params, spec.n_train, train_rng);
    Rng eval_rng(Rng::derive(spec.seed, kTaskEvalStream));
    task.eval = draw_samples(spec, task.family, params, spec.n_eval, eval_rng);
    return task;
}

SampleGradient sample_gradient(const LatentModel& model, const Sample& sample, const EstimatorConfig& est) {
    const StructureFamily& family = model.family;
    const Vector scores = encode(model, sample.x);
    const Index z_hat = map_decode(family, scores);
    const GammaFn gamma_fn = [&](const Vector& latent) {
        return decoder_backward(model, forward(model, sample.x, latent, sample.y_star)).gamma;
    };
    const bool single_step = est.steps == 1;
    const auto etas = step_schedule(est.eta, est.steps, est.schedule);

    SampleGradient out;
    auto from_trace = [&](const ForwardTrace& trace) {
        DecoderGradient g = decoder_backward(model, trace);
        out.decoder = std::move(g.theta);
        out.loss = trace.loss;
        return std::move(g.gamma);
    };

    switch (est.rule) {
    case Rule::None: {
        from_trace(forward(model, sample.x, family.vertex(z_hat), sample.y_star));
        out.surrogate = Vector::Zero(family.dim());
        break;
    }
    case Rule::Spigot: {
        const PullbackGradient gamma = from_trace(forward(model, sample.x, family.vertex(z_hat), sample.y_star));
        if (single_step && est.init == Init::MapVertex) {
            out.surrogate = spigot_grad(family, z_hat, gamma, est.eta);
        } else {
            const MeanPoint target =
                pullback_descend(family, initial_point(family, scores, est.init), gamma_fn, etas);
            out.surrogate = perceptron_grad(family, z_hat, target.mu);
        }
        break;
    }
    case Rule::STE: {
        const PullbackGradient gamma = from_trace(forward(model, sample.x, family.vertex(z_hat), sample.y_star));
        if (single_step && est.init == Init::MapVertex) {
            out.surrogate = ste_grad(gamma, est.eta);
        } else {
            const Vector start = initial_point(family, scores, est.init).mu;
            out.surrogate = perceptron_grad(family, z_hat, unconstrained_descend(start, gamma_fn, etas));
        }
        break;
    }
    case Rule::SpigotCE: {
        const MeanPoint marginal = gibbs_marginals(family, scores).mean;
        const PullbackGradient gamma = from_trace(forward(model, sample.x, marginal.mu, sample.y_star));
        if (single_step) {
            out.surrogate = is_categorical(family) ? ce_grad_unstructured(scores, gamma, est.eta)
                                                   : ce_grad_structured(family, scores, gamma, est.eta);
        } else {
            out.surrogate = marginal.mu - pullback_descend(family, marginal, gamma_fn, etas).mu;
        }
        break;
    }
    case Rule::ExpGrad: {
        const MeanPoint marginal = gibbs_marginals(family, scores).mean;
        const PullbackGradient gamma = from_trace(forward(model, sample.x, marginal.mu, sample.y_star));
        if (single_step) {
            out.surrogate = is_categorical(family) ? eg_grad_unstructured(scores, gamma, est.eta)
                                                   : eg_grad_structured(family, scores, gamma, est.eta);
        } else {
            out.surrogate = marginal.mu - mirror_descend(family, scores, gamma_fn, etas).mu;
        }
        break;
    }
    case Rule::Relaxed: {
        const Vector relaxed = gibbs_marginals(family, scores / est.temperature).mean.mu;
        const PullbackGradient gamma = from_trace(forward(model, sample.x, relaxed, sample.y_star));
        out.surrogate = is_categorical(family) ? relaxed_grad(scores, gamma, est.temperature)
                                               : relaxed_grad(family, scores, gamma, est.temperature);
        break;
    }
    case Rule::MinRisk: {
        const Vector probs = gibbs_marginals(family, scores / est.temperature).distribution.probs;
        Vector losses(family.size());
        out.decoder = zeros_like(model.decoder);
        out.loss = 0.0;
        for (Index z = 0; z < family.size(); ++z) {
            const ForwardTrace trace = forward(model, sample.x, family.vertex(z), sample.y_star);
            losses(z) = trace.loss;
            out.loss += probs(z) * trace.loss;
            if (probs(z) > 0.0) {
                accumulate(out.decoder, decoder_backward(model, trace).theta, probs(z));
            }
        }
        out.surrogate = minrisk_grad(family, scores, losses, est.temperature);
        break;
    }
    }
    return out;
}

TrainResult train_run(const Task& task, std::uint64_t model_seed, const EstimatorConfig& estimator,
                      const TrainOptions& options) {
    estimator.validate();
    options.optimizer.validate();
    const auto started = std::chrono::steady_clock::now();

    const ModelShape shape{task.spec.input_dim, options.model.hidden, task.spec.output_dim};
    TrainResult result{{}, make_model(task.family, shape, task.loss, model_seed, options.model.activation,
                                      options.model.decoder_uses_x)};
    LatentModel& model = result.model;
    RunRecord& record = result.record;
    record.estimator = estimator;
    record.seed = model_seed;

    record.epochs.push_back(measure(model, task, 0));
    record.diverged = record.epochs.back().diverged;

    Rng shuffle_rng(Rng::derive(model_seed, kShuffleStream));
    std::vector<std::size_t> order(task.train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t batch = static_cast<std::size_t>(options.optimizer.batch);
    const double lr = options.optimizer.lr;

    for (int epoch = 1; epoch <= options.optimizer.epochs && !record.diverged; ++epoch) {
        shuffle_rng.shuffle(std::span<std::size_t>(order));
        bool blew_up = false;
        for (std::size_t start = 0; start < order.size() && !blew_up; start += batch) {
            const std::size_t stop = std::min(order.size(), start + batch);
            const double scale = 1.0 / static_cast<double>(stop - start);
            DecoderParams decoder_grad = zeros_like(model.decoder);
            EncoderParams encoder_grad{Matrix::Zero(model.latent_dim(), model.input_dim()),
                                       Vector::Zero(model.latent_dim())};
            for (std::size_t i = start; i < stop; ++i) {
                const Sample& sample = task.train[order[i]];
                SampleGradient g;
                try {
                    g = sample_gradient(model, sample, estimator);
                } catch (const DivergedGradient&) {
                    blew_up = true;
                    break;
                }
                if (!std::isfinite(g.loss) || !g.surrogate.allFinite()) {
                    blew_up = true;
                    break;
                }
                accumulate(decoder_grad, g.decoder, scale);
                encoder_grad.weight += scale * g.surrogate * sample.x.transpose();
                encoder_grad.bias += scale * g.surrogate;
            }
            if (blew_up) {
                break;
            }
            apply(model.decoder, decoder_grad, lr);
            model.encoder.weight -= lr * encoder_grad.weight;
            model.encoder.bias -= lr * encoder_grad.bias;
        }
        EpochMetrics metrics = blew_up ? EpochMetrics{epoch, std::numeric_limits<double>::quiet_NaN(),
                                                      std::numeric_limits<double>::quiet_NaN(), 0.0, 0.0, true}
                                       : measure(model, task, epoch);
        record.diverged = metrics.diverged;
        record.epochs.push_back(metrics);
    }

    if (options.timing) {
        record.wall_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    }
    return result;
}

std::vector<RunRecord> run_jobs(const Task& task, std::span<const RunJob> jobs, const TrainOptions& options,
                                int threads) {
    std::vector<RunRecord> records(jobs.size());
    std::vector<std::exception_ptr> errors(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            try {
                records[i] = train_run(task, jobs[i].seed, jobs[i].estimator, options).record;
                records[i].run_id = jobs[i].run_id;
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const std::size_t workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), 1,
                                                        std::max<std::size_t>(jobs.size(), 1));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back(worker);
        }
    }
    for (const auto& error : errors) {
        if (error) {
            std::rethrow_exception(error);
        }
    }
    return records;
}

LatentMetrics evaluate_latent(const StructureFamily& family, std::span<const Index> predicted,
                              std::span<const Index> truth) {
    if (predicted.size() != truth.size()) {
        throw ShapeMismatch("evaluate_latent: sequences differ in length");
    }
    if (predicted.empty()) {
        return {1.0, 1.0};
    }
    std::size_t exact = 0;
    double true_positive = 0.0;
    double predicted_parts = 0.0;
    double true_parts = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        exact += predicted[i] == truth[i] ? 1 : 0;
        const auto p = family.vertex(predicted[i]);
        const auto t = family.vertex(truth[i]);
        true_positive += p.cwiseProduct(t).sum();
        predicted_parts += p.sum();
        true_parts += t.sum();
    }
    LatentMetrics m;
    m.exact = static_cast<double>(exact) / static_cast<double>(predicted.size());
    if (predicted_parts == 0.0 && true_parts == 0.0) {
        m.f1 = 1.0;
    } else {
        m.f1 = 2.0 * true_positive / (predicted_parts + true_parts);
    }
    return m;
}

std::vector<std::pair<Index, Index>> fit_latent_alignment(std::span<const Index> predicted,
                                                          std::span<const Index> truth) {
    if (predicted.size() != truth.size()) {
        throw ShapeMismatch("fit_latent_alignment: sequences differ in length");
    }
    // Compact the labels that actually occur; unseen vertices keep theirs.
    std::map<Index, Index> pred_slot;
    std::map<Index, Index> true_slot;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        pred_slot.try_emplace(predicted[i], static_cast<Index>(pred_slot.size()));
        true_slot.try_emplace(truth[i], static_cast<Index>(true_slot.size()));
    }
    const Index n = static_cast<Index>(std::max(pred_slot.size(), true_slot.size()));
    if (n == 0) {
        return {};
    }
    Matrix cost = Matrix::Zero(n, n);
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        cost(pred_slot[predicted[i]], true_slot[truth[i]]) -= 1.0;
    }
    const std::vector<Index> assignment = solve_assignment(cost);
    std::vector<Index> true_label(static_cast<std::size_t>(n), -1);
    for (const auto& [label, slot] : true_slot) {
        true_label[static_cast<std::size_t>(slot)] = label;
    }
    std::vector<std::pair<Index, Index>> alignment;
    for (const auto& [label, slot] : pred_slot) {
        const Index target = true_label[static_cast<std::size_t>(assignment[static_cast<std::size_t>(slot)])];
        // Matched to a padding column: no evidence, keep the label.
        alignment.emplace_back(label, target >= 0 ? target : label);
    }
    return alignment;
}

std::vector<Index> apply_latent_alignment(std::span<const std::pair<Index, Index>> alignment,
                                          std::span<const Index> predicted) {
    std::map<Index, Index> lookup(alignment.begin(), alignment.end());
    std::vector<Index> out;
    out.reserve(predicted.size());
    for (Index p : predicted) {
        const auto it = lookup.find(p);
        out.push_back(it == lookup.end() ? p : it->second);
    }
    return out;
}

std::vector<Index> solve_assignment(const Matrix& cost) {
    if (cost.rows() != cost.cols()) {
        throw ShapeMismatch("solve_assignment: cost matrix must be square");
    }
    const Index n = cost.rows();
    const double inf = std::numeric_limits<double>::infinity();
    // Potentials formulation, 1-based with a virtual column 0.
    std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0);
    std::vector<double> v(static_cast<std::size_t>(n + 1), 0.0);
    std::vector<Index> match(static_cast<std::size_t>(n + 1), 0);
    std::vector<Index> way(static_cast<std::size_t>(n + 1), 0);
    for (Index row = 1; row <= n; ++row) {
        match[0] = row;
        Index col0 = 0;
        std::vector<double> min_value(static_cast<std::size_t>(n + 1), inf);
        std::vector<bool> used(static_cast<std::size_t>(n + 1), false);
        do {
            used[static_cast<std::size_t>(col0)] = true;
            const Index row0 = match[static_cast<std::size_t>(col0)];
            double delta = inf;
            Index col1 = 0;
            for (Index col = 1; col <= n; ++col) {
                const auto c = static_cast<std::size_t>(col);
                if (used[c]) {
                    continue;
                }
                const double reduced = cost(row0 - 1, col - 1) - u[static_cast<std::size_t>(row0)] - v[c];
                if (reduced < min_value[c]) {
                    min_value[c] = reduced;
                    way[c] = col0;
                }
                if (min_value[c] < delta) {
                    delta = min_value[c];
                    col1 = col;
                }
            }
            for (Index col = 0; col <= n; ++col) {
                const auto c = static_cast<std::size_t>(col);
                if (used[c]) {
                    u[static_cast<std::size_t>(match[c])] += delta;
                    v[c] -= delta;
                } else {
                    min_value[c] -= delta;
                }
            }
            col0 = col1;
        } while (match[static_cast<std::size_t>(col0)] != 0);
        do {
            const Index col1 = way[static_cast<std::size_t>(col0)];
            match[static_cast<std::size_t>(col0)] = match[static_cast<std::size_t>(col1)];
            col0 = col1;
        } while (col0 != 0);
    }
    std::vector<Index> row_to_col(static_cast<std::size_t>(n), 0);
    for (Index col = 1; col <= n; ++col) {
        row_to_col[static_cast<std::size_t>(match[static_cast<std::size_t>(col)] - 1)] = col - 1;
    }
    return row_to_col;
}

} // namespace lgl
