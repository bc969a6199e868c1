// Acceptance run: one PASS/FAIL line per criterion. Exit status is the
// number of failing criteria (0 = all pass).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "checks.hpp"
#include "commands.hpp"
#include "lgl/estimators.hpp"
#include "lgl/harness.hpp"
#include "lgl/model.hpp"
#include "lgl/polytope.hpp"
#include "lgl/rng.hpp"
#include "oracles.hpp"

using namespace lgl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

Vector random_vector(Index n, double scale, Rng& rng) {
    Vector v(n);
    for (Index i = 0; i < n; ++i) {
        v(i) = scale * rng.normal();
    }
    return v;
}

double max_abs_diff(const Vector& a, const Vector& b) { return (a - b).cwiseAbs().maxCoeff(); }

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, format, a, b, c);
    return buf;
}

std::vector<StructureFamily> all_families() {
    return {StructureFamily::categorical(4), StructureFamily::k_subset(5, 2), StructureFamily::arborescence(3)};
}

Outcome simplex_oracle() {
    Rng rng(1001);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const Index K = 2 + static_cast<Index>(rng.index(7));
        const Vector v = random_vector(K, 1.5, rng);
        worst = std::max(worst, max_abs_diff(project_simplex(v), oracle::simplex_projection_kkt(v)));
    }
    return {worst <= 1e-10, fmt("1000 vectors, max error %.3g (tol 1e-10)", worst)};
}

Outcome polytope_oracle() {
    Rng rng(1002);
    double worst = 0.0;
    for (const auto& family : {StructureFamily::arborescence(3), StructureFamily::k_subset(6, 3)}) {
        for (int i = 0; i < 100; ++i) {
            const Vector v = random_vector(family.dim(), 1.0, rng);
            const double got = (project_polytope(family, v).mu - v).squaredNorm();
            worst = std::max(worst, std::abs(got - oracle::polytope_projection_pg(family.vertices(), v).objective));
        }
    }
    return {worst <= 1e-6, fmt("200 inputs, max objective gap %.3g (tol 1e-6)", worst)};
}

Outcome categorical_collapse() {
    Rng rng(1003);
    double sm = 0.0;
    double gm = 0.0;
    int map_mismatch = 0;
    for (int i = 0; i < 500; ++i) {
        const int K = 2 + static_cast<int>(rng.index(7));
        const auto family = StructureFamily::categorical(K);
        const Vector s = random_vector(K, 2.0, rng);
        Index argmax = 0;
        for (Index k = 1; k < K; ++k) {
            argmax = s(k) > s(argmax) ? k : argmax;
        }
        sm = std::max(sm, max_abs_diff(sparsemap(family, s).mu, project_simplex(s)));
        gm = std::max(gm, max_abs_diff(gibbs_marginals(family, s).mean.mu, oracle::softmax_direct(s)));
        map_mismatch += map_decode(family, s) == argmax ? 0 : 1;
    }
    return {sm <= 1e-10 && gm <= 1e-10 && map_mismatch == 0,
            fmt("sparsemap err %.3g, gibbs err %.3g, argmax mismatches %.0f", sm, gm, map_mismatch)};
}

Outcome spigot_identity() {
    Rng rng(1004);
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
        const auto family = all_families()[static_cast<std::size_t>(i % 3)];
        const Vector s = random_vector(family.dim(), 1.0, rng);
        const Vector g = random_vector(family.dim(), 1.0, rng);
        const double eta = std::exp(rng.uniform(-3.0, 2.0));
        const Index z_hat = map_decode(family, s);
        const double etas[] = {eta};
        const MeanPoint target = pullback_descend(
            family, initial_point(family, s, Init::MapVertex), [&](const Vector&) { return PullbackGradient{g}; },
            etas);
        worst = std::max(worst, max_abs_diff(spigot_grad(family, z_hat, {g}, eta), perceptron_grad(family, s, target)));
    }
    return {worst <= 1e-12, fmt("200 instances over 3 families, max diff %.3g (tol 1e-12)", worst)};
}

Outcome ste_identity() {
    Rng rng(1005);
    int inexact = 0;
    double worst_ulps = 0.0;
    for (int i = 0; i < 200; ++i) {
        const auto family = all_families()[static_cast<std::size_t>(i % 3)];
        const Vector s = random_vector(family.dim(), 1.0, rng);
        const Vector g = random_vector(family.dim(), 1.0, rng);
        const double eta = std::exp(rng.uniform(-3.0, 2.0));
        const Index z_hat = map_decode(family, s);
        const Vector ste = ste_grad({g}, eta);
        inexact += ste == Vector(eta * g) ? 0 : 1;
        const double etas[] = {eta};
        const Vector target = unconstrained_descend(family.vertex(z_hat),
                                                    [&](const Vector&) { return PullbackGradient{g}; }, etas);
        const Vector via_pullback = perceptron_grad(family, z_hat, target);
        // z - (z - eta g) rounds twice; compare in units of the larger operand.
        for (Index k = 0; k < g.size(); ++k) {
            const double unit = std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(eta * g(k)));
            worst_ulps = std::max(worst_ulps, std::abs(via_pullback(k) - ste(k)) / unit);
        }
    }
    return {inexact == 0 && worst_ulps <= 1.0,
            fmt("eta*gamma exact on %.0f/200; pullback form within %.2f ulp", 200 - inexact, worst_ulps)};
}

Outcome eg_identity() {
    Rng rng(1006);
    double worst = 0.0;
    double worst_sum = 0.0;
    for (int i = 0; i < 200; ++i) {
        const Index K = 2 + static_cast<Index>(rng.index(7));
        const Vector s = random_vector(K, 1.5, rng);
        const Vector g = random_vector(K, 1.0, rng);
        const double eta = std::exp(rng.uniform(-3.0, 2.0));
        const Vector eg = eg_grad_unstructured(s, {g}, eta);
        worst = std::max(worst, max_abs_diff(eg, oracle::softmax_direct(s) - oracle::softmax_direct(s - eta * g)));
        worst_sum = std::max(worst_sum, std::abs(eg.sum()));
    }
    return {worst <= 1e-12 && worst_sum <= 1e-14, fmt("max diff %.3g (tol 1e-12), max |sum| %.3g", worst, worst_sum)};
}

Outcome ce_identity() {
    Rng rng(1007);
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
        const Index K = 2 + static_cast<Index>(rng.index(7));
        const Vector s = random_vector(K, 1.5, rng);
        const Vector g = random_vector(K, 1.0, rng);
        const double eta = std::exp(rng.uniform(-3.0, 2.0));
        const Vector p = oracle::softmax_direct(s);
        worst = std::max(worst, max_abs_diff(ce_grad_unstructured(s, {g}, eta),
                                             p - oracle::simplex_projection_kkt(p - eta * g)));
    }
    return {worst <= 1e-12, fmt("200 instances, max diff %.3g (tol 1e-12)", worst)};
}

Outcome exact_gradients() {
    Rng rng(1008);
    double relaxed_worst = 0.0;
    double minrisk_worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const auto family = all_families()[static_cast<std::size_t>(i % 3)];
        const bool categorical = family.kind() == FamilyKind::Categorical;
        const LossKind loss = i % 2 ? LossKind::SquaredError : LossKind::SoftmaxCrossEntropy;
        LatentModel model = make_model(family, {3, 6, 3}, loss, rng.next_u64(), Activation::Tanh, true);
        model.decoder.b1 = random_vector(6, 0.3, rng);
        const Vector x = random_vector(3, 1.0, rng);
        Vector y = Vector::Zero(3);
        if (loss == LossKind::SquaredError) {
            y = random_vector(3, 1.0, rng);
        } else {
            y(static_cast<Index>(rng.index(3))) = 1.0;
        }
        const Vector s = random_vector(family.dim(), 1.0, rng);
        const double tau = 0.5 + rng.uniform();
        const auto relaxed_point = [&](const Vector& v) {
            return categorical ? softmax(v / tau) : gibbs_marginals(family, v / tau).mean.mu;
        };
        const PullbackGradient gamma = decoder_backward(model, forward(model, x, relaxed_point(s), y)).gamma;
        const Vector analytic = categorical ? relaxed_grad(s, gamma, tau) : relaxed_grad(family, s, gamma, tau);
        relaxed_worst = std::max(
            relaxed_worst,
            finite_diff_check([&](const Vector& v) { return forward(model, x, relaxed_point(v), y).loss; }, s, analytic));

        const Vector losses = random_vector(family.size(), 1.0, rng).cwiseAbs();
        minrisk_worst = std::max(
            minrisk_worst,
            finite_diff_check([&](const Vector& v) { return oracle::gibbs_probs_direct(family.vertices(), v / tau).dot(losses); },
                              s, minrisk_grad(family, s, losses, tau)));
    }
    return {relaxed_worst <= 1e-6 && minrisk_worst <= 1e-6,
            fmt("relaxed max rel err %.3g, minrisk max rel err %.3g (tol 1e-6)", relaxed_worst, minrisk_worst)};
}

Outcome zero_gradient_pathology() {
    TaskSpec spec;
    spec.seed = 9;
    spec.noise_sigma = 0.1;
    const Task task = generate_task(spec);
    TrainOptions options;
    options.optimizer.epochs = 50;
    EstimatorConfig none;
    none.rule = Rule::None;
    const TrainResult result = train_run(task, 9, none, options);
    const LatentModel initial = make_model(task.family, {spec.input_dim, options.model.hidden, spec.output_dim},
                                           task.loss, 9, options.model.activation, options.model.decoder_uses_x);
    const bool identical =
        result.model.encoder.weight == initial.encoder.weight && result.model.encoder.bias == initial.encoder.bias;
    const bool decoder_moved = result.model.decoder.w2 != initial.decoder.w2;
    return {identical && decoder_moved, std::string("encoder ") + (identical ? "bit-identical" : "CHANGED") +
                                            " after 50 epochs; decoder " + (decoder_moved ? "updated" : "static")};
}

Outcome pullback_monotonicity() {
    Rng rng(1010);
    int violations = 0;
    double worst_increase = 0.0;
    for (int i = 0; i < 100; ++i) {
        const auto family = all_families()[static_cast<std::size_t>(i % 3)];
        const LatentModel model = make_model(family, {4, 6, 3}, LossKind::SquaredError, rng.next_u64(),
                                             Activation::Identity, false);
        const Vector x = random_vector(4, 1.0, rng);
        const Vector y = random_vector(3, 1.0, rng);
        const GammaFn gamma_fn = [&](const Vector& mu) {
            return decoder_backward(model, forward(model, x, mu, y)).gamma;
        };
        MeanPoint mu = initial_point(family, encode(model, x), Init::MapVertex);
        double previous = forward(model, x, mu.mu, y).loss;
        const double step[] = {0.01};
        for (int t = 0; t < 25; ++t) {
            mu = pullback_descend(family, mu, gamma_fn, step);
            const double current = forward(model, x, mu.mu, y).loss;
            worst_increase = std::max(worst_increase, current - previous);
            violations += current > previous + 1e-12 ? 1 : 0;
            previous = current;
        }
    }
    return {violations == 0, fmt("100 instances x 25 steps, %.0f violations, max increase %.3g", violations,
                                 worst_increase)};
}

Outcome learning_smoke() {
    TaskSpec spec; // categorical(4), D_x = 8, noiseless
    spec.input_dim = 8;
    spec.output_dim = 4;
    spec.noise_sigma = 0.0;
    spec.n_train = 200;
    spec.n_eval = 100;
    spec.seed = 11;
    const Task task = generate_task(spec);
    TrainOptions options;
    options.optimizer.epochs = 200;
    options.optimizer.lr = 1.0;
    options.optimizer.batch = 1;

    std::vector<RunJob> jobs;
    int id = 0;
    for (Rule rule : {Rule::MinRisk, Rule::Spigot, Rule::STE}) {
        for (std::uint64_t seed : {0u, 1u, 2u}) {
            EstimatorConfig e;
            e.rule = rule;
            if (rule == Rule::MinRisk) {
                e.temperature = 2.0;
            }
            jobs.push_back({id++, e, seed});
        }
    }
    const auto records = run_jobs(task, jobs, options, cli::threads_from_env());
    bool pass = true;
    std::ostringstream detail;
    detail.precision(4);
    for (const auto& r : records) {
        const auto& first = r.epochs.front();
        const auto& last = r.epochs.back();
        bool ok = !r.diverged;
        if (r.estimator.rule == Rule::MinRisk) {
            ok = ok && last.latent_exact >= 0.95;
            detail << " minrisk/s" << r.seed << " acc=" << last.latent_exact;
        } else {
            ok = ok && last.eval_loss < 0.5 * first.eval_loss;
            detail << ' ' << to_string(r.estimator.rule) << "/s" << r.seed << " loss " << first.eval_loss << "->"
                   << last.eval_loss;
        }
        pass = pass && ok;
    }
    return {pass, detail.str().substr(1)};
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism() {
    const fs::path dir = fs::temp_directory_path() / "lgl_acceptance_determinism";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const std::string task = R"("task": {"kind": "tree_regression", "family": {"family": "arborescence", "L": 3},
        "input_dim": 6, "output_dim": 3, "noise_sigma": 0.1, "n_train": 60, "n_eval": 30, "seed": 5},
        "optimizer": {"epochs": 5}, "seeds": [0, 1])";
    std::ofstream(dir / "train.json") << "{" << task
                                      << R"(, "estimators": [{"rule": "spigot"}, {"rule": "ste"}, {"rule": "spigot_ce"},
        {"rule": "expgrad"}, {"rule": "relaxed"}, {"rule": "minrisk"}, {"rule": "spigot", "steps": 3, "init": "marginal"}]})";
    std::ofstream(dir / "sweep.json") << "{" << task
                                      << R"(, "grid": {"rule": ["spigot", "ste"], "eta": [0.1, 1.0], "steps": [1, 2]}})";
    std::ostringstream sink;
    int codes = 0;
    for (int threads : {1, 4, 4}) {
        const auto out = dir / ("run" + std::to_string(threads) + "_" + std::to_string(codes));
        codes += cli::cmd_train(dir / "train.json", out, threads, sink, sink) == cli::kExitOk ? 1 : 0;
        codes += cli::cmd_sweep(dir / "sweep.json", out, threads, sink, sink) == cli::kExitOk ? 1 : 0;
    }
    std::vector<std::string> runs;
    std::vector<std::string> sweeps;
    std::vector<std::string> summaries;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_directory()) {
            runs.push_back(read_text(entry.path() / "runs.csv"));
            sweeps.push_back(read_text(entry.path() / "sweep.csv"));
            summaries.push_back(read_text(entry.path() / "summary.csv"));
        }
    }
    bool same = codes == 6 && runs.size() == 3;
    for (std::size_t i = 1; i < runs.size(); ++i) {
        same = same && runs[i] == runs[0] && sweeps[i] == sweeps[0] && summaries[i] == summaries[0];
    }
    fs::remove_all(dir);
    return {same, "train + sweep repeated " + std::to_string(runs.size()) + " times (1 and 4 threads): " +
                      (same ? "byte-identical" : "DIFFERENT")};
}

} // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> run;
        double budget_s;
    };
    const std::vector<Criterion> criteria{
        {1, "simplex projection vs exhaustive KKT", simplex_oracle, 5},
        {2, "polytope projection vs projected-gradient oracle", polytope_oracle, 60},
        {3, "categorical collapse", categorical_collapse, 0},
        {4, "SPIGOT = perceptron after one pullback step", spigot_identity, 0},
        {5, "STE = eta * gamma = unconstrained pullback", ste_identity, 0},
        {6, "EG = softmax difference", eg_identity, 0},
        {7, "CE = softmax minus sparsemax", ce_identity, 0},
        {8, "relaxed and minrisk vs finite differences", exact_gradients, 0},
        {9, "zero surrogate leaves encoder untouched", zero_gradient_pathology, 0},
        {10, "pullback descent monotone on convex decoder", pullback_monotonicity, 0},
        {11, "end-to-end learning smoke test", learning_smoke, 120},
        {12, "byte-identical reruns", determinism, 0},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (c.budget_s > 0 && seconds >= c.budget_s) {
            o.pass = false;
            o.detail += fmt(" [over time budget %.0f s]", c.budget_s);
        }
        failed += o.pass ? 0 : 1;
        std::printf("criterion %2d %s: %s (%.2f s) %s\n", c.id, o.pass ? "PASS" : "FAIL", c.name, seconds,
                    o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("acceptance: %d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed;
}
