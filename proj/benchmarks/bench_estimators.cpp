#include <benchmark/benchmark.h>

#include "lgl/estimators.hpp"
#include "lgl/harness.hpp"
#include "lgl/rng.hpp"

namespace {

lgl::Vector random_vector(lgl::Index n, lgl::Rng& rng) {
    lgl::Vector v(n);
    for (lgl::Index i = 0; i < n; ++i) {
        v(i) = rng.normal();
    }
    return v;
}

void BM_SpigotGrad(benchmark::State& state) {
    const auto family = lgl::StructureFamily::arborescence(static_cast<int>(state.range(0)));
    lgl::Rng rng(5);
    const lgl::Vector s = random_vector(family.dim(), rng);
    const lgl::PullbackGradient gamma{random_vector(family.dim(), rng)};
    const lgl::Index z_hat = lgl::map_decode(family, s);
    for (auto _ : state) {
        benchmark::DoNotOptimize(lgl::spigot_grad(family, z_hat, gamma, 1.0));
    }
}
BENCHMARK(BM_SpigotGrad)->DenseRange(3, 5);

void BM_MinRiskGrad(benchmark::State& state) {
    const auto family = lgl::StructureFamily::arborescence(static_cast<int>(state.range(0)));
    lgl::Rng rng(6);
    const lgl::Vector s = random_vector(family.dim(), rng);
    const lgl::Vector losses = random_vector(family.size(), rng).cwiseAbs();
    for (auto _ : state) {
        benchmark::DoNotOptimize(lgl::minrisk_grad(family, s, losses));
    }
}
BENCHMARK(BM_MinRiskGrad)->DenseRange(3, 5);

void BM_SampleGradient(benchmark::State& state) {
    lgl::TaskSpec spec;
    spec.kind = lgl::TaskKind::TreeRegression;
    spec.family = lgl::FamilySpec::arborescence(3);
    spec.input_dim = 8;
    spec.output_dim = 4;
    spec.n_train = 1;
    spec.n_eval = 1;
    const lgl::Task task = lgl::generate_task(spec);
    const lgl::LatentModel model = lgl::make_model(task.family, {8, 32, 4}, task.loss, 1);
    lgl::EstimatorConfig est;
    est.rule = static_cast<lgl::Rule>(state.range(0));
    state.SetLabel(std::string(lgl::to_string(est.rule)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(lgl::sample_gradient(model, task.train[0], est));
    }
}
BENCHMARK(BM_SampleGradient)->DenseRange(0, 6);

} // namespace
