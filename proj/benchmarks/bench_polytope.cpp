#include <benchmark/benchmark.h>

#include "lgl/polytope.hpp"
#include "lgl/rng.hpp"

namespace {

lgl::Vector random_scores(lgl::Index n, std::uint64_t seed) {
    lgl::Rng rng(seed);
    lgl::Vector v(n);
    for (lgl::Index i = 0; i < n; ++i) {
        v(i) = rng.normal();
    }
    return v;
}

lgl::StructureFamily family_for(int which) {
    switch (which) {
    case 0:
        return lgl::StructureFamily::categorical(16);
    case 1:
        return lgl::StructureFamily::k_subset(10, 4);
    case 2:
        return lgl::StructureFamily::arborescence(3);
    default:
        return lgl::StructureFamily::arborescence(5);
    }
}

void BM_Enumerate(benchmark::State& state) {
    const int L = static_cast<int>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(lgl::enumerate_vertices(lgl::FamilySpec::arborescence(L)));
    }
}
BENCHMARK(BM_Enumerate)->DenseRange(2, 6);

void BM_ProjectSimplex(benchmark::State& state) {
    const lgl::Vector v = random_scores(state.range(0), 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(lgl::project_simplex(v));
    }
}
BENCHMARK(BM_ProjectSimplex)->RangeMultiplier(4)->Range(4, 64);

void BM_ProjectPolytope(benchmark::State& state) {
    const auto family = family_for(static_cast<int>(state.range(0)));
    const lgl::Vector v = random_scores(family.dim(), 2);
    state.SetLabel(family.spec().name());
    for (auto _ : state) {
        benchmark::DoNotOptimize(lgl::project_polytope(family, v));
    }
}
BENCHMARK(BM_ProjectPolytope)->DenseRange(0, 3);

void BM_GibbsMarginals(benchmark::State& state) {
    const auto family = family_for(static_cast<int>(state.range(0)));
    const lgl::Vector s = random_scores(family.dim(), 3);
    state.SetLabel(family.spec().name());
    for (auto _ : state) {
        benchmark::DoNotOptimize(lgl::gibbs_marginals(family, s));
    }
}
BENCHMARK(BM_GibbsMarginals)->DenseRange(0, 3);

void BM_MapDecode(benchmark::State& state) {
    const auto family = family_for(static_cast<int>(state.range(0)));
    const lgl::Vector s = random_scores(family.dim(), 4);
    state.SetLabel(family.spec().name());
    for (auto _ : state) {
        benchmark::DoNotOptimize(lgl::map_decode(family, s));
    }
}
BENCHMARK(BM_MapDecode)->DenseRange(0, 3);

} // namespace
