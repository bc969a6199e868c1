#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <thread>
#include <vector>

#include "lgl/errors.hpp"
#include "lgl/polytope.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace lgl;
using lgl::test::max_abs_diff;
using lgl::test::random_vector;
using lgl::test::vec;

namespace {

std::vector<std::vector<double>> as_sorted_rows(const std::vector<Vector>& vs) {
    std::vector<std::vector<double>> rows;
    for (const auto& v : vs) {
        rows.emplace_back(v.data(), v.data() + v.size());
    }
    std::sort(rows.begin(), rows.end());
    return rows;
}

std::vector<Vector> columns(const Matrix& m) {
    std::vector<Vector> out;
    for (Index j = 0; j < m.cols(); ++j) {
        out.push_back(m.col(j));
    }
    return out;
}

double vertex_margin(const StructureFamily& family, const Vector& s) {
    Vector scores = family.vertices().transpose() * s;
    std::sort(scores.data(), scores.data() + scores.size(), std::greater<>());
    return scores.size() > 1 ? scores(0) - scores(1) : INFINITY;
}

} // namespace

TEST_CASE("categorical vertices are the basis in index order") {
    const auto family = StructureFamily::categorical(3);
    CHECK(family.size() == 3);
    CHECK(family.vertices() == Matrix::Identity(3, 3));
}

TEST_CASE("k-subset vertices in lexicographic order of index sets") {
    const auto family = StructureFamily::k_subset(3, 2);
    REQUIRE(family.size() == 3);
    CHECK(Vector(family.vertex(0)) == vec({1, 1, 0}));
    CHECK(Vector(family.vertex(1)) == vec({1, 0, 1}));
    CHECK(Vector(family.vertex(2)) == vec({0, 1, 1}));

    const auto big = StructureFamily::k_subset(6, 3);
    CHECK(as_sorted_rows(columns(big.vertices())) == as_sorted_rows(oracle::k_subsets_brute_force(6, 3)));
    // Index sets strictly increase lexicographically.
    auto index_set = [&](Index j) {
        std::vector<int> s;
        for (Index i = 0; i < big.dim(); ++i) {
            if (big.vertices()(i, j) == 1.0) {
                s.push_back(static_cast<int>(i));
            }
        }
        return s;
    };
    for (Index j = 1; j < big.size(); ++j) {
        CHECK(index_set(j - 1) < index_set(j));
    }
}

TEST_CASE("arborescence vertices match brute force over parent maps") {
    for (int L : {1, 2, 3, 4}) {
        CAPTURE(L);
        const auto family = StructureFamily::arborescence(L);
        CHECK(family.dim() == L * L);
        CHECK(static_cast<std::uint64_t>(family.size()) == vertex_count(family.spec()));
        CHECK(as_sorted_rows(columns(family.vertices())) == as_sorted_rows(oracle::arborescences_brute_force(L)));
    }
    CHECK(StructureFamily::arborescence(3).size() == 16);
    CHECK(StructureFamily::arborescence(2).size() == 3);
    CHECK(StructureFamily::arborescence(4).size() == 125);
}

TEST_CASE("every arborescence has one head per modifier") {
    for (int L : {2, 3, 4}) {
        const auto family = StructureFamily::arborescence(L);
        for (Index j = 0; j < family.size(); ++j) {
            CHECK(family.vertex(j).sum() == L);
            std::vector<int> incoming(static_cast<std::size_t>(L + 1), 0);
            for (Index part = 0; part < family.dim(); ++part) {
                if (family.vertices()(part, j) == 1.0) {
                    ++incoming[static_cast<std::size_t>(arc_of_part(L, part).second)];
                }
            }
            for (int m = 1; m <= L; ++m) {
                CHECK(incoming[static_cast<std::size_t>(m)] == 1);
            }
        }
    }
}

TEST_CASE("vertices are binary and pairwise distinct") {
    for (const auto& family : {StructureFamily::categorical(5), StructureFamily::k_subset(6, 2),
                               StructureFamily::arborescence(3)}) {
        const Matrix& v = family.vertices();
        CHECK((v.array() * (1.0 - v.array())).abs().maxCoeff() == 0.0);
        for (Index a = 0; a < family.size(); ++a) {
            for (Index b = a + 1; b < family.size(); ++b) {
                CHECK(v.col(a) != v.col(b));
            }
        }
    }
}

TEST_CASE("arc indexing is a bijection onto the parts") {
    for (int L : {1, 2, 3, 5}) {
        std::vector<bool> seen(static_cast<std::size_t>(L * L), false);
        Index expected = 0;
        for (int h = 0; h <= L; ++h) {
            for (int m = 1; m <= L; ++m) {
                if (h == m) {
                    CHECK_THROWS_AS(arc_index(L, h, m), std::out_of_range);
                    continue;
                }
                const Index part = arc_index(L, h, m);
                CHECK(part == expected++);
                CHECK(arc_of_part(L, part) == std::pair{h, m});
                seen[static_cast<std::size_t>(part)] = true;
            }
        }
        CHECK(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }));
    }
}

TEST_CASE("enumeration caps and invalid parameters") {
    CHECK_THROWS_AS(StructureFamily::k_subset(64, 32), CapExceeded);
    CHECK_THROWS_AS(StructureFamily::arborescence(7), CapExceeded);
    CHECK_THROWS_AS(StructureFamily::arborescence(9), CapExceeded);
    CHECK_THROWS_AS(StructureFamily::categorical(65), CapExceeded);
    CHECK_NOTHROW(StructureFamily::categorical(64));
    CHECK_NOTHROW(StructureFamily::arborescence(6));
    CHECK_THROWS_AS(StructureFamily::categorical(0), std::invalid_argument);
    CHECK_THROWS_AS(StructureFamily::k_subset(3, 4), std::invalid_argument);
    CHECK_THROWS_AS(StructureFamily::k_subset(3, 0), std::invalid_argument);
}

TEST_CASE("map_decode") {
    CHECK(map_decode(StructureFamily::categorical(3), vec({0.1, 3.0, -1.0})) == 1);
    const auto subsets = StructureFamily::k_subset(3, 2);
    CHECK(Vector(subsets.vertex(map_decode(subsets, vec({3, 1, 2})))) == vec({1, 0, 1}));
    CHECK(map_decode(StructureFamily::categorical(2), vec({0.5, 0.5})) == 0);
    CHECK_THROWS_AS(map_decode(StructureFamily::categorical(2), vec({1, 2, 3})), ShapeMismatch);
    CHECK_THROWS_AS(map_decode(StructureFamily::categorical(2), vec({NAN, 0})), std::invalid_argument);
}

TEST_CASE("gibbs marginals") {
    const auto cat = StructureFamily::categorical(3);
    const auto uniform = gibbs_marginals(cat, vec({0, 0, 0}));
    CHECK(max_abs_diff(uniform.distribution.probs, Vector::Constant(3, 1.0 / 3)) < 1e-15);
    CHECK(max_abs_diff(uniform.mean.mu, Vector::Constant(3, 1.0 / 3)) < 1e-15);
    const auto skewed = gibbs_marginals(cat, vec({std::log(2.0), 0, 0}));
    CHECK(max_abs_diff(skewed.distribution.probs, vec({0.5, 0.25, 0.25})) < 1e-15);

    Rng rng(17);
    const auto trees = StructureFamily::arborescence(3);
    for (int i = 0; i < 20; ++i) {
        const Vector s = random_vector(trees.dim(), 1.0, rng);
        const auto g = gibbs_marginals(trees, s);
        CHECK(max_abs_diff(g.mean.mu, oracle::gibbs_mean_direct(trees.vertices(), s)) <= 1e-9);
        CHECK(certificate_error(trees, g.mean) <= 1e-9);
        CHECK(g.mean.support.size() == 16);
    }
}

TEST_CASE("gibbs marginals survive huge scores") {
    const auto trees = StructureFamily::arborescence(3);
    Vector s = Vector::Zero(9);
    s(0) = 5000.0;
    const auto g = gibbs_marginals(trees, s);
    CHECK(g.mean.mu.allFinite());
    CHECK(certificate_error(trees, g.mean) <= 1e-9);
}

TEST_CASE("softmax") {
    CHECK(max_abs_diff(softmax(vec({0, 0, 0})), Vector::Constant(3, 1.0 / 3)) < 1e-15);
    CHECK(max_abs_diff(softmax(vec({std::log(2.0), 0, 0})), vec({0.5, 0.25, 0.25})) < 1e-15);
    const Vector big = softmax(vec({1000, 0}));
    CHECK(big.allFinite());
    CHECK(max_abs_diff(big, vec({1, 0})) <= 1e-12);
}

TEST_CASE("project_simplex examples") {
    // Expected value frozen from the exhaustive-KKT oracle.
    CHECK(max_abs_diff(project_simplex(vec({0.8, 0.3, -1.0})), vec({0.75, 0.25, 0.0})) <= 1e-12);
    CHECK(max_abs_diff(project_simplex(vec({0.8, 0.3, -1.0})), oracle::simplex_projection_kkt(vec({0.8, 0.3, -1.0}))) <= 1e-15);
    const Vector third = Vector::Constant(3, 1.0 / 3);
    CHECK(max_abs_diff(project_simplex(third), third) <= 1e-15);
    for (double c : {-7.0, 0.0, 0.3, 12.5}) {
        CHECK(max_abs_diff(project_simplex(vec({c, c})), vec({0.5, 0.5})) <= 1e-15);
    }
}

TEST_CASE("project_simplex agrees with the KKT oracle on random inputs") {
    Rng rng(99);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const Index K = 2 + static_cast<Index>(rng.index(7));
        const Vector v = random_vector(K, 2.0, rng);
        const Vector p = project_simplex(v);
        worst = std::max(worst, max_abs_diff(p, oracle::simplex_projection_kkt(v)));
        CHECK(p.minCoeff() >= 0.0);
        CHECK(std::abs(p.sum() - 1.0) <= 1e-12);
    }
    CHECK(worst <= 1e-10);
}

TEST_CASE("projecting a vertex returns it with a single-vertex certificate") {
    for (const auto& family : {StructureFamily::categorical(4), StructureFamily::k_subset(5, 2),
                               StructureFamily::arborescence(3)}) {
        for (Index j = 0; j < family.size(); ++j) {
            const MeanPoint p = project_polytope(family, family.vertex(j));
            CHECK(p.mu == Vector(family.vertex(j)));
            REQUIRE(p.support.size() == 1);
            CHECK(p.support[0].vertex == j);
            CHECK(p.support[0].weight == 1.0);
        }
    }
}

TEST_CASE("categorical projection is sparsemax") {
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        const int K = 2 + static_cast<int>(rng.index(6));
        const Vector v = random_vector(K, 1.5, rng);
        CHECK(max_abs_diff(project_polytope(StructureFamily::categorical(K), v).mu, project_simplex(v)) <= 1e-10);
    }
    CHECK(max_abs_diff(sparsemap(StructureFamily::categorical(3), vec({0.8, 0.3, -1.0})).mu, vec({0.75, 0.25, 0})) <=
          1e-12);
}

TEST_CASE("polytope projection matches the projected-gradient oracle") {
    Rng rng(23);
    for (const auto& family : {StructureFamily::arborescence(3), StructureFamily::k_subset(6, 3)}) {
        for (int i = 0; i < 10; ++i) {
            const Vector v = random_vector(family.dim(), 1.0, rng);
            const MeanPoint got = project_polytope(family, v);
            const auto want = oracle::polytope_projection_pg(family.vertices(), v);
            CHECK(std::abs((got.mu - v).squaredNorm() - want.objective) <= 1e-6);
            CHECK(certificate_error(family, got) <= 1e-9);
            // The active-set solution is at least as good as the iterative one.
            CHECK((got.mu - v).squaredNorm() <= want.objective + 1e-12);
        }
    }
}

TEST_CASE("sparsemap saturates at a dominant vertex") {
    for (const auto& family : {StructureFamily::categorical(4), StructureFamily::k_subset(5, 2),
                               StructureFamily::arborescence(3)}) {
        for (Index j = 0; j < family.size(); ++j) {
            const MeanPoint p = sparsemap(family, 2.0 * family.vertex(j));
            CHECK(max_abs_diff(p.mu, family.vertex(j)) <= 1e-12);
        }
    }
}

TEST_CASE("marginals lie in the polytope and projection is idempotent on them") {
    Rng rng(31);
    for (const auto& family : {StructureFamily::categorical(5), StructureFamily::k_subset(6, 3),
                               StructureFamily::arborescence(3), StructureFamily::arborescence(4)}) {
        for (int i = 0; i < 25; ++i) {
            const Vector s = random_vector(family.dim(), 2.0, rng);
            for (const MeanPoint& point : {gibbs_marginals(family, s).mean, sparsemap(family, s)}) {
                CHECK(point.mu.minCoeff() >= -1e-12);
                CHECK(point.mu.maxCoeff() <= 1.0 + 1e-12);
                CHECK(certificate_error(family, point) <= 1e-9);
                CHECK(max_abs_diff(project_polytope(family, point.mu).mu, point.mu) <= 1e-8);
            }
        }
    }
}

TEST_CASE("categorical reduction of all three transformations") {
    Rng rng(37);
    for (int i = 0; i < 100; ++i) {
        const int K = 2 + static_cast<int>(rng.index(7));
        const auto family = StructureFamily::categorical(K);
        const Vector s = random_vector(K, 2.0, rng);
        Index argmax = 0;
        for (Index k = 1; k < K; ++k) {
            argmax = s(k) > s(argmax) ? k : argmax;
        }
        CHECK(map_decode(family, s) == argmax);
        CHECK(max_abs_diff(gibbs_marginals(family, s).mean.mu, softmax(s)) <= 1e-10);
        CHECK(max_abs_diff(sparsemap(family, s).mu, project_simplex(s)) <= 1e-10);
    }
}

TEST_CASE("low temperature Gibbs mean approaches the MAP vertex") {
    Rng rng(41);
    int tested = 0;
    for (const auto& family : {StructureFamily::categorical(5), StructureFamily::k_subset(5, 2),
                               StructureFamily::arborescence(3)}) {
        for (int i = 0; i < 40; ++i) {
            const Vector s = random_vector(family.dim(), 1.0, rng);
            if (vertex_margin(family, s) < 0.1) {
                continue;
            }
            ++tested;
            const Vector mu = gibbs_marginals(family, 1e3 * s).mean.mu;
            CHECK(max_abs_diff(mu, family.vertex(map_decode(family, s))) <= 1e-6);
        }
    }
    CHECK(tested > 30);
}

TEST_CASE("families can be shared across threads") {
    const auto family = StructureFamily::arborescence(4);
    Rng rng(43);
    std::vector<Vector> inputs;
    for (int i = 0; i < 8; ++i) {
        inputs.push_back(random_vector(family.dim(), 1.0, rng));
    }
    std::vector<Vector> serial;
    for (const auto& v : inputs) {
        serial.push_back(project_polytope(family, v).mu);
    }
    std::vector<Vector> parallel(inputs.size());
    {
        std::vector<std::jthread> pool;
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            pool.emplace_back([&, i] { parallel[i] = project_polytope(family, inputs[i]).mu; });
        }
    }
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        CHECK(parallel[i] == serial[i]);
    }
}
