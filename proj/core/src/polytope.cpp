#include "lgl/polytope.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "lgl/errors.hpp"

namespace lgl {

namespace {

std::uint64_t saturating_mul(std::uint64_t a, std::uint64_t b) {
    if (a != 0 && b > UINT64_MAX / a) {
        return UINT64_MAX;
    }
    return a * b;
}

void require_finite(VectorView v, const char* what) {
    if (!v.allFinite()) {
        throw std::invalid_argument(std::string(what) + ": input has non-finite entries");
    }
}

void require_dim(const StructureFamily& family, VectorView v, const char* what) {
    if (v.size() != family.dim()) {
        throw ShapeMismatch(std::string(what) + ": expected length " + std::to_string(family.dim()) +
                            ", got " + std::to_string(v.size()));
    }
}

Matrix enumerate_categorical(int num_classes) {
    return Matrix::Identity(num_classes, num_classes);
}

Matrix enumerate_k_subsets(int num_parts, int k, std::uint64_t count) {
    Matrix vertices = Matrix::Zero(num_parts, static_cast<Index>(count));
    std::vector<int> chosen(static_cast<std::size_t>(k));
    std::iota(chosen.begin(), chosen.end(), 0);
    for (Index col = 0; col < static_cast<Index>(count); ++col) {
        for (int i : chosen) {
            vertices(i, col) = 1.0;
        }
        // Advance to the next index set in lexicographic order.
        int pos = k - 1;
        while (pos >= 0 && chosen[pos] == num_parts - k + pos) {
            --pos;
        }
        if (pos < 0) {
            break;
        }
        ++chosen[pos];
        for (int j = pos + 1; j < k; ++j) {
            chosen[j] = chosen[j - 1] + 1;
        }
    }
    return vertices;
}

bool is_tree(const std::vector<int>& head, int num_words) {
    for (int m = 1; m <= num_words; ++m) {
        int node = m;
        int steps = 0;
        while (node != 0) {
            node = head[node];
            if (++steps > num_words) {
                return false;
            }
        }
    }
    return true;
}

Matrix enumerate_arborescences(int num_words, std::uint64_t count) {
    const int L = num_words;
    Matrix vertices = Matrix::Zero(static_cast<Index>(L) * L, static_cast<Index>(count));
    // digit[m] in [0, L) selects the head among {0..L} \ {m}.
    std::vector<int> digit(L + 1, 0);
    std::vector<int> head(L + 1, 0);
    Index col = 0;
    while (true) {
        for (int m = 1; m <= L; ++m) {
            head[m] = digit[m] < m ? digit[m] : digit[m] + 1;
        }
        if (is_tree(head, L)) {
            for (int m = 1; m <= L; ++m) {
                vertices(arc_index(L, head[m], m), col) = 1.0;
            }
            ++col;
        }
        int m = L;
        while (m >= 1 && digit[m] == L - 1) {
            digit[m] = 0;
            --m;
        }
        if (m < 1) {
            break;
        }
        ++digit[m];
    }
    if (col != static_cast<Index>(count)) {
        throw std::logic_error("arborescence enumeration produced " + std::to_string(col) +
                               " trees, expected " + std::to_string(count));
    }
    return vertices;
}

// Minimizes ||A w - v||^2 subject to sum(w) = 1 through the KKT system
//   [A'A 1; 1' 0] [w; t] = [A'v; 1].
// Nonsingular whenever the columns of A are affinely independent.
Vector affine_least_squares(const Matrix& active_vertices, VectorView v) {
    const Index n = active_vertices.cols();
    Matrix kkt(n + 1, n + 1);
    kkt.topLeftCorner(n, n) = active_vertices.transpose() * active_vertices;
    kkt.topRightCorner(n, 1).setOnes();
    kkt.bottomLeftCorner(1, n).setOnes();
    kkt(n, n) = 0.0;
    Vector rhs(n + 1);
    rhs.head(n) = active_vertices.transpose() * v;
    rhs(n) = 1.0;
    return kkt.fullPivLu().solve(rhs).head(n);
}

} // namespace

Index FamilySpec::dim() const {
    switch (kind) {
    case FamilyKind::Categorical:
    case FamilyKind::KSubset:
        return size;
    case FamilyKind::Arborescence:
        return static_cast<Index>(size) * size;
    }
    return 0;
}

std::string FamilySpec::name() const {
    switch (kind) {
    case FamilyKind::Categorical:
        return "categorical(K=" + std::to_string(size) + ")";
    case FamilyKind::KSubset:
        return "ksubset(K=" + std::to_string(size) + ",k=" + std::to_string(subset) + ")";
    case FamilyKind::Arborescence:
        return "arborescence(L=" + std::to_string(size) + ")";
    }
    return "unknown";
}

std::uint64_t vertex_count(const FamilySpec& spec) {
    switch (spec.kind) {
    case FamilyKind::Categorical:
        if (spec.size < 1) {
            throw std::invalid_argument("categorical family needs K >= 1");
        }
        return static_cast<std::uint64_t>(spec.size);
    case FamilyKind::KSubset: {
        if (spec.size < 1 || spec.subset < 1 || spec.subset > spec.size) {
            throw std::invalid_argument("k-subset family needs 1 <= k <= K");
        }
        const int k = std::min(spec.subset, spec.size - spec.subset);
        unsigned __int128 c = 1;
        for (int i = 0; i < k; ++i) {
            c = c * static_cast<unsigned>(spec.size - i) / static_cast<unsigned>(i + 1);
            if (c > UINT64_MAX) {
                return UINT64_MAX;
            }
        }
        return static_cast<std::uint64_t>(c);
    }
    case FamilyKind::Arborescence: {
        if (spec.size < 1) {
            throw std::invalid_argument("arborescence family needs L >= 1");
        }
        std::uint64_t count = 1;
        for (int i = 0; i < spec.size - 1; ++i) {
            count = saturating_mul(count, static_cast<std::uint64_t>(spec.size) + 1);
        }
        return count;
    }
    }
    throw std::invalid_argument("unknown family kind");
}

Matrix enumerate_vertices(const FamilySpec& spec) {
    const std::uint64_t count = vertex_count(spec);
    if (spec.dim() > kMaxPartDim) {
        throw CapExceeded(spec.name() + ": part dimension " + std::to_string(spec.dim()) + " exceeds cap " +
                          std::to_string(kMaxPartDim));
    }
    if (count > kMaxVertices) {
        throw CapExceeded(spec.name() + ": vertex count exceeds cap " + std::to_string(kMaxVertices));
    }
    switch (spec.kind) {
    case FamilyKind::Categorical:
        return enumerate_categorical(spec.size);
    case FamilyKind::KSubset:
        return enumerate_k_subsets(spec.size, spec.subset, count);
    case FamilyKind::Arborescence:
        return enumerate_arborescences(spec.size, count);
    }
    throw std::invalid_argument("unknown family kind");
}

Index arc_index(int num_words, int head, int modifier) {
    const int L = num_words;
    if (head < 0 || head > L || modifier < 1 || modifier > L || head == modifier) {
        throw std::out_of_range("arc (" + std::to_string(head) + " -> " + std::to_string(modifier) +
                                ") is not a part of arborescence(L=" + std::to_string(L) + ")");
    }
    if (head == 0) {
        return modifier - 1;
    }
    const Index block = L + static_cast<Index>(head - 1) * (L - 1);
    return block + (modifier < head ? modifier - 1 : modifier - 2);
}

std::pair<int, int> arc_of_part(int num_words, Index part) {
    const int L = num_words;
    if (part < 0 || part >= static_cast<Index>(L) * L) {
        throw std::out_of_range("part index out of range");
    }
    if (part < L) {
        return {0, static_cast<int>(part) + 1};
    }
    const Index rest = part - L;
    const int head = static_cast<int>(rest / (L - 1)) + 1;
    const int slot = static_cast<int>(rest % (L - 1));
    const int modifier = slot + 1 < head ? slot + 1 : slot + 2;
    return {head, modifier};
}

StructureFamily::StructureFamily(const FamilySpec& spec)
    : impl_(std::make_shared<const Impl>(Impl{spec, enumerate_vertices(spec)})) {}

MeanPoint MeanPoint::at_vertex(const StructureFamily& family, Index vertex) {
    return MeanPoint{family.vertex(vertex), {SupportEntry{vertex, 1.0}}};
}

double certificate_error(const StructureFamily& family, const MeanPoint& point) {
    if (point.mu.size() != family.dim() || point.support.empty()) {
        return std::numeric_limits<double>::infinity();
    }
    Vector rebuilt = Vector::Zero(family.dim());
    double total = 0.0;
    double worst = 0.0;
    for (const auto& entry : point.support) {
        if (entry.vertex < 0 || entry.vertex >= family.size() || !(entry.weight > 0.0)) {
            return std::numeric_limits<double>::infinity();
        }
        rebuilt += entry.weight * family.vertex(entry.vertex);
        total += entry.weight;
    }
    worst = std::abs(total - 1.0);
    return std::max(worst, (rebuilt - point.mu).cwiseAbs().maxCoeff());
}

Index map_decode(const StructureFamily& family, VectorView scores) {
    require_dim(family, scores, "map_decode");
    require_finite(scores, "map_decode");
    const Vector vertex_scores = family.vertices().transpose() * scores;
    Index best = 0;
    for (Index i = 1; i < vertex_scores.size(); ++i) {
        if (vertex_scores(i) > vertex_scores(best)) {
            best = i;
        }
    }
    return best;
}

GibbsMarginals gibbs_marginals(const StructureFamily& family, VectorView scores) {
    require_dim(family, scores, "gibbs_marginals");
    require_finite(scores, "gibbs_marginals");
    const Vector vertex_scores = family.vertices().transpose() * scores;
    const double top = vertex_scores.maxCoeff();
    Vector probs = (vertex_scores.array() - top).exp().matrix();
    probs /= probs.sum();

    GibbsMarginals out;
    out.mean.mu = family.vertices() * probs;
    out.mean.support.reserve(static_cast<std::size_t>(probs.size()));
    for (Index i = 0; i < probs.size(); ++i) {
        if (probs(i) > 0.0) {
            out.mean.support.push_back({i, probs(i)});
        }
    }
    out.distribution.probs = std::move(probs);
    return out;
}

Vector softmax(VectorView scores) {
    require_finite(scores, "softmax");
    if (scores.size() == 0) {
        return Vector();
    }
    Vector out = (scores.array() - scores.maxCoeff()).exp().matrix();
    return out / out.sum();
}

Vector project_simplex(VectorView v) {
    require_finite(v, "project_simplex");
    const Index n = v.size();
    if (n == 0) {
        return Vector();
    }
    std::vector<double> sorted(v.data(), v.data() + n);
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double cumulative = 0.0;
    double threshold = 0.0;
    for (Index j = 0; j < n; ++j) {
        cumulative += sorted[j];
        const double candidate = (cumulative - 1.0) / static_cast<double>(j + 1);
        if (sorted[j] - candidate > 0.0) {
            threshold = candidate;
        }
    }
    return (v.array() - threshold).max(0.0).matrix();
}

MeanPoint project_polytope(const StructureFamily& family, VectorView v) {
    require_dim(family, v, "project_polytope");
    require_finite(v, "project_polytope");
    const Matrix& vertices = family.vertices();
    const double tolerance = 1e-12 * std::max(1.0, v.cwiseAbs().maxCoeff());

    std::vector<Index> active{map_decode(family, v)};
    Vector weights = Vector::Ones(1);

    auto gather = [&] {
        Matrix cols(vertices.rows(), static_cast<Index>(active.size()));
        for (std::size_t i = 0; i < active.size(); ++i) {
            cols.col(static_cast<Index>(i)) = vertices.col(active[i]);
        }
        return cols;
    };

    const std::size_t max_iterations = 10 * static_cast<std::size_t>(family.size());
    for (std::size_t iteration = 0; iteration < max_iterations; ++iteration) {
        const Matrix active_vertices = gather();
        const Vector target = affine_least_squares(active_vertices, v);

        if ((target.array() > 0.0).all()) {
            weights = target;
            const Vector mu = active_vertices * weights;
            const Vector residual = v - mu;
            // Most violating vertex: the MAP oracle on the negative gradient.
            const Index candidate = map_decode(family, residual);
            const double gain = vertices.col(candidate).dot(residual) - mu.dot(residual);
            const bool already_active = std::find(active.begin(), active.end(), candidate) != active.end();
            if (gain <= tolerance || already_active) {
                MeanPoint out;
                out.mu = mu;
                out.support.reserve(active.size());
                for (std::size_t i = 0; i < active.size(); ++i) {
                    out.support.push_back({active[i], weights(static_cast<Index>(i))});
                }
                return out;
            }
            active.push_back(candidate);
            weights.conservativeResize(weights.size() + 1);
            weights(weights.size() - 1) = 0.0;
            continue;
        }

        // Move toward the affine minimizer until the first weight hits zero.
        double step = 1.0;
        Index blocking = -1;
        for (Index i = 0; i < target.size(); ++i) {
            if (target(i) <= 0.0 && weights(i) > target(i)) {
                const double ratio = weights(i) / (weights(i) - target(i));
                if (ratio < step) {
                    step = ratio;
                    blocking = i;
                }
            }
        }
        weights += step * (target - weights);
        std::vector<Index> kept;
        std::vector<double> kept_weights;
        for (Index i = 0; i < weights.size(); ++i) {
            if (i != blocking && weights(i) > 0.0) {
                kept.push_back(active[static_cast<std::size_t>(i)]);
                kept_weights.push_back(weights(i));
            }
        }
        active = std::move(kept);
        weights = Eigen::Map<const Vector>(kept_weights.data(), static_cast<Index>(kept_weights.size()));
        weights /= weights.sum();
    }
    throw NoConvergence("project_polytope: active set did not converge within " +
                        std::to_string(max_iterations) + " iterations on " + family.spec().name());
}

MeanPoint sparsemap(const StructureFamily& family, VectorView scores) {
    return project_polytope(family, scores);
}

} // namespace lgl
