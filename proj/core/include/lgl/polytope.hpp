#pragma once

// Finite structure families Z ⊆ {0,1}^K and the transformations over them:
// MAP decoding, Gibbs marginals, and Euclidean projection onto conv(Z)
// (SparseMAP), together with their unstructured counterparts argmax,
// softmax and sparsemax.
//
// Every family is small enough to enumerate, so all routines work directly
// on the K x |Z| vertex matrix.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "lgl/linalg.hpp"

namespace lgl {

inline constexpr Index kMaxPartDim = 64;
inline constexpr std::uint64_t kMaxVertices = 100'000;

enum class FamilyKind { Categorical, KSubset, Arborescence };

// Family identifier and size parameters, as declared in run configs.
struct FamilySpec {
    FamilyKind kind = FamilyKind::Categorical;
    int size = 0;   // K for Categorical/KSubset, L (words) for Arborescence
    int subset = 0; // k for KSubset, unused otherwise

    static FamilySpec categorical(int num_classes) { return {FamilyKind::Categorical, num_classes, 0}; }
    static FamilySpec k_subset(int num_parts, int k) { return {FamilyKind::KSubset, num_parts, k}; }
    static FamilySpec arborescence(int num_words) { return {FamilyKind::Arborescence, num_words, 0}; }

    // Part dimension K.
    Index dim() const;

    // e.g. "categorical(K=4)", "ksubset(K=6,k=3)", "arborescence(L=3)".
    std::string name() const;

    bool operator==(const FamilySpec&) const = default;
};

// |Z| for the spec, saturating at UINT64_MAX. Throws std::invalid_argument
// for impossible parameters.
std::uint64_t vertex_count(const FamilySpec& spec);

// Materializes Z as a K x |Z| matrix of 0/1 columns in canonical order:
//   Categorical(K)   e_1 ... e_K
//   KSubset(K, k)    index sets {i_1 < ... < i_k} in lexicographic order
//   Arborescence(L)  parent maps (head of word 1 most significant, heads
//                    ascending) that form a tree rooted at node 0
// Throws CapExceeded when K > kMaxPartDim or |Z| > kMaxVertices.
Matrix enumerate_vertices(const FamilySpec& spec);

// Index of arc (head -> modifier) for Arborescence(L): arcs are ordered
// lexicographically by (head, modifier) with head in 0..L, modifier in 1..L
// and head != modifier, giving K = L^2 parts.
Index arc_index(int num_words, int head, int modifier);
std::pair<int, int> arc_of_part(int num_words, Index part);

// Immutable, cheap to copy (shared vertex storage), safe to share between
// threads.
class StructureFamily {
public:
    explicit StructureFamily(const FamilySpec& spec);

    static StructureFamily categorical(int num_classes) { return StructureFamily(FamilySpec::categorical(num_classes)); }
    static StructureFamily k_subset(int num_parts, int k) { return StructureFamily(FamilySpec::k_subset(num_parts, k)); }
    static StructureFamily arborescence(int num_words) { return StructureFamily(FamilySpec::arborescence(num_words)); }

    const FamilySpec& spec() const { return impl_->spec; }
    FamilyKind kind() const { return impl_->spec.kind; }
    Index dim() const { return impl_->vertices.rows(); }
    Index size() const { return impl_->vertices.cols(); }

    // Columns are the vertices in canonical order.
    const Matrix& vertices() const { return impl_->vertices; }
    auto vertex(Index i) const { return impl_->vertices.col(i); }

private:
    struct Impl {
        FamilySpec spec;
        Matrix vertices;
    };
    std::shared_ptr<const Impl> impl_;
};

struct SupportEntry {
    Index vertex = 0;
    double weight = 0.0;
};

// A point of conv(Z) carried with its convex-combination certificate.
struct MeanPoint {
    Vector mu;
    std::vector<SupportEntry> support;

    static MeanPoint at_vertex(const StructureFamily& family, Index vertex);
};

// Largest violation of the certificate: |sum of weights - 1|, any
// nonpositive weight, and per-coordinate |mu - sum_i w_i z_i|.
double certificate_error(const StructureFamily& family, const MeanPoint& point);

struct VertexDistribution {
    Vector probs; // length |Z|
};

struct GibbsMarginals {
    VertexDistribution distribution;
    MeanPoint mean;
};

// argmax_z s'z; ties go to the lowest canonical vertex index.
Index map_decode(const StructureFamily& family, VectorView scores);

// p_z ∝ exp(s'z) and its mean. Vertices whose probability underflows to
// zero are left out of the support.
GibbsMarginals gibbs_marginals(const StructureFamily& family, VectorView scores);

Vector softmax(VectorView scores);

// Euclidean projection onto the probability simplex (sparsemax), by the
// sort-and-threshold rule.
Vector project_simplex(VectorView v);

// argmin_{mu in conv(Z)} ||mu - v|| by a primal active-set method over the
// vertex matrix. Throws NoConvergence past 10*|Z| iterations.
MeanPoint project_polytope(const StructureFamily& family, VectorView v);

// argmax_{mu in conv(Z)} s'mu - ||mu||^2 / 2, which is project_polytope(s).
MeanPoint sparsemap(const StructureFamily& family, VectorView scores);

} // namespace lgl
