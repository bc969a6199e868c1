#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace lgl {

// Portable seeded generator. The engine is std::mt19937_64, whose output
// sequence is fixed by the C++ standard; all distributions are implemented
// here rather than taken from <random>, whose algorithms vary by vendor.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Mixes a base seed with a stream id (SplitMix64 finalizer) so that
    // independent streams can be carved out of one user-facing seed.
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream);

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; the second variate is cached.
    double normal();

    // Unbiased integer in [0, n).
    std::size_t index(std::size_t n);

    // Fisher-Yates.
    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[index(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

} // namespace lgl
