#pragma once

#include <cstdint>
#include <random>

namespace bmsvm {

using Rng = std::mt19937_64;

/// Mixes a master seed with a stream index into an independent 64-bit seed.
/// Used for fold seeds, per-class substreams and anything that must not depend
/// on the order in which other streams were consumed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) noexcept;

/// Generator seeded from (seed, stream) through std::seed_seq.
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

inline double draw_normal(Rng& rng) {
    return std::normal_distribution<double>(0.0, 1.0)(rng);
}

inline double draw_uniform(Rng& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

/// Gamma with the shape/rate parameterization used throughout the model.
inline double draw_gamma(Rng& rng, double shape, double rate) {
    return std::gamma_distribution<double>(shape, 1.0 / rate)(rng);
}

} // namespace bmsvm
