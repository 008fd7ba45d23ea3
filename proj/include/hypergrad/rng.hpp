#pragma once

#include <cstdint>
#include <random>

namespace hypergrad {

/// Seedable generator with reproducible output on a given platform.
///
/// Engine bits come from std::mt19937_64 (fully specified by the standard);
/// uniform and gaussian draws are built on top of the raw bits here rather
/// than through std::*_distribution, whose algorithms are
/// implementation-defined. Gaussians use Box-Muller, so streams are
/// bit-stable per platform and agree across platforms up to libm rounding.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform double in [0, 1), 53 random bits.
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Standard normal draw (Box-Muller, pair cached).
    double gaussian();

    /// Uniform integer in [0, n), rejection sampled (no modulo bias).
    std::uint64_t uniform_below(std::uint64_t n);

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Derives the seed of substream `stream` from a master seed (splitmix64
/// chain). Distinct streams of the same master seed are independent for all
/// practical purposes; the mapping is pure, so generation is reproducible.
std::uint64_t substream_seed(std::uint64_t master_seed, std::uint64_t stream);

/// Convenience: a generator positioned on the given substream.
inline Rng substream(std::uint64_t master_seed, std::uint64_t stream) {
    return Rng(substream_seed(master_seed, stream));
}

} // namespace hypergrad
