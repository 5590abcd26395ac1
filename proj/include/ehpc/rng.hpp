#pragma once

#include <cstdint>
#include <random>

namespace ehpc {

/// Per-trajectory random stream keyed by (global seed, trajectory index).
///
/// Streams with the same key produce identical draw sequences no matter which
/// thread owns them, so parallel simulations are reproducible bit for bit.
class Stream {
public:
    Stream(std::uint64_t seed, std::uint64_t index) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                          0x9e3779b9u};
        engine_.seed(seq);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() {
        ++draws_;
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    std::uint64_t draws() const noexcept { return draws_; }

private:
    std::mt19937_64 engine_;
    std::uint64_t draws_ = 0;
};

}  // namespace ehpc
