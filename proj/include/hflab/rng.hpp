// Counter-based random numbers: Philox4x32-10 keyed by a 64-bit seed.
// Every draw is a pure function of (seed, path, stream, index), so ensembles are
// reproducible independently of evaluation order.

#pragma once

#include <array>
#include <cstdint>

namespace hflab {

using PhiloxBlock = std::array<std::uint32_t, 4>;

PhiloxBlock philox4x32(PhiloxBlock counter, std::array<std::uint32_t, 2> key);

class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t path, std::uint32_t stream);

    /// Uniform on (0, 1) with 53 random bits; index selects the draw.
    double uniform(std::uint64_t index) const;
    /// Standard normal by Box-Muller on the pair of uniforms of the block.
    double normal(std::uint64_t index) const;

private:
    PhiloxBlock block(std::uint64_t block_index) const;
    std::array<std::uint32_t, 2> key_;
    std::uint32_t path_lo_;
    std::uint32_t stream_;
};

}  // namespace hflab
