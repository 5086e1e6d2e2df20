#pragma once

#include <cstdint>
#include <random>

namespace stein {

// Independent stream for path `index` under master seed `seed`.
inline std::mt19937_64 path_rng(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{std::uint32_t(seed), std::uint32_t(seed >> 32), std::uint32_t(index), std::uint32_t(index >> 32),
                      0x5eedu};
    return std::mt19937_64(seq);
}

}  // namespace stein
