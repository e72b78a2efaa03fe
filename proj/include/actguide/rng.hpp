#pragma once

#include <cstdint>
#include <random>

namespace actguide {

using Rng = std::mt19937_64;

/// Generator for one (run, stream) pair; the same pair always yields the same
/// sequence.
inline Rng make_rng(std::uint64_t run_seed, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(run_seed), static_cast<std::uint32_t>(run_seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return Rng(seq);
}

}  // namespace actguide
