#pragma once

#include <cstdint>
#include <random>

namespace burgers {

using Rng = std::mt19937_64;

/// Independent stream for work unit `index` of an experiment seeded by `master`.
///
/// The stream depends only on (master, index, tag), never on the worker that
/// runs it, so ensemble results do not depend on scheduling.
inline Rng substream(std::uint64_t master, std::uint64_t index, std::uint64_t tag = 0) {
    std::seed_seq seq{
        static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
        static_cast<std::uint32_t>(index),  static_cast<std::uint32_t>(index >> 32),
        static_cast<std::uint32_t>(tag),    static_cast<std::uint32_t>(tag >> 32)};
    return Rng(seq);
}

// Stream tags keep estimators that share a master seed from sharing noise by accident.
namespace stream_tag {
inline constexpr std::uint64_t paths = 0x5041544855ULL;
inline constexpr std::uint64_t isometry = 0x49534f4dULL;
inline constexpr std::uint64_t sampler_check = 0x53414d50ULL;
inline constexpr std::uint64_t picard = 0x50494341ULL;
} // namespace stream_tag

} // namespace burgers
