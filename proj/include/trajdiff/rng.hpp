#pragma once

#include <cstdint>

namespace trajdiff {

/// SplitMix64 finalizer; a bijective mix used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed for item `index` of stream `stream` under a base seed.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index)
{
    return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ index);
}

namespace stream {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kTrainStep = 2;
inline constexpr std::uint64_t kEpoch = 3;
inline constexpr std::uint64_t kValidation = 4;
inline constexpr std::uint64_t kSchedule = 5;
inline constexpr std::uint64_t kChain = 6;
}  // namespace stream

}  // namespace trajdiff
