#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace pclmp {

using Rng = std::mt19937_64;

// Seeds a generator from a tuple of integers (run seed, epoch, step, stream
// tag, ...) so that every random draw is addressable without shared state.
Rng make_rng(std::initializer_list<std::uint64_t> key);

namespace stream {
inline constexpr std::uint64_t kSynthAnchors = 0x11;
inline constexpr std::uint64_t kSynthTransform = 0x12;
inline constexpr std::uint64_t kSynthNoise = 0x13;
inline constexpr std::uint64_t kSynthDistractors = 0x14;
inline constexpr std::uint64_t kEncoderInit = 0x21;
inline constexpr std::uint64_t kBatch = 0x31;
inline constexpr std::uint64_t kDynamicMemory = 0x41;
}  // namespace stream

}  // namespace pclmp
