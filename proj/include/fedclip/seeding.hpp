#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace fedclip {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Used to decorrelate structured seed material.
std::uint64_t mix64(std::uint64_t x);

/// 64-bit FNV-1a over the bytes of `text`.
std::uint64_t fnv1a64(std::string_view text);

/// Sub-seed for a named component, e.g. derive_seed(seed, "data").
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag);

/// Sub-seed for an indexed stream, e.g. (client id, round).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

}  // namespace fedclip
