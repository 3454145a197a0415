#pragma once

#include <bit>
#include <cstdint>
#include <string>

namespace nnpf {

// 32-bit finalizer from MurmurHash3; full avalanche on a single word.
inline uint32_t mix32(uint32_t h) {
    h ^= h >> 16;
    h *= 0x85ebca6bu;
    h ^= h >> 13;
    h *= 0xc2b2ae35u;
    h ^= h >> 16;
    return h;
}

// FNV-1a over a byte string. Used for stable config/report hashes.
inline uint64_t fnv1a64(const void* data, size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = 0xcbf29ce484222325ull;
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

// Encode a signed value into `width`-bit two's complement (low bits of the result).
inline uint64_t encode_twos_complement(int64_t value, int width) {
    const uint64_t mask = (width >= 64) ? ~0ull : ((1ull << width) - 1);
    return static_cast<uint64_t>(value) & mask;
}

// Decode `width` low bits as two's complement.
inline int64_t decode_twos_complement(uint64_t bits, int width) {
    const uint64_t mask = (width >= 64) ? ~0ull : ((1ull << width) - 1);
    bits &= mask;
    const uint64_t sign = 1ull << (width - 1);
    if (bits & sign) return static_cast<int64_t>(bits) - static_cast<int64_t>(mask) - 1;
    return static_cast<int64_t>(bits);
}

// Smallest/largest value representable in `width`-bit two's complement.
inline int64_t twos_complement_min(int width) { return -(1ll << (width - 1)); }
inline int64_t twos_complement_max(int width) { return (1ll << (width - 1)) - 1; }

inline int hamming64(uint64_t a, uint64_t b) { return std::popcount(a ^ b); }

}  // namespace nnpf
