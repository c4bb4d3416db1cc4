#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace plab {

// FNV-1a, used for run-manifest integrity stamps and per-job seed derivation.
inline uint64_t fnv1a(std::string_view bytes, uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t fnv1a_combine(uint64_t h, uint64_t value) {
    for (int i = 0; i < 8; ++i) {
        h ^= (value >> (8 * i)) & 0xff;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hash_hex(uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

// Stable seed for an independent job, keyed by a label such as
// "induce/P03/disc/seed5". Jobs keep their streams regardless of the order
// the scheduler runs them in.
inline uint64_t derive_seed(uint64_t root_seed, std::string_view label) {
    return fnv1a(label, fnv1a_combine(0xcbf29ce484222325ull, root_seed));
}

} // namespace plab
