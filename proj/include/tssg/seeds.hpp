#pragma once

#include <cstdint>
#include <string_view>

namespace tssg {

/// Counter-based seed derivation: a master seed is split into labelled,
/// independently indexed sub-streams ("placement", "trajectory", "noise",
/// "clustering", ...). Changing one stream's index leaves the others intact.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stream,
                                 std::uint64_t index = 0) {
    return splitmix64(splitmix64(master ^ fnv1a64(stream)) + splitmix64(index + 1));
}

}  // namespace tssg
