#include "symrl/seed.hpp"

namespace symrl {

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t parent, std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = mix64(parent);
    for (std::uint64_t p : path)
        h = mix64(h ^ mix64(p + 0x632be59bd9b4e019ULL));
    return h;
}

std::uint64_t derive_seed(std::uint64_t parent, std::string_view label, std::initializer_list<std::uint64_t> path) {
    // FNV-1a over the label.
    std::uint64_t tag = 0xcbf29ce484222325ULL;
    for (unsigned char c : label) {
        tag ^= c;
        tag *= 0x100000001b3ULL;
    }
    return derive_seed(mix64(parent) ^ tag, path);
}

} // namespace symrl
