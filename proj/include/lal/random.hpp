#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace lal {

/// Engine used everywhere a random stream is needed.
using Rng = std::mt19937_64;

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline constexpr std::uint64_t hash_tag(std::string_view tag) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace detail {
inline constexpr std::uint64_t mix_key(std::uint64_t state, std::uint64_t key) noexcept {
    return splitmix64(state ^ splitmix64(key + 0x632be59bd9b4e019ULL));
}
inline constexpr std::uint64_t mix_key(std::uint64_t state, std::string_view key) noexcept {
    return mix_key(state, hash_tag(key));
}
}  // namespace detail

/// Child seed from a parent seed and an ordered list of integer or string keys.
/// The result depends only on the arguments, so independent tasks can derive
/// their streams without coordinating.
template <class... Keys>
constexpr std::uint64_t derive_seed(std::uint64_t parent, const Keys&... keys) noexcept {
    std::uint64_t state = splitmix64(parent);
    ((state = detail::mix_key(state, keys)), ...);
    return state;
}

template <class... Keys>
Rng make_rng(std::uint64_t parent, const Keys&... keys) {
    return Rng(derive_seed(parent, keys...));
}

}  // namespace lal
