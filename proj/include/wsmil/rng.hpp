#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace wsmil {

// Independent generator for a (seed, stream...) tuple, e.g. (run seed, epoch)
// or (dataset seed, slide index), so that work can be reordered or split
// without changing any draw.
inline std::mt19937_64 derive_rng(std::initializer_list<std::uint64_t> keys) {
    std::vector<std::uint32_t> words;
    words.reserve(keys.size() * 2);
    for (auto k : keys) {
        words.push_back(static_cast<std::uint32_t>(k));
        words.push_back(static_cast<std::uint32_t>(k >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    return std::mt19937_64(seq);
}

} // namespace wsmil
