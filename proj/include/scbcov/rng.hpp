#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace scbcov::rng {

/// Stream tags keep the draws of different pipeline stages disjoint.
enum class Stream : std::uint64_t {
    scores = 1,
    noise = 2,
    gp = 3,
    zeta = 4,
};

/// Builds an engine whose state is a pure function of the seed and the
/// substream path, e.g. (seed, replicate, Stream::noise). Adding replicates
/// or subjects therefore never perturbs existing streams.
inline std::mt19937_64 make_engine(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::vector<std::uint32_t> words;
    words.reserve(2 + 2 * path.size());
    words.push_back(static_cast<std::uint32_t>(seed));
    words.push_back(static_cast<std::uint32_t>(seed >> 32));
    for (auto p : path) {
        words.push_back(static_cast<std::uint32_t>(p));
        words.push_back(static_cast<std::uint32_t>(p >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    return std::mt19937_64(seq);
}

inline std::uint64_t tag(Stream s) { return static_cast<std::uint64_t>(s); }

}  // namespace scbcov::rng
