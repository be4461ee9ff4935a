#pragma once

// Keyed random streams. Every independent unit of simulation work (a BSGU time
// block, a user's dark-count process, a calibration voltage point) derives its
// own generator from (seed, domain, a, b), so results do not depend on how the
// work is scheduled across threads.

#include <bit>
#include <cstdint>
#include <initializer_list>
#include <limits>

namespace cedn {

inline constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept
{
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

enum class RngDomain : std::uint64_t {
    pairs = 1,
    dark = 2,
    sweep = 3,
    sampling = 4,
    test = 99,
};

/// xoshiro256** seeded by hashing a key; satisfies UniformRandomBitGenerator.
class KeyedRng {
public:
    using result_type = std::uint64_t;

    KeyedRng(std::uint64_t seed, RngDomain domain, std::uint64_t a = 0, std::uint64_t b = 0) noexcept
    {
        std::uint64_t h = seed;
        for (std::uint64_t k : {static_cast<std::uint64_t>(domain), a, b}) {
            h ^= k + 0x632be59bd9b4e019ULL + (h << 6) + (h >> 2);
            splitmix64(h);
        }
        for (auto& w : s_) w = splitmix64(h);
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept
    {
        const std::uint64_t result = std::rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = std::rotl(s_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1).
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t s_[4]{};
};

} // namespace cedn
