#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace persense {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// FNV-1a, used to turn stream names into stream ids.
inline constexpr std::uint64_t stream_id(std::string_view name) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (char c : name) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

/// Counter-based generator: output i of stream (seed, stream, index) is a
/// pure function of those values, so any provider can be re-run in isolation.
/// Distributions are implemented here rather than via <random> so results do
/// not depend on the standard library vendor.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) noexcept
        : key_(splitmix64(seed ^ splitmix64(stream ^ splitmix64(index)))) {}
    CounterRng(std::uint64_t seed, std::string_view stream, std::uint64_t index = 0) noexcept
        : CounterRng(seed, stream_id(stream), index) {}

    std::uint64_t next() noexcept { return splitmix64(key_ + 0x9E3779B97F4A7C15ull * ++counter_); }

    /// Uniform in [0, 1).
    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller.
    double normal() noexcept {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    bool bernoulli(double p) noexcept { return uniform() < p; }

    /// Uniform integer in [lo, hi].
    int uniform_int(int lo, int hi) noexcept {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(next() % span);
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace persense
