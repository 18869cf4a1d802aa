#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace fetseg {

// Deterministic RNG wrapper. mt19937_64 output is fully specified by the
// standard, but the std distributions are not, so bounded draws are done here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next() { return eng_(); }

    // uniform in [0, 1)
    double uniform() { return (next() >> 11) * 0x1.0p-53; }

    // uniform integer in [0, n), n > 0
    std::uint64_t uniform_below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next()) * n) >> 64);
    }

    // uniform integer in [lo, hi] inclusive
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(
                        uniform_below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    double gaussian() {
        // Box-Muller, no state caching so draws stay reproducible
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

private:
    std::mt19937_64 eng_;
};

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ull) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// Per-item sub-seed so parallel per-template work is schedule independent.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view item_id) {
    std::uint64_t h = fnv1a(item_id);
    h ^= base + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    return h;
}

}  // namespace fetseg
