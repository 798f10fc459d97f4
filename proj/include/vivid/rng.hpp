#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace vivid {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Stream ids for the per-consumer sub-seeds derived from one run seed.
/// Keeping consumers on independent streams makes each one's draws
/// insensitive to whether the others ran at all.
enum class SeedStream : std::uint64_t {
    LatentInit = 1,
    StepNoise = 2,
};

inline std::uint64_t derive_seed(std::uint64_t master, SeedStream stream, std::uint64_t counter = 0) {
    std::uint64_t h = splitmix64(master ^ splitmix64(static_cast<std::uint64_t>(stream)));
    return splitmix64(h ^ splitmix64(counter));
}

/// Standard-normal generator: mt19937_64 + Box-Muller. The engine is
/// bit-exact across platforms by the C++ standard, and the transform is
/// spelled out here so draws do not depend on the stdlib's distribution.
class GaussianRng {
public:
    explicit GaussianRng(std::uint64_t seed) : engine_(seed) {}

    double next() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        // u1 in (0,1], u2 in [0,1)
        const double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
        const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace vivid
