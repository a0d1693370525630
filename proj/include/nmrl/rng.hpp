#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace nmrl {

// Deterministic random stream. The engine is std::mt19937_64 (its output
// sequence is fixed by the standard); the value transforms below are
// hand-rolled so that streams are bit-stable across standard library
// implementations, which the reproducibility contract depends on.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t bits() { return eng_(); }

    // Uniform in [0, 1) with 53 random mantissa bits.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; the spare value is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        // Guard against log(0).
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    // Uniform integer in [0, n) by rejection, bias-free.
    std::uint64_t uniform_index(std::uint64_t n) {
        if (n <= 1) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x = eng_();
        while (x >= limit) x = eng_();
        return x % n;
    }

private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// All randomness in a run flows from one root seed through named sub-streams
// (e.g. "init", "tasks", "rollout"). Consuming more values from one stream
// never perturbs another, and streams keyed by (iteration, task) make results
// independent of rollout worker count.
std::uint64_t derive_seed(std::uint64_t root, std::string_view label,
                          std::uint64_t a = 0, std::uint64_t b = 0,
                          std::uint64_t c = 0);

inline Rng derive_rng(std::uint64_t root, std::string_view label,
                      std::uint64_t a = 0, std::uint64_t b = 0,
                      std::uint64_t c = 0) {
    return Rng(derive_seed(root, label, a, b, c));
}

} // namespace nmrl
