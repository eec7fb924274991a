#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace atl {

// Deterministic RNG. mt19937_64 output is fully specified by the standard,
// and the uniform/normal transforms below are hand-rolled so results do not
// depend on the standard library's distribution implementations.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed == 0 ? 0x9e3779b97f4a7c15ull : seed) {}

    std::uint64_t next() { return gen_(); }

    // [0, 1)
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller, one draw per call (the sine half is discarded so the
    // stream stays position-independent).
    double normal() {
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        constexpr double two_pi = 6.283185307179586476925286766559;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
    }

    std::size_t below(std::size_t n) {
        // Rejection-free modulo bias is irrelevant at these ranges, but the
        // bounded draw keeps shuffles reproducible regardless.
        return static_cast<std::size_t>(gen_() % n);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = below(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    // Independent derived stream; used for per-epoch shuffles and per-model
    // seeds so runs stay reproducible when one stage changes its draw count.
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t salt) {
        std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

  private:
    std::mt19937_64 gen_;
};

} // namespace atl
