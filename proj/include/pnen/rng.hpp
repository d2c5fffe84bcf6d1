#ifndef PNEN_RNG_HPP_
#define PNEN_RNG_HPP_

#include <cstdint>
#include <random>

namespace pnen {

// mt19937_64 engine with hand-rolled draws. std::*_distribution is
// implementation-defined, so generating the values ourselves keeps seeded
// streams reproducible across standard libraries.
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    // Derives an independent stream from (seed, stream id).
    Rng(uint64_t seed, uint64_t stream) : eng_(mix(seed, stream)) {}

    uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Modulo bias is negligible for n << 2^64.
    uint64_t below(uint64_t n) { return n > 0 ? next_u64() % n : 0; }

    bool coin() { return (next_u64() >> 63) != 0; }

    // Standard normal via Box-Muller; caches the second value of each pair.
    double normal();

    static uint64_t mix(uint64_t a, uint64_t b);

private:
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace pnen

#endif  // PNEN_RNG_HPP_
