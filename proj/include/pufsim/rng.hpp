#ifndef PUFSIM_RNG_HPP
#define PUFSIM_RNG_HPP

#include <cstdint>
#include <string_view>

namespace pufsim {

// splitmix64 finalizer.
uint64_t mix64(uint64_t x);

// Counter-based deterministic generator: draw n is a pure function of
// (seed, n), so streams are reproducible across platforms and seekable.
// Output n = finalize(seed + (n+1) * golden_gamma), the indexed form of
// splitmix64.
class CounterRng {
public:
    explicit CounterRng(uint64_t seed) : seed_(seed) {}

    uint64_t next_u64();
    uint32_t next_u32() { return uint32_t(next_u64() >> 32); }

    // [0, 1), 53-bit resolution.
    double next_double();
    // (0, 1], safe to feed log().
    double next_double_open();
    // Uniform in [a, b).
    double uniform(double a, double b) { return a + next_double() * (b - a); }
    // Standard normal via Box-Muller; always consumes exactly two draws so
    // the stream layout does not depend on call history.
    double gaussian();

    uint64_t seed() const { return seed_; }
    uint64_t counter() const { return counter_; }
    void set_counter(uint64_t c) { counter_ = c; }

private:
    uint64_t seed_;
    uint64_t counter_ = 0;
};

// Sub-seed fan-out: sha256(master || label || index), first 8 bytes LE.
// Adding a new purpose label never perturbs existing streams.
uint64_t derive_seed(uint64_t master, std::string_view label, uint64_t index);

}  // namespace pufsim

#endif
