#include "pufsim/rng.hpp"

#include <cmath>

#include "pufsim/sha256.hpp"

namespace pufsim {

namespace {
constexpr uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ull;
constexpr double kTwoPi = 6.283185307179586476925286766559;
}  // namespace

uint64_t mix64(uint64_t x) {
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ull;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBull;
    x ^= x >> 31;
    return x;
}

uint64_t CounterRng::next_u64() {
    ++counter_;
    return mix64(seed_ + counter_ * kGoldenGamma);
}

double CounterRng::next_double() {
    return double(next_u64() >> 11) * 0x1.0p-53;
}

double CounterRng::next_double_open() {
    return double((next_u64() >> 11) + 1) * 0x1.0p-53;
}

double CounterRng::gaussian() {
    double u1 = next_double_open();
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

uint64_t derive_seed(uint64_t master, std::string_view label, uint64_t index) {
    Sha256 h;
    uint8_t le[8];
    for (int i = 0; i < 8; ++i) le[i] = uint8_t(master >> (8 * i));
    h.update(le, 8);
    h.update(label);
    for (int i = 0; i < 8; ++i) le[i] = uint8_t(index >> (8 * i));
    h.update(le, 8);
    return digest_to_u64(h.finish());
}

}  // namespace pufsim
