#include "pufsim/fft.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace pufsim {

namespace {

constexpr double kPi = 3.14159265358979323846264338328;

struct TwiddleTable {
    // Forward-direction twiddles exp(-i*pi*j/half) for each stage, packed
    // stage by stage; inverse conjugates on the fly.
    std::vector<cdouble> w;
    std::vector<size_t> stage_offset;
};

const TwiddleTable& twiddles_for(size_t n) {
    static std::mutex mu;
    static std::map<size_t, TwiddleTable> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    TwiddleTable t;
    for (size_t len = 2; len <= n; len <<= 1) {
        t.stage_offset.push_back(t.w.size());
        size_t half = len / 2;
        for (size_t j = 0; j < half; ++j) {
            double ang = -kPi * double(j) / double(half);
            t.w.emplace_back(std::cos(ang), std::sin(ang));
        }
    }
    return cache.emplace(n, std::move(t)).first->second;
}

}  // namespace

bool is_pow2(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

size_t next_pow2(size_t n) {
    size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

void fft(cdouble* a, size_t n, bool inverse) {
    if (!is_pow2(n)) throw std::invalid_argument("fft: size must be a power of two");
    if (n == 1) return;
    // Bit-reversal permutation.
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    const TwiddleTable& t = twiddles_for(n);
    size_t stage = 0;
    for (size_t len = 2; len <= n; len <<= 1, ++stage) {
        size_t half = len / 2;
        const cdouble* w = t.w.data() + t.stage_offset[stage];
        for (size_t i = 0; i < n; i += len) {
            for (size_t j = 0; j < half; ++j) {
                cdouble tw = inverse ? std::conj(w[j]) : w[j];
                cdouble u = a[i + j];
                cdouble v = a[i + j + half] * tw;
                a[i + j] = u + v;
                a[i + j + half] = u - v;
            }
        }
    }
    if (inverse) {
        double inv = 1.0 / double(n);
        for (size_t i = 0; i < n; ++i) a[i] *= inv;
    }
}

void fft2d(std::vector<cdouble>& a, int nx, int ny, bool inverse) {
    if (a.size() != size_t(nx) * size_t(ny))
        throw std::invalid_argument("fft2d: size mismatch");
    for (int y = 0; y < ny; ++y) fft(a.data() + size_t(y) * nx, nx, inverse);
    std::vector<cdouble> col(ny);
    for (int x = 0; x < nx; ++x) {
        for (int y = 0; y < ny; ++y) col[y] = a[size_t(y) * nx + x];
        fft(col.data(), ny, inverse);
        for (int y = 0; y < ny; ++y) a[size_t(y) * nx + x] = col[y];
    }
}

}  // namespace pufsim
