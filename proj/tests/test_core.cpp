#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "pufsim/fft.hpp"
#include "pufsim/rng.hpp"
#include "pufsim/sha256.hpp"

using namespace pufsim;

TEST_CASE("sha256 known vectors") {
    // FIPS 180-4 test vectors.
    CHECK(hex_encode(Sha256::hash("abc").data(), 32) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(hex_encode(Sha256::hash("").data(), 32) ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(hex_encode(Sha256::hash("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq").data(), 32) ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
}

TEST_CASE("sha256 streaming equals one-shot") {
    std::string data(1000, 'x');
    Sha256 h;
    for (size_t i = 0; i < data.size(); i += 7)
        h.update(data.data() + i, std::min<size_t>(7, data.size() - i));
    CHECK(h.finish() == Sha256::hash(data));
}

TEST_CASE("counter rng is stateless in the counter") {
    CounterRng a(42), b(42);
    for (int i = 0; i < 100; ++i) a.next_u64();
    b.set_counter(100);
    CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("counter rng streams differ by seed") {
    CounterRng a(1), b(2);
    int same = 0;
    for (int i = 0; i < 64; ++i)
        if (a.next_u64() == b.next_u64()) ++same;
    CHECK(same == 0);
}

TEST_CASE("uniform doubles live in [0,1)") {
    CounterRng rng(7);
    double mn = 1, mx = 0, acc = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        double v = rng.next_double();
        mn = std::min(mn, v);
        mx = std::max(mx, v);
        acc += v;
    }
    CHECK(mn >= 0.0);
    CHECK(mx < 1.0);
    CHECK(acc / n == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("gaussian moments") {
    CounterRng rng(11);
    const int n = 100000;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
        double v = rng.gaussian();
        s += v;
        s2 += v * v;
    }
    double mean = s / n;
    double var = s2 / n - mean * mean;
    CHECK(std::abs(mean) < 0.02);
    CHECK(var == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("derive_seed separates labels and indices") {
    uint64_t a = derive_seed(1, "batch", 0);
    CHECK(a == derive_seed(1, "batch", 0));
    CHECK(a != derive_seed(1, "batch", 1));
    CHECK(a != derive_seed(1, "other", 0));
    CHECK(a != derive_seed(2, "batch", 0));
}

TEST_CASE("fft inverts itself") {
    CounterRng rng(3);
    std::vector<cdouble> data(256);
    for (cdouble& v : data) v = cdouble(rng.next_double() - 0.5, rng.next_double() - 0.5);
    std::vector<cdouble> orig = data;
    fft(data.data(), data.size(), false);
    fft(data.data(), data.size(), true);
    for (size_t i = 0; i < data.size(); ++i)
        CHECK(std::abs(data[i] - orig[i]) < 1e-12);
}

TEST_CASE("fft matches the direct DFT") {
    CounterRng rng(5);
    const int n = 64;
    std::vector<cdouble> data(n);
    for (cdouble& v : data) v = cdouble(rng.next_double() - 0.5, rng.next_double() - 0.5);
    std::vector<cdouble> ref(n);
    const double two_pi = 6.283185307179586;
    for (int k = 0; k < n; ++k) {
        cdouble acc = 0;
        for (int j = 0; j < n; ++j) {
            double ang = -two_pi * double(k) * double(j) / n;
            acc += data[j] * cdouble(std::cos(ang), std::sin(ang));
        }
        ref[k] = acc;
    }
    fft(data.data(), n, false);
    for (int k = 0; k < n; ++k) CHECK(std::abs(data[k] - ref[k]) < 1e-10);
}

TEST_CASE("fft preserves power (Parseval)") {
    CounterRng rng(9);
    const int nx = 64, ny = 32;
    std::vector<cdouble> grid(size_t(nx) * ny);
    for (cdouble& v : grid) v = cdouble(rng.gaussian(), rng.gaussian());
    double p0 = 0;
    for (const cdouble& v : grid) p0 += std::norm(v);
    fft2d(grid, nx, ny, false);
    double p1 = 0;
    for (const cdouble& v : grid) p1 += std::norm(v);
    CHECK(p1 / (double(nx) * ny) == doctest::Approx(p0).epsilon(1e-12));
    fft2d(grid, nx, ny, true);
    double p2 = 0;
    for (const cdouble& v : grid) p2 += std::norm(v);
    CHECK(p2 == doctest::Approx(p0).epsilon(1e-12));
}

TEST_CASE("fft rejects non-power-of-two sizes") {
    std::vector<cdouble> data(12);
    CHECK_THROWS_AS(fft(data.data(), data.size(), false), std::invalid_argument);
}
