#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "pufsim/metrics.hpp"
#include "pufsim/rng.hpp"

using namespace pufsim;
using metrics::GaborCode;
using metrics::GaborParams;
using optics::SpeckleImage;

namespace {

SpeckleImage random_image(uint64_t seed, int n, double scale = 1.0) {
    SpeckleImage img;
    img.nx = img.ny = n;
    img.pixel_pitch_um = 0.1;
    img.intensity.resize(size_t(n) * n);
    CounterRng rng(seed);
    for (double& v : img.intensity) v = scale * rng.next_double();
    return img;
}

// NA-filtered diffuser intensity: a synthetic speckle image without any
// propagation in the loop.
SpeckleImage synthetic_speckle(uint64_t seed, int crop) {
    optics::OpticsConfig cfg;
    cfg.grid_nx = cfg.grid_ny = 128;
    cfg.pitch_um = 0.12;
    cfg.rotation_deg = 0;
    cfg.crop_px = crop;
    optics::ComplexField f =
        optics::make_challenge_field(optics::Challenge::random(seed), cfg);
    return optics::image_response(f, cfg);
}

// Direct spatial convolution oracle, independent of the FFT route: its own
// kernel evaluation and a plain quadruple loop.
std::vector<uint8_t> gabor_bits_direct(const SpeckleImage& img, const GaborParams& p) {
    const int k = p.kernel_size_px;
    const int m = k / 2;
    std::vector<uint8_t> bits(size_t(img.nx) * img.ny);
    for (int y = 0; y < img.ny; ++y) {
        for (int x = 0; x < img.nx; ++x) {
            double re = 0;
            for (int v = -m; v <= m; ++v) {
                for (int u = -m; u <= m; ++u) {
                    int sx = x - u, sy = y - v;
                    if (sx < 0 || sx >= img.nx || sy < 0 || sy >= img.ny) continue;
                    double xr = u * std::cos(p.orientation_rad) + v * std::sin(p.orientation_rad);
                    double yr = -u * std::sin(p.orientation_rad) + v * std::cos(p.orientation_rad);
                    double env = std::exp(-(xr * xr + yr * yr) /
                                          (2.0 * p.sigma_px * p.sigma_px));
                    re += img.at(sx, sy) * env *
                          std::cos(2.0 * 3.14159265358979324 * xr / p.kernel_wavelength_px);
                }
            }
            bits[size_t(y) * img.nx + x] = re > 0.0 ? 1 : 0;
        }
    }
    return bits;
}

}  // namespace

TEST_CASE("pearson of an image with itself is 1") {
    SpeckleImage a = random_image(1, 64);
    CHECK(metrics::pearson(a, a) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pearson is invariant under positive affine maps, flips sign under negative") {
    SpeckleImage a = random_image(2, 64);
    SpeckleImage b = a;
    for (double& v : b.intensity) v = 3.0 * v + 1.5;
    CHECK(metrics::pearson(a, b) == doctest::Approx(1.0).epsilon(1e-12));
    for (double& v : b.intensity) v = -v;
    CHECK(metrics::pearson(a, b) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("pearson rejects constant images") {
    SpeckleImage a = random_image(3, 32);
    SpeckleImage c = a;
    for (double& v : c.intensity) v = 0.7;
    CHECK_THROWS_AS(metrics::pearson(a, c), std::invalid_argument);
    CHECK_THROWS_AS(metrics::pearson(c, a), std::invalid_argument);
}

TEST_CASE("pearson is exactly symmetric") {
    SpeckleImage a = random_image(4, 48);
    SpeckleImage b = random_image(5, 48);
    CHECK(metrics::pearson(a, b) == metrics::pearson(b, a));
}

TEST_CASE("shift search recovers an exact integer displacement") {
    SpeckleImage a = random_image(6, 96);
    // b holds a's content displaced by (+3, -2).
    SpeckleImage b = a;
    for (double& v : b.intensity) v = 0;
    for (int y = 0; y < 96; ++y) {
        for (int x = 0; x < 96; ++x) {
            int tx = x + 3, ty = y - 2;
            if (tx >= 0 && tx < 96 && ty >= 0 && ty < 96)
                b.at(tx, ty) = a.at(x, y);
        }
    }
    metrics::ShiftPearson r = metrics::pearson_max_shift(a, b, 5);
    CHECK(r.dx == 3);
    CHECK(r.dy == -2);
    CHECK(r.r == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("zero max_shift reduces to plain pearson, bit for bit") {
    SpeckleImage a = random_image(7, 64);
    SpeckleImage b = random_image(8, 64);
    CHECK(metrics::pearson_max_shift(a, b, 0).r == metrics::pearson(a, b));
}

TEST_CASE("shift of an image against itself peaks at the origin") {
    SpeckleImage a = synthetic_speckle(9, 96);
    metrics::ShiftPearson r = metrics::pearson_max_shift(a, a, 6);
    CHECK(r.dx == 0);
    CHECK(r.dy == 0);
    CHECK(r.r == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("independent speckles decorrelate under the shift search") {
    SpeckleImage a = synthetic_speckle(10, 125);
    SpeckleImage b = synthetic_speckle(11, 125);
    CHECK(metrics::pearson_max_shift(a, b, 10).r < 0.3);
}

TEST_CASE("shift search enforces the 16x16 overlap floor") {
    SpeckleImage a = random_image(12, 20);
    SpeckleImage b = random_image(13, 20);
    CHECK_THROWS_AS(metrics::pearson_max_shift(a, b, 5), std::invalid_argument);
    CHECK_NOTHROW(metrics::pearson_max_shift(a, b, 4));
}

TEST_CASE("gabor digitization of a zero image is all zero bits") {
    SpeckleImage z;
    z.nx = z.ny = 32;
    z.pixel_pitch_um = 0.1;
    z.intensity.assign(32 * 32, 0.0);
    GaborCode code = metrics::gabor_digitize(z, GaborParams{});
    for (uint8_t b : code.bits) CHECK(b == 0);
}

TEST_CASE("a matched grating produces alternating bit bands") {
    GaborParams p;  // wavelength 8 px, orientation 0
    SpeckleImage g;
    g.nx = g.ny = 64;
    g.pixel_pitch_um = 0.1;
    g.intensity.resize(64 * 64);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x)
            g.at(x, y) = 1.0 + std::sin(2.0 * 3.14159265358979324 * x / 8.0);
    GaborCode code = metrics::gabor_digitize(g, p);
    // Bits vary only along x and repeat with the 8 px grating period;
    // the kernel's DC response widens the positive band, so both bit
    // values must occur inside every period (checked away from the
    // zero-padded borders).
    for (int y = 16; y < 48; ++y) {
        for (int x = 16; x < 40; ++x) {
            CHECK(code.bits[size_t(y) * 64 + x] == code.bits[size_t(31) * 64 + x]);
            CHECK(code.bits[size_t(y) * 64 + x] == code.bits[size_t(y) * 64 + x + 8]);
        }
    }
    for (int x0 = 16; x0 < 40; x0 += 8) {
        int ones = 0;
        for (int x = x0; x < x0 + 8; ++x) ones += code.bits[size_t(31) * 64 + x];
        CHECK(ones > 0);
        CHECK(ones < 8);
    }
}

TEST_CASE("FFT and direct convolution digitize identically") {
    GaborParams p;
    for (uint64_t seed = 0; seed < 10; ++seed) {
        SpeckleImage img = random_image(100 + seed, 64);
        GaborCode fft_code = metrics::gabor_digitize(img, p);
        CHECK(fft_code.bits == gabor_bits_direct(img, p));
    }
}

TEST_CASE("gabor bits are invariant under positive scaling") {
    SpeckleImage img = synthetic_speckle(14, 64);
    GaborCode a = metrics::gabor_digitize(img, GaborParams{});
    for (double& v : img.intensity) v *= 37.5;
    GaborCode b = metrics::gabor_digitize(img, GaborParams{});
    CHECK(a.bits == b.bits);
}

TEST_CASE("gabor rejects images smaller than the kernel") {
    SpeckleImage img = random_image(15, 16);
    GaborParams p;  // kernel 21 px
    CHECK_THROWS_AS(metrics::gabor_digitize(img, p), std::invalid_argument);
}

TEST_CASE("fhd basics and random-code statistics") {
    GaborCode a, b;
    a.width = b.width = 100;
    a.height = b.height = 100;
    a.bits.assign(10000, 0);
    b.bits.assign(10000, 0);
    CounterRng rng(16);
    for (size_t i = 0; i < a.bits.size(); ++i) a.bits[i] = uint8_t(rng.next_u64() & 1);
    b = a;
    CHECK(metrics::fhd(a, b) == 0.0);
    for (uint8_t& v : b.bits) v ^= 1;
    CHECK(metrics::fhd(a, b) == 1.0);

    for (size_t i = 0; i < b.bits.size(); ++i) b.bits[i] = uint8_t(rng.next_u64() & 1);
    CHECK(metrics::fhd(a, b) == doctest::Approx(0.5).epsilon(0.03));  // 3 sigma = 0.015

    GaborCode short_code = a;
    short_code.bits.resize(5000);
    CHECK_THROWS_AS(metrics::fhd(a, short_code), std::invalid_argument);
}

TEST_CASE("fhd is a metric on random triples") {
    CounterRng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        GaborCode a, b, c;
        a.width = b.width = c.width = 32;
        a.height = b.height = c.height = 32;
        a.bits.resize(1024);
        b.bits.resize(1024);
        c.bits.resize(1024);
        for (size_t i = 0; i < 1024; ++i) {
            a.bits[i] = uint8_t(rng.next_u64() & 1);
            b.bits[i] = uint8_t(rng.next_u64() & 1);
            c.bits[i] = uint8_t(rng.next_u64() & 1);
        }
        double ab = metrics::fhd(a, b), ba = metrics::fhd(b, a);
        double ac = metrics::fhd(a, c), cb = metrics::fhd(c, b);
        CHECK(ab == ba);
        CHECK(metrics::fhd(a, a) == 0.0);
        CHECK(ab <= ac + cb + 1e-15);
    }
}

TEST_CASE("correlation matrix of two identical images is all ones") {
    SpeckleImage img = synthetic_speckle(18, 64);
    auto m = metrics::correlation_matrix({img, img}, 3);
    CHECK(m[0][0] == 1.0);
    CHECK(m[1][1] == 1.0);
    CHECK(m[0][1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m[0][1] == m[1][0]);
}

TEST_CASE("correlation matrix is symmetric with unit diagonal") {
    std::vector<SpeckleImage> images;
    for (uint64_t s = 0; s < 4; ++s) images.push_back(synthetic_speckle(30 + s, 64));
    auto m = metrics::correlation_matrix(images, 5);
    for (size_t i = 0; i < 4; ++i) {
        CHECK(m[i][i] == 1.0);
        for (size_t j = 0; j < 4; ++j) CHECK(m[i][j] == m[j][i]);
    }
}

TEST_CASE("kde flags a degenerate sample and peaks there") {
    metrics::KdeCurve curve = metrics::kde({0.0, 0.0, 0.0});
    CHECK(curve.degenerate);
    auto peak = std::max_element(curve.density.begin(), curve.density.end());
    size_t idx = size_t(peak - curve.density.begin());
    CHECK(std::abs(curve.x[idx]) < 1e-5);
}

TEST_CASE("kde of a standard normal sample matches the density at zero") {
    CounterRng rng(19);
    std::vector<double> samples(10000);
    for (double& v : samples) v = rng.gaussian();
    metrics::KdeCurve curve = metrics::kde(samples);
    // Interpolate the curve at x = 0.
    double at0 = 0;
    for (size_t i = 0; i + 1 < curve.x.size(); ++i) {
        if (curve.x[i] <= 0 && 0 <= curve.x[i + 1]) {
            double t = (0 - curve.x[i]) / (curve.x[i + 1] - curve.x[i]);
            at0 = curve.density[i] * (1 - t) + curve.density[i + 1] * t;
            break;
        }
    }
    double expected = 1.0 / std::sqrt(2.0 * 3.14159265358979324);
    CHECK(std::abs(at0 - expected) / expected < 0.05);
}

TEST_CASE("kde integrates to one and is nonnegative") {
    CounterRng rng(20);
    std::vector<double> samples(500);
    for (double& v : samples) v = rng.next_double() * 3 + (rng.next_u64() % 2 ? 2.0 : 0.0);
    metrics::KdeCurve curve = metrics::kde(samples);
    double integral = 0;
    for (size_t i = 0; i + 1 < curve.x.size(); ++i) {
        CHECK(curve.density[i] >= 0.0);
        integral += 0.5 * (curve.density[i] + curve.density[i + 1]) *
                    (curve.x[i + 1] - curve.x[i]);
    }
    CHECK(integral == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("like/unlike with identical and complementary codes") {
    GaborCode base;
    base.width = base.height = 10;
    base.bits.assign(100, 0);
    CounterRng rng(21);
    for (auto& b : base.bits) b = uint8_t(rng.next_u64() & 1);
    GaborCode comp = base;
    for (auto& b : comp.bits) b ^= 1;

    std::vector<GaborCode> like = {base, base, base};
    std::vector<GaborCode> unlike = {comp, comp};
    metrics::LikeUnlike lu = metrics::like_unlike(like, unlike);
    CHECK(lu.like.mean == 0.0);
    CHECK(lu.unlike.mean == 1.0);
    CHECK(lu.threshold == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(lu.disjoint);
    CHECK(lu.overlap_fraction == 0.0);
}

TEST_CASE("like/unlike reports a crossing threshold for overlapping sets") {
    // Codes arranged so the like and unlike FHD samples interleave.
    CounterRng rng(22);
    auto make_code = [&](double flip_prob, const GaborCode& from) {
        GaborCode c = from;
        for (auto& b : c.bits)
            if (rng.next_double() < flip_prob) b ^= 1;
        return c;
    };
    GaborCode base;
    base.width = base.height = 40;
    base.bits.assign(1600, 0);
    for (auto& b : base.bits) b = uint8_t(rng.next_u64() & 1);
    std::vector<GaborCode> like, unlike;
    for (int i = 0; i < 4; ++i) like.push_back(make_code(0.12, base));
    for (int i = 0; i < 4; ++i) unlike.push_back(make_code(0.30, base));
    metrics::LikeUnlike lu = metrics::like_unlike(like, unlike);
    CHECK(lu.threshold > lu.like.mean);
    CHECK(lu.threshold < lu.unlike.mean);
}

TEST_CASE("fidelity bound on identical pairs") {
    optics::OpticsConfig cfg;
    cfg.grid_nx = cfg.grid_ny = 32;
    cfg.pitch_um = 0.2;
    std::vector<std::pair<optics::ComplexField, optics::ComplexField>> pairs;
    for (int i = 0; i < 30; ++i) {
        optics::ComplexField f =
            optics::make_challenge_field(optics::Challenge::random(uint64_t(i)), cfg);
        pairs.emplace_back(f, f);
    }
    metrics::FidelityBoundReport rep = metrics::fidelity_bound_check(pairs, 0.7, 0.5);
    CHECK(rep.prob_hc == 1.0);
    CHECK(rep.prob_lf == 0.0);
    CHECK(rep.prob_lf_given_hc == 0.0);
    CHECK(rep.identity_holds_on_counts);
    CHECK(rep.bound_holds);
    CHECK(!rep.inconclusive);
}

TEST_CASE("fidelity bound requires 30 pairs") {
    std::vector<std::pair<optics::ComplexField, optics::ComplexField>> pairs(5);
    CHECK_THROWS_AS(metrics::fidelity_bound_check(pairs, 0.7, 0.5), std::invalid_argument);
}

TEST_CASE("csv emitters produce the documented headers") {
    metrics::write_correlation_matrix_csv({{1.0, 0.5}, {0.5, 1.0}}, "m.csv");
    metrics::write_samples_csv({{"like", 0.1}, {"unlike", 0.5}}, "s.csv");
    metrics::KdeCurve curve = metrics::kde({0.0, 1.0, 2.0, 3.0});
    metrics::write_kde_csv(curve, "k.csv");

    auto read = [](const char* path) {
        std::FILE* f = std::fopen(path, "rb");
        REQUIRE(f);
        char line[256] = {0};
        REQUIRE(std::fgets(line, sizeof line, f));
        std::fclose(f);
        std::remove(path);
        return std::string(line);
    };
    CHECK(read("m.csv") == "index,0,1\n");
    CHECK(read("s.csv") == "set,value\n");
    CHECK(read("k.csv") == "x,density\n");
}
