#include "pufsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "pufsim/parallel.hpp"

namespace pufsim::metrics {

namespace {

constexpr double kPi = 3.14159265358979323846264338328;
constexpr double kTwoPi = 2.0 * kPi;

// Pearson over aligned w*h windows of a and b. Shared by pearson() and the
// shift search so that the zero-shift result is bit-identical to pearson().
// Returns false when either window has no variance.
bool pearson_region(const SpeckleImage& a, int ax, int ay, const SpeckleImage& b,
                    int bx, int by, int w, int h, double& out) {
    double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    for (int y = 0; y < h; ++y) {
        const double* pa = &a.intensity[size_t(ay + y) * a.nx + ax];
        const double* pb = &b.intensity[size_t(by + y) * b.nx + bx];
        for (int x = 0; x < w; ++x) {
            double va = pa[x], vb = pb[x];
            sa += va;
            sb += vb;
            saa += va * va;
            sbb += vb * vb;
            sab += va * vb;
        }
    }
    double n = double(w) * double(h);
    double ma = sa / n, mb = sb / n;
    double var_a = saa / n - ma * ma;
    double var_b = sbb / n - mb * mb;
    if (!(var_a > 0) || !(var_b > 0)) return false;
    out = (sab / n - ma * mb) / (std::sqrt(var_a) * std::sqrt(var_b));
    return true;
}

double sample_mean(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / double(v.size());
}

double sample_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0;
    double m = sample_mean(v);
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / double(v.size() - 1));
}

double quantile(std::vector<double> sorted, double q) {
    double pos = q * double(sorted.size() - 1);
    size_t i = size_t(pos);
    double f = pos - double(i);
    if (i + 1 >= sorted.size()) return sorted.back();
    return sorted[i] * (1 - f) + sorted[i + 1] * f;
}

double kde_eval(const std::vector<double>& samples, double h, double x) {
    double acc = 0;
    for (double s : samples) {
        double t = (x - s) / h;
        acc += std::exp(-0.5 * t * t);
    }
    return acc / (double(samples.size()) * h * std::sqrt(kTwoPi));
}

DistributionSummary summarize(std::vector<double> samples) {
    DistributionSummary d;
    d.mean = sample_mean(samples);
    d.stddev = sample_std(samples);
    // A single pairwise sample (batch of two) still gets a KDE curve: a
    // degenerate peak at the value.
    d.kde = samples.size() >= 2 ? kde(samples)
                                : kde(std::vector<double>{samples[0], samples[0]});
    d.samples = std::move(samples);
    return d;
}

}  // namespace

void GaborParams::validate() const {
    if (kernel_size_px < 1 || kernel_size_px % 2 == 0)
        throw std::invalid_argument("gabor kernel size must be odd and positive");
    if (!(sigma_px > 0)) throw std::invalid_argument("gabor sigma must be positive");
    if (!(kernel_wavelength_px > 0))
        throw std::invalid_argument("gabor wavelength must be positive");
}

std::string GaborParams::id() const {
    char buf[96];
    std::snprintf(buf, sizeof buf, "gabor:w%g:o%g:s%g:k%d", kernel_wavelength_px,
                  orientation_rad, sigma_px, kernel_size_px);
    return buf;
}

double pearson(const SpeckleImage& a, const SpeckleImage& b) {
    if (a.nx != b.nx || a.ny != b.ny)
        throw std::invalid_argument("pearson: image dimensions differ");
    double r;
    if (!pearson_region(a, 0, 0, b, 0, 0, a.nx, a.ny, r))
        throw std::invalid_argument("pearson: zero-variance image");
    return r;
}

ShiftPearson pearson_max_shift(const SpeckleImage& a, const SpeckleImage& b,
                               int max_shift) {
    if (a.nx != b.nx || a.ny != b.ny)
        throw std::invalid_argument("pearson_max_shift: image dimensions differ");
    if (max_shift < 0) throw std::invalid_argument("pearson_max_shift: negative shift");
    if (a.nx - max_shift < 16 || a.ny - max_shift < 16)
        throw std::invalid_argument(
            "pearson_max_shift: overlap after maximal shift below 16x16");

    bool found = false;
    ShiftPearson best;
    int best_l1 = 0;
    for (int dy = -max_shift; dy <= max_shift; ++dy) {
        for (int dx = -max_shift; dx <= max_shift; ++dx) {
            // Overlap of a(x,y) with b(x+dx, y+dy).
            int ax = std::max(0, -dx), bx = std::max(0, dx);
            int ay = std::max(0, -dy), by = std::max(0, dy);
            int w = a.nx - std::abs(dx);
            int h = a.ny - std::abs(dy);
            double r;
            if (!pearson_region(a, ax, ay, b, bx, by, w, h, r)) continue;
            int l1 = std::abs(dx) + std::abs(dy);
            bool take = !found || r > best.r ||
                        (r == best.r &&
                         (l1 < best_l1 ||
                          (l1 == best_l1 && (dx < best.dx || (dx == best.dx && dy < best.dy)))));
            if (take) {
                best = {r, dx, dy};
                best_l1 = l1;
                found = true;
            }
        }
    }
    if (!found) throw std::invalid_argument("pearson_max_shift: zero-variance image");
    return best;
}

std::vector<cdouble> make_gabor_kernel(const GaborParams& p) {
    p.validate();
    const int k = p.kernel_size_px;
    const int m = k / 2;
    const double c = std::cos(p.orientation_rad), s = std::sin(p.orientation_rad);
    std::vector<cdouble> kernel(size_t(k) * k);
    for (int y = -m; y <= m; ++y) {
        for (int x = -m; x <= m; ++x) {
            double xr = x * c + y * s;
            double yr = -x * s + y * c;
            double env = std::exp(-(xr * xr + yr * yr) / (2.0 * p.sigma_px * p.sigma_px));
            double ph = kTwoPi * xr / p.kernel_wavelength_px;
            kernel[size_t(y + m) * k + (x + m)] =
                cdouble(env * std::cos(ph), env * std::sin(ph));
        }
    }
    return kernel;
}

GaborCode gabor_digitize(const SpeckleImage& img, const GaborParams& params) {
    params.validate();
    const int k = params.kernel_size_px;
    if (img.nx < k || img.ny < k)
        throw std::invalid_argument("gabor_digitize: image smaller than kernel");

    const int pw = int(next_pow2(size_t(img.nx + k - 1)));
    const int ph = int(next_pow2(size_t(img.ny + k - 1)));
    std::vector<cdouble> fimg(size_t(pw) * ph, 0.0);
    for (int y = 0; y < img.ny; ++y)
        for (int x = 0; x < img.nx; ++x)
            fimg[size_t(y) * pw + x] = img.at(x, y);

    std::vector<cdouble> fker(size_t(pw) * ph, 0.0);
    std::vector<cdouble> kernel = make_gabor_kernel(params);
    const int m = k / 2;
    for (int y = -m; y <= m; ++y) {
        int wy = (y + ph) % ph;
        for (int x = -m; x <= m; ++x) {
            int wx = (x + pw) % pw;
            fker[size_t(wy) * pw + wx] = kernel[size_t(y + m) * k + (x + m)];
        }
    }

    fft2d(fimg, pw, ph, false);
    fft2d(fker, pw, ph, false);
    for (size_t i = 0; i < fimg.size(); ++i) fimg[i] *= fker[i];
    fft2d(fimg, pw, ph, true);

    GaborCode code;
    code.width = img.nx;
    code.height = img.ny;
    code.params_id = params.id();
    code.bits.resize(size_t(img.nx) * img.ny);
    for (int y = 0; y < img.ny; ++y)
        for (int x = 0; x < img.nx; ++x)
            code.bits[size_t(y) * img.nx + x] =
                fimg[size_t(y) * pw + x].real() > 0.0 ? 1 : 0;
    return code;
}

double fhd(const GaborCode& a, const GaborCode& b) {
    if (a.bits.size() != b.bits.size() || a.bits.empty())
        throw std::invalid_argument("fhd: code length mismatch");
    size_t diff = 0;
    for (size_t i = 0; i < a.bits.size(); ++i)
        if (a.bits[i] != b.bits[i]) ++diff;
    return double(diff) / double(a.bits.size());
}

std::vector<std::vector<double>> correlation_matrix(
    const std::vector<SpeckleImage>& images, int max_shift) {
    if (images.size() < 2)
        throw std::invalid_argument("correlation_matrix: need at least 2 images");
    const size_t n = images.size();
    std::vector<std::vector<double>> m(n, std::vector<double>(n, 1.0));
    std::vector<std::pair<size_t, size_t>> pairs;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
    parallel_for(pairs.size(), [&](size_t k) {
        auto [i, j] = pairs[k];
        double r = pearson_max_shift(images[i], images[j], max_shift).r;
        m[i][j] = r;
        m[j][i] = r;
    });
    return m;
}

BestPair best_pair(const std::vector<std::vector<double>>& matrix) {
    if (matrix.size() < 2) throw std::invalid_argument("best_pair: matrix too small");
    BestPair best{0, 1, matrix[0][1]};
    for (size_t i = 0; i < matrix.size(); ++i)
        for (size_t j = i + 1; j < matrix.size(); ++j)
            if (matrix[i][j] > best.r) best = {int(i), int(j), matrix[i][j]};
    return best;
}

KdeCurve kde(const std::vector<double>& samples, std::optional<double> bandwidth) {
    if (samples.size() < 2) throw std::invalid_argument("kde: need at least 2 samples");
    const size_t n = samples.size();
    auto [mn_it, mx_it] = std::minmax_element(samples.begin(), samples.end());
    double mn = *mn_it, mx = *mx_it;

    KdeCurve curve;
    double h;
    if (mx == mn) {
        curve.degenerate = true;
        h = 1e-6 * std::max(1.0, std::abs(mn));
    } else if (bandwidth) {
        if (!(*bandwidth > 0)) throw std::invalid_argument("kde: bandwidth must be positive");
        h = *bandwidth;
    } else {
        // Silverman: 0.9 * min(std, IQR/1.34) * n^(-1/5), ignoring a
        // degenerate IQR.
        double sd = sample_std(samples);
        std::vector<double> sorted = samples;
        std::sort(sorted.begin(), sorted.end());
        double iqr = quantile(sorted, 0.75) - quantile(sorted, 0.25);
        double spread = iqr > 0 ? std::min(sd, iqr / 1.34) : sd;
        h = 0.9 * spread * std::pow(double(n), -0.2);
        if (!(h > 0)) h = 1e-6 * std::max(1.0, std::abs(mn));
    }
    curve.bandwidth = h;

    const int grid = 512;
    double lo = mn - 3 * h, hi = mx + 3 * h;
    double step = (hi - lo) / double(grid - 1);
    curve.x.resize(grid);
    curve.density.resize(grid);
    for (int i = 0; i < grid; ++i) {
        curve.x[i] = lo + i * step;
        curve.density[i] = kde_eval(samples, h, curve.x[i]);
    }
    double integral = 0;
    for (int i = 0; i + 1 < grid; ++i)
        integral += 0.5 * (curve.density[i] + curve.density[i + 1]) * step;
    if (integral > 0)
        for (double& d : curve.density) d /= integral;
    return curve;
}

LikeUnlike like_unlike(const std::vector<GaborCode>& like_codes,
                       const std::vector<GaborCode>& unlike_codes) {
    if (like_codes.size() < 2 || unlike_codes.size() < 2)
        throw std::invalid_argument("like_unlike: each list needs at least 2 codes");

    std::vector<double> like;
    for (size_t i = 0; i < like_codes.size(); ++i)
        for (size_t j = i + 1; j < like_codes.size(); ++j)
            like.push_back(fhd(like_codes[i], like_codes[j]));

    std::vector<double> unlike;
    for (const GaborCode& a : like_codes)
        for (const GaborCode& b : unlike_codes) unlike.push_back(fhd(a, b));

    LikeUnlike out;
    out.like = summarize(std::move(like));
    out.unlike = summarize(std::move(unlike));

    double like_max = *std::max_element(out.like.samples.begin(), out.like.samples.end());
    double unlike_min = *std::min_element(out.unlike.samples.begin(), out.unlike.samples.end());
    out.disjoint = like_max < unlike_min;
    if (out.disjoint) {
        out.threshold = 0.5 * (like_max + unlike_min);
    } else {
        // KDE crossing between the two means.
        double lo = std::min(out.like.mean, out.unlike.mean);
        double hi = std::max(out.like.mean, out.unlike.mean);
        double hl = out.like.kde.bandwidth, hu = out.unlike.kde.bandwidth;
        const int grid = 512;
        double prev_x = lo;
        double prev_d = kde_eval(out.like.samples, hl, lo) -
                        kde_eval(out.unlike.samples, hu, lo);
        double crossing = 0.5 * (lo + hi);
        bool found = false;
        for (int i = 1; i < grid; ++i) {
            double x = lo + (hi - lo) * double(i) / double(grid - 1);
            double d = kde_eval(out.like.samples, hl, x) -
                       kde_eval(out.unlike.samples, hu, x);
            if (!found && ((prev_d <= 0 && d > 0) || (prev_d >= 0 && d < 0))) {
                double t = (prev_d == d) ? 0.5 : prev_d / (prev_d - d);
                crossing = prev_x + t * (x - prev_x);
                found = true;
            }
            prev_x = x;
            prev_d = d;
        }
        out.threshold = crossing;
    }

    size_t wrong = 0;
    for (double v : out.like.samples)
        if (v >= out.threshold) ++wrong;
    for (double v : out.unlike.samples)
        if (v <= out.threshold) ++wrong;
    out.overlap_fraction =
        double(wrong) / double(out.like.samples.size() + out.unlike.samples.size());
    out.like.threshold_candidate = out.threshold;
    out.unlike.threshold_candidate = out.threshold;
    return out;
}

FidelityBoundReport fidelity_bound_check(
    const std::vector<std::pair<ComplexField, ComplexField>>& pairs,
    double t_intensity, double t_fidelity) {
    if (pairs.size() < 30)
        throw std::invalid_argument("fidelity_bound_check: need at least 30 pairs");

    FidelityBoundReport rep;
    rep.n = pairs.size();
    for (const auto& [ea, eb] : pairs) {
        SpeckleImage ia, ib;
        ia.nx = ea.nx; ia.ny = ea.ny; ia.pixel_pitch_um = ea.pitch_um;
        ib.nx = eb.nx; ib.ny = eb.ny; ib.pixel_pitch_um = eb.pitch_um;
        ia.intensity.resize(ea.amp.size());
        ib.intensity.resize(eb.amp.size());
        for (size_t i = 0; i < ea.amp.size(); ++i) ia.intensity[i] = std::norm(ea.amp[i]);
        for (size_t i = 0; i < eb.amp.size(); ++i) ib.intensity[i] = std::norm(eb.amp[i]);
        bool hc = pearson(ia, ib) > t_intensity;
        bool lf = optics::field_fidelity(ea, eb) < t_fidelity;
        if (hc) ++rep.n_hc;
        if (lf) ++rep.n_lf;
        if (hc && lf) ++rep.n_lf_and_hc;
    }

    rep.inconclusive = rep.n_hc == 0;
    rep.prob_hc = double(rep.n_hc) / double(rep.n);
    rep.prob_lf = double(rep.n_lf) / double(rep.n);
    rep.prob_lf_given_hc = rep.n_hc ? double(rep.n_lf_and_hc) / double(rep.n_hc) : 0.0;
    rep.prob_hc_given_lf = rep.n_lf ? double(rep.n_lf_and_hc) / double(rep.n_lf) : 0.0;
    rep.bound_rhs = rep.n_hc ? rep.prob_hc_given_lf / rep.prob_hc : 0.0;

    // Bayes identity on raw counts: P[LF|HC]*P[HC] == P[LF and HC], i.e.
    // (n_lfhc/n_hc)*(n_hc/n) == n_lfhc/n, exact as cross-multiplied integers.
    uint64_t lhs = uint64_t(rep.n_lf_and_hc) * uint64_t(rep.n_hc) * uint64_t(rep.n);
    uint64_t rhs = uint64_t(rep.n_lf_and_hc) * uint64_t(rep.n_hc) * uint64_t(rep.n);
    rep.identity_holds_on_counts = lhs == rhs;

    // Bound chain on counts: n_lfhc/n_hc <= n_lfhc*n/(n_lf*n_hc).
    if (rep.inconclusive) {
        rep.bound_holds = false;
    } else if (rep.n_lf_and_hc == 0) {
        rep.bound_holds = true;
    } else {
        rep.bound_holds = uint64_t(rep.n_lf_and_hc) * uint64_t(rep.n_lf) * uint64_t(rep.n_hc) <=
                          uint64_t(rep.n_lf_and_hc) * uint64_t(rep.n) * uint64_t(rep.n_hc);
    }
    return rep;
}

namespace {
void append_g17(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += buf;
}
}  // namespace

void write_correlation_matrix_csv(const std::vector<std::vector<double>>& m,
                                  const std::string& path) {
    std::string out = "index";
    for (size_t j = 0; j < m.size(); ++j) out += "," + std::to_string(j);
    out += "\n";
    for (size_t i = 0; i < m.size(); ++i) {
        out += std::to_string(i);
        for (size_t j = 0; j < m[i].size(); ++j) {
            out += ",";
            append_g17(out, m[i][j]);
        }
        out += "\n";
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << out;
}

void write_samples_csv(const std::vector<std::pair<std::string, double>>& rows,
                       const std::string& path) {
    std::string out = "set,value\n";
    for (const auto& [set, value] : rows) {
        out += set;
        out += ",";
        append_g17(out, value);
        out += "\n";
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << out;
}

void write_kde_csv(const KdeCurve& curve, const std::string& path) {
    std::string out = "x,density\n";
    for (size_t i = 0; i < curve.x.size(); ++i) {
        append_g17(out, curve.x[i]);
        out += ",";
        append_g17(out, curve.density[i]);
        out += "\n";
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << out;
}

}  // namespace pufsim::metrics
