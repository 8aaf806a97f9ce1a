#ifndef PUFSIM_METRICS_HPP
#define PUFSIM_METRICS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pufsim/optics.hpp"

namespace pufsim::metrics {

using optics::ComplexField;
using optics::SpeckleImage;

struct GaborParams {
    double kernel_wavelength_px = 8.0;
    double orientation_rad = 0.0;
    double sigma_px = 4.0;
    int kernel_size_px = 21;  // odd

    void validate() const;
    std::string id() const;
};

// Binary response string digitized from a speckle image; row-major flatten.
struct GaborCode {
    std::vector<uint8_t> bits;
    int width = 0, height = 0;
    std::string params_id;

    size_t size() const { return bits.size(); }
};

// Pearson correlation of two images, spatial means over all pixels.
double pearson(const SpeckleImage& a, const SpeckleImage& b);

struct ShiftPearson {
    double r = 0;
    int dx = 0, dy = 0;
};

// Maximum Pearson correlation over integer shifts in [-max_shift, max_shift]^2,
// computed on the overlap region; ties broken by smallest |dx|+|dy|, then
// lexicographic (dx, dy).
ShiftPearson pearson_max_shift(const SpeckleImage& a, const SpeckleImage& b,
                               int max_shift);

std::vector<cdouble> make_gabor_kernel(const GaborParams& params);

// Convolve with the complex Gabor kernel (zero padded, "same" size) and
// threshold the real part at zero. FFT-backed; the direct spatial oracle
// lives in the test suite.
GaborCode gabor_digitize(const SpeckleImage& img, const GaborParams& params);

// Fractional Hamming distance: differing bits / length.
double fhd(const GaborCode& a, const GaborCode& b);

// Pairwise shift-maximized Pearson matrix; unit diagonal.
std::vector<std::vector<double>> correlation_matrix(
    const std::vector<SpeckleImage>& images, int max_shift);

// Highest off-diagonal entry; ties broken by lowest index pair.
struct BestPair {
    int i = 0, j = 1;
    double r = 0;
};
BestPair best_pair(const std::vector<std::vector<double>>& matrix);

struct KdeCurve {
    std::vector<double> x;
    std::vector<double> density;
    double bandwidth = 0;
    bool degenerate = false;
};

// Gaussian-kernel KDE on 512 grid points spanning [min-3h, max+3h];
// Silverman bandwidth unless given. The curve is renormalized to unit
// trapezoid integral over its grid (the raw sum loses the tail mass beyond
// the 3h margins).
KdeCurve kde(const std::vector<double>& samples,
             std::optional<double> bandwidth = std::nullopt);

struct DistributionSummary {
    std::vector<double> samples;
    double mean = 0;
    double stddev = 0;
    KdeCurve kde;
    double threshold_candidate = 0;
};

struct LikeUnlike {
    DistributionSummary like;
    DistributionSummary unlike;
    double threshold = 0;
    double overlap_fraction = 0;
    bool disjoint = false;
};

// Like samples: all pairwise FHDs within like_codes. Unlike samples: all
// FHDs between like_codes and unlike_codes. Threshold at the midpoint of
// the gap when disjoint, else at the KDE crossing between the means.
LikeUnlike like_unlike(const std::vector<GaborCode>& like_codes,
                       const std::vector<GaborCode>& unlike_codes);

struct FidelityBoundReport {
    size_t n = 0;
    size_t n_hc = 0;           // intensity correlation > T_I
    size_t n_lf = 0;           // fidelity < T_F
    size_t n_lf_and_hc = 0;
    double prob_hc = 0;
    double prob_lf = 0;
    double prob_lf_given_hc = 0;
    double prob_hc_given_lf = 0;
    double bound_rhs = 0;      // Prob[HC|LF] / Prob[HC]
    bool identity_holds_on_counts = false;
    bool bound_holds = false;
    bool inconclusive = false;  // no high-correlation events in the sample
};

// Empirical check that high intensity correlation between two structures
// bounds the probability of low mutual fidelity: estimates the event
// probabilities, verifies the Bayes identity exactly on counts, and reports
// whether Prob[LF|HC] <= Prob[HC|LF]/Prob[HC].
FidelityBoundReport fidelity_bound_check(
    const std::vector<std::pair<ComplexField, ComplexField>>& pairs,
    double t_intensity, double t_fidelity);

// CSV emitters; all doubles written with 17 significant digits.
void write_correlation_matrix_csv(const std::vector<std::vector<double>>& m,
                                  const std::string& path);
void write_samples_csv(const std::vector<std::pair<std::string, double>>& rows,
                       const std::string& path);
void write_kde_csv(const KdeCurve& curve, const std::string& path);

}  // namespace pufsim::metrics

#endif
