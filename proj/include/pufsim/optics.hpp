#ifndef PUFSIM_OPTICS_HPP
#define PUFSIM_OPTICS_HPP

#include <cstdint>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "pufsim/fabrication.hpp"
#include "pufsim/fft.hpp"

namespace pufsim::optics {

// 2D complex amplitude at a transverse plane; x-fastest layout.
struct ComplexField {
    int nx = 0, ny = 0;
    double pitch_um = 0;
    double wavelength_um = 0;
    std::vector<cdouble> amp;

    cdouble at(int x, int y) const { return amp[size_t(y) * nx + x]; }
    cdouble& at(int x, int y) { return amp[size_t(y) * nx + x]; }
};

// Nonnegative intensity image, the PUF response as a camera sees it.
struct SpeckleImage {
    int nx = 0, ny = 0;
    double pixel_pitch_um = 0;
    std::vector<double> intensity;

    double at(int x, int y) const { return intensity[size_t(y) * nx + x]; }
    double& at(int x, int y) { return intensity[size_t(y) * nx + x]; }
};

struct PlaneWave {
    double tilt_x_rad = 0;
    double tilt_y_rad = 0;
};

struct RandomPhase {
    uint64_t challenge_seed = 0;
};

// An illumination pattern. Plane waves carry a Gaussian envelope of waist
// beam_waist (infinite waist = flat); random-phase challenges are NA
// band-limited diffusers drawn deterministically from their seed.
struct Challenge {
    std::variant<PlaneWave, RandomPhase> kind = PlaneWave{};
    double beam_waist_um = std::numeric_limits<double>::infinity();

    static Challenge plane(double tilt_x = 0, double tilt_y = 0,
                           double waist = std::numeric_limits<double>::infinity()) {
        return {PlaneWave{tilt_x, tilt_y}, waist};
    }
    static Challenge random(uint64_t seed) {
        return {RandomPhase{seed}, std::numeric_limits<double>::infinity()};
    }
};

struct OpticsConfig {
    double wavelength_um = 0.633;
    double na = 0.8;
    double mode_pitch_um = 0.63;
    int grid_nx = 128;
    int grid_ny = 128;
    double pitch_um = 15.0 / 128.0;  // transverse sampling
    double n_background = 1.0;
    double rotation_deg = 0.0;       // camera rotation applied to images
    int crop_px = 120;               // centered camera crop

    double k0() const { return 2.0 * 3.14159265358979323846264338328 / wavelength_um; }
    void validate() const;
};

double total_power(const ComplexField& f);

ComplexField make_challenge_field(const Challenge& challenge, const OpticsConfig& config);

// Split-step propagation through a voxel volume: thin-slice phase screens
// exp(i*k0*(n - n_bg)*dz) alternating with exact angular-spectrum steps in
// the homogeneous background (evanescent components zeroed). Precomputes
// per-slice screens, so keep one Propagator per volume when issuing many
// challenges.
class Propagator {
public:
    Propagator(const fab::VoxelVolume& volume, const OpticsConfig& config);

    ComplexField propagate(const ComplexField& field) const;

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    double pitch_um() const { return pitch_; }

private:
    int nx_, ny_, nz_;
    double pitch_;
    OpticsConfig config_;
    std::vector<std::vector<cdouble>> screens_;
    std::vector<cdouble> transfer_;
};

// One-shot convenience wrapper around Propagator.
ComplexField propagate(const ComplexField& field, const fab::VoxelVolume& volume,
                       const OpticsConfig& config);

// NA-limited imaging: hard circular aperture at NA*k0 in the frequency
// plane, squared modulus, camera rotation (bilinear), centered crop.
SpeckleImage image_response(const ComplexField& exit_field, const OpticsConfig& config);

// |<A,B>|^2 / (<A,A>*<B,B>); invariant under global phase and scale.
double field_fidelity(const ComplexField& a, const ComplexField& b);

// round((L / mode_pitch)^2) transverse modes across an L-wide facet.
long mode_count(double cube_edge_um, double mode_pitch_um);

SpeckleImage rotate_image(const SpeckleImage& img, double degrees_ccw);
SpeckleImage crop_center(const SpeckleImage& img, int crop_px);

// "PUFF" container: little-endian header (magic, version, nx, ny, pitch,
// wavelength), then interleaved re/im f32, x-fastest.
void save_puff(const ComplexField& f, const std::string& path);
ComplexField load_puff(const std::string& path);

// 16-bit binary PGM with linear full-range scaling; the scale factor goes
// to a sidecar text file "<path>.scale.txt" (intensity = pixel * scale).
void save_pgm16(const SpeckleImage& img, const std::string& path);
SpeckleImage load_pgm16(const std::string& path, double pixel_pitch_um = 1.0);

}  // namespace pufsim::optics

#endif
