#include "pufsim/optics.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "pufsim/rng.hpp"

namespace pufsim::optics {

namespace {

constexpr double kPi = 3.14159265358979323846264338328;
constexpr double kTwoPi = 2.0 * kPi;

// DFT spatial frequency (rad/um) for bin i of n samples at the given pitch.
inline double k_freq(int i, int n, double pitch) {
    int m = i < n / 2 ? i : i - n;
    return kTwoPi * double(m) / (double(n) * pitch);
}

// Largest |k_perp| representable on the grid (corner of the Nyquist box).
double max_grid_kperp(int nx, int ny, double pitch) {
    double kx = kPi / pitch;
    (void)nx;
    (void)ny;
    return std::sqrt(2.0) * kx;
}

void check_grid(const ComplexField& f) {
    if (f.nx <= 0 || f.ny <= 0 || f.amp.size() != size_t(f.nx) * f.ny)
        throw std::invalid_argument("field grid is inconsistent");
    if (!is_pow2(size_t(f.nx)) || !is_pow2(size_t(f.ny)))
        throw std::invalid_argument("field grid must be power-of-two sized");
}

// Zero all spectral components with |k_perp| > cutoff. Returns false (and
// leaves the field untouched) when the cutoff exceeds every representable
// frequency, keeping the no-op case exact.
bool apply_lowpass(ComplexField& f, double cutoff) {
    if (cutoff >= max_grid_kperp(f.nx, f.ny, f.pitch_um)) return false;
    fft2d(f.amp, f.nx, f.ny, false);
    double c2 = cutoff * cutoff;
    for (int y = 0; y < f.ny; ++y) {
        double ky = k_freq(y, f.ny, f.pitch_um);
        for (int x = 0; x < f.nx; ++x) {
            double kx = k_freq(x, f.nx, f.pitch_um);
            if (kx * kx + ky * ky > c2) f.amp[size_t(y) * f.nx + x] = 0.0;
        }
    }
    fft2d(f.amp, f.nx, f.ny, true);
    return true;
}

}  // namespace

void OpticsConfig::validate() const {
    if (!(wavelength_um > 0)) throw std::invalid_argument("wavelength must be positive");
    if (!(na > 0) || !(na < n_background))
        throw std::invalid_argument("require 0 < NA < n_background");
    if (grid_nx < 2 || grid_ny < 2 || !is_pow2(size_t(grid_nx)) || !is_pow2(size_t(grid_ny)))
        throw std::invalid_argument("grid must be power-of-two sized");
    if (!(pitch_um > 0)) throw std::invalid_argument("pitch must be positive");
    if (crop_px < 1) throw std::invalid_argument("crop must be >= 1 pixel");
}

double total_power(const ComplexField& f) {
    double p = 0;
    for (const cdouble& a : f.amp) p += std::norm(a);
    return p;
}

ComplexField make_challenge_field(const Challenge& challenge, const OpticsConfig& config) {
    config.validate();
    ComplexField f;
    f.nx = config.grid_nx;
    f.ny = config.grid_ny;
    f.pitch_um = config.pitch_um;
    f.wavelength_um = config.wavelength_um;
    f.amp.resize(size_t(f.nx) * f.ny);

    if (const PlaneWave* pw = std::get_if<PlaneWave>(&challenge.kind)) {
        double max_tilt = std::asin(std::min(config.na, 1.0));
        if (std::abs(pw->tilt_x_rad) >= max_tilt || std::abs(pw->tilt_y_rad) >= max_tilt)
            throw std::invalid_argument("plane-wave tilt exceeds NA acceptance");
        double k0v = config.k0();
        double kx = k0v * std::sin(pw->tilt_x_rad);
        double ky = k0v * std::sin(pw->tilt_y_rad);
        double cx = 0.5 * (f.nx - 1) * f.pitch_um;
        double cy = 0.5 * (f.ny - 1) * f.pitch_um;
        bool flat = std::isinf(challenge.beam_waist_um);
        if (!flat && !(challenge.beam_waist_um > 0))
            throw std::invalid_argument("beam waist must be positive");
        double inv_w2 = flat ? 0.0 : 1.0 / (challenge.beam_waist_um * challenge.beam_waist_um);
        for (int y = 0; y < f.ny; ++y) {
            for (int x = 0; x < f.nx; ++x) {
                double px = x * f.pitch_um - cx;
                double py = y * f.pitch_um - cy;
                double phase = kx * px + ky * py;
                double env = flat ? 1.0 : std::exp(-(px * px + py * py) * inv_w2);
                f.at(x, y) = cdouble(env * std::cos(phase), env * std::sin(phase));
            }
        }
    } else {
        const RandomPhase& rp = std::get<RandomPhase>(challenge.kind);
        CounterRng rng(rp.challenge_seed);
        for (size_t i = 0; i < f.amp.size(); ++i) {
            double phase = kTwoPi * rng.next_double();
            f.amp[i] = cdouble(std::cos(phase), std::sin(phase));
        }
        apply_lowpass(f, config.na * config.k0());
    }

    double p = total_power(f);
    if (!(p > 0)) throw std::invalid_argument("challenge field has zero power");
    double s = 1.0 / std::sqrt(p);
    for (cdouble& a : f.amp) a *= s;
    return f;
}

Propagator::Propagator(const fab::VoxelVolume& volume, const OpticsConfig& config)
    : nx_(volume.nx), ny_(volume.ny), nz_(volume.nz), pitch_(volume.pitch_um),
      config_(config) {
    config.validate();
    if (!is_pow2(size_t(nx_)) || !is_pow2(size_t(ny_)))
        throw std::invalid_argument("volume cross-section must be power-of-two for propagation");
    const double k0v = config.k0();
    const double dz = pitch_;
    const double nbg = config.n_background;

    float max_dn = 0;
    for (float v : volume.index) {
        float dn = std::abs(v - float(nbg));
        if (dn > max_dn) max_dn = dn;
    }
    double max_step = k0v * double(max_dn) * dz;
    if (max_step > 0.7) {
        std::fprintf(stderr,
                     "optics: warning: per-slice phase step %.3f rad exceeds 0.7; "
                     "thin-slice model is degrading (reduce pitch or index contrast)\n",
                     max_step);
    }

    screens_.resize(nz_);
    const size_t plane = size_t(nx_) * ny_;
    for (int z = 0; z < nz_; ++z) {
        screens_[z].resize(plane);
        const float* src = volume.index.data() + size_t(z) * plane;
        for (size_t i = 0; i < plane; ++i) {
            double phi = k0v * (double(src[i]) - nbg) * dz;
            screens_[z][i] = cdouble(std::cos(phi), std::sin(phi));
        }
    }

    // Angular-spectrum step for distance dz in the homogeneous background;
    // evanescent components are truncated to zero.
    transfer_.resize(plane);
    const double kmed = k0v * nbg;
    const double k2 = kmed * kmed;
    for (int y = 0; y < ny_; ++y) {
        double ky = k_freq(y, ny_, pitch_);
        for (int x = 0; x < nx_; ++x) {
            double kx = k_freq(x, nx_, pitch_);
            double kt2 = kx * kx + ky * ky;
            if (kt2 > k2) {
                transfer_[size_t(y) * nx_ + x] = 0.0;
            } else {
                double kz = std::sqrt(k2 - kt2);
                transfer_[size_t(y) * nx_ + x] = cdouble(std::cos(kz * dz), std::sin(kz * dz));
            }
        }
    }
}

ComplexField Propagator::propagate(const ComplexField& field) const {
    check_grid(field);
    if (field.nx != nx_ || field.ny != ny_)
        throw std::invalid_argument("field grid does not match volume cross-section");
    if (std::abs(field.pitch_um - pitch_) > 1e-12 * pitch_)
        throw std::invalid_argument("field pitch does not match volume pitch");
    if (std::abs(field.wavelength_um - config_.wavelength_um) > 1e-12)
        throw std::invalid_argument("field wavelength does not match configuration");

    ComplexField out = field;
    const size_t plane = out.amp.size();
    for (int z = 0; z < nz_; ++z) {
        const std::vector<cdouble>& screen = screens_[z];
        for (size_t i = 0; i < plane; ++i) out.amp[i] *= screen[i];
        fft2d(out.amp, nx_, ny_, false);
        for (size_t i = 0; i < plane; ++i) out.amp[i] *= transfer_[i];
        fft2d(out.amp, nx_, ny_, true);
    }
    return out;
}

ComplexField propagate(const ComplexField& field, const fab::VoxelVolume& volume,
                       const OpticsConfig& config) {
    return Propagator(volume, config).propagate(field);
}

SpeckleImage image_response(const ComplexField& exit_field, const OpticsConfig& config) {
    check_grid(exit_field);
    if (config.crop_px > exit_field.nx || config.crop_px > exit_field.ny)
        throw std::invalid_argument("camera crop larger than grid");

    ComplexField filtered = exit_field;
    apply_lowpass(filtered, config.na * config.k0());

    SpeckleImage img;
    img.nx = filtered.nx;
    img.ny = filtered.ny;
    img.pixel_pitch_um = filtered.pitch_um;
    img.intensity.resize(filtered.amp.size());
    for (size_t i = 0; i < filtered.amp.size(); ++i)
        img.intensity[i] = std::norm(filtered.amp[i]);

    if (config.rotation_deg != 0.0) img = rotate_image(img, config.rotation_deg);
    if (config.crop_px < img.nx || config.crop_px < img.ny)
        img = crop_center(img, config.crop_px);
    return img;
}

double field_fidelity(const ComplexField& a, const ComplexField& b) {
    if (a.nx != b.nx || a.ny != b.ny)
        throw std::invalid_argument("field_fidelity: grid mismatch");
    double pa = total_power(a);
    double pb = total_power(b);
    if (!(pa > 0) || !(pb > 0))
        throw std::invalid_argument("field_fidelity: zero-power field");
    cdouble inner = 0;
    for (size_t i = 0; i < a.amp.size(); ++i) inner += std::conj(a.amp[i]) * b.amp[i];
    return std::norm(inner) / (pa * pb);
}

long mode_count(double cube_edge_um, double mode_pitch_um) {
    if (!(cube_edge_um > 0) || !(mode_pitch_um > 0))
        throw std::invalid_argument("mode_count: lengths must be positive");
    double r = cube_edge_um / mode_pitch_um;
    return std::lround(r * r);
}

SpeckleImage rotate_image(const SpeckleImage& img, double degrees_ccw) {
    SpeckleImage out;
    out.nx = img.nx;
    out.ny = img.ny;
    out.pixel_pitch_um = img.pixel_pitch_um;
    out.intensity.assign(img.intensity.size(), 0.0);
    double th = degrees_ccw * kPi / 180.0;
    double c = std::cos(th), s = std::sin(th);
    double cx = 0.5 * (img.nx - 1);
    double cy = 0.5 * (img.ny - 1);
    for (int y = 0; y < img.ny; ++y) {
        for (int x = 0; x < img.nx; ++x) {
            // Inverse map: sample the source at the clockwise-rotated point.
            double dx = x - cx, dy = y - cy;
            double sx = cx + c * dx + s * dy;
            double sy = cy - s * dx + c * dy;
            int x0 = int(std::floor(sx)), y0 = int(std::floor(sy));
            double fx = sx - x0, fy = sy - y0;
            double acc = 0;
            for (int j = 0; j <= 1; ++j) {
                for (int i = 0; i <= 1; ++i) {
                    int xi = x0 + i, yj = y0 + j;
                    if (xi < 0 || xi >= img.nx || yj < 0 || yj >= img.ny) continue;
                    double w = (i ? fx : 1 - fx) * (j ? fy : 1 - fy);
                    acc += w * img.at(xi, yj);
                }
            }
            out.at(x, y) = acc;
        }
    }
    return out;
}

SpeckleImage crop_center(const SpeckleImage& img, int crop_px) {
    if (crop_px > img.nx || crop_px > img.ny)
        throw std::invalid_argument("crop larger than image");
    SpeckleImage out;
    out.nx = out.ny = crop_px;
    out.pixel_pitch_um = img.pixel_pitch_um;
    out.intensity.resize(size_t(crop_px) * crop_px);
    int ox = (img.nx - crop_px) / 2;
    int oy = (img.ny - crop_px) / 2;
    for (int y = 0; y < crop_px; ++y)
        for (int x = 0; x < crop_px; ++x)
            out.at(x, y) = img.at(x + ox, y + oy);
    return out;
}

namespace {

void write_u32(std::ostream& os, uint32_t v) {
    uint8_t b[4] = {uint8_t(v), uint8_t(v >> 8), uint8_t(v >> 16), uint8_t(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

void write_f32(std::ostream& os, float v) {
    uint32_t u;
    std::memcpy(&u, &v, 4);
    write_u32(os, u);
}

void write_f64(std::ostream& os, double v) {
    uint64_t u;
    std::memcpy(&u, &v, 8);
    uint8_t b[8];
    for (int i = 0; i < 8; ++i) b[i] = uint8_t(u >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

uint32_t read_u32(std::istream& is) {
    uint8_t b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
}

float read_f32(std::istream& is) {
    uint32_t u = read_u32(is);
    float v;
    std::memcpy(&v, &u, 4);
    return v;
}

double read_f64(std::istream& is) {
    uint8_t b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= uint64_t(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
}

}  // namespace

void save_puff(const ComplexField& f, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os.write("PUFF", 4);
    write_u32(os, 1);
    write_u32(os, uint32_t(f.nx));
    write_u32(os, uint32_t(f.ny));
    write_f64(os, f.pitch_um);
    write_f64(os, f.wavelength_um);
    for (const cdouble& a : f.amp) {
        write_f32(os, float(a.real()));
        write_f32(os, float(a.imag()));
    }
    if (!os) throw std::runtime_error("write failed for " + path);
}

ComplexField load_puff(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "PUFF", 4) != 0)
        throw std::runtime_error(path + ": not a PUFF file");
    if (read_u32(is) != 1) throw std::runtime_error(path + ": unsupported PUFF version");
    ComplexField f;
    f.nx = int(read_u32(is));
    f.ny = int(read_u32(is));
    f.pitch_um = read_f64(is);
    f.wavelength_um = read_f64(is);
    if (f.nx <= 0 || f.ny <= 0 || !(f.pitch_um > 0))
        throw std::runtime_error(path + ": bad PUFF header");
    f.amp.resize(size_t(f.nx) * f.ny);
    for (cdouble& a : f.amp) {
        float re = read_f32(is);
        float im = read_f32(is);
        a = cdouble(re, im);
    }
    if (!is) throw std::runtime_error(path + ": truncated PUFF data");
    return f;
}

void save_pgm16(const SpeckleImage& img, const std::string& path) {
    double peak = 0;
    for (double v : img.intensity) peak = std::max(peak, v);
    double scale = peak > 0 ? peak / 65535.0 : 0.0;

    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << "P5\n" << img.nx << " " << img.ny << "\n65535\n";
    for (double v : img.intensity) {
        long pix = scale > 0 ? std::lround(v / scale) : 0;
        pix = std::clamp(pix, 0L, 65535L);
        uint8_t b[2] = {uint8_t(pix >> 8), uint8_t(pix)};  // PGM is big-endian
        os.write(reinterpret_cast<const char*>(b), 2);
    }
    if (!os) throw std::runtime_error("write failed for " + path);

    std::ofstream sc(path + ".scale.txt");
    if (!sc) throw std::runtime_error("cannot write scale sidecar for " + path);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g\n", scale);
    sc << buf;
}

SpeckleImage load_pgm16(const std::string& path, double pixel_pitch_um) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + path);
    auto next_token = [&is, &path]() {
        std::string tok;
        int c;
        while ((c = is.get()) != EOF) {
            if (c == '#') {
                while ((c = is.get()) != EOF && c != '\n') {}
                continue;
            }
            if (std::isspace(c)) {
                if (!tok.empty()) return tok;
                continue;
            }
            tok.push_back(char(c));
        }
        if (tok.empty()) throw std::runtime_error(path + ": truncated PGM header");
        return tok;
    };
    if (next_token() != "P5") throw std::runtime_error(path + ": not a binary PGM");
    int w = std::stoi(next_token());
    int h = std::stoi(next_token());
    int maxval = std::stoi(next_token());
    if (w <= 0 || h <= 0 || maxval != 65535)
        throw std::runtime_error(path + ": expected 16-bit PGM");

    double scale = 1.0;
    {
        std::ifstream sc(path + ".scale.txt");
        if (sc) sc >> scale;
    }

    SpeckleImage img;
    img.nx = w;
    img.ny = h;
    img.pixel_pitch_um = pixel_pitch_um;
    img.intensity.resize(size_t(w) * h);
    for (double& v : img.intensity) {
        int hi = is.get(), lo = is.get();
        if (hi == EOF || lo == EOF) throw std::runtime_error(path + ": truncated PGM data");
        v = double((hi << 8) | lo) * scale;
    }
    return img;
}

}  // namespace pufsim::optics
