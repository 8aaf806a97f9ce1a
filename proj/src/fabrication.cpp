#include "pufsim/fabrication.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "pufsim/parallel.hpp"

namespace pufsim::fab {

namespace {

using geom::Chord;
using geom::Vec3;

void write_u32(std::ostream& os, uint32_t v) {
    uint8_t b[4] = {uint8_t(v), uint8_t(v >> 8), uint8_t(v >> 16), uint8_t(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
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
    return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 |
           uint32_t(b[3]) << 24;
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

// Paint one rod into the grid, raising covered voxels to at least `value`.
// Voxels are culled slice by slice against the radius-inflated sub-segment
// AABB; the coverage predicate itself is the exact 3D segment distance.
void rasterize_rod(VoxelVolume& vol, const Chord& c, float value) {
    const double p = vol.pitch_um;
    const double r = c.radius;
    if (r <= 0) return;
    const Vec3 d = c.p1 - c.p0;
    const double zlo = std::min(c.p0.z, c.p1.z) - r;
    const double zhi = std::max(c.p0.z, c.p1.z) + r;
    int kz0 = std::max(0, int(std::floor(zlo / p - 0.5)));
    int kz1 = std::min(vol.nz - 1, int(std::ceil(zhi / p - 0.5)));
    for (int kz = kz0; kz <= kz1; ++kz) {
        const double zc = (kz + 0.5) * p;
        // Parameter window of the centerline within reach of this slice.
        double t0 = 0.0, t1 = 1.0;
        if (std::abs(d.z) > 1e-300) {
            double ta = (zc - r - c.p0.z) / d.z;
            double tb = (zc + r - c.p0.z) / d.z;
            if (ta > tb) std::swap(ta, tb);
            t0 = std::max(0.0, ta);
            t1 = std::min(1.0, tb);
            if (t0 > t1) continue;
        } else if (zc < zlo || zc > zhi) {
            continue;
        }
        Vec3 a = c.p0 + d * t0;
        Vec3 b = c.p0 + d * t1;
        double xlo = std::min(a.x, b.x) - r, xhi = std::max(a.x, b.x) + r;
        double ylo = std::min(a.y, b.y) - r, yhi = std::max(a.y, b.y) + r;
        int kx0 = std::max(0, int(std::floor(xlo / p - 0.5)));
        int kx1 = std::min(vol.nx - 1, int(std::ceil(xhi / p - 0.5)));
        int ky0 = std::max(0, int(std::floor(ylo / p - 0.5)));
        int ky1 = std::min(vol.ny - 1, int(std::ceil(yhi / p - 0.5)));
        for (int ky = ky0; ky <= ky1; ++ky) {
            for (int kx = kx0; kx <= kx1; ++kx) {
                Vec3 center = {(kx + 0.5) * p, (ky + 0.5) * p, zc};
                if (geom::point_segment_distance(center, c.p0, c.p1) <= r) {
                    float& v = vol.at(kx, ky, kz);
                    if (value > v) v = value;
                }
            }
        }
    }
}

VoxelVolume raster_volume(const geom::ConstructionPlan& plan,
                          const std::vector<Chord>& chords,
                          const std::vector<float>& values, double pitch) {
    if (!(pitch > 0)) throw std::invalid_argument("voxelize: pitch must be positive");
    if (pitch > plan.rod_radius_um)
        throw std::invalid_argument("voxelize: resolution too coarse (pitch > rod radius)");
    const double L = plan.cube_edge_um;
    int n = int(std::llround(L / pitch));
    if (n < 1) throw std::invalid_argument("voxelize: pitch larger than cube");
    VoxelVolume vol;
    vol.nx = vol.ny = vol.nz = n;
    vol.pitch_um = L / n;
    vol.index.assign(size_t(n) * n * n, float(plan.n_background));
    for (size_t i = 0; i < chords.size(); ++i) {
        rasterize_rod(vol, chords[i], values[i]);
    }
    return vol;
}

}  // namespace

VoxelVolume voxelize(const geom::ConstructionPlan& plan, double pitch) {
    std::vector<float> values(plan.chords.size(), float(plan.n_rod));
    return raster_volume(plan, plan.chords, values, pitch);
}

VoxelVolume fabricate(const geom::ConstructionPlan& plan,
                      const FabricationNoise& noise, double pitch) {
    if (noise.sigma_endpoint_um < 0 || noise.sigma_radius_um < 0 || noise.sigma_index < 0)
        throw std::invalid_argument("fabricate: sigmas must be >= 0");
    const double L = plan.cube_edge_um;
    CounterRng rng(noise.noise_seed);
    std::vector<Chord> chords = plan.chords;
    std::vector<float> values(chords.size());
    for (size_t i = 0; i < chords.size(); ++i) {
        Chord& c = chords[i];
        // Fixed draw layout per rod: 3+3 endpoint, 1 radius, 1 index.
        double g[8];
        for (double& v : g) v = rng.gaussian();
        Vec3* ends[2] = {&c.p0, &c.p1};
        for (int e = 0; e < 2; ++e) {
            Vec3 orig = *ends[e];
            // Anchoring face: first axis sitting on a cube face.
            int anchor = -1;
            double face = 0;
            for (int k = 0; k < 3 && anchor < 0; ++k) {
                if (std::abs(orig[k]) <= 1e-9 * L) { anchor = k; face = 0.0; }
                else if (std::abs(orig[k] - L) <= 1e-9 * L) { anchor = k; face = L; }
            }
            Vec3 jittered = {orig.x + noise.sigma_endpoint_um * g[3 * e],
                             orig.y + noise.sigma_endpoint_um * g[3 * e + 1],
                             orig.z + noise.sigma_endpoint_um * g[3 * e + 2]};
            jittered.x = std::clamp(jittered.x, 0.0, L);
            jittered.y = std::clamp(jittered.y, 0.0, L);
            jittered.z = std::clamp(jittered.z, 0.0, L);
            if (anchor == 0) jittered.x = face;
            else if (anchor == 1) jittered.y = face;
            else if (anchor == 2) jittered.z = face;
            *ends[e] = jittered;
        }
        c.radius = std::max(plan.rod_radius_um + noise.sigma_radius_um * g[6], 1e-6);
        double idx = plan.n_rod + noise.sigma_index * g[7];
        values[i] = float(std::clamp(idx, 1.0, 2.0));
    }
    return raster_volume(plan, chords, values, pitch);
}

VoxelVolume embed(const VoxelVolume& vol, int nx, int ny, float n_background) {
    if (nx < vol.nx || ny < vol.ny)
        throw std::invalid_argument("embed: target grid smaller than volume");
    VoxelVolume out;
    out.nx = nx;
    out.ny = ny;
    out.nz = vol.nz;
    out.pitch_um = vol.pitch_um;
    out.index.assign(size_t(nx) * ny * vol.nz, n_background);
    int ox = (nx - vol.nx) / 2;
    int oy = (ny - vol.ny) / 2;
    for (int z = 0; z < vol.nz; ++z)
        for (int y = 0; y < vol.ny; ++y)
            for (int x = 0; x < vol.nx; ++x)
                out.at(x + ox, y + oy, z) = vol.at(x, y, z);
    return out;
}

size_t count_voxel_diff(const VoxelVolume& a, const VoxelVolume& b) {
    if (a.nx != b.nx || a.ny != b.ny || a.nz != b.nz)
        throw std::invalid_argument("count_voxel_diff: dimension mismatch");
    size_t diff = 0;
    for (size_t i = 0; i < a.index.size(); ++i)
        if (a.index[i] != b.index[i]) ++diff;
    return diff;
}

size_t count_rod_voxels(const VoxelVolume& v, float n_background) {
    size_t n = 0;
    for (float x : v.index)
        if (x != n_background) ++n;
    return n;
}

void save_pufv(const VoxelVolume& vol, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f.write("PUFV", 4);
    write_u32(f, 1);
    write_u32(f, uint32_t(vol.nx));
    write_u32(f, uint32_t(vol.ny));
    write_u32(f, uint32_t(vol.nz));
    write_f64(f, vol.pitch_um);
    write_u32(f, 0);
    for (float v : vol.index) {
        uint32_t u;
        std::memcpy(&u, &v, 4);
        write_u32(f, u);
    }
    if (!f) throw std::runtime_error("write failed for " + path);
}

VoxelVolume load_pufv(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, "PUFV", 4) != 0)
        throw std::runtime_error(path + ": not a PUFV file");
    uint32_t version = read_u32(f);
    if (version != 1) throw std::runtime_error(path + ": unsupported PUFV version");
    VoxelVolume vol;
    vol.nx = int(read_u32(f));
    vol.ny = int(read_u32(f));
    vol.nz = int(read_u32(f));
    vol.pitch_um = read_f64(f);
    read_u32(f);
    if (vol.nx <= 0 || vol.ny <= 0 || vol.nz <= 0 || !(vol.pitch_um > 0))
        throw std::runtime_error(path + ": bad PUFV header");
    size_t n = size_t(vol.nx) * vol.ny * vol.nz;
    vol.index.resize(n);
    for (size_t i = 0; i < n; ++i) {
        uint32_t u = read_u32(f);
        std::memcpy(&vol.index[i], &u, 4);
    }
    if (!f) throw std::runtime_error(path + ": truncated PUFV data");
    return vol;
}

}  // namespace pufsim::fab
