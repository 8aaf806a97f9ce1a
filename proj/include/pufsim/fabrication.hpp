#ifndef PUFSIM_FABRICATION_HPP
#define PUFSIM_FABRICATION_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "pufsim/geometry.hpp"

namespace pufsim::fab {

// Voxelized refractive-index grid; x-fastest layout (x + nx*(y + ny*z)).
// Freshly voxelized volumes cover the plan cube exactly: n*pitch == L on
// every axis. embed() pads the cross-section for a larger optics grid.
struct VoxelVolume {
    int nx = 0, ny = 0, nz = 0;
    double pitch_um = 0;
    std::vector<float> index;

    float at(int x, int y, int z) const {
        return index[size_t(z) * nx * ny + size_t(y) * nx + x];
    }
    float& at(int x, int y, int z) {
        return index[size_t(z) * nx * ny + size_t(y) * nx + x];
    }
};

// Per-rod Gaussian perturbations: endpoint jitter (re-projected onto the
// anchoring cube face), radius offset, index offset. All driven by one
// counter-based stream from noise_seed; sigmas scale fixed unit draws, so
// the same seed explores the same perturbation directions at any magnitude.
struct FabricationNoise {
    double sigma_endpoint_um = 0;
    double sigma_radius_um = 0;
    double sigma_index = 0;
    uint64_t noise_seed = 0;

    bool is_zero() const {
        return sigma_endpoint_um == 0 && sigma_radius_um == 0 && sigma_index == 0;
    }
};

// Noise-free discretization: voxel = n_rod where the voxel center lies
// within rod_radius of any chord, else n_background. pitch is snapped to
// cube_edge / round(cube_edge / pitch) so the grid tiles the cube exactly.
VoxelVolume voxelize(const geom::ConstructionPlan& plan, double pitch);

// One imperfect duplicate. All sigmas zero reproduces voxelize bit-exactly.
VoxelVolume fabricate(const geom::ConstructionPlan& plan,
                      const FabricationNoise& noise, double pitch);

// Centered cross-section padding with n_background; z extent unchanged.
VoxelVolume embed(const VoxelVolume& vol, int nx, int ny, float n_background);

size_t count_voxel_diff(const VoxelVolume& a, const VoxelVolume& b);
size_t count_rod_voxels(const VoxelVolume& v, float n_background);

// "PUFV" container: 32-byte little-endian header (magic, version u32,
// nx/ny/nz u32, pitch f64, reserved u32) + nx*ny*nz f32, x-fastest.
void save_pufv(const VoxelVolume& vol, const std::string& path);
VoxelVolume load_pufv(const std::string& path);

}  // namespace pufsim::fab

#endif
