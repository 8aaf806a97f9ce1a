#ifndef PUFSIM_GEOMETRY_HPP
#define PUFSIM_GEOMETRY_HPP

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "pufsim/rng.hpp"

namespace pufsim::geom {

struct Vec3 {
    double x = 0, y = 0, z = 0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
};

double dot(const Vec3& a, const Vec3& b);
Vec3 cross(const Vec3& a, const Vec3& b);
double norm(const Vec3& v);
Vec3 normalized(const Vec3& v);

// Straight rod centerline running from one cube face to another.
struct Chord {
    Vec3 p0, p1;       // endpoints on the boundary of [0,L]^3, um
    double radius = 0; // um; assigned by the plan

    double length() const { return norm(p1 - p0); }
    double min_z() const { return p0.z < p1.z ? p0.z : p1.z; }
};

// The secret digital blueprint a PUF instance and all its duplicates are
// fabricated from.
struct ConstructionPlan {
    uint64_t seed = 0;
    double cube_edge_um = 15.0;
    int n_rods = 2000;
    double rod_radius_um = 0.25;
    double n_rod = 1.51;
    double n_background = 1.0;
    std::vector<Chord> chords;
};

// Exact distance from a point to a segment.
double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b);

// True if p lies on a face of [0,L]^3 within tol*L.
bool on_cube_boundary(const Vec3& p, double L, double tol = 1e-9);

// Line through (q1*e1 + q2*e2) with direction u, clipped to [0,L]^3.
// Returns false if the line misses the cube (or only grazes it). Entry/exit
// coordinates are snapped exactly onto the faces that clip them.
bool chord_from_direction_point(const Vec3& u, double q1, double q2, double L,
                                Chord& out);

// Canonical orthonormal basis {e1, e2} perpendicular to u. Fixed
// construction order so chord geometry is bit-reproducible.
void plane_basis(const Vec3& u, Vec3& e1, Vec3& e2);

// One chord from the uniform chord measure: direction uniform on the upper
// hemisphere, foot point uniform on the cube's orthogonal projection
// (rejection-sampled inside the projection's bounding rectangle).
Chord sample_chord(CounterRng& rng, double L);

ConstructionPlan generate_plan(uint64_t seed, double L, int n_rods,
                               double rod_radius, double n_rod,
                               double n_background);

// Per-bin fraction of volume inside any rod, from samples_per_axis^3 probe
// points per bin (>= 4 per axis, giving the contract's 64-point floor).
std::vector<double> density_map(const ConstructionPlan& plan, int bins_per_axis,
                                int samples_per_axis = 4);

// Plan (de)serialization as JSON with 17-significant-digit doubles;
// round-trips bit-exactly.
std::string plan_to_json(const ConstructionPlan& plan);
ConstructionPlan plan_from_json(const std::string& text);
void save_plan(const ConstructionPlan& plan, const std::string& path);
ConstructionPlan load_plan(const std::string& path);

}  // namespace pufsim::geom

#endif
