#include "pufsim/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace pufsim::geom {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr int kMaxRejectionAttempts = 1000000;

void format_double(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out += buf;
}
}  // namespace

double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

Vec3 normalized(const Vec3& v) {
    double n = norm(v);
    if (n == 0.0) throw std::invalid_argument("normalized: zero vector");
    return {v.x / n, v.y / n, v.z / n};
}

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
    Vec3 ab = b - a;
    double len2 = dot(ab, ab);
    if (len2 == 0.0) return norm(p - a);
    double t = dot(p - a, ab) / len2;
    t = std::clamp(t, 0.0, 1.0);
    return norm(p - (a + ab * t));
}

bool on_cube_boundary(const Vec3& p, double L, double tol) {
    double eps = tol * L;
    bool inside = p.x >= -eps && p.x <= L + eps && p.y >= -eps && p.y <= L + eps &&
                  p.z >= -eps && p.z <= L + eps;
    if (!inside) return false;
    for (int i = 0; i < 3; ++i) {
        double c = p[i];
        if (std::abs(c) <= eps || std::abs(c - L) <= eps) return true;
    }
    return false;
}

void plane_basis(const Vec3& u, Vec3& e1, Vec3& e2) {
    // Axis with the smallest |component| gives the most stable cross product.
    int k = 0;
    double best = std::abs(u.x);
    if (std::abs(u.y) < best) { k = 1; best = std::abs(u.y); }
    if (std::abs(u.z) < best) { k = 2; }
    Vec3 axis = {k == 0 ? 1.0 : 0.0, k == 1 ? 1.0 : 0.0, k == 2 ? 1.0 : 0.0};
    e1 = normalized(cross(u, axis));
    e2 = cross(u, e1);
}

bool chord_from_direction_point(const Vec3& u, double q1, double q2, double L,
                                Chord& out) {
    Vec3 e1, e2;
    plane_basis(u, e1, e2);
    Vec3 p = e1 * q1 + e2 * q2;

    // Slab clipping; remember which face bounds each side.
    double tmin = -std::numeric_limits<double>::infinity();
    double tmax = std::numeric_limits<double>::infinity();
    int axis_min = -1, axis_max = -1;
    double face_min = 0, face_max = 0;
    const double ucomp[3] = {u.x, u.y, u.z};
    const double pcomp[3] = {p.x, p.y, p.z};
    for (int i = 0; i < 3; ++i) {
        if (std::abs(ucomp[i]) < 1e-300) {
            if (pcomp[i] < 0.0 || pcomp[i] > L) return false;
            continue;
        }
        double t0 = (0.0 - pcomp[i]) / ucomp[i];
        double t1 = (L - pcomp[i]) / ucomp[i];
        double f0 = 0.0, f1 = L;
        if (t0 > t1) { std::swap(t0, t1); std::swap(f0, f1); }
        if (t0 > tmin) { tmin = t0; axis_min = i; face_min = f0; }
        if (t1 < tmax) { tmax = t1; axis_max = i; face_max = f1; }
    }
    if (!(tmax - tmin > 1e-12) || axis_min < 0 || axis_max < 0) return false;

    Vec3 a = p + u * tmin;
    Vec3 b = p + u * tmax;
    double* acomp[3] = {&a.x, &a.y, &a.z};
    double* bcomp[3] = {&b.x, &b.y, &b.z};
    *acomp[axis_min] = face_min;
    *bcomp[axis_max] = face_max;
    for (int i = 0; i < 3; ++i) {
        *acomp[i] = std::clamp(*acomp[i], 0.0, L);
        *bcomp[i] = std::clamp(*bcomp[i], 0.0, L);
    }
    out.p0 = a;
    out.p1 = b;
    return true;
}

Chord sample_chord(CounterRng& rng, double L) {
    if (!(L > 0)) throw std::invalid_argument("sample_chord: L must be positive");
    // Uniform upper hemisphere: uz uniform in [0,1], azimuth uniform.
    double uz = rng.next_double();
    double phi = kTwoPi * rng.next_double();
    double s = std::sqrt(std::max(0.0, 1.0 - uz * uz));
    Vec3 u = {s * std::cos(phi), s * std::sin(phi), uz};

    Vec3 e1, e2;
    plane_basis(u, e1, e2);
    double lo1 = 0, hi1 = 0, lo2 = 0, hi2 = 0;
    bool first = true;
    for (int corner = 0; corner < 8; ++corner) {
        Vec3 c = {L * double(corner & 1), L * double((corner >> 1) & 1),
                  L * double((corner >> 2) & 1)};
        double s1 = dot(c, e1);
        double s2 = dot(c, e2);
        if (first) { lo1 = hi1 = s1; lo2 = hi2 = s2; first = false; }
        else {
            lo1 = std::min(lo1, s1); hi1 = std::max(hi1, s1);
            lo2 = std::min(lo2, s2); hi2 = std::max(hi2, s2);
        }
    }
    // Only the transverse point is rejection-sampled; redrawing the
    // direction on a miss would weight directions by projection area and
    // break the uniform-hemisphere marginal.
    for (int attempt = 0; attempt < kMaxRejectionAttempts; ++attempt) {
        double q1 = rng.uniform(lo1, hi1);
        double q2 = rng.uniform(lo2, hi2);
        Chord c;
        if (chord_from_direction_point(u, q1, q2, L, c)) return c;
    }
    throw std::runtime_error("sample_chord: rejection sampling did not converge");
}

ConstructionPlan generate_plan(uint64_t seed, double L, int n_rods,
                               double rod_radius, double n_rod,
                               double n_background) {
    if (!(L > 0)) throw std::invalid_argument("generate_plan: cube edge must be positive");
    if (!(rod_radius > 0)) throw std::invalid_argument("generate_plan: rod radius must be positive");
    if (n_rods < 1) throw std::invalid_argument("generate_plan: n_rods must be >= 1");
    if (!(n_rod > n_background) || !(n_background >= 1.0))
        throw std::invalid_argument("generate_plan: need n_rod > n_background >= 1");

    ConstructionPlan plan;
    plan.seed = seed;
    plan.cube_edge_um = L;
    plan.n_rods = n_rods;
    plan.rod_radius_um = rod_radius;
    plan.n_rod = n_rod;
    plan.n_background = n_background;
    plan.chords.reserve(n_rods);

    CounterRng rng(seed);
    for (int i = 0; i < n_rods; ++i) {
        Chord c = sample_chord(rng, L);
        c.radius = rod_radius;
        plan.chords.push_back(c);
    }
    // Substrate-first write order: rods touching z=0 come first. Fixes the
    // serialization order; no optical effect.
    std::stable_sort(plan.chords.begin(), plan.chords.end(),
                     [](const Chord& a, const Chord& b) { return a.min_z() < b.min_z(); });
    return plan;
}

std::vector<double> density_map(const ConstructionPlan& plan, int bins_per_axis,
                                int samples_per_axis) {
    if (bins_per_axis < 2) throw std::invalid_argument("density_map: bins_per_axis must be >= 2");
    if (samples_per_axis < 4) samples_per_axis = 4;
    const double L = plan.cube_edge_um;
    const int nb = bins_per_axis;
    const int ns = samples_per_axis;
    const double bin   = L / nb;
    const double step  = bin / ns;

    // Cull chords per bin by radius-inflated AABB overlap.
    struct Box { double lo[3], hi[3]; };
    std::vector<Box> boxes(plan.chords.size());
    for (size_t i = 0; i < plan.chords.size(); ++i) {
        const Chord& c = plan.chords[i];
        for (int k = 0; k < 3; ++k) {
            boxes[i].lo[k] = std::min(c.p0[k], c.p1[k]) - c.radius;
            boxes[i].hi[k] = std::max(c.p0[k], c.p1[k]) + c.radius;
        }
    }

    std::vector<double> grid(size_t(nb) * nb * nb, 0.0);
    std::vector<size_t> near;
    for (int bz = 0; bz < nb; ++bz) {
        for (int by = 0; by < nb; ++by) {
            for (int bx = 0; bx < nb; ++bx) {
                double lo[3] = {bx * bin, by * bin, bz * bin};
                double hi[3] = {lo[0] + bin, lo[1] + bin, lo[2] + bin};
                near.clear();
                for (size_t i = 0; i < plan.chords.size(); ++i) {
                    const Box& bb = boxes[i];
                    if (bb.lo[0] <= hi[0] && bb.hi[0] >= lo[0] &&
                        bb.lo[1] <= hi[1] && bb.hi[1] >= lo[1] &&
                        bb.lo[2] <= hi[2] && bb.hi[2] >= lo[2])
                        near.push_back(i);
                }
                int hits = 0;
                for (int sz = 0; sz < ns; ++sz) {
                    for (int sy = 0; sy < ns; ++sy) {
                        for (int sx = 0; sx < ns; ++sx) {
                            Vec3 p = {lo[0] + (sx + 0.5) * step,
                                      lo[1] + (sy + 0.5) * step,
                                      lo[2] + (sz + 0.5) * step};
                            for (size_t i : near) {
                                const Chord& c = plan.chords[i];
                                if (c.radius > 0 &&
                                    point_segment_distance(p, c.p0, c.p1) <= c.radius) {
                                    ++hits;
                                    break;
                                }
                            }
                        }
                    }
                }
                grid[size_t(bz) * nb * nb + size_t(by) * nb + bx] =
                    double(hits) / double(ns * ns * ns);
            }
        }
    }
    return grid;
}

std::string plan_to_json(const ConstructionPlan& plan) {
    std::string out;
    out.reserve(plan.chords.size() * 140 + 256);
    out += "{\n  \"seed\": ";
    out += std::to_string(plan.seed);
    out += ",\n  \"cube_edge_um\": ";
    format_double(out, plan.cube_edge_um);
    out += ",\n  \"n_rods\": ";
    out += std::to_string(plan.n_rods);
    out += ",\n  \"rod_radius_um\": ";
    format_double(out, plan.rod_radius_um);
    out += ",\n  \"n_rod\": ";
    format_double(out, plan.n_rod);
    out += ",\n  \"n_background\": ";
    format_double(out, plan.n_background);
    out += ",\n  \"chords\": [\n";
    for (size_t i = 0; i < plan.chords.size(); ++i) {
        const Chord& c = plan.chords[i];
        out += "    [";
        const double v[6] = {c.p0.x, c.p0.y, c.p0.z, c.p1.x, c.p1.y, c.p1.z};
        for (int k = 0; k < 6; ++k) {
            if (k) out += ", ";
            format_double(out, v[k]);
        }
        out += i + 1 < plan.chords.size() ? "],\n" : "]\n";
    }
    out += "  ]\n}\n";
    return out;
}

ConstructionPlan plan_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    ConstructionPlan plan;
    plan.seed = j.at("seed").get<uint64_t>();
    plan.cube_edge_um = j.at("cube_edge_um").get<double>();
    plan.n_rods = j.at("n_rods").get<int>();
    plan.rod_radius_um = j.at("rod_radius_um").get<double>();
    plan.n_rod = j.at("n_rod").get<double>();
    plan.n_background = j.at("n_background").get<double>();
    for (const auto& row : j.at("chords")) {
        if (row.size() != 6) throw std::invalid_argument("plan chord row must have 6 entries");
        Chord c;
        c.p0 = {row[0].get<double>(), row[1].get<double>(), row[2].get<double>()};
        c.p1 = {row[3].get<double>(), row[4].get<double>(), row[5].get<double>()};
        c.radius = plan.rod_radius_um;
        plan.chords.push_back(c);
    }
    if (int(plan.chords.size()) != plan.n_rods)
        throw std::invalid_argument("plan chord count does not match n_rods");
    return plan;
}

void save_plan(const ConstructionPlan& plan, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << plan_to_json(plan);
}

ConstructionPlan load_plan(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return plan_from_json(ss.str());
}

}  // namespace pufsim::geom
