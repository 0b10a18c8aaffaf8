#ifndef TUBENAV_TEST_HELPERS_HPP
#define TUBENAV_TEST_HELPERS_HPP

#include <cmath>
#include <limits>
#include <vector>

#include "tubenav/geometry.hpp"
#include "tubenav/obj_io.hpp"

namespace tubenav::testing {

// Independent discrete-curvature oracle: circumscribed-circle radius of each
// consecutive point triple (4 * triangle area / product of side lengths).
inline double oracle_curvature(const Vec3& a, const Vec3& b, const Vec3& c) {
    const double ab = distance(a, b);
    const double bc = distance(b, c);
    const double ca = distance(c, a);
    const double area2 = cross(b - a, c - a).norm(); // twice the triangle area
    const double denom = ab * bc * ca;
    return denom > 0.0 ? 2.0 * area2 / denom : 0.0;
}

inline double oracle_max_curvature(const std::vector<Vec3>& pts) {
    double m = 0.0;
    for (std::size_t i = 1; i + 1 < pts.size(); ++i)
        m = std::max(m, oracle_curvature(pts[i - 1], pts[i], pts[i + 1]));
    return m;
}

inline std::vector<Vec3> centerline_points(const Centerline& cl) {
    std::vector<Vec3> pts;
    pts.reserve(cl.samples.size());
    for (const auto& s : cl.samples) pts.push_back(s.position);
    return pts;
}

// Brute-force nearest point: dense resampling of every segment.
struct BruteNearest {
    Vec3 point;
    double s = 0.0;
    double dist = std::numeric_limits<double>::infinity();
};

inline BruteNearest brute_force_nearest(const Centerline& cl, const Vec3& p, int per_segment = 64) {
    BruteNearest best;
    for (std::size_t i = 0; i + 1 < cl.samples.size(); ++i) {
        const Vec3& a = cl.samples[i].position;
        const Vec3& b = cl.samples[i + 1].position;
        for (int k = 0; k <= per_segment; ++k) {
            const double t = static_cast<double>(k) / per_segment;
            const Vec3 q = a + (b - a) * t;
            const double d = distance(p, q);
            if (d < best.dist) {
                best.dist = d;
                best.point = q;
                best.s = cl.samples[i].arclength + t * (cl.samples[i + 1].arclength - cl.samples[i].arclength);
            }
        }
    }
    return best;
}

// Moller-Trumbore ray/triangle intersection over a parsed OBJ mesh.
inline double raycast_mesh(const ObjData& mesh, const Vec3& origin, const Vec3& dir, double t_max) {
    double best = t_max;
    for (const auto& tri : mesh.triangles) {
        const Vec3& v0 = mesh.vertices[tri[0]];
        const Vec3& v1 = mesh.vertices[tri[1]];
        const Vec3& v2 = mesh.vertices[tri[2]];
        const Vec3 e1 = v1 - v0;
        const Vec3 e2 = v2 - v0;
        const Vec3 pvec = cross(dir, e2);
        const double det = dot(e1, pvec);
        if (std::abs(det) < 1e-14) continue;
        const double inv_det = 1.0 / det;
        const Vec3 tvec = origin - v0;
        const double u = dot(tvec, pvec) * inv_det;
        if (u < -1e-9 || u > 1.0 + 1e-9) continue;
        const Vec3 qvec = cross(tvec, e1);
        const double v = dot(dir, qvec) * inv_det;
        if (v < -1e-9 || u + v > 1.0 + 1e-9) continue;
        const double t = dot(e2, qvec) * inv_det;
        if (t > 1e-9 && t < best) best = t;
    }
    return best;
}

} // namespace tubenav::testing

#endif
