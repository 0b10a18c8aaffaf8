#ifndef TUBENAV_GEOMETRY_HPP
#define TUBENAV_GEOMETRY_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tubenav/config.hpp"
#include "tubenav/rng.hpp"
#include "tubenav/vec3.hpp"

namespace tubenav {

// Curve families ordered by max-curvature band (1/m):
// A [0, 0.02], B [0.02, 0.08], C [0.08, 0.18], D [0.15, 0.35].
enum class CurveFamily { A = 0, B = 1, C = 2, D = 3 };

struct RawCurve {
    std::vector<Vec3> points;
    CurveFamily family = CurveFamily::A;
};

struct CenterlineSample {
    Vec3 position;
    Vec3 tangent; // unit
    double arclength = 0.0;
};

struct Centerline {
    std::vector<CenterlineSample> samples;
    double total_length = 0.0;

    // Position / tangent at arc length s (clamped to [0, total_length]).
    Vec3 point_at(double s) const;
    Vec3 tangent_at(double s) const;

    void validate() const; // throws std::invalid_argument on a broken invariant
};

struct TubeSpec {
    Centerline centerline;
    double radius = 1.0;
    int level = 0;
    std::uint64_t seed = 0;
};

struct NearestPointResult {
    double s = 0.0;     // arc length of the closest point
    Vec3 point;         // closest point on the polyline
    Vec3 tangent;       // interpolated unit tangent at s
    double d_perp = 0.0;
    int segment = 0;    // index of the segment hit
    double end_overshoot = 0.0; // signed axial offset past the clamped endpoint, 0 in the interior
};

// Curvature band limits per family, indexed by CurveFamily.
struct CurvatureBand {
    double lo;
    double hi;
};
CurvatureBand family_band(CurveFamily family);

// Discrete (Menger) curvature of the middle point of a triple; exact for circles.
double menger_curvature(const Vec3& a, const Vec3& b, const Vec3& c);
double max_menger_curvature(const std::vector<Vec3>& points);

RawCurve generate_raw_curve(CurveFamily family, double length, Rng& rng, int n_points = 128);

// Clamped B-spline through tension-smoothed control points, resampled to
// n_samples uniform in arc length. tension in [0, 0.5] blends each interior
// control point toward its neighbors' midpoint.
Centerline smooth_curve(const RawCurve& raw, int degree, double tension, int n_samples);

Centerline blend_curves(const Centerline& c1, const Centerline& c2, double alpha);

Centerline resample_by_arclength(const Centerline& cl, int n_samples);

TubeSpec sample_curriculum_tube(int level, Rng& rng, const GeometryConfig& cfg = {});
TubeSpec sample_curriculum_tube_seeded(int level, std::uint64_t seed, const GeometryConfig& cfg = {});

// Families drawn at each curriculum level: 0 -> {A,B}, 1 -> {B,C}, 2 -> {C,D}.
std::pair<CurveFamily, CurveFamily> level_families(int level);
// Upper curvature cap enforced on generated tubes of a level (the curvier
// family's band top).
double level_curvature_cap(int level);

NearestPointResult nearest_point(const Centerline& cl, const Vec3& p);

// Same result restricted to segments [seg_lo, seg_hi]; callers must guarantee
// the true nearest segment lies in range.
NearestPointResult nearest_point_in_range(const Centerline& cl, const Vec3& p, int seg_lo, int seg_hi);

bool is_inside(const TubeSpec& tube, const Vec3& p);

// ASCII OBJ: triangle mesh of the tube surface (ring extrusion, no end caps)
// and the centerline as a polyline. Returns (mesh_bytes, centerline_bytes).
std::pair<std::string, std::string> export_obj(const TubeSpec& tube, int circle_segments);

// Straight tube along +z starting at the origin, for tests and the bridge demo.
TubeSpec make_straight_tube(double length, double radius, int n_samples = 256);

// Build a centerline from bare positions: chord-length arc lengths and
// central-difference tangents.
Centerline centerline_from_points(const std::vector<Vec3>& pts);

} // namespace tubenav

#endif
