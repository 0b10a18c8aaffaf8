#ifndef TUBENAV_SENSING_HPP
#define TUBENAV_SENSING_HPP

#include <vector>

#include "tubenav/dynamics.hpp"
#include "tubenav/geometry.hpp"

namespace tubenav {

enum class LidarRing { front, rear };

struct LidarScan {
    LidarRing ring = LidarRing::front;
    std::vector<double> distances;   // normalized by d_max, in [0, 1]
    std::vector<double> beam_angles; // radians in the ring plane, from +right toward +up
    bool degenerate = false;         // pose outside the tube; all distances zero
};

// Nine derived scan features plus the per-sector means they come from.
// Sectors are the quarter arcs centered on +right (R), +up (T), -right (L),
// -up (B), assigned by half-open angle intervals.
struct LidarFeatures {
    double h_f = 0.0, v_f = 0.0; // front horizontal/vertical asymmetry: R-L, T-B
    double h_r = 0.0, v_r = 0.0;
    double s_f = 1.0, s_r = 1.0; // symmetry scores, 1 - (|h|+|v|)/2
    double m_f = 0.0, m_r = 0.0; // whole-ring means
    double l_min = 0.0;          // min normalized distance over both rings
    double c_turn = 0.0;         // clip((s_r - s_f) + max(m_r - m_f, 0), 0, 1)
    double r_fl = 0.0, r_fr = 0.0, r_ft = 0.0, r_fb = 0.0;
    double r_rl = 0.0, r_rr = 0.0, r_rt = 0.0, r_rb = 0.0;
};

struct TargetObservation {
    Vec3 direction_local; // unit, (right, up, forward) components; zero when invisible
    double depth_norm = 0.0;
    bool visible = false;
};

struct DirectionalMemory {
    Vec3 last_direction_world;
    Vec3 last_direction_local; // re-projected into the current drone frame
    int steps_since_seen = 0;
    bool valid = false;

    static DirectionalMemory cleared(int memory_horizon) {
        DirectionalMemory m;
        m.steps_since_seen = memory_horizon + 1;
        return m;
    }
};

// First hit of each beam against the analytic tube surface, cast in the plane
// perpendicular to forward from the ring origin (position +/- ring_offset along
// forward). A pose outside the tube yields a degenerate all-zeros scan.
LidarScan lidar_scan(const TubeSpec& tube, const DroneState& pose, LidarRing ring, int n_beams,
                     double d_max, double ring_offset);

LidarFeatures lidar_features(const LidarScan& front, const LidarScan& rear);

// Target is the centerline point lookahead_window ahead of the drone's arc
// length, clamped to the tube end. Visible iff it lies in the FOV cone
// (boundary inclusive) and the straight sight line stays inside the tube.
TargetObservation camera_detect(const TubeSpec& tube, const DroneState& pose,
                                const CameraIntrinsics& intrinsics, double lookahead_window,
                                double depth_max);

DirectionalMemory update_memory(const DirectionalMemory& mem, const TargetObservation& obs,
                                const DroneState& state, int memory_horizon);

// Distance along a ray from origin to the tube wall, capped at d_max.
double ray_wall_distance(const TubeSpec& tube, const Vec3& origin, const Vec3& dir, double d_max);

} // namespace tubenav

#endif
