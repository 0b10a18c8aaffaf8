#ifndef TUBENAV_PUREPURSUIT_HPP
#define TUBENAV_PUREPURSUIT_HPP

#include <utility>

#include "tubenav/dynamics.hpp"
#include "tubenav/geometry.hpp"

namespace tubenav {

enum class SpeedPolicy { fixed, curvature_scaled };

struct PurePursuitConfig {
    double lookahead = 4.0; // meters
    SpeedPolicy speed_policy = SpeedPolicy::fixed;
    double v_cmd = 1.125;    // m/s
    double kappa_ref = 0.35; // curvature that drops curvature_scaled speed to its floor
};

// Centerline point at arc length min(s + lookahead, total_length).
Vec3 lookahead_point(const Centerline& cl, double s, double lookahead);

// Finite-difference curvature of the centerline near arc length s.
double local_curvature(const Centerline& cl, double s);

// Continuous tracking command: unit direction toward the lookahead point plus
// the configured speed. Requires privileged centerline access.
std::pair<Vec3, double> pp_control(const Centerline& cl, const DroneState& state,
                                   const PurePursuitConfig& cfg);

// Nearest discrete action for a continuous command: max dot product over the 9
// directions (ties resolve to the lower index), then nearest speed level
// (ties to the lower level).
int snap_to_action(const DroneState& state, const ActionSpace& space, const Vec3& commanded_dir,
                   double commanded_speed);

} // namespace tubenav

#endif
