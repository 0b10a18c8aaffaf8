#include "tubenav/purepursuit.hpp"

#include <algorithm>
#include <cmath>

namespace tubenav {

Vec3 lookahead_point(const Centerline& cl, double s, double lookahead) {
    if (s < 0.0 || s > cl.total_length) throw std::invalid_argument("arc length outside centerline");
    return cl.point_at(std::min(s + lookahead, cl.total_length));
}

double local_curvature(const Centerline& cl, double s) {
    const double h = std::max(cl.total_length / (cl.samples.size() - 1), 1e-6);
    const double s0 = std::clamp(s, h, cl.total_length - h);
    return menger_curvature(cl.point_at(s0 - h), cl.point_at(s0), cl.point_at(s0 + h));
}

std::pair<Vec3, double> pp_control(const Centerline& cl, const DroneState& state,
                                   const PurePursuitConfig& cfg) {
    if (cfg.lookahead <= 0.0) throw std::invalid_argument("lookahead must be positive");
    const NearestPointResult np = nearest_point(cl, state.position);
    const Vec3 target = lookahead_point(cl, np.s, cfg.lookahead);
    Vec3 to_target = target - state.position;
    Vec3 dir;
    if (to_target.norm() < 1e-9)
        dir = state.forward; // already at the clamped end point
    else
        dir = to_target.normalized();

    double speed = cfg.v_cmd;
    if (cfg.speed_policy == SpeedPolicy::curvature_scaled) {
        const double kappa = local_curvature(cl, np.s);
        speed = cfg.v_cmd * std::clamp(1.0 - kappa / cfg.kappa_ref, 0.25, 1.0);
    }
    return {dir, speed};
}

int snap_to_action(const DroneState& state, const ActionSpace& space, const Vec3& commanded_dir,
                   double commanded_speed) {
    int best_dir = 0;
    double best_dot = -2.0;
    for (int d = 0; d < 9; ++d) {
        const Vec3 candidate = action_to_direction(state, space.directions[d]);
        const double dp = dot(candidate, commanded_dir);
        if (dp > best_dot) { // strict: halfway ties keep the lower index
            best_dot = dp;
            best_dir = d;
        }
    }
    int best_speed = 0;
    double best_err = std::numeric_limits<double>::infinity();
    for (int v = 0; v < 4; ++v) {
        const double err = std::abs(space.speeds[v] - commanded_speed);
        if (err < best_err) {
            best_err = err;
            best_speed = v;
        }
    }
    return best_dir * 4 + best_speed;
}

} // namespace tubenav
