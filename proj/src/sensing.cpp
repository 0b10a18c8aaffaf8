#include "tubenav/sensing.hpp"

#include <algorithm>
#include <cmath>

namespace tubenav {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;

enum Sector { kRight = 0, kTop = 1, kLeft = 2, kBottom = 3 };

int sector_of(double angle) {
    double a = std::fmod(angle, kTwoPi);
    if (a < 0.0) a += kTwoPi;
    if (a < kPi / 4.0 || a >= 7.0 * kPi / 4.0) return kRight;
    if (a < 3.0 * kPi / 4.0) return kTop;
    if (a < 5.0 * kPi / 4.0) return kLeft;
    return kBottom;
}
} // namespace

double ray_wall_distance(const TubeSpec& tube, const Vec3& origin, const Vec3& dir, double d_max) {
    // Sphere tracing on R - d_perp: d_perp is 1-Lipschitz, so stepping by the
    // current margin can never jump across the wall.
    double t = 0.0;
    double margin = tube.radius - nearest_point(tube.centerline, origin).d_perp;
    if (margin <= 0.0) return 0.0;
    for (int it = 0; it < 128; ++it) {
        t += margin;
        if (t >= d_max) return d_max;
        margin = tube.radius - nearest_point(tube.centerline, origin + dir * t).d_perp;
        if (margin < 1e-6) return t;
    }
    return t;
}

LidarScan lidar_scan(const TubeSpec& tube, const DroneState& pose, LidarRing ring, int n_beams,
                     double d_max, double ring_offset) {
    if (n_beams < 8) throw std::invalid_argument("lidar needs >= 8 beams");
    if (d_max <= 0.0) throw std::invalid_argument("d_max must be positive");

    LidarScan scan;
    scan.ring = ring;
    scan.distances.assign(n_beams, 0.0);
    scan.beam_angles.resize(n_beams);
    for (int i = 0; i < n_beams; ++i) scan.beam_angles[i] = kTwoPi * i / n_beams;

    if (!is_inside(tube, pose.position)) {
        scan.degenerate = true;
        return scan;
    }

    const double offset = ring == LidarRing::front ? ring_offset : -ring_offset;
    const Vec3 origin = pose.position + pose.forward * offset;
    for (int i = 0; i < n_beams; ++i) {
        const double th = scan.beam_angles[i];
        const Vec3 dir = pose.right * std::cos(th) + pose.up * std::sin(th);
        const double d = ray_wall_distance(tube, origin, dir, d_max);
        scan.distances[i] = std::clamp(d / d_max, 0.0, 1.0);
    }
    return scan;
}

LidarFeatures lidar_features(const LidarScan& front, const LidarScan& rear) {
    auto ring_stats = [](const LidarScan& scan, double sector_mean[4], double& ring_mean, double& ring_min) {
        double sum[4] = {0, 0, 0, 0};
        int cnt[4] = {0, 0, 0, 0};
        double total = 0.0;
        ring_min = 1.0;
        for (std::size_t i = 0; i < scan.distances.size(); ++i) {
            const int sec = sector_of(scan.beam_angles[i]);
            sum[sec] += scan.distances[i];
            ++cnt[sec];
            total += scan.distances[i];
            ring_min = std::min(ring_min, scan.distances[i]);
        }
        for (int s = 0; s < 4; ++s) sector_mean[s] = cnt[s] > 0 ? sum[s] / cnt[s] : 0.0;
        ring_mean = scan.distances.empty() ? 0.0 : total / scan.distances.size();
    };

    double fs[4], rs[4], min_f, min_r;
    LidarFeatures f;
    ring_stats(front, fs, f.m_f, min_f);
    ring_stats(rear, rs, f.m_r, min_r);
    f.r_fr = fs[kRight];
    f.r_ft = fs[kTop];
    f.r_fl = fs[kLeft];
    f.r_fb = fs[kBottom];
    f.r_rr = rs[kRight];
    f.r_rt = rs[kTop];
    f.r_rl = rs[kLeft];
    f.r_rb = rs[kBottom];

    f.h_f = f.r_fr - f.r_fl;
    f.v_f = f.r_ft - f.r_fb;
    f.h_r = f.r_rr - f.r_rl;
    f.v_r = f.r_rt - f.r_rb;
    f.s_f = 1.0 - 0.5 * (std::abs(f.h_f) + std::abs(f.v_f));
    f.s_r = 1.0 - 0.5 * (std::abs(f.h_r) + std::abs(f.v_r));
    f.l_min = std::min(min_f, min_r);
    f.c_turn = std::clamp((f.s_r - f.s_f) + std::max(f.m_r - f.m_f, 0.0), 0.0, 1.0);
    return f;
}

TargetObservation camera_detect(const TubeSpec& tube, const DroneState& pose,
                                const CameraIntrinsics& intrinsics, double lookahead_window,
                                double depth_max) {
    TargetObservation obs;
    const NearestPointResult np = nearest_point(tube.centerline, pose.position);
    const double target_s = std::min(np.s + lookahead_window, tube.centerline.total_length);
    const Vec3 target = tube.centerline.point_at(target_s);

    const Vec3 to_target = target - pose.position;
    const double dist = to_target.norm();
    if (dist < 1e-9) {
        obs.visible = true;
        obs.direction_local = {0.0, 0.0, 1.0};
        obs.depth_norm = 0.0;
        return obs;
    }

    const Vec3 local = pose.world_to_local(to_target / dist);
    if (local.z <= 0.0) return obs;
    const double ang_a = std::atan2(std::abs(local.x), local.z);
    const double ang_b = std::atan2(std::abs(local.y), local.z);
    if (ang_a > intrinsics.theta_max_a() + 1e-12 || ang_b > intrinsics.theta_max_b() + 1e-12) return obs;

    // Occlusion: the straight sight line must stay inside the tube.
    const double step = 0.05 * tube.radius;
    const int n_checks = std::max(2, static_cast<int>(std::ceil(dist / step)));
    for (int k = 1; k < n_checks; ++k) {
        const Vec3 p = pose.position + to_target * (static_cast<double>(k) / n_checks);
        if (!is_inside(tube, p)) return obs;
    }

    obs.visible = true;
    obs.direction_local = local;
    obs.depth_norm = std::clamp(dist / depth_max, 0.0, 1.0);
    return obs;
}

DirectionalMemory update_memory(const DirectionalMemory& mem, const TargetObservation& obs,
                                const DroneState& state, int memory_horizon) {
    DirectionalMemory next = mem;
    if (obs.visible) {
        next.last_direction_world = state.local_to_world(obs.direction_local);
        next.steps_since_seen = 0;
        next.valid = true;
    } else {
        next.steps_since_seen = std::min(mem.steps_since_seen + 1, memory_horizon + 1);
        next.valid = next.steps_since_seen <= memory_horizon;
    }
    if (next.valid)
        next.last_direction_local = state.world_to_local(next.last_direction_world);
    else
        next.last_direction_local = Vec3{};
    return next;
}

} // namespace tubenav
