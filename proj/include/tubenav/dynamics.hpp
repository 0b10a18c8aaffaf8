#ifndef TUBENAV_DYNAMICS_HPP
#define TUBENAV_DYNAMICS_HPP

#include <array>
#include <utility>

#include "tubenav/config.hpp"
#include "tubenav/vec3.hpp"

namespace tubenav {

// Kinematic drone pose. (right, up, forward) is a right-handed orthonormal
// basis: right x up == forward.
struct DroneState {
    Vec3 position;
    Vec3 forward{0.0, 0.0, 1.0};
    Vec3 up{0.0, 1.0, 0.0};
    Vec3 right{1.0, 0.0, 0.0};
    double speed = 0.0;
    double prev_speed = 0.0;

    void validate(double v_max) const; // throws std::invalid_argument

    // World direction of a vector given in (right, up, forward) components.
    Vec3 local_to_world(const Vec3& local) const {
        return right * local.x + up * local.y + forward * local.z;
    }
    Vec3 world_to_local(const Vec3& world) const {
        return {dot(world, right), dot(world, up), dot(world, forward)};
    }
};

struct CameraIntrinsics {
    double f_w = 1.0; // half-width of the image plane
    double f_h = 0.7; // half-height
    double c = 1.0;   // synthetic focal length

    double theta_max_a() const; // atan(f_w / c)
    double theta_max_b() const; // atan(f_h / c)
};

// 9 direction pairs x 4 speed levels. Action index = direction * 4 + speed;
// index 0 is (0,0) at the lowest speed.
struct ActionSpace {
    std::array<std::pair<double, double>, 9> directions; // (alpha, beta) radians
    std::array<double, 4> speeds;                        // m/s, ascending

    static constexpr int size() { return 36; }
    std::pair<double, double> direction_of(int action) const { return directions[action / 4]; }
    double speed_of(int action) const { return speeds[action % 4]; }
};

ActionSpace build_action_space(const CameraIntrinsics& intr, double k, double v_max);

// normalize(forward + tan(alpha) * right + tan(beta) * up); always forward-facing.
Vec3 action_to_direction(const DroneState& state, const std::pair<double, double>& pair);

DroneState step_kinematic(const DroneState& state, const Vec3& commanded_dir, double commanded_speed,
                          double dt, double max_turn_rate, double accel_max, double v_max);

struct Quaternion {
    double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

    double norm() const;
    Quaternion normalized() const;
    Vec3 rotate(const Vec3& v) const;
    Quaternion operator*(const Quaternion& o) const;
    static Quaternion from_axis_angle(const Vec3& axis_times_angle);
    // Right-handed orthonormal basis (right, up, forward) -> body-to-world rotation.
    static Quaternion from_basis(const Vec3& right, const Vec3& up, const Vec3& forward);
    static Quaternion identity() { return {}; }
};

struct RigidBodyState {
    Vec3 position;
    Quaternion orientation; // body-to-world
    Vec3 linear_velocity;
    Vec3 angular_velocity; // body frame, rad/s
    double mass = 1.0;
    Vec3 inertia_diag{0.005, 0.005, 0.009}; // principal inertia, kg m^2

    Vec3 body_forward() const { return orientation.rotate({0.0, 0.0, 1.0}); }
    Vec3 body_up() const { return orientation.rotate({0.0, 1.0, 0.0}); }
    Vec3 body_right() const { return orientation.rotate({1.0, 0.0, 0.0}); }
};

// Semi-implicit Euler: v += (F/m + g) dt; p += v dt; body-frame Euler equation
// for omega; quaternion advanced by the axis-angle exponential and renormalized.
RigidBodyState integrate_rigid_body(const RigidBodyState& body, const Vec3& f_cmd, const Vec3& tau_cmd,
                                    const Vec3& g, double dt);

struct CommandGains {
    double k_vel = 12.0;
    double k_att = 8.0;
    double k_damp = 1.2;
    double lambda = 0.9; // fraction of gravity cancelled outright
};

// Velocity-error force with partial gravity cancellation plus a PD attitude
// torque steering the body forward axis onto commanded_dir.
std::pair<Vec3, Vec3> gravity_compensated_command(const Vec3& commanded_dir, double speed_level,
                                                  const RigidBodyState& body, const CommandGains& gains,
                                                  const Vec3& g);

} // namespace tubenav

#endif
