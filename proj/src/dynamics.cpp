#include "tubenav/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tubenav {

namespace {
constexpr Vec3 kWorldUp{0.0, 1.0, 0.0};
}

void DroneState::validate(double v_max) const {
    auto unit = [](const Vec3& v) { return std::abs(v.norm() - 1.0) <= 1e-9; };
    if (!unit(forward) || !unit(up) || !unit(right))
        throw std::invalid_argument("drone basis axis not unit norm");
    if (std::abs(dot(forward, up)) > 1e-9 || std::abs(dot(forward, right)) > 1e-9 ||
        std::abs(dot(up, right)) > 1e-9)
        throw std::invalid_argument("drone basis not orthogonal");
    if (speed < 0.0 || speed > v_max) throw std::invalid_argument("drone speed outside [0, v_max]");
}

double CameraIntrinsics::theta_max_a() const { return std::atan(f_w / c); }
double CameraIntrinsics::theta_max_b() const { return std::atan(f_h / c); }

ActionSpace build_action_space(const CameraIntrinsics& intr, double k, double v_max) {
    if (k <= 0.0 || k >= 1.0) throw std::invalid_argument("action cone scale k must be in (0, 1)");
    if (intr.f_w <= 0.0 || intr.f_h <= 0.0 || intr.c <= 0.0)
        throw std::invalid_argument("camera intrinsics must be positive");
    const double a = k * intr.theta_max_a();
    const double b = k * intr.theta_max_b();
    ActionSpace space;
    space.directions = {{{0.0, 0.0},
                         {+a, 0.0},
                         {-a, 0.0},
                         {0.0, +b},
                         {0.0, -b},
                         {+a, +b},
                         {+a, -b},
                         {-a, +b},
                         {-a, -b}}};
    space.speeds = {0.25 * v_max, 0.5 * v_max, 0.75 * v_max, v_max};
    return space;
}

Vec3 action_to_direction(const DroneState& state, const std::pair<double, double>& pair) {
    const Vec3 d = state.forward + state.right * std::tan(pair.first) + state.up * std::tan(pair.second);
    const Vec3 unit = d.normalized();
    if (dot(unit, state.forward) <= 0.0) throw std::logic_error("action direction faces backward");
    return unit;
}

DroneState step_kinematic(const DroneState& state, const Vec3& commanded_dir, double commanded_speed,
                          double dt, double max_turn_rate, double accel_max, double v_max) {
    if (dt <= 0.0) throw std::invalid_argument("dt must be positive");
    DroneState next = state;

    const Vec3 target = commanded_dir.normalized();
    const double ang = angle_between(state.forward, target);
    const double max_step = max_turn_rate * dt;
    Vec3 fwd;
    if (ang <= max_step || ang <= 1e-12) {
        fwd = target;
    } else {
        // slerp toward the target by exactly max_step radians
        const double sin_ang = std::sin(ang);
        const double wa = std::sin(ang - max_step) / sin_ang;
        const double wb = std::sin(max_step) / sin_ang;
        fwd = (state.forward * wa + target * wb).normalized();
    }
    next.forward = fwd;

    // Minimal-roll frame: keep up as close to world-up as the new forward allows.
    Vec3 up_ref = kWorldUp - fwd * dot(kWorldUp, fwd);
    if (up_ref.norm() < 1e-9) up_ref = state.up - fwd * dot(state.up, fwd);
    next.up = up_ref.normalized();
    next.right = cross(next.up, next.forward).normalized();
    next.up = cross(next.forward, next.right).normalized();

    const double dv = std::clamp(commanded_speed - state.speed, -accel_max * dt, accel_max * dt);
    next.prev_speed = state.speed;
    next.speed = std::clamp(state.speed + dv, 0.0, v_max);
    next.position = state.position + next.forward * (next.speed * dt);
    return next;
}

double Quaternion::norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

Quaternion Quaternion::normalized() const {
    const double n = norm();
    if (n <= 0.0) throw std::domain_error("zero quaternion");
    return {w / n, x / n, y / n, z / n};
}

Quaternion Quaternion::operator*(const Quaternion& o) const {
    return {w * o.w - x * o.x - y * o.y - z * o.z, w * o.x + x * o.w + y * o.z - z * o.y,
            w * o.y - x * o.z + y * o.w + z * o.x, w * o.z + x * o.y - y * o.x + z * o.w};
}

Vec3 Quaternion::rotate(const Vec3& v) const {
    const Vec3 q{x, y, z};
    const Vec3 t = cross(q, v) * 2.0;
    return v + t * w + cross(q, t);
}

Quaternion Quaternion::from_basis(const Vec3& right, const Vec3& up, const Vec3& forward) {
    // Shepperd's method on the column matrix [right | up | forward].
    const double m00 = right.x, m01 = up.x, m02 = forward.x;
    const double m10 = right.y, m11 = up.y, m12 = forward.y;
    const double m20 = right.z, m21 = up.z, m22 = forward.z;
    const double trace = m00 + m11 + m22;
    Quaternion q;
    if (trace > 0.0) {
        const double s = std::sqrt(trace + 1.0) * 2.0;
        q = {0.25 * s, (m21 - m12) / s, (m02 - m20) / s, (m10 - m01) / s};
    } else if (m00 > m11 && m00 > m22) {
        const double s = std::sqrt(1.0 + m00 - m11 - m22) * 2.0;
        q = {(m21 - m12) / s, 0.25 * s, (m01 + m10) / s, (m02 + m20) / s};
    } else if (m11 > m22) {
        const double s = std::sqrt(1.0 + m11 - m00 - m22) * 2.0;
        q = {(m02 - m20) / s, (m01 + m10) / s, 0.25 * s, (m12 + m21) / s};
    } else {
        const double s = std::sqrt(1.0 + m22 - m00 - m11) * 2.0;
        q = {(m10 - m01) / s, (m02 + m20) / s, (m12 + m21) / s, 0.25 * s};
    }
    return q.normalized();
}

Quaternion Quaternion::from_axis_angle(const Vec3& axis_times_angle) {
    const double ang = axis_times_angle.norm();
    if (ang < 1e-14) return identity();
    const Vec3 u = axis_times_angle / ang;
    const double h = 0.5 * ang;
    const double s = std::sin(h);
    return {std::cos(h), u.x * s, u.y * s, u.z * s};
}

RigidBodyState integrate_rigid_body(const RigidBodyState& body, const Vec3& f_cmd, const Vec3& tau_cmd,
                                    const Vec3& g, double dt) {
    if (!(dt > 0.0 && dt <= 0.01)) throw std::invalid_argument("physics dt outside (0, 0.01]");
    if (!f_cmd.finite() || !tau_cmd.finite() || !g.finite())
        throw std::invalid_argument("non-finite force/torque input");

    RigidBodyState next = body;
    next.linear_velocity = body.linear_velocity + (f_cmd / body.mass + g) * dt;
    next.position = body.position + next.linear_velocity * dt;

    // Angular rate: body-frame Euler equation with the gyroscopic bracket
    // evaluated at the midpoint, which keeps torque-free kinetic energy flat
    // where a fully explicit bracket pumps it up a few percent per minute.
    const Vec3& I = body.inertia_diag;
    auto wdot_at = [&](const Vec3& w) {
        const Vec3 Iw{I.x * w.x, I.y * w.y, I.z * w.z};
        return Vec3{(tau_cmd.x - (w.y * Iw.z - w.z * Iw.y)) / I.x,
                    (tau_cmd.y - (w.z * Iw.x - w.x * Iw.z)) / I.y,
                    (tau_cmd.z - (w.x * Iw.y - w.y * Iw.x)) / I.z};
    };
    const Vec3& w0 = body.angular_velocity;
    const Vec3 w_mid = w0 + wdot_at(w0) * (0.5 * dt);
    next.angular_velocity = w0 + wdot_at(w_mid) * dt;
    next.orientation =
        (body.orientation * Quaternion::from_axis_angle(next.angular_velocity * dt)).normalized();
    return next;
}

std::pair<Vec3, Vec3> gravity_compensated_command(const Vec3& commanded_dir, double speed_level,
                                                  const RigidBodyState& body, const CommandGains& gains,
                                                  const Vec3& g) {
    const Vec3 v_des = commanded_dir * speed_level;
    const Vec3 f_cmd = (v_des - body.linear_velocity) * (gains.k_vel * body.mass) - g * (gains.lambda * body.mass);

    const Vec3 fwd = body.body_forward();
    const Vec3 err = cross(fwd, commanded_dir);
    const Vec3 omega_world = body.orientation.rotate(body.angular_velocity);
    const Vec3 tau_world = err * gains.k_att - omega_world * gains.k_damp;
    // Torque is applied in the body frame by the integrator.
    const Quaternion inv{body.orientation.w, -body.orientation.x, -body.orientation.y, -body.orientation.z};
    return {f_cmd, inv.rotate(tau_world)};
}

} // namespace tubenav
