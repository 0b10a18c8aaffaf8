#include "tubenav/bridge.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <mutex>
#include <thread>

#include <fcntl.h>
#include <sys/mman.h>
#include <unistd.h>

#include "tubenav/obj_io.hpp"

namespace tubenav {

namespace {

template <typename T>
void put(std::uint8_t* p, std::size_t off, T v) {
    std::memcpy(p + off, &v, sizeof(T));
}

template <typename T>
T get(const std::uint8_t* p, std::size_t off) {
    T v;
    std::memcpy(&v, p + off, sizeof(T));
    return v;
}

void require_finite(float v, const char* what) {
    if (!std::isfinite(v)) throw ProtocolError(std::string("non-finite ") + what + " on the wire");
}

} // namespace

CommandBytes encode_command(const CommandFrame& f) {
    CommandBytes b{};
    put(b.data(), 0, f.seq);
    put(b.data(), 8, f.direction[0]);
    put(b.data(), 12, f.direction[1]);
    put(b.data(), 16, f.direction[2]);
    put(b.data(), 20, f.speed);
    put(b.data(), 24, f.flags);
    return b;
}

CommandFrame decode_command(const std::uint8_t* data, std::size_t len) {
    if (len != kCommandFrameSize) throw ProtocolError("command frame must be exactly 32 bytes");
    CommandFrame f;
    f.seq = get<std::uint64_t>(data, 0);
    f.direction[0] = get<float>(data, 8);
    f.direction[1] = get<float>(data, 12);
    f.direction[2] = get<float>(data, 16);
    f.speed = get<float>(data, 20);
    f.flags = get<std::uint32_t>(data, 24);
    require_finite(f.direction[0], "direction.x");
    require_finite(f.direction[1], "direction.y");
    require_finite(f.direction[2], "direction.z");
    require_finite(f.speed, "speed");
    return f;
}

PoseBytes encode_pose(const PoseFrame& f) {
    PoseBytes b{};
    put(b.data(), 0, f.seq);
    for (int i = 0; i < 3; ++i) put(b.data(), 8 + 4 * i, f.position[i]);
    for (int i = 0; i < 4; ++i) put(b.data(), 20 + 4 * i, f.orientation[i]);
    for (int i = 0; i < 3; ++i) put(b.data(), 36 + 4 * i, f.linear_velocity[i]);
    for (int i = 0; i < 3; ++i) put(b.data(), 48 + 4 * i, f.angular_velocity[i]);
    return b;
}

PoseFrame decode_pose(const std::uint8_t* data, std::size_t len) {
    if (len != kPoseFrameSize) throw ProtocolError("pose frame must be exactly 64 bytes");
    PoseFrame f;
    f.seq = get<std::uint64_t>(data, 0);
    for (int i = 0; i < 3; ++i) f.position[i] = get<float>(data, 8 + 4 * i);
    for (int i = 0; i < 4; ++i) f.orientation[i] = get<float>(data, 20 + 4 * i);
    for (int i = 0; i < 3; ++i) f.linear_velocity[i] = get<float>(data, 36 + 4 * i);
    for (int i = 0; i < 3; ++i) f.angular_velocity[i] = get<float>(data, 48 + 4 * i);
    for (int i = 0; i < 3; ++i) require_finite(f.position[i], "position");
    for (int i = 0; i < 4; ++i) require_finite(f.orientation[i], "orientation");
    for (int i = 0; i < 3; ++i) require_finite(f.linear_velocity[i], "linear velocity");
    for (int i = 0; i < 3; ++i) require_finite(f.angular_velocity[i], "angular velocity");
    const double qn = std::sqrt(static_cast<double>(f.orientation[0]) * f.orientation[0] +
                                static_cast<double>(f.orientation[1]) * f.orientation[1] +
                                static_cast<double>(f.orientation[2]) * f.orientation[2] +
                                static_cast<double>(f.orientation[3]) * f.orientation[3]);
    if (f.seq != 0 && std::abs(qn - 1.0) > 1e-3) throw ProtocolError("pose quaternion badly denormalized");
    return f;
}

namespace {

class InprocChannel final : public Channel {
  public:
    void write_command(const CommandBytes& bytes) override {
        std::lock_guard<std::mutex> lock(mu_);
        command_ = bytes;
    }
    CommandBytes read_command() override {
        std::lock_guard<std::mutex> lock(mu_);
        return command_;
    }
    void write_pose(const PoseBytes& bytes) override {
        std::lock_guard<std::mutex> lock(mu_);
        pose_ = bytes;
    }
    PoseBytes read_pose() override {
        std::lock_guard<std::mutex> lock(mu_);
        return pose_;
    }

  private:
    std::mutex mu_;
    CommandBytes command_{};
    PoseBytes pose_{};
};

constexpr std::size_t kShmSize = 128;
constexpr std::size_t kCommandSlot = 0;
constexpr std::size_t kPoseSlot = 64;

class ShmChannel final : public Channel {
  public:
    ShmChannel(const std::string& name, bool create) : name_(name), owner_(create) {
        int flags = O_RDWR;
        if (create) flags |= O_CREAT;
        fd_ = ::shm_open(name.c_str(), flags, 0644);
        if (fd_ < 0) throw ProtocolError("shm_open failed for " + name);
        if (create && ::ftruncate(fd_, kShmSize) != 0) {
            ::close(fd_);
            throw ProtocolError("ftruncate failed for " + name);
        }
        void* p = ::mmap(nullptr, kShmSize, PROT_READ | PROT_WRITE, MAP_SHARED, fd_, 0);
        if (p == MAP_FAILED) {
            ::close(fd_);
            throw ProtocolError("mmap failed for " + name);
        }
        base_ = static_cast<std::uint8_t*>(p);
        if (create) std::memset(base_, 0, kShmSize);
    }

    ~ShmChannel() override {
        ::munmap(base_, kShmSize);
        ::close(fd_);
        if (owner_) ::shm_unlink(name_.c_str());
    }

    void write_command(const CommandBytes& bytes) override { write_slot(kCommandSlot, bytes.data(), bytes.size()); }
    CommandBytes read_command() override {
        CommandBytes b;
        read_slot(kCommandSlot, b.data(), b.size());
        return b;
    }
    void write_pose(const PoseBytes& bytes) override { write_slot(kPoseSlot, bytes.data(), bytes.size()); }
    PoseBytes read_pose() override {
        PoseBytes b;
        read_slot(kPoseSlot, b.data(), b.size());
        return b;
    }

  private:
    // Payload first, then a release-store of seq; readers double-check seq
    // around the payload copy (cheap seqlock; one writer per slot).
    void write_slot(std::size_t off, const std::uint8_t* src, std::size_t n) {
        std::uint64_t seq;
        std::memcpy(&seq, src, 8);
        std::memcpy(base_ + off + 8, src + 8, n - 8);
        std::atomic_ref<std::uint64_t> seq_ref(*reinterpret_cast<std::uint64_t*>(base_ + off));
        seq_ref.store(seq, std::memory_order_release);
    }
    void read_slot(std::size_t off, std::uint8_t* dst, std::size_t n) {
        std::atomic_ref<std::uint64_t> seq_ref(*reinterpret_cast<std::uint64_t*>(base_ + off));
        for (;;) {
            const std::uint64_t s1 = seq_ref.load(std::memory_order_acquire);
            std::memcpy(dst + 8, base_ + off + 8, n - 8);
            const std::uint64_t s2 = seq_ref.load(std::memory_order_acquire);
            if (s1 == s2) {
                std::memcpy(dst, &s1, 8);
                return;
            }
        }
    }

    std::string name_;
    bool owner_ = false;
    int fd_ = -1;
    std::uint8_t* base_ = nullptr;
};

} // namespace

std::unique_ptr<Channel> make_inproc_channel() { return std::make_unique<InprocChannel>(); }

std::unique_ptr<Channel> make_shm_channel(const std::string& name, bool create) {
    return std::make_unique<ShmChannel>(name, create);
}

CommandFrame wait_for_command(Channel& ch, std::uint64_t last_answered_seq) {
    for (;;) {
        const CommandBytes b = ch.read_command();
        const std::uint64_t seq = get<std::uint64_t>(b.data(), 0);
        if (seq != 0 && seq != last_answered_seq) {
            if (seq < last_answered_seq)
                throw ProtocolError("command seq regression: " + std::to_string(seq) + " after " +
                                    std::to_string(last_answered_seq));
            return decode_command(b.data(), b.size());
        }
        std::this_thread::sleep_for(std::chrono::microseconds(20));
    }
}

PoseFrame wait_for_pose(Channel& ch, std::uint64_t expected_seq) {
    for (;;) {
        const PoseBytes b = ch.read_pose();
        const std::uint64_t seq = get<std::uint64_t>(b.data(), 0);
        if (seq == expected_seq) return decode_pose(b.data(), b.size());
        if (seq > expected_seq)
            throw ProtocolError("pose seq overran the expected value: " + std::to_string(seq));
        std::this_thread::sleep_for(std::chrono::microseconds(20));
    }
}

RigidBodyPlant::RigidBodyPlant(const RigidBodyState& initial, const PlantConfig& cfg)
    : initial_(initial), body_(initial), cfg_(cfg) {
    const double ratio = cfg.dt_control / cfg.delta_t;
    substeps_ = static_cast<int>(std::llround(ratio));
    if (substeps_ < 1 || std::abs(ratio - substeps_) > 1e-9)
        throw std::invalid_argument("dt_control must be an integer multiple of delta_t");
}

PoseFrame RigidBodyPlant::process(const CommandFrame& cmd) {
    if (cmd.seq <= last_seq_)
        throw ProtocolError("command seq " + std::to_string(cmd.seq) + " not greater than last answered " +
                            std::to_string(last_seq_));
    const Vec3 dir{cmd.direction[0], cmd.direction[1], cmd.direction[2]};
    const double n = dir.norm();
    if (n < 0.99 || n > 1.01) throw ProtocolError("command direction is not near-unit");

    if (cmd.flags & kFlagReset) body_ = initial_;
    if (!(cmd.flags & kFlagShutdown)) {
        const Vec3 unit = dir / n;
        for (int i = 0; i < substeps_; ++i) {
            // Command recomputed per physics substep, mirroring an engine-side
            // controller running at the physics rate.
            const auto [f_cmd, tau_cmd] =
                gravity_compensated_command(unit, cmd.speed, body_, cfg_.gains, cfg_.gravity);
            body_ = integrate_rigid_body(body_, f_cmd, tau_cmd, cfg_.gravity, cfg_.delta_t);
        }
    }

    last_seq_ = cmd.seq;
    PoseFrame pose;
    pose.seq = cmd.seq;
    pose.position[0] = static_cast<float>(body_.position.x);
    pose.position[1] = static_cast<float>(body_.position.y);
    pose.position[2] = static_cast<float>(body_.position.z);
    pose.orientation[0] = static_cast<float>(body_.orientation.w);
    pose.orientation[1] = static_cast<float>(body_.orientation.x);
    pose.orientation[2] = static_cast<float>(body_.orientation.y);
    pose.orientation[3] = static_cast<float>(body_.orientation.z);
    pose.linear_velocity[0] = static_cast<float>(body_.linear_velocity.x);
    pose.linear_velocity[1] = static_cast<float>(body_.linear_velocity.y);
    pose.linear_velocity[2] = static_cast<float>(body_.linear_velocity.z);
    pose.angular_velocity[0] = static_cast<float>(body_.angular_velocity.x);
    pose.angular_velocity[1] = static_cast<float>(body_.angular_velocity.y);
    pose.angular_velocity[2] = static_cast<float>(body_.angular_velocity.z);
    return pose;
}

std::uint64_t plant_loop(const RigidBodyState& initial, Channel& ch, const PlantConfig& cfg) {
    RigidBodyPlant plant(initial, cfg);
    std::uint64_t answered = 0;
    for (;;) {
        const CommandFrame cmd = wait_for_command(ch, plant.last_seq());
        const PoseFrame pose = plant.process(cmd);
        ch.write_pose(encode_pose(pose));
        ++answered;
        if (cmd.flags & kFlagShutdown) return answered;
    }
}

TubeSpec tube_from_obj_files(const std::string& tube_obj_path, const std::string& centerline_obj_path) {
    ObjData mesh, line;
    try {
        mesh = load_obj_file(tube_obj_path);
    } catch (const std::exception& e) {
        throw ConfigurationError(std::string("tube mesh: ") + e.what());
    }
    try {
        line = load_obj_file(centerline_obj_path);
    } catch (const std::exception& e) {
        throw ConfigurationError(std::string("centerline: ") + e.what());
    }
    if (line.polylines.empty()) throw ConfigurationError("centerline OBJ has no polyline record");
    if (mesh.vertices.empty()) throw ConfigurationError("tube OBJ has no vertices");

    std::vector<Vec3> pts;
    for (int idx : line.polylines.front()) pts.push_back(line.vertices.at(idx));
    TubeSpec tube;
    tube.centerline = centerline_from_points(pts);

    // Median vertex distance to the centerline recovers the radius; a wide
    // spread means the assets do not describe the same tube.
    std::vector<double> dists;
    const std::size_t stride = std::max<std::size_t>(1, mesh.vertices.size() / 4096);
    for (std::size_t i = 0; i < mesh.vertices.size(); i += stride)
        dists.push_back(nearest_point(tube.centerline, mesh.vertices[i]).d_perp);
    std::sort(dists.begin(), dists.end());
    const double median = dists[dists.size() / 2];
    if (median <= 0.0) throw ConfigurationError("degenerate fitted radius");
    double var = 0.0, mean = 0.0;
    for (double d : dists) mean += d;
    mean /= dists.size();
    for (double d : dists) var += (d - mean) * (d - mean);
    var /= dists.size();
    if (std::sqrt(var) / median > 0.10)
        throw ConfigurationError("fitted radius varies by more than 10%: mesh and centerline disagree");
    tube.radius = median;
    return tube;
}

EpisodeRecord inference_driver(const std::string& checkpoint_path, const std::string& tube_obj_path,
                               const std::string& centerline_obj_path, Channel& ch,
                               const WorkbenchConfig& cfg, const DriverOptions& opt) {
    const Checkpoint ck = load_checkpoint(checkpoint_path);
    TubeSpec tube = tube_from_obj_files(tube_obj_path, centerline_obj_path);

    WorkbenchConfig local_cfg = cfg;
    local_cfg.geometry.radius = tube.radius;

    CameraIntrinsics intrinsics;
    intrinsics.f_w = cfg.dynamics.fw_over_c;
    intrinsics.f_h = cfg.dynamics.fh_over_c;
    intrinsics.c = 1.0;
    const ActionSpace space = build_action_space(intrinsics, cfg.dynamics.k_action, cfg.dynamics.v_max);

    DroneState state;
    const auto& start = tube.centerline.samples.front();
    state.position = start.position;
    state.forward = start.tangent;
    Vec3 up_ref = Vec3{0.0, 1.0, 0.0} - state.forward * state.forward.y;
    if (up_ref.norm() < 1e-9) up_ref = Vec3{1.0, 0.0, 0.0} - state.forward * state.forward.x;
    state.up = up_ref.normalized();
    state.right = cross(state.up, state.forward).normalized();
    state.up = cross(state.forward, state.right).normalized();
    state.speed = space.speeds[0];
    state.prev_speed = state.speed;

    DirectionalMemory memory = DirectionalMemory::cleared(cfg.sensing.memory_horizon);

    EpisodeRecord rec;
    rec.controller = opt.controller_id;
    rec.level = 0;
    rec.terminal = Terminal::timeout;

    std::uint64_t seq = 0;
    const double goal_s = tube.centerline.total_length - local_cfg.eps_goal();
    const int t_max = std::min<int>(cfg.env.t_max, static_cast<int>(opt.time_limit_steps));

    for (int t = 0; t < t_max; ++t) {
        SenseResult sense = sense_pipeline(tube, state, memory, t, local_cfg);

        const int action = greedy_action(ck.params, sense.obs);
        const Vec3 dir = action_to_direction(state, space.direction_of(action));
        const double speed = space.speed_of(action);

        CommandFrame cmd;
        cmd.seq = ++seq;
        cmd.direction[0] = static_cast<float>(dir.x);
        cmd.direction[1] = static_cast<float>(dir.y);
        cmd.direction[2] = static_cast<float>(dir.z);
        cmd.speed = static_cast<float>(speed);
        ch.write_command(encode_command(cmd));
        const PoseFrame pose = wait_for_pose(ch, seq);

        const Quaternion q{pose.orientation[0], pose.orientation[1], pose.orientation[2],
                           pose.orientation[3]};
        const Quaternion qn = q.normalized();
        DroneState next;
        next.position = Vec3{pose.position[0], pose.position[1], pose.position[2]};
        next.right = qn.rotate({1.0, 0.0, 0.0});
        next.up = qn.rotate({0.0, 1.0, 0.0});
        next.forward = qn.rotate({0.0, 0.0, 1.0});
        const Vec3 linvel{pose.linear_velocity[0], pose.linear_velocity[1], pose.linear_velocity[2]};
        next.prev_speed = state.speed;
        next.speed = std::clamp(dot(linvel, next.forward), 0.0, cfg.dynamics.v_max);
        state = next;

        SenseResult after = sense_pipeline(tube, state, memory, t + 1, local_cfg);
        double reward = compute_reward(after.ctx);
        Terminal terminal = Terminal::running;
        if (after.ctx.nearest.s >= goal_s) {
            terminal = Terminal::success;
            reward += 10.0;
        } else if (!after.inside) {
            terminal = Terminal::failure;
            reward += -10.0;
        } else if (t + 1 >= t_max) {
            terminal = Terminal::timeout;
            reward += -1.0;
        }

        EpisodeStep step;
        step.t = t + 1;
        step.position = state.position;
        step.d_perp_over_r = after.ctx.nearest.d_perp / tube.radius;
        step.s_align = after.scores.s_align;
        step.regime = regime_of(after.ctx);
        step.reward = reward;
        step.c_turn = after.ctx.features.c_turn;
        step.inside = after.inside;
        rec.steps.push_back(step);

        if (terminal != Terminal::running) {
            rec.terminal = terminal;
            break;
        }
    }

    // Shutdown handshake so the plant loop exits cleanly.
    CommandFrame bye;
    bye.seq = ++seq;
    const Vec3 fwd = state.forward;
    bye.direction[0] = static_cast<float>(fwd.x);
    bye.direction[1] = static_cast<float>(fwd.y);
    bye.direction[2] = static_cast<float>(fwd.z);
    bye.flags = kFlagShutdown;
    ch.write_command(encode_command(bye));
    wait_for_pose(ch, seq);
    return rec;
}

} // namespace tubenav
