#ifndef TUBENAV_BRIDGE_HPP
#define TUBENAV_BRIDGE_HPP

#include <array>
#include <cstdint>
#include <memory>
#include <string>

#include "tubenav/dynamics.hpp"
#include "tubenav/eval.hpp"

namespace tubenav {

struct ProtocolError : std::runtime_error {
    explicit ProtocolError(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigurationError : std::runtime_error {
    explicit ConfigurationError(const std::string& what) : std::runtime_error(what) {}
};

// Wire frames. Fixed little-endian layout; seq 0 marks an empty slot, live
// sessions count from 1.
//
//   command (32 bytes): seq u64 @0 | dir f32x3 @8 | speed f32 @20 | flags u32 @24 | pad @28
//   pose    (64 bytes): seq u64 @0 | pos f32x3 @8 | quat wxyz f32x4 @20 |
//                       linvel f32x3 @36 | angvel f32x3 @48 | pad @60
inline constexpr std::size_t kCommandFrameSize = 32;
inline constexpr std::size_t kPoseFrameSize = 64;
inline constexpr std::uint32_t kFlagReset = 1u << 0;
inline constexpr std::uint32_t kFlagShutdown = 1u << 1;

struct CommandFrame {
    std::uint64_t seq = 0;
    float direction[3] = {0.f, 0.f, 1.f};
    float speed = 0.f;
    std::uint32_t flags = 0;
};

struct PoseFrame {
    std::uint64_t seq = 0;
    float position[3] = {0.f, 0.f, 0.f};
    float orientation[4] = {1.f, 0.f, 0.f, 0.f}; // w, x, y, z
    float linear_velocity[3] = {0.f, 0.f, 0.f};
    float angular_velocity[3] = {0.f, 0.f, 0.f};
};

using CommandBytes = std::array<std::uint8_t, kCommandFrameSize>;
using PoseBytes = std::array<std::uint8_t, kPoseFrameSize>;

CommandBytes encode_command(const CommandFrame& f);
CommandFrame decode_command(const std::uint8_t* data, std::size_t len);
PoseBytes encode_pose(const PoseFrame& f);
PoseFrame decode_pose(const std::uint8_t* data, std::size_t len);

// Two single-writer/single-reader slots. Lockstep keeps at most one unanswered
// command in flight, so a slot is never rewritten while its reader works.
class Channel {
  public:
    virtual ~Channel() = default;
    virtual void write_command(const CommandBytes& bytes) = 0;
    virtual CommandBytes read_command() = 0;
    virtual void write_pose(const PoseBytes& bytes) = 0;
    virtual PoseBytes read_pose() = 0;
};

std::unique_ptr<Channel> make_inproc_channel();

// Memory-mapped POSIX shared-memory region; layout: bytes [0,32) command slot,
// [64,128) pose slot (cache-line separated). Open the same name from both
// actors. The creating side unlinks the name on destruction.
std::unique_ptr<Channel> make_shm_channel(const std::string& name, bool create);

// Blocking helpers: spin (with short sleeps) until the slot seq advances.
CommandFrame wait_for_command(Channel& ch, std::uint64_t last_answered_seq);
PoseFrame wait_for_pose(Channel& ch, std::uint64_t expected_seq);

struct PlantConfig {
    double dt_control = 0.1;
    double delta_t = 0.005;
    CommandGains gains;
    Vec3 gravity{0.0, -9.81, 0.0};
};

// The stand-in for the external physics engine: one rigid body advanced in
// lockstep with the command stream.
class RigidBodyPlant {
  public:
    RigidBodyPlant(const RigidBodyState& initial, const PlantConfig& cfg);

    // Integrates dt_control/delta_t substeps for one command and returns the
    // pose echoing its seq. Throws ProtocolError on seq regression or reuse.
    PoseFrame process(const CommandFrame& cmd);

    std::uint64_t last_seq() const { return last_seq_; }
    const RigidBodyState& body() const { return body_; }

  private:
    RigidBodyState initial_;
    RigidBodyState body_;
    PlantConfig cfg_;
    int substeps_ = 20;
    std::uint64_t last_seq_ = 0;
};

// Serve commands from the channel until a shutdown frame is answered.
// Returns the number of commands answered.
std::uint64_t plant_loop(const RigidBodyState& initial, Channel& ch, const PlantConfig& cfg);

struct DriverOptions {
    double time_limit_steps = 600;
    std::string controller_id = "ppo-bridge";
};

// Algorithm-style inference loop: load assets, reconstruct the tube, then per
// step run perception -> greedy policy -> command -> plant pose -> termination.
// The plant must already be serving on the other side of the channel.
EpisodeRecord inference_driver(const std::string& checkpoint_path, const std::string& tube_obj_path,
                               const std::string& centerline_obj_path, Channel& ch,
                               const WorkbenchConfig& cfg, const DriverOptions& opt = {});

// Tube reconstruction used by the driver, exposed for tests: centerline from
// the OBJ polyline, radius as the median vertex-to-centerline distance.
// Throws ConfigurationError when the fitted radius varies by more than 10%.
TubeSpec tube_from_obj_files(const std::string& tube_obj_path, const std::string& centerline_obj_path);

} // namespace tubenav

#endif
