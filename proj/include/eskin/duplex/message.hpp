#pragma once

// Wire messages of the tactile link and their framing:
//   'E' 'S' | version u8 | type u8 | payload length u16 LE | payload | CRC32 LE
// with the CRC (IEEE) over every byte before it.

#include <array>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace eskin::duplex {

inline constexpr std::uint8_t kProtocolVersion = 1;
inline constexpr std::size_t kHeaderBytes = 6;
inline constexpr std::size_t kCrcBytes = 4;
inline constexpr std::size_t kMaxPayload = 1024;

enum class MessageType : std::uint8_t {
  hello = 0x01,
  sensor_frame = 0x02,
  vibration_cmd = 0x03,
  control_cmd = 0x04,
  target_weight = 0x05,
  stage_transition = 0x06,
  collision_event = 0x07,
  ack = 0x08,
  heartbeat = 0x09,
  nack = 0x0A,
  scale_reading = 0x0B,
};

enum class ControlCode : std::uint8_t {
  move_xp = 1,
  move_xn,
  move_yp,
  move_yn,
  move_zp,
  move_zn,
  grasp,
  release,
  tilt_up,
  tilt_down,
  vib_start,
  vib_stop,
  confirm,
};
inline constexpr std::uint8_t kControlCodeMax = 13;

const char* to_string(ControlCode c);

enum class NackReason : std::uint8_t {
  illegal_transition = 1,
  target_not_accepted = 2,
  target_missing = 3,
  session_stopped = 4,
  stale_sequence = 5,
};

struct Hello {
  std::uint8_t version = kProtocolVersion;
  friend bool operator==(const Hello&, const Hello&) = default;
};
struct SensorFrame {
  std::uint32_t seq = 0;
  std::array<std::int16_t, 24> centi_uT{};
  friend bool operator==(const SensorFrame&, const SensorFrame&) = default;
};
struct VibrationCmd {
  std::array<std::uint8_t, 8> duty{};  // 255 = 100%
  std::uint16_t duration_ms = 0;
  friend bool operator==(const VibrationCmd&, const VibrationCmd&) = default;
};
struct ControlCmd {
  ControlCode code = ControlCode::confirm;
  friend bool operator==(const ControlCmd&, const ControlCmd&) = default;
};
struct TargetWeight {
  std::uint16_t centigrams = 0;
  friend bool operator==(const TargetWeight&, const TargetWeight&) = default;
};
struct StageTransition {
  std::uint8_t stage = 1;  // 1..6
  friend bool operator==(const StageTransition&, const StageTransition&) = default;
};
struct CollisionEvent {
  std::uint8_t magnitude = 0;
  friend bool operator==(const CollisionEvent&, const CollisionEvent&) = default;
};
struct Ack {
  std::uint32_t seq = 0;
  friend bool operator==(const Ack&, const Ack&) = default;
};
struct Heartbeat {
  friend bool operator==(const Heartbeat&, const Heartbeat&) = default;
};
struct Nack {
  NackReason reason = NackReason::illegal_transition;
  friend bool operator==(const Nack&, const Nack&) = default;
};
struct ScaleReading {
  std::uint32_t milligrams = 0;
  friend bool operator==(const ScaleReading&, const ScaleReading&) = default;
};

using Message = std::variant<Hello, SensorFrame, VibrationCmd, ControlCmd, TargetWeight, StageTransition,
                             CollisionEvent, Ack, Heartbeat, Nack, ScaleReading>;

MessageType type_of(const Message& m);
std::string describe(const Message& m);

// Clamped to the i16 range.
std::int16_t to_centi_uT(double uT);
double from_centi_uT(std::int16_t v);

enum class DecodeError {
  truncated,
  bad_magic,
  bad_version,
  unknown_type,
  length_mismatch,
  crc_mismatch,
  invalid_payload,
};

const char* to_string(DecodeError e);

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

// Throws std::invalid_argument for values outside the message invariants
// (stage outside 1..6, unknown control code).
std::vector<std::uint8_t> encode(const Message& m);
void encode_into(const Message& m, std::vector<std::uint8_t>& out);

// Exactly one complete frame.
std::variant<Message, DecodeError> decode(std::span<const std::uint8_t> frame);

// Reassembles frames from an arbitrarily fragmented byte stream. On garbage
// it drops bytes up to the next "ES" and counts the discarded frame.
class FrameAssembler {
 public:
  void feed(std::span<const std::uint8_t> bytes);
  std::optional<Message> next();

  std::size_t errors() const { return errors_; }
  std::optional<DecodeError> last_error() const { return last_error_; }
  std::size_t buffered() const { return buf_.size(); }

 private:
  std::deque<std::uint8_t> buf_;
  std::size_t errors_ = 0;
  std::optional<DecodeError> last_error_;
};

}  // namespace eskin::duplex
