#include "eskin/duplex/message.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <boost/crc.hpp>

namespace eskin::duplex {
namespace {

template <typename>
inline constexpr bool kAlwaysFalse = false;

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint16_t get_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

std::size_t payload_size(MessageType t) {
  switch (t) {
    case MessageType::hello: return 1;
    case MessageType::sensor_frame: return 4 + 2 * 24;
    case MessageType::vibration_cmd: return 8 + 2;
    case MessageType::control_cmd: return 1;
    case MessageType::target_weight: return 2;
    case MessageType::stage_transition: return 1;
    case MessageType::collision_event: return 1;
    case MessageType::ack: return 4;
    case MessageType::heartbeat: return 0;
    case MessageType::nack: return 1;
    case MessageType::scale_reading: return 4;
  }
  return 0;
}

bool known_type(std::uint8_t t) { return t >= 0x01 && t <= 0x0B; }

bool valid_stage(std::uint8_t s) { return s >= 1 && s <= 6; }
bool valid_code(std::uint8_t c) { return c >= 1 && c <= kControlCodeMax; }
bool valid_reason(std::uint8_t r) { return r >= 1 && r <= 5; }

}  // namespace

const char* to_string(ControlCode c) {
  switch (c) {
    case ControlCode::move_xp: return "MOVE_XP";
    case ControlCode::move_xn: return "MOVE_XN";
    case ControlCode::move_yp: return "MOVE_YP";
    case ControlCode::move_yn: return "MOVE_YN";
    case ControlCode::move_zp: return "MOVE_ZP";
    case ControlCode::move_zn: return "MOVE_ZN";
    case ControlCode::grasp: return "GRASP";
    case ControlCode::release: return "RELEASE";
    case ControlCode::tilt_up: return "TILT_UP";
    case ControlCode::tilt_down: return "TILT_DOWN";
    case ControlCode::vib_start: return "VIB_START";
    case ControlCode::vib_stop: return "VIB_STOP";
    case ControlCode::confirm: return "CONFIRM";
  }
  return "?";
}

const char* to_string(DecodeError e) {
  switch (e) {
    case DecodeError::truncated: return "truncated";
    case DecodeError::bad_magic: return "bad magic";
    case DecodeError::bad_version: return "bad version";
    case DecodeError::unknown_type: return "unknown type";
    case DecodeError::length_mismatch: return "length mismatch";
    case DecodeError::crc_mismatch: return "crc mismatch";
    case DecodeError::invalid_payload: return "invalid payload";
  }
  return "?";
}

MessageType type_of(const Message& m) {
  return std::visit(
      [](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Hello>) return MessageType::hello;
        else if constexpr (std::is_same_v<T, SensorFrame>) return MessageType::sensor_frame;
        else if constexpr (std::is_same_v<T, VibrationCmd>) return MessageType::vibration_cmd;
        else if constexpr (std::is_same_v<T, ControlCmd>) return MessageType::control_cmd;
        else if constexpr (std::is_same_v<T, TargetWeight>) return MessageType::target_weight;
        else if constexpr (std::is_same_v<T, StageTransition>) return MessageType::stage_transition;
        else if constexpr (std::is_same_v<T, CollisionEvent>) return MessageType::collision_event;
        else if constexpr (std::is_same_v<T, Ack>) return MessageType::ack;
        else if constexpr (std::is_same_v<T, Heartbeat>) return MessageType::heartbeat;
        else if constexpr (std::is_same_v<T, Nack>) return MessageType::nack;
        else if constexpr (std::is_same_v<T, ScaleReading>) return MessageType::scale_reading;
        else static_assert(kAlwaysFalse<T>);
      },
      m);
}

std::string describe(const Message& m) {
  std::ostringstream os;
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Hello>) os << "Hello v" << int(v.version);
        else if constexpr (std::is_same_v<T, SensorFrame>) os << "SensorFrame #" << v.seq;
        else if constexpr (std::is_same_v<T, VibrationCmd>) {
          os << "VibrationCmd [";
          for (std::size_t i = 0; i < v.duty.size(); ++i) os << (i ? "," : "") << int(v.duty[i]);
          os << "] " << v.duration_ms << "ms";
        } else if constexpr (std::is_same_v<T, ControlCmd>) os << "ControlCmd " << to_string(v.code);
        else if constexpr (std::is_same_v<T, TargetWeight>) os << "TargetWeight " << v.centigrams << "cg";
        else if constexpr (std::is_same_v<T, StageTransition>) os << "StageTransition " << int(v.stage);
        else if constexpr (std::is_same_v<T, CollisionEvent>) os << "CollisionEvent " << int(v.magnitude);
        else if constexpr (std::is_same_v<T, Ack>) os << "Ack " << v.seq;
        else if constexpr (std::is_same_v<T, Heartbeat>) os << "Heartbeat";
        else if constexpr (std::is_same_v<T, Nack>) os << "Nack " << int(v.reason);
        else if constexpr (std::is_same_v<T, ScaleReading>) os << "ScaleReading " << v.milligrams << "mg";
      },
      m);
  return os.str();
}

std::int16_t to_centi_uT(double uT) {
  const double c = std::round(uT * 100.0);
  if (!(c == c)) return 0;
  return static_cast<std::int16_t>(std::clamp(c, double(std::numeric_limits<std::int16_t>::min()),
                                              double(std::numeric_limits<std::int16_t>::max())));
}

double from_centi_uT(std::int16_t v) { return static_cast<double>(v) / 100.0; }

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  boost::crc_32_type crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

void encode_into(const Message& m, std::vector<std::uint8_t>& out) {
  const std::size_t start = out.size();
  const MessageType t = type_of(m);
  out.push_back('E');
  out.push_back('S');
  out.push_back(kProtocolVersion);
  out.push_back(static_cast<std::uint8_t>(t));
  put_u16(out, static_cast<std::uint16_t>(payload_size(t)));
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Hello>) {
          out.push_back(v.version);
        } else if constexpr (std::is_same_v<T, SensorFrame>) {
          put_u32(out, v.seq);
          for (auto c : v.centi_uT) put_u16(out, static_cast<std::uint16_t>(c));
        } else if constexpr (std::is_same_v<T, VibrationCmd>) {
          out.insert(out.end(), v.duty.begin(), v.duty.end());
          put_u16(out, v.duration_ms);
        } else if constexpr (std::is_same_v<T, ControlCmd>) {
          if (!valid_code(static_cast<std::uint8_t>(v.code))) throw std::invalid_argument("unknown control code");
          out.push_back(static_cast<std::uint8_t>(v.code));
        } else if constexpr (std::is_same_v<T, TargetWeight>) {
          put_u16(out, v.centigrams);
        } else if constexpr (std::is_same_v<T, StageTransition>) {
          if (!valid_stage(v.stage)) throw std::invalid_argument("stage must be 1..6");
          out.push_back(v.stage);
        } else if constexpr (std::is_same_v<T, CollisionEvent>) {
          out.push_back(v.magnitude);
        } else if constexpr (std::is_same_v<T, Ack>) {
          put_u32(out, v.seq);
        } else if constexpr (std::is_same_v<T, Nack>) {
          if (!valid_reason(static_cast<std::uint8_t>(v.reason))) throw std::invalid_argument("unknown nack reason");
          out.push_back(static_cast<std::uint8_t>(v.reason));
        } else if constexpr (std::is_same_v<T, ScaleReading>) {
          put_u32(out, v.milligrams);
        }
      },
      m);
  put_u32(out, crc32(std::span<const std::uint8_t>(out).subspan(start)));
}

std::vector<std::uint8_t> encode(const Message& m) {
  std::vector<std::uint8_t> out;
  encode_into(m, out);
  return out;
}

std::variant<Message, DecodeError> decode(std::span<const std::uint8_t> f) {
  if (f.size() >= 1 && f[0] != 'E') return DecodeError::bad_magic;
  if (f.size() >= 2 && f[1] != 'S') return DecodeError::bad_magic;
  if (f.size() < kHeaderBytes + kCrcBytes) return DecodeError::truncated;
  if (f[2] != kProtocolVersion) return DecodeError::bad_version;
  const std::size_t len = get_u16(f, 4);
  const std::size_t total = kHeaderBytes + len + kCrcBytes;
  if (f.size() < total) return DecodeError::truncated;
  if (f.size() > total) return DecodeError::length_mismatch;
  if (crc32(f.first(total - kCrcBytes)) != get_u32(f, total - kCrcBytes)) return DecodeError::crc_mismatch;
  if (!known_type(f[3])) return DecodeError::unknown_type;
  const auto type = static_cast<MessageType>(f[3]);
  if (len != payload_size(type)) return DecodeError::length_mismatch;
  const auto p = f.subspan(kHeaderBytes, len);
  switch (type) {
    case MessageType::hello: return Message{Hello{p[0]}};
    case MessageType::sensor_frame: {
      SensorFrame s;
      s.seq = get_u32(p, 0);
      for (std::size_t i = 0; i < 24; ++i) s.centi_uT[i] = static_cast<std::int16_t>(get_u16(p, 4 + 2 * i));
      return Message{s};
    }
    case MessageType::vibration_cmd: {
      VibrationCmd v;
      std::copy(p.begin(), p.begin() + 8, v.duty.begin());
      v.duration_ms = get_u16(p, 8);
      return Message{v};
    }
    case MessageType::control_cmd:
      if (!valid_code(p[0])) return DecodeError::invalid_payload;
      return Message{ControlCmd{static_cast<ControlCode>(p[0])}};
    case MessageType::target_weight: return Message{TargetWeight{get_u16(p, 0)}};
    case MessageType::stage_transition:
      if (!valid_stage(p[0])) return DecodeError::invalid_payload;
      return Message{StageTransition{p[0]}};
    case MessageType::collision_event: return Message{CollisionEvent{p[0]}};
    case MessageType::ack: return Message{Ack{get_u32(p, 0)}};
    case MessageType::heartbeat: return Message{Heartbeat{}};
    case MessageType::nack:
      if (!valid_reason(p[0])) return DecodeError::invalid_payload;
      return Message{Nack{static_cast<NackReason>(p[0])}};
    case MessageType::scale_reading: return Message{ScaleReading{get_u32(p, 0)}};
  }
  return DecodeError::unknown_type;
}

void FrameAssembler::feed(std::span<const std::uint8_t> bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }

std::optional<Message> FrameAssembler::next() {
  std::vector<std::uint8_t> frame;
  for (;;) {
    // Resync on the magic.
    bool skipped = false;
    while (!buf_.empty() && (buf_[0] != 'E' || (buf_.size() >= 2 && buf_[1] != 'S'))) {
      buf_.pop_front();
      skipped = true;
    }
    if (skipped) {
      ++errors_;
      last_error_ = DecodeError::bad_magic;
    }
    if (buf_.size() < kHeaderBytes) return std::nullopt;
    const std::size_t len = static_cast<std::size_t>(buf_[4]) | (static_cast<std::size_t>(buf_[5]) << 8);
    if (len > kMaxPayload) {
      ++errors_;
      last_error_ = DecodeError::length_mismatch;
      buf_.pop_front();
      continue;
    }
    const std::size_t total = kHeaderBytes + len + kCrcBytes;
    if (buf_.size() < total) return std::nullopt;
    frame.assign(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(total));
    auto r = decode(frame);
    if (auto* m = std::get_if<Message>(&r)) {
      buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(total));
      return std::move(*m);
    }
    ++errors_;
    last_error_ = std::get<DecodeError>(r);
    buf_.pop_front();
  }
}

}  // namespace eskin::duplex
