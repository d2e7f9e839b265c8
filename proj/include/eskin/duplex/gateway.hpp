#pragma once

// WebSocket endpoint for an operator UI. Binary messages carry protocol
// frames in both directions; text messages carry JSON telemetry
// ({"type":"telemetry", stage, stage_name, mass, target, vibrating, t_s};
// mass and target in grams, target null until set).
// Each connection drives its own session and robot simulator in real time;
// closing the socket safe-stops that robot.

#include <cstdint>
#include <memory>
#include <string>

#include "eskin/duplex/robot.hpp"
#include "eskin/duplex/session.hpp"

namespace eskin::duplex {

struct GatewayConfig {
  std::string address = "127.0.0.1";
  std::uint16_t port = 0;  // 0 = ephemeral
  double telemetry_hz = 10.0;
  SessionConfig session{};
  RobotConfig robot{};
};

struct GatewayStats {
  std::size_t connections = 0;
  std::size_t frames_in = 0;
  std::size_t frames_out = 0;
  std::size_t decode_errors = 0;
  std::size_t telemetry_sent = 0;
  std::size_t safe_stops = 0;
  Stage stage = Stage::set_target;
  double mass_g = 0.0;
};

class WsGateway {
 public:
  explicit WsGateway(GatewayConfig cfg = {});
  ~WsGateway();
  WsGateway(const WsGateway&) = delete;
  WsGateway& operator=(const WsGateway&) = delete;

  // Binds and starts serving on a background thread; returns the bound port.
  std::uint16_t start();
  void stop();
  GatewayStats stats() const;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace eskin::duplex
