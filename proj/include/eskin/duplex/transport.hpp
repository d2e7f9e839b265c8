#pragma once

// Byte transports for framed messages. Receivers may see any fragmentation;
// FrameAssembler restores message boundaries.

#include <chrono>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace eskin::duplex {

class ByteChannel {
 public:
  virtual ~ByteChannel() = default;
  virtual void send(std::span<const std::uint8_t> bytes) = 0;
  // Appends whatever is available without blocking; returns the count.
  virtual std::size_t receive(std::vector<std::uint8_t>& out) = 0;
  virtual void close() = 0;
  // True once the peer has closed and nothing is left to read.
  virtual bool closed() const = 0;
};

// In-process pair. Each receive() hands out at most one chunk of 1..max_chunk
// bytes drawn from a seeded stream (max_chunk 0 = everything available).
std::pair<std::unique_ptr<ByteChannel>, std::unique_ptr<ByteChannel>> make_loopback_pair(
    std::uint64_t seed = 0, std::size_t max_chunk = 0);

// TCP over Boost.Asio with blocking connect/accept and non-blocking receive.
std::unique_ptr<ByteChannel> tcp_connect(const std::string& host, std::uint16_t port);

class TcpListener {
 public:
  // Port 0 binds an ephemeral port on 127.0.0.1.
  explicit TcpListener(std::uint16_t port = 0);
  ~TcpListener();
  std::uint16_t port() const;
  // nullptr on timeout.
  std::unique_ptr<ByteChannel> accept(std::chrono::milliseconds timeout);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace eskin::duplex
