#include "eskin/duplex/transport.hpp"

#include <boost/asio.hpp>
#include <deque>
#include <mutex>
#include <random>
#include <thread>

namespace eskin::duplex {

namespace {

struct Pipe {
  std::mutex mu;
  std::deque<std::uint8_t> bytes;
  bool writer_closed = false;
};

class LoopbackChannel final : public ByteChannel {
 public:
  LoopbackChannel(std::shared_ptr<Pipe> in, std::shared_ptr<Pipe> out, std::uint64_t seed,
                  std::size_t max_chunk)
      : in_(std::move(in)), out_(std::move(out)), rng_(seed), max_chunk_(max_chunk) {}
  ~LoopbackChannel() override { close(); }

  void send(std::span<const std::uint8_t> bytes) override {
    std::lock_guard lk(out_->mu);
    if (out_->writer_closed) return;
    out_->bytes.insert(out_->bytes.end(), bytes.begin(), bytes.end());
  }

  std::size_t receive(std::vector<std::uint8_t>& out) override {
    std::lock_guard lk(in_->mu);
    std::size_t n = in_->bytes.size();
    if (n == 0) return 0;
    if (max_chunk_ > 0) {
      std::uniform_int_distribution<std::size_t> pick(1, max_chunk_);
      n = std::min(n, pick(rng_));
    }
    out.insert(out.end(), in_->bytes.begin(), in_->bytes.begin() + static_cast<std::ptrdiff_t>(n));
    in_->bytes.erase(in_->bytes.begin(), in_->bytes.begin() + static_cast<std::ptrdiff_t>(n));
    return n;
  }

  void close() override {
    std::lock_guard lk(out_->mu);
    out_->writer_closed = true;
  }

  bool closed() const override {
    std::lock_guard lk(in_->mu);
    return in_->writer_closed && in_->bytes.empty();
  }

 private:
  std::shared_ptr<Pipe> in_;
  std::shared_ptr<Pipe> out_;
  std::mt19937_64 rng_;
  std::size_t max_chunk_;
};

namespace asio = boost::asio;
using asio::ip::tcp;

class TcpChannel final : public ByteChannel {
 public:
  TcpChannel(std::unique_ptr<asio::io_context> io, tcp::socket sock)
      : io_(std::move(io)), sock_(std::move(sock)) {
    sock_.set_option(tcp::no_delay(true));
  }
  ~TcpChannel() override { close(); }

  void send(std::span<const std::uint8_t> bytes) override {
    if (!sock_.is_open()) return;
    boost::system::error_code ec;
    asio::write(sock_, asio::buffer(bytes.data(), bytes.size()), ec);
    if (ec) peer_closed_ = true;
  }

  std::size_t receive(std::vector<std::uint8_t>& out) override {
    if (!sock_.is_open() || peer_closed_) return 0;
    boost::system::error_code ec;
    sock_.non_blocking(true, ec);
    std::uint8_t buf[4096];
    std::size_t total = 0;
    for (;;) {
      std::size_t n = sock_.read_some(asio::buffer(buf), ec);
      if (ec == asio::error::would_block || ec == asio::error::try_again) break;
      if (ec) {
        peer_closed_ = true;
        break;
      }
      out.insert(out.end(), buf, buf + n);
      total += n;
    }
    return total;
  }

  void close() override {
    boost::system::error_code ec;
    if (sock_.is_open()) {
      sock_.shutdown(tcp::socket::shutdown_both, ec);
      sock_.close(ec);
    }
  }

  bool closed() const override { return peer_closed_ || !sock_.is_open(); }

 private:
  std::unique_ptr<asio::io_context> io_;  // owns the socket's executor
  tcp::socket sock_;
  bool peer_closed_ = false;
};

}  // namespace

std::pair<std::unique_ptr<ByteChannel>, std::unique_ptr<ByteChannel>> make_loopback_pair(
    std::uint64_t seed, std::size_t max_chunk) {
  auto ab = std::make_shared<Pipe>();
  auto ba = std::make_shared<Pipe>();
  return {std::make_unique<LoopbackChannel>(ba, ab, seed, max_chunk),
          std::make_unique<LoopbackChannel>(ab, ba, seed ^ 0x9E3779B97F4A7C15ULL, max_chunk)};
}

std::unique_ptr<ByteChannel> tcp_connect(const std::string& host, std::uint16_t port) {
  auto io = std::make_unique<asio::io_context>();
  tcp::resolver resolver(*io);
  tcp::socket sock(*io);
  asio::connect(sock, resolver.resolve(host, std::to_string(port)));
  return std::make_unique<TcpChannel>(std::move(io), std::move(sock));
}

struct TcpListener::Impl {
  asio::io_context io;
  tcp::acceptor acceptor{io};
};

TcpListener::TcpListener(std::uint16_t port) : impl_(std::make_unique<Impl>()) {
  tcp::endpoint ep(asio::ip::make_address("127.0.0.1"), port);
  impl_->acceptor.open(ep.protocol());
  impl_->acceptor.set_option(tcp::acceptor::reuse_address(true));
  impl_->acceptor.bind(ep);
  impl_->acceptor.listen();
  impl_->acceptor.non_blocking(true);
}

TcpListener::~TcpListener() = default;

std::uint16_t TcpListener::port() const { return impl_->acceptor.local_endpoint().port(); }

std::unique_ptr<ByteChannel> TcpListener::accept(std::chrono::milliseconds timeout) {
  auto deadline = std::chrono::steady_clock::now() + timeout;
  for (;;) {
    auto io = std::make_unique<asio::io_context>();
    tcp::socket sock(*io);
    boost::system::error_code ec;
    impl_->acceptor.accept(sock, ec);
    if (!ec) return std::make_unique<TcpChannel>(std::move(io), std::move(sock));
    if (ec != asio::error::would_block && ec != asio::error::try_again)
      throw boost::system::system_error(ec);
    if (std::chrono::steady_clock::now() >= deadline) return nullptr;
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
}

}  // namespace eskin::duplex
