#include "eskin/duplex/gateway.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <chrono>
#include <deque>
#include <mutex>
#include <nlohmann/json.hpp>
#include <thread>

namespace eskin::duplex {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using asio::ip::tcp;

struct WsGateway::Impl {
  GatewayConfig cfg;
  asio::io_context ioc;
  tcp::acceptor acceptor{ioc};
  std::thread worker;
  mutable std::mutex mu;
  GatewayStats stats;
  bool running = false;

  template <typename F>
  void update(F&& f) {
    std::lock_guard lk(mu);
    f(stats);
  }

  void do_accept();
};

namespace {

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(tcp::socket sock, WsGateway::Impl& gw)
      : ws_(std::move(sock)),
        gw_(gw),
        session_(gw.cfg.session),
        robot_(gw.cfg.robot),
        timer_(ws_.get_executor()) {
    auto period = std::chrono::duration<double>(gw.cfg.robot.dt_s);
    tick_ = std::chrono::duration_cast<std::chrono::steady_clock::duration>(period);
    double ticks_per_report = 1.0 / (gw.cfg.telemetry_hz * gw.cfg.robot.dt_s);
    report_every_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(ticks_per_report)));
  }

  void run() {
    ws_.binary(true);
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      self->gw_.update([](GatewayStats& s) { ++s.connections; });
      self->next_tick_ = std::chrono::steady_clock::now();
      self->schedule_tick();
      self->do_read();
    });
  }

 private:
  void do_read() {
    ws_.async_read(in_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->closed();
      if (self->ws_.got_binary()) {
        auto data = self->in_.cdata();
        self->assembler_.feed(
            {static_cast<const std::uint8_t*>(data.data()), data.size()});
        while (auto m = self->assembler_.next()) {
          self->gw_.update([](GatewayStats& s) { ++s.frames_in; });
          self->deliver(Inbound{Endpoint::operator_side, *m});
        }
        auto errs = self->assembler_.errors();
        self->gw_.update([errs](GatewayStats& s) { s.decode_errors = errs; });
      }
      self->in_.consume(self->in_.size());
      self->do_read();
    });
  }

  void closed() {
    if (done_) return;
    done_ = true;
    timer_.cancel();
    deliver(Disconnected{});
    robot_.halt();
    gw_.update([](GatewayStats& s) { ++s.safe_stops; });
  }

  void deliver(const Event& first) {
    std::deque<Event> pending{first};
    while (!pending.empty()) {
      auto out = session_.handle(pending.front());
      pending.pop_front();
      for (auto& o : out) {
        if (o.to == Endpoint::robot) {
          for (auto& m : robot_.apply(std::get<ControlCmd>(o.msg).code))
            pending.push_back(Inbound{Endpoint::robot, m});
        } else if (!done_) {
          auto bytes = encode(o.msg);
          enqueue(false, std::string(bytes.begin(), bytes.end()));
          gw_.update([](GatewayStats& s) { ++s.frames_out; });
        }
      }
    }
    const auto& st = session_.state();
    gw_.update([&](GatewayStats& s) {
      s.stage = st.stage;
      s.mass_g = robot_.scale_g();
    });
  }

  void schedule_tick() {
    next_tick_ += tick_;
    timer_.expires_at(next_tick_);
    timer_.async_wait([self = shared_from_this()](beast::error_code ec) {
      if (ec || self->done_) return;
      for (auto& m : self->robot_.tick()) self->deliver(Inbound{Endpoint::robot, m});
      if (++self->ticks_ % self->report_every_ == 0) self->telemetry();
      self->schedule_tick();
    });
  }

  void telemetry() {
    const auto& st = session_.state();
    nlohmann::json j = {{"type", "telemetry"},
                        {"stage", static_cast<int>(st.stage)},
                        {"stage_name", to_string(st.stage)},
                        {"mass", robot_.scale_g()},
                        {"target", st.target_g ? nlohmann::json(*st.target_g) : nlohmann::json()},
                        {"vibrating", st.vibrating},
                        {"t_s", robot_.time_s()}};
    enqueue(true, j.dump());
    gw_.update([](GatewayStats& s) { ++s.telemetry_sent; });
  }

  void enqueue(bool text, std::string payload) {
    out_.emplace_back(text, std::move(payload));
    if (out_.size() == 1) do_write();
  }

  void do_write() {
    ws_.text(out_.front().first);
    ws_.async_write(asio::buffer(out_.front().second),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      if (ec) return self->closed();
                      self->out_.pop_front();
                      if (!self->out_.empty()) self->do_write();
                    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  WsGateway::Impl& gw_;
  Session session_;
  RobotSim robot_;
  FrameAssembler assembler_;
  beast::flat_buffer in_;
  asio::steady_timer timer_;
  std::chrono::steady_clock::duration tick_{};
  std::chrono::steady_clock::time_point next_tick_{};
  std::size_t report_every_ = 2;
  std::size_t ticks_ = 0;
  bool done_ = false;
  std::deque<std::pair<bool, std::string>> out_;
};

}  // namespace

void WsGateway::Impl::do_accept() {
  acceptor.async_accept([this](beast::error_code ec, tcp::socket sock) {
    if (ec) return;
    std::make_shared<Connection>(std::move(sock), *this)->run();
    do_accept();
  });
}

WsGateway::WsGateway(GatewayConfig cfg) : impl_(std::make_unique<Impl>()) {
  if (!(cfg.telemetry_hz > 0.0)) throw std::invalid_argument("telemetry rate must be positive");
  impl_->cfg = std::move(cfg);
}

WsGateway::~WsGateway() { stop(); }

std::uint16_t WsGateway::start() {
  auto& a = impl_->acceptor;
  tcp::endpoint ep(asio::ip::make_address(impl_->cfg.address), impl_->cfg.port);
  a.open(ep.protocol());
  a.set_option(asio::socket_base::reuse_address(true));
  a.bind(ep);
  a.listen();
  impl_->do_accept();
  impl_->running = true;
  impl_->worker = std::thread([this] { impl_->ioc.run(); });
  return a.local_endpoint().port();
}

void WsGateway::stop() {
  if (!impl_ || !impl_->running) return;
  impl_->running = false;
  impl_->ioc.stop();
  if (impl_->worker.joinable()) impl_->worker.join();
}

GatewayStats WsGateway::stats() const {
  std::lock_guard lk(impl_->mu);
  return impl_->stats;
}

}  // namespace eskin::duplex
