#include <gtest/gtest.h>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <nlohmann/json.hpp>
#include <random>
#include <thread>

#include "eskin/duplex/gateway.hpp"
#include "eskin/duplex/message.hpp"
#include "eskin/duplex/transport.hpp"

using namespace eskin::duplex;
using namespace std::chrono_literals;

namespace {

std::vector<Message> drain(ByteChannel& ch, FrameAssembler& fa, std::size_t want,
                           std::chrono::milliseconds limit = 5000ms) {
  std::vector<Message> got;
  std::vector<std::uint8_t> buf;
  auto deadline = std::chrono::steady_clock::now() + limit;
  while (got.size() < want && std::chrono::steady_clock::now() < deadline) {
    buf.clear();
    if (ch.receive(buf) == 0) {
      std::this_thread::sleep_for(1ms);
      continue;
    }
    fa.feed(buf);
    while (auto m = fa.next()) got.push_back(*m);
  }
  return got;
}

std::vector<Message> numbered(std::size_t n) {
  std::vector<Message> v;
  for (std::size_t i = 0; i < n; ++i) {
    SensorFrame f;
    f.seq = static_cast<std::uint32_t>(i);
    f.centi_uT[i % 24] = static_cast<std::int16_t>(i);
    v.push_back(f);
  }
  return v;
}

}  // namespace

TEST(Loopback, FragmentedEchoKeepsOrder) {
  auto [a, b] = make_loopback_pair(11, 7);
  auto sent = numbered(1000);
  for (const auto& m : sent) a->send(encode(m));
  FrameAssembler fa;
  auto got = drain(*b, fa, sent.size());
  EXPECT_EQ(got, sent);
  EXPECT_EQ(fa.errors(), 0u);
}

TEST(Loopback, ChunksNeverExceedLimit) {
  auto [a, b] = make_loopback_pair(3, 5);
  std::vector<std::uint8_t> data(500, 0xAB);
  a->send(data);
  std::vector<std::uint8_t> buf;
  std::size_t total = 0;
  while (total < data.size()) {
    buf.clear();
    auto n = b->receive(buf);
    ASSERT_GE(n, 1u);
    ASSERT_LE(n, 5u);
    total += n;
  }
}

TEST(Loopback, CloseIsSeenByPeer) {
  auto [a, b] = make_loopback_pair();
  a->send(encode(Heartbeat{}));
  a->close();
  EXPECT_FALSE(b->closed());  // data still pending
  std::vector<std::uint8_t> buf;
  b->receive(buf);
  EXPECT_TRUE(b->closed());
}

TEST(Tcp, EchoThroughListener) {
  TcpListener listener;
  ASSERT_NE(listener.port(), 0);
  auto sent = numbered(1000);
  std::unique_ptr<ByteChannel> server;
  std::thread t([&] { server = listener.accept(5000ms); });
  auto client = tcp_connect("127.0.0.1", listener.port());
  t.join();
  ASSERT_TRUE(server);
  for (const auto& m : sent) client->send(encode(m));
  FrameAssembler at_server;
  auto got = drain(*server, at_server, sent.size());
  ASSERT_EQ(got, sent);
  for (const auto& m : got) server->send(encode(m));
  FrameAssembler at_client;
  EXPECT_EQ(drain(*client, at_client, sent.size()), sent);
  client->close();
  std::vector<std::uint8_t> buf;
  auto deadline = std::chrono::steady_clock::now() + 3s;
  while (!server->closed() && std::chrono::steady_clock::now() < deadline) {
    server->receive(buf);
    std::this_thread::sleep_for(1ms);
  }
  EXPECT_TRUE(server->closed());
}

TEST(Tcp, AcceptTimesOut) {
  TcpListener listener;
  EXPECT_EQ(listener.accept(50ms), nullptr);
}

namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = boost::asio::ip::tcp;

TEST(Gateway, BinaryFramesAndTelemetry) {
  WsGateway gw;
  const auto port = gw.start();
  ASSERT_NE(port, 0);

  boost::asio::io_context ioc;
  websocket::stream<tcp::socket> ws(ioc);
  tcp::resolver resolver(ioc);
  boost::asio::connect(ws.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
  ws.handshake("127.0.0.1", "/");

  ws.binary(true);
  auto hello = encode(Hello{});
  ws.write(boost::asio::buffer(hello));
  auto target = encode(TargetWeight{125});
  ws.write(boost::asio::buffer(target));

  bool saw_hello = false, saw_ack = false;
  std::vector<nlohmann::json> telemetry;
  FrameAssembler fa;
  auto deadline = std::chrono::steady_clock::now() + 5s;
  while ((!saw_hello || !saw_ack || telemetry.size() < 3) && std::chrono::steady_clock::now() < deadline) {
    beast::flat_buffer buf;
    ws.read(buf);
    auto data = static_cast<const std::uint8_t*>(buf.data().data());
    if (ws.got_text()) {
      telemetry.push_back(nlohmann::json::parse(std::string(reinterpret_cast<const char*>(data), buf.size())));
      continue;
    }
    fa.feed(std::span<const std::uint8_t>(data, buf.size()));
    while (auto m = fa.next()) {
      if (*m == Message{Hello{}}) saw_hello = true;
      if (*m == Message{Ack{125}}) saw_ack = true;
    }
  }
  EXPECT_TRUE(saw_hello);
  EXPECT_TRUE(saw_ack);
  ASSERT_GE(telemetry.size(), 3u);
  const auto& last = telemetry.back();
  EXPECT_EQ(last.at("type"), "telemetry");
  EXPECT_EQ(last.at("stage"), 1);
  EXPECT_TRUE(last.at("mass").is_number());
  EXPECT_DOUBLE_EQ(last.at("target").get<double>(), 1.25);
  EXPECT_EQ(telemetry.front().at("type"), "telemetry");
  // Telemetry period is 100 ms.
  double span = last.at("t_s").get<double>() - telemetry.front().at("t_s").get<double>();
  EXPECT_NEAR(span / static_cast<double>(telemetry.size() - 1), 0.1, 1e-6);

  ws.close(websocket::close_code::normal);
  auto until = std::chrono::steady_clock::now() + 3s;
  while (gw.stats().safe_stops == 0 && std::chrono::steady_clock::now() < until) std::this_thread::sleep_for(5ms);
  auto st = gw.stats();
  EXPECT_EQ(st.connections, 1u);
  EXPECT_EQ(st.safe_stops, 1u);
  EXPECT_GE(st.frames_in, 2u);
  EXPECT_EQ(st.decode_errors, 0u);
  gw.stop();
}
