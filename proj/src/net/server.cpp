#include "quadslam/net/server.hpp"

#include "quadslam/net/protocol.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <deque>
#include <list>
#include <mutex>
#include <thread>

namespace quadslam::net {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

class Connection : public std::enable_shared_from_this<Connection> {
 public:
  virtual ~Connection() = default;
  virtual void start() = 0;
  virtual void shutdown() = 0;
};

// Drains replies first, then deliveries; one write in flight at a time.
template <typename Derived>
class Pump {
 protected:
  void wire_session(const std::shared_ptr<Session>& s, asio::any_io_executor ex) {
    std::weak_ptr<Derived> weak = static_cast<Derived*>(this)->shared_from_derived();
    s->set_notify([weak, ex] {
      asio::post(ex, [weak] {
        if (auto self = weak.lock()) self->pump();
      });
    });
  }

 public:
  // Deliveries queued before a request go out ahead of its reply, so a
  // ping doubles as a barrier for everything published before it.
  void flush_deliveries() {
    auto* d = static_cast<Derived*>(this);
    const auto& s = d->handler_.session();
    if (!s) return;
    while (auto env = s->try_next()) outbox_.push_back(d->encode_delivery(*env));
  }

  void pump() {
    auto* d = static_cast<Derived*>(this);
    if (writing_ || d->dead_) return;
    if (outbox_.empty()) {
      const auto& s = d->handler_.session();
      if (!s) return;
      auto env = s->try_next();
      if (!env) return;
      outbox_.push_back(d->encode_delivery(*env));
    }
    writing_ = true;
    d->write_front();
  }

 protected:
  std::deque<std::pair<std::string, bool>> outbox_;  // bytes, binary
  bool writing_{false};
};

class TcpConnection final : public Connection, public Pump<TcpConnection> {
 public:
  TcpConnection(tcp::socket sock, Hub& hub) : sock_(std::move(sock)), handler_(hub), hub_(hub) {}

  std::shared_ptr<TcpConnection> shared_from_derived() {
    return std::static_pointer_cast<TcpConnection>(shared_from_this());
  }

  void start() override { read_header(); }

  void shutdown() override {
    asio::post(sock_.get_executor(), [self = shared_from_derived()] { self->fail(); });
  }

  std::pair<std::string, bool> encode_delivery(const Envelope& e) { return {envelope_frame(e, true), true}; }

  void write_front() {
    asio::async_write(sock_, asio::buffer(outbox_.front().first),
                      [self = shared_from_derived()](beast::error_code ec, std::size_t) {
                        self->writing_ = false;
                        if (ec) return self->fail();
                        self->outbox_.pop_front();
                        self->pump();
                      });
  }

  Hub& hub() { return hub_; }

 private:
  friend class Pump<TcpConnection>;

  void read_header() {
    asio::async_read(sock_, asio::buffer(header_), [self = shared_from_derived()](beast::error_code ec, std::size_t) {
      if (ec) return self->fail();
      const auto n = read_frame_length(self->header_.data());
      if (n > max_frame_length(self->hub_.config().max_payload)) {
        self->reply_and_close(error_document(HubErrorCode::Oversized, "frame too large"));
        return;
      }
      self->body_.resize(n);
      self->read_body();
    });
  }

  void read_body() {
    asio::async_read(sock_, asio::buffer(body_), [self = shared_from_derived()](beast::error_code ec, std::size_t) {
      if (ec) return self->fail();
      self->dispatch();
      self->read_header();
    });
  }

  void dispatch() {
    ProtocolHandler::Output out;
    try {
      out = handler_.handle(decode_body(body_));
    } catch (const HubError& e) {
      out.replies.push_back(error_document(e.code(), e.what()));
    }
    flush_deliveries();
    if (out.session_opened) wire_session(handler_.session(), sock_.get_executor());
    for (auto& r : out.replies) outbox_.emplace_back(encode_frame(r), true);
    pump();
  }

  void reply_and_close(const Json& doc) {
    auto frame = std::make_shared<std::string>(encode_frame(doc));
    asio::async_write(sock_, asio::buffer(*frame),
                      [self = shared_from_derived(), frame](beast::error_code, std::size_t) { self->fail(); });
  }

  void fail() {
    if (dead_) return;
    dead_ = true;
    handler_.close();
    beast::error_code ec;
    sock_.shutdown(tcp::socket::shutdown_both, ec);
    sock_.close(ec);
  }

  tcp::socket sock_;
  ProtocolHandler handler_;
  Hub& hub_;
  std::array<std::uint8_t, 4> header_{};
  std::string body_;
  bool dead_{false};
};

class WsConnection final : public Connection, public Pump<WsConnection> {
 public:
  WsConnection(tcp::socket sock, Hub& hub) : ws_(std::move(sock)), handler_(hub) {
    ws_.read_message_max(max_frame_length(hub.config().max_payload));
  }

  std::shared_ptr<WsConnection> shared_from_derived() {
    return std::static_pointer_cast<WsConnection>(shared_from_this());
  }

  void start() override {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept([self = shared_from_derived()](beast::error_code ec) {
      if (ec) return self->fail();
      self->read();
    });
  }

  void shutdown() override {
    asio::post(ws_.get_executor(), [self = shared_from_derived()] { self->fail(); });
  }

  std::pair<std::string, bool> encode_delivery(const Envelope& e) { return {envelope_frame(e, false), false}; }

  void write_front() {
    ws_.binary(outbox_.front().second);
    ws_.async_write(asio::buffer(outbox_.front().first),
                    [self = shared_from_derived()](beast::error_code ec, std::size_t) {
                      self->writing_ = false;
                      if (ec) return self->fail();
                      self->outbox_.pop_front();
                      self->pump();
                    });
  }

 private:
  friend class Pump<WsConnection>;

  void read() {
    ws_.async_read(buffer_, [self = shared_from_derived()](beast::error_code ec, std::size_t) {
      if (ec) return self->fail();
      self->dispatch();
      self->read();
    });
  }

  void dispatch() {
    const std::string body = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    ProtocolHandler::Output out;
    try {
      out = handler_.handle(decode_body(body));
    } catch (const HubError& e) {
      out.replies.push_back(error_document(e.code(), e.what()));
    }
    flush_deliveries();
    if (out.session_opened) wire_session(handler_.session(), ws_.get_executor());
    for (auto& r : out.replies) outbox_.emplace_back(encode_body(r), false);
    pump();
  }

  void fail() {
    if (dead_) return;
    dead_ = true;
    handler_.close();
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().shutdown(tcp::socket::shutdown_both, ec);
    beast::get_lowest_layer(ws_).socket().close(ec);
  }

  websocket::stream<beast::tcp_stream> ws_;
  ProtocolHandler handler_;
  beast::flat_buffer buffer_;
  bool dead_{false};
};

}  // namespace

struct HubServer::Impl {
  Hub& hub;
  ServerConfig cfg;
  asio::io_context ioc;
  tcp::acceptor tcp_acceptor{ioc};
  tcp::acceptor ws_acceptor{ioc};
  std::thread thread;
  std::mutex mu;
  std::list<std::weak_ptr<Connection>> connections;
  bool running{false};

  Impl(Hub& h, ServerConfig c) : hub(h), cfg(std::move(c)) {}

  void open(tcp::acceptor& acc, std::uint16_t port) {
    const tcp::endpoint ep(asio::ip::make_address(cfg.bind_address), port);
    acc.open(ep.protocol());
    acc.set_option(asio::socket_base::reuse_address(true));
    acc.bind(ep);
    acc.listen();
  }

  template <typename Conn>
  void accept(tcp::acceptor& acc) {
    acc.async_accept(asio::make_strand(ioc), [this, &acc](beast::error_code ec, tcp::socket sock) {
      if (ec) return;  // acceptor closed
      sock.set_option(tcp::no_delay(true), ec);
      auto conn = std::make_shared<Conn>(std::move(sock), hub);
      {
        std::lock_guard lock(mu);
        connections.remove_if([](const auto& w) { return w.expired(); });
        connections.push_back(conn);
      }
      conn->start();
      accept<Conn>(acc);
    });
  }
};

HubServer::HubServer(Hub& hub, ServerConfig cfg) : impl_(std::make_unique<Impl>(hub, std::move(cfg))) {}

HubServer::~HubServer() { stop(); }

void HubServer::start() {
  auto& im = *impl_;
  if (im.running) return;
  try {
    im.open(im.tcp_acceptor, im.cfg.tcp_port);
    if (im.cfg.enable_websocket) im.open(im.ws_acceptor, im.cfg.ws_port);
  } catch (const boost::system::system_error& e) {
    beast::error_code ec;
    im.tcp_acceptor.close(ec);
    im.ws_acceptor.close(ec);
    throw std::runtime_error(std::string("hub cannot listen: ") + e.what());
  }
  im.accept<TcpConnection>(im.tcp_acceptor);
  if (im.cfg.enable_websocket) im.accept<WsConnection>(im.ws_acceptor);
  im.running = true;
  im.thread = std::thread([&im] { im.ioc.run(); });
}

void HubServer::stop() {
  auto& im = *impl_;
  if (!im.running) return;
  im.running = false;
  asio::post(im.ioc, [&im] {
    beast::error_code ec;
    im.tcp_acceptor.close(ec);
    im.ws_acceptor.close(ec);
  });
  {
    std::lock_guard lock(im.mu);
    for (auto& w : im.connections)
      if (auto c = w.lock()) c->shutdown();
    im.connections.clear();
  }
  im.ioc.stop();
  if (im.thread.joinable()) im.thread.join();
}

std::uint16_t HubServer::tcp_port() const {
  beast::error_code ec;
  const auto ep = impl_->tcp_acceptor.local_endpoint(ec);
  return ec ? 0 : ep.port();
}

std::uint16_t HubServer::ws_port() const {
  beast::error_code ec;
  const auto ep = impl_->ws_acceptor.local_endpoint(ec);
  return ec ? 0 : ep.port();
}

}  // namespace quadslam::net
