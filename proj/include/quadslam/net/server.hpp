#pragma once

#include "quadslam/net/hub.hpp"

#include <memory>
#include <string>

namespace quadslam::net {

struct ServerConfig {
  std::string bind_address{"127.0.0.1"};
  std::uint16_t tcp_port{kDefaultTcpPort};  // 0 picks a free port
  std::uint16_t ws_port{kDefaultWsPort};
  bool enable_websocket{true};
};

/// Serves a Hub over framed TCP and over WebSocket (one envelope document per
/// text message) from a single I/O thread.
class HubServer {
 public:
  HubServer(Hub& hub, ServerConfig cfg = {});
  ~HubServer();
  HubServer(const HubServer&) = delete;
  HubServer& operator=(const HubServer&) = delete;

  /// Binds both endpoints; throws std::runtime_error when a port is taken.
  void start();
  void stop();
  std::uint16_t tcp_port() const;
  std::uint16_t ws_port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace quadslam::net
