#pragma once

#include "quadslam/net/hub.hpp"
#include "quadslam/net/wire.hpp"

namespace quadslam::net {

/// Client requests, one document each, `type` selecting the operation:
///   hello {role, namespace, name}      -> welcome {publisher, grant}
///   subscribe / unsubscribe {pattern}  -> ack
///   publish {envelope}                 -> ack {sequence}
///   stats                              -> stats {dropped, queued}
/// Failures answer `error {code, message}`; requests carrying `id` get it echoed.
/// Deliveries arrive as `envelope {envelope}`.
class ProtocolHandler {
 public:
  explicit ProtocolHandler(Hub& hub) : hub_(hub) {}

  struct Output {
    std::vector<Json> replies;
    bool session_opened{false};
  };

  Output handle(const WireMessage& msg);
  const std::shared_ptr<Session>& session() const { return session_; }
  void close();

 private:
  Hub& hub_;
  std::shared_ptr<Session> session_;
};

Json error_document(HubErrorCode code, const std::string& message, const Json& id = nullptr);

}  // namespace quadslam::net
