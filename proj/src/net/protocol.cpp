#include "quadslam/net/protocol.hpp"

namespace quadslam::net {

Json error_document(HubErrorCode code, const std::string& message, const Json& id) {
  Json j{{"type", "error"}, {"code", std::string(to_string(code))}, {"message", message}};
  if (!id.is_null()) j["id"] = id;
  return j;
}

void ProtocolHandler::close() {
  if (session_) session_->close();
}

ProtocolHandler::Output ProtocolHandler::handle(const WireMessage& msg) {
  Output out;
  const Json& doc = msg.doc;
  const Json id = doc.contains("id") ? doc.at("id") : Json(nullptr);
  auto reply = [&](Json j) {
    if (!id.is_null()) j["id"] = id;
    out.replies.push_back(std::move(j));
  };
  try {
    const auto type = doc.value("type", std::string{});
    if (type == "hello") {
      if (session_) throw HubError(HubErrorCode::Malformed, "duplicate hello");
      const auto role = parse_role(doc.value("role", std::string{}));
      if (!role) throw HubError(HubErrorCode::Malformed, "unknown role");
      Hello h{*role, doc.value("namespace", std::string{}), doc.value("name", std::string{})};
      session_ = hub_.connect(std::move(h));
      out.session_opened = true;
      reply({{"type", "welcome"},
             {"publisher", session_->publisher()},
             {"grant", session_->hello().role == Role::Robot ? session_->hello().ns : std::string("*")}});
      return out;
    }
    if (!session_) throw HubError(HubErrorCode::NotAuthenticated, "hello required first");
    if (type == "subscribe") {
      session_->subscribe(doc.at("pattern").get<std::string>());
      reply({{"type", "ack"}});
    } else if (type == "unsubscribe") {
      session_->unsubscribe(doc.at("pattern").get<std::string>());
      reply({{"type", "ack"}});
    } else if (type == "publish") {
      auto env = envelope_from_json(doc.at("envelope"), msg.raw ? &*msg.raw : nullptr);
      const auto seq = env.sequence;
      session_->publish(std::move(env));
      reply({{"type", "ack"}, {"sequence", seq}});
    } else if (type == "stats") {
      reply({{"type", "stats"}, {"dropped", session_->dropped()}, {"queued", session_->queued()}});
    } else if (type == "ping") {
      reply({{"type", "pong"}});
    } else {
      throw HubError(HubErrorCode::Malformed, "unknown request type '" + type + "'");
    }
  } catch (const HubError& e) {
    out.replies.push_back(error_document(e.code(), e.what(), id));
  } catch (const Json::exception& e) {
    out.replies.push_back(error_document(HubErrorCode::Malformed, e.what(), id));
  }
  return out;
}

}  // namespace quadslam::net
