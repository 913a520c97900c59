#include "quadslam/net/envelope.hpp"

#include <array>
#include <utility>

namespace quadslam::net {

namespace {

constexpr std::array<std::pair<PayloadType, std::string_view>, 6> kPayloadNames{{
    {PayloadType::Map, "map"},
    {PayloadType::Pose, "pose"},
    {PayloadType::Scan, "scan"},
    {PayloadType::CmdVel, "cmd_vel"},
    {PayloadType::TransformSet, "transform_set"},
    {PayloadType::Status, "status"},
}};

constexpr std::array<std::pair<HubErrorCode, std::string_view>, 9> kErrorNames{{
    {HubErrorCode::NamespaceViolation, "namespace_violation"},
    {HubErrorCode::UnknownPayloadType, "unknown_payload_type"},
    {HubErrorCode::Oversized, "oversized"},
    {HubErrorCode::MalformedTopic, "malformed_topic"},
    {HubErrorCode::MalformedPattern, "malformed_pattern"},
    {HubErrorCode::SequenceRegression, "sequence_regression"},
    {HubErrorCode::NotAuthenticated, "not_authenticated"},
    {HubErrorCode::Malformed, "malformed"},
    {HubErrorCode::Closed, "closed"},
}};

bool valid_segment(std::string_view s, bool allow_star) {
  if (s.empty()) return false;
  if (allow_star && s == "*") return true;
  for (char c : s)
    if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_')) return false;
  return true;
}

bool valid_path(std::string_view t, bool allow_star) {
  if (t.empty()) return false;
  std::size_t start = 0;
  while (true) {
    const auto slash = t.find('/', start);
    const auto seg = t.substr(start, slash == std::string_view::npos ? std::string_view::npos : slash - start);
    if (!valid_segment(seg, allow_star)) return false;
    if (slash == std::string_view::npos) return true;
    start = slash + 1;
  }
}

}  // namespace

std::string_view to_string(PayloadType t) {
  for (const auto& [k, v] : kPayloadNames)
    if (k == t) return v;
  return "status";
}

std::optional<PayloadType> parse_payload_type(std::string_view s) {
  for (const auto& [k, v] : kPayloadNames)
    if (v == s) return k;
  return std::nullopt;
}

std::string_view to_string(HubErrorCode c) {
  for (const auto& [k, v] : kErrorNames)
    if (k == c) return v;
  return "malformed";
}

std::optional<HubErrorCode> parse_error_code(std::string_view s) {
  for (const auto& [k, v] : kErrorNames)
    if (v == s) return k;
  return std::nullopt;
}

bool valid_topic(std::string_view topic) { return valid_path(topic, false); }
bool valid_pattern(std::string_view pattern) { return valid_path(pattern, true); }

bool topic_matches(std::string_view pattern, std::string_view topic) {
  while (true) {
    const auto ps = pattern.find('/'), ts = topic.find('/');
    const auto p = pattern.substr(0, ps), t = topic.substr(0, ts);
    if (p != "*" && p != t) return false;
    if ((ps == std::string_view::npos) != (ts == std::string_view::npos)) return false;
    if (ps == std::string_view::npos) return true;
    pattern.remove_prefix(ps + 1);
    topic.remove_prefix(ts + 1);
  }
}

std::string_view topic_namespace(std::string_view topic) { return topic.substr(0, topic.find('/')); }

}  // namespace quadslam::net
