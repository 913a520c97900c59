#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace quadslam::net {

inline constexpr std::uint16_t kDefaultTcpPort = 7447;
inline constexpr std::uint16_t kDefaultWsPort = 7448;
inline constexpr std::size_t kDefaultMaxPayload = 16u * 1024u * 1024u;

enum class PayloadType { Map, Pose, Scan, CmdVel, TransformSet, Status };

std::string_view to_string(PayloadType t);
std::optional<PayloadType> parse_payload_type(std::string_view s);
/// The hub retains the newest envelope per publisher for these.
inline bool is_latched(PayloadType t) {
  return t == PayloadType::Map || t == PayloadType::Pose || t == PayloadType::TransformSet;
}

struct Envelope {
  std::string topic;
  std::uint64_t sequence{0};
  double timestamp{0.0};
  PayloadType payload_type{PayloadType::Status};
  /// Filled in by the hub from the publishing connection.
  std::string publisher;
  std::vector<std::uint8_t> payload;

  bool operator==(const Envelope&) const = default;
};

using EnvelopePtr = std::shared_ptr<const Envelope>;

enum class HubErrorCode {
  NamespaceViolation,
  UnknownPayloadType,
  Oversized,
  MalformedTopic,
  MalformedPattern,
  SequenceRegression,
  NotAuthenticated,
  Malformed,
  Closed,
};

std::string_view to_string(HubErrorCode c);
std::optional<HubErrorCode> parse_error_code(std::string_view s);

class HubError : public std::runtime_error {
 public:
  HubError(HubErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  HubErrorCode code() const { return code_; }

 private:
  HubErrorCode code_;
};

/// `/`-separated segments of [a-z0-9_]+, no empty segments.
bool valid_topic(std::string_view topic);
/// A topic where any segment may be `*`.
bool valid_pattern(std::string_view pattern);
/// `*` matches exactly one segment.
bool topic_matches(std::string_view pattern, std::string_view topic);
/// First segment.
std::string_view topic_namespace(std::string_view topic);

inline constexpr std::string_view kMergedNamespace = "merged";

}  // namespace quadslam::net
