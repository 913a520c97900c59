#pragma once

#include "quadslam/net/envelope.hpp"

#include <json.hpp>

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace quadslam::net {

using Json = nlohmann::json;

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws HubError(Malformed) on invalid input.
std::vector<std::uint8_t> base64_decode(std::string_view text);
std::string sha256_hex(std::span<const std::uint8_t> bytes);

/// Envelope document. With `raw_payload`, the payload is left out and marked
/// as travelling after the document; otherwise it is base64 text.
Json envelope_to_json(const Envelope& e, bool raw_payload = false);
/// `raw` supplies the payload for documents marked raw. Throws HubError.
Envelope envelope_from_json(const Json& doc, const std::vector<std::uint8_t>* raw = nullptr);

/// A decoded message body: a JSON document, optionally followed by a NUL and
/// raw payload bytes.
struct WireMessage {
  Json doc;
  std::optional<std::vector<std::uint8_t>> raw;
};

/// Body layout shared by TCP frames and binary WebSocket messages.
std::string encode_body(const Json& doc, std::span<const std::uint8_t> raw = {}, bool with_raw = false);
/// Throws HubError(Malformed).
WireMessage decode_body(std::string_view body);

/// TCP framing: 4-byte big-endian body length, then the body.
std::string encode_frame(const Json& doc, std::span<const std::uint8_t> raw = {}, bool with_raw = false);
std::uint32_t read_frame_length(const std::uint8_t header[4]);
/// Upper bound for a frame carrying a payload of `max_payload` bytes.
std::size_t max_frame_length(std::size_t max_payload);

/// Frame (TCP) for a delivery; map payloads travel raw.
std::string envelope_frame(const Envelope& e, bool tcp);

}  // namespace quadslam::net
