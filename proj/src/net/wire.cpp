#include "quadslam/net/wire.hpp"

#include <openssl/evp.h>

#include <cstring>

namespace quadslam::net {

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw HubError(HubErrorCode::Malformed, "base64 length not a multiple of 4");
  if (text.empty()) return {};
  std::vector<std::uint8_t> out(text.size() / 4 * 3);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()), static_cast<int>(text.size()));
  if (n < 0) throw HubError(HubErrorCode::Malformed, "invalid base64");
  std::size_t pad = 0;
  if (text.back() == '=') ++pad;
  if (text.size() >= 2 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

Json envelope_to_json(const Envelope& e, bool raw_payload) {
  Json j{{"topic", e.topic},
         {"sequence", e.sequence},
         {"timestamp", e.timestamp},
         {"payload_type", std::string(to_string(e.payload_type))},
         {"publisher", e.publisher}};
  if (raw_payload) {
    j["payload_encoding"] = "raw";
    j["payload_length"] = e.payload.size();
  } else {
    j["payload_encoding"] = "base64";
    j["payload"] = base64_encode(e.payload);
  }
  return j;
}

Envelope envelope_from_json(const Json& doc, const std::vector<std::uint8_t>* raw) {
  if (!doc.is_object()) throw HubError(HubErrorCode::Malformed, "envelope is not an object");
  try {
    Envelope e;
    e.topic = doc.at("topic").get<std::string>();
    e.sequence = doc.at("sequence").get<std::uint64_t>();
    e.timestamp = doc.value("timestamp", 0.0);
    const auto type = doc.at("payload_type").get<std::string>();
    const auto pt = parse_payload_type(type);
    if (!pt) throw HubError(HubErrorCode::UnknownPayloadType, "unknown payload_type '" + type + "'");
    e.payload_type = *pt;
    e.publisher = doc.value("publisher", std::string{});
    const auto encoding = doc.value("payload_encoding", std::string("base64"));
    if (encoding == "raw") {
      if (!raw) throw HubError(HubErrorCode::Malformed, "raw payload missing");
      if (doc.contains("payload_length") && doc.at("payload_length").get<std::size_t>() != raw->size())
        throw HubError(HubErrorCode::Malformed, "raw payload length mismatch");
      e.payload = *raw;
    } else if (encoding == "base64") {
      e.payload = base64_decode(doc.value("payload", std::string{}));
    } else {
      throw HubError(HubErrorCode::Malformed, "unknown payload_encoding '" + encoding + "'");
    }
    return e;
  } catch (const Json::exception& ex) {
    throw HubError(HubErrorCode::Malformed, std::string("bad envelope: ") + ex.what());
  }
}

std::string encode_body(const Json& doc, std::span<const std::uint8_t> raw, bool with_raw) {
  std::string body = doc.dump();
  if (with_raw) {
    body.push_back('\0');
    body.append(reinterpret_cast<const char*>(raw.data()), raw.size());
  }
  return body;
}

WireMessage decode_body(std::string_view body) {
  WireMessage m;
  // Serialized JSON never contains a literal NUL, so the first one splits.
  const auto nul = body.find('\0');
  const auto text = body.substr(0, nul);
  m.doc = Json::parse(text.begin(), text.end(), nullptr, false);
  if (m.doc.is_discarded() || !m.doc.is_object()) throw HubError(HubErrorCode::Malformed, "body is not a JSON object");
  if (nul != std::string_view::npos) {
    const auto rest = body.substr(nul + 1);
    m.raw.emplace(rest.begin(), rest.end());
  }
  return m;
}

std::string encode_frame(const Json& doc, std::span<const std::uint8_t> raw, bool with_raw) {
  const std::string body = encode_body(doc, raw, with_raw);
  const auto n = static_cast<std::uint32_t>(body.size());
  std::string frame(4, '\0');
  frame[0] = static_cast<char>(n >> 24);
  frame[1] = static_cast<char>(n >> 16);
  frame[2] = static_cast<char>(n >> 8);
  frame[3] = static_cast<char>(n);
  return frame + body;
}

std::uint32_t read_frame_length(const std::uint8_t header[4]) {
  return (std::uint32_t{header[0]} << 24) | (std::uint32_t{header[1]} << 16) | (std::uint32_t{header[2]} << 8) |
         std::uint32_t{header[3]};
}

std::size_t max_frame_length(std::size_t max_payload) { return max_payload / 3 * 4 + 8 + 64 * 1024; }

std::string envelope_frame(const Envelope& e, bool tcp) {
  const bool raw = tcp && e.payload_type == PayloadType::Map;
  Json doc{{"type", "envelope"}, {"envelope", envelope_to_json(e, raw)}};
  return tcp ? encode_frame(doc, e.payload, raw) : encode_body(doc);
}

}  // namespace quadslam::net
