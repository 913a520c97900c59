#include "quadslam/net/link.hpp"

#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <stdexcept>

namespace quadslam::net {

std::uint64_t HubLink::send(const std::string& topic, PayloadType type, std::vector<std::uint8_t> payload,
                            double timestamp) {
  std::uint64_t seq;
  {
    std::lock_guard lock(seq_mu_);
    seq = ++sequences_[topic];
  }
  Envelope e;
  e.topic = topic;
  e.sequence = seq;
  e.timestamp = timestamp;
  e.payload_type = type;
  e.payload = std::move(payload);
  publish(e);
  return seq;
}

namespace {

bool read_exact(int fd, void* buf, std::size_t n) {
  auto* p = static_cast<char*>(buf);
  while (n > 0) {
    const ssize_t r = ::recv(fd, p, n, 0);
    if (r < 0 && errno == EINTR) continue;
    if (r <= 0) return false;
    p += r;
    n -= static_cast<std::size_t>(r);
  }
  return true;
}

}  // namespace

TcpLink::TcpLink(const std::string& host, std::uint16_t port, Hello hello, std::chrono::milliseconds reply_timeout)
    : timeout_(reply_timeout) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res)
    throw std::runtime_error("cannot resolve hub host " + host);
  for (auto* ai = res; ai; ai = ai->ai_next) {
    fd_ = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd_ < 0) continue;
    if (::connect(fd_, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd_);
    fd_ = -1;
  }
  ::freeaddrinfo(res);
  if (fd_ < 0) throw std::runtime_error("cannot connect to hub at " + host + ":" + std::to_string(port));
  int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
  reader_thread_ = std::thread([this] { reader(); });

  Json h{{"type", "hello"}, {"role", std::string(to_string(hello.role))}, {"namespace", hello.ns}};
  if (!hello.name.empty()) h["name"] = hello.name;
  try {
    const Json welcome = request(std::move(h));
    publisher_ = welcome.value("publisher", std::string{});
  } catch (...) {
    close();
    throw;
  }
}

TcpLink::~TcpLink() { close(); }

void TcpLink::send_frame(const std::string& frame) {
  std::lock_guard lock(write_mu_);
  if (fd_ < 0) throw HubError(HubErrorCode::Closed, "link closed");
  const char* p = frame.data();
  std::size_t n = frame.size();
  while (n > 0) {
    const ssize_t w = ::send(fd_, p, n, MSG_NOSIGNAL);
    if (w < 0 && errno == EINTR) continue;
    if (w <= 0) throw HubError(HubErrorCode::Closed, "hub connection lost");
    p += w;
    n -= static_cast<std::size_t>(w);
  }
}

Json TcpLink::request(Json doc, std::span<const std::uint8_t> raw, bool with_raw) {
  std::uint64_t id;
  {
    std::lock_guard lock(mu_);
    id = next_id_++;
  }
  doc["id"] = id;
  send_frame(encode_frame(doc, raw, with_raw));
  std::unique_lock lock(mu_);
  if (!cv_.wait_for(lock, timeout_, [&] { return replies_.count(id) > 0 || reader_done_; }))
    throw HubError(HubErrorCode::Closed, "hub did not reply");
  auto it = replies_.find(id);
  if (it == replies_.end()) throw HubError(HubErrorCode::Closed, "hub connection lost");
  Json reply = std::move(it->second);
  replies_.erase(it);
  if (reply.value("type", std::string{}) == "error") {
    const auto code = parse_error_code(reply.value("code", std::string{}));
    throw HubError(code.value_or(HubErrorCode::Malformed), reply.value("message", std::string("hub error")));
  }
  return reply;
}

void TcpLink::reader() {
  std::string body;
  while (true) {
    std::uint8_t header[4];
    if (!read_exact(fd_, header, 4)) break;
    body.resize(read_frame_length(header));
    if (!read_exact(fd_, body.data(), body.size())) break;
    try {
      auto msg = decode_body(body);
      const auto type = msg.doc.value("type", std::string{});
      if (type == "envelope") {
        auto env = std::make_shared<const Envelope>(
            envelope_from_json(msg.doc.at("envelope"), msg.raw ? &*msg.raw : nullptr));
        std::lock_guard lock(mu_);
        inbox_.push_back(std::move(env));
        cv_.notify_all();
      } else if (msg.doc.contains("id") && msg.doc.at("id").is_number_unsigned()) {
        const auto id = msg.doc.at("id").get<std::uint64_t>();
        std::lock_guard lock(mu_);
        replies_[id] = std::move(msg.doc);
        cv_.notify_all();
      }
    } catch (const std::exception&) {
      // A malformed delivery is dropped; the stream stays usable.
    }
  }
  std::lock_guard lock(mu_);
  reader_done_ = true;
  cv_.notify_all();
}

void TcpLink::publish(const Envelope& env) {
  const bool raw = env.payload_type == PayloadType::Map;
  request({{"type", "publish"}, {"envelope", envelope_to_json(env, raw)}}, env.payload, raw);
}

void TcpLink::subscribe(const std::string& pattern) { request({{"type", "subscribe"}, {"pattern", pattern}}); }

EnvelopePtr TcpLink::next(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, timeout, [&] { return !inbox_.empty() || reader_done_; });
  if (inbox_.empty()) return nullptr;
  auto e = std::move(inbox_.front());
  inbox_.pop_front();
  return e;
}

void TcpLink::sync() { request({{"type", "ping"}}); }

std::uint64_t TcpLink::dropped() { return request({{"type", "stats"}}).value("dropped", std::uint64_t{0}); }

void TcpLink::close() {
  {
    std::lock_guard lock(write_mu_);
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
  }
  if (reader_thread_.joinable()) reader_thread_.join();
  std::lock_guard lock(write_mu_);
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

}  // namespace quadslam::net
