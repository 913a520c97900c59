#pragma once

#include "quadslam/net/hub.hpp"
#include "quadslam/net/wire.hpp"

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

namespace quadslam::net {

/// A participant's connection to the hub, whatever the transport.
class HubLink {
 public:
  virtual ~HubLink() = default;

  virtual const std::string& publisher() const = 0;
  /// Publishes as given. Throws HubError on rejection.
  virtual void publish(const Envelope& env) = 0;
  /// Latched envelopes matching `pattern` are queued before this returns.
  virtual void subscribe(const std::string& pattern) = 0;
  /// Null on timeout or once closed and drained.
  virtual EnvelopePtr next(std::chrono::milliseconds timeout) = 0;
  /// Deliveries the hub discarded for this subscriber.
  virtual std::uint64_t dropped() = 0;
  virtual void close() = 0;
  /// Returns once every delivery the hub queued for this link before the
  /// call is available from next().
  virtual void sync() {}

  /// Publishes with the next per-topic sequence number; returns it.
  std::uint64_t send(const std::string& topic, PayloadType type, std::vector<std::uint8_t> payload, double timestamp);

 private:
  std::mutex seq_mu_;
  std::map<std::string, std::uint64_t> sequences_;
};

class InprocLink final : public HubLink {
 public:
  InprocLink(Hub& hub, Hello hello) : session_(hub.connect(std::move(hello))) {}
  ~InprocLink() override { close(); }

  const std::string& publisher() const override { return session_->publisher(); }
  void publish(const Envelope& env) override { session_->publish(env); }
  void subscribe(const std::string& pattern) override { session_->subscribe(pattern); }
  EnvelopePtr next(std::chrono::milliseconds timeout) override { return session_->next(timeout); }
  std::uint64_t dropped() override { return session_->dropped(); }
  void close() override { session_->close(); }

 private:
  std::shared_ptr<Session> session_;
};

/// Framed TCP client. A reader thread routes replies to the waiting request
/// and queues deliveries.
class TcpLink final : public HubLink {
 public:
  /// Connects and says hello; throws HubError or std::runtime_error.
  TcpLink(const std::string& host, std::uint16_t port, Hello hello,
          std::chrono::milliseconds reply_timeout = std::chrono::seconds(10));
  ~TcpLink() override;

  const std::string& publisher() const override { return publisher_; }
  void publish(const Envelope& env) override;
  void subscribe(const std::string& pattern) override;
  EnvelopePtr next(std::chrono::milliseconds timeout) override;
  std::uint64_t dropped() override;
  void close() override;
  void sync() override;

 private:
  Json request(Json doc, std::span<const std::uint8_t> raw = {}, bool with_raw = false);
  void send_frame(const std::string& frame);
  void reader();

  int fd_{-1};
  std::chrono::milliseconds timeout_;
  std::string publisher_;
  std::mutex write_mu_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::uint64_t next_id_{1};
  std::map<std::uint64_t, Json> replies_;
  std::deque<EnvelopePtr> inbox_;
  bool reader_done_{false};
  std::thread reader_thread_;
};

}  // namespace quadslam::net
