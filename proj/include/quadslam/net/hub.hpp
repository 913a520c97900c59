#pragma once

#include "quadslam/net/envelope.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <set>

namespace quadslam::net {

struct HubConfig {
  std::size_t queue_depth{64};  // per subscriber connection
  std::size_t max_payload{kDefaultMaxPayload};
};

enum class Role { Robot, Merger, Ui };

std::string_view to_string(Role r);
std::optional<Role> parse_role(std::string_view s);

/// Connection greeting. Robots are granted their namespace only; merger and
/// UI clients may publish anywhere.
struct Hello {
  Role role{Role::Robot};
  std::string ns;
  /// Publisher identity; defaults to the namespace for robots and the role
  /// name otherwise.
  std::string name;
};

class Hub;

/// One connected client. Deliveries wait in a bounded queue; when it is full
/// the oldest non-latched envelope is dropped (then a superseded latched one,
/// then the oldest).
class Session {
 public:
  Session(Hub& hub, std::uint64_t id, Hello hello, std::size_t depth);
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  std::uint64_t id() const { return id_; }
  const Hello& hello() const { return hello_; }
  const std::string& publisher() const { return publisher_; }

  /// Throws HubError. The publisher field is overwritten.
  void publish(Envelope env);
  void subscribe(const std::string& pattern);
  void unsubscribe(const std::string& pattern);

  EnvelopePtr next(std::chrono::milliseconds timeout);
  EnvelopePtr try_next();
  std::uint64_t dropped() const { return dropped_.load(); }
  std::size_t queued() const;

  /// Called (from the publishing thread) after each enqueue.
  void set_notify(std::function<void()> fn);
  void close();
  bool closed() const { return closed_.load(); }

 private:
  friend class Hub;
  void enqueue(const EnvelopePtr& env);

  Hub& hub_;
  std::uint64_t id_;
  Hello hello_;
  std::string publisher_;
  std::size_t depth_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<EnvelopePtr> queue_;
  std::function<void()> notify_;
  std::atomic<std::uint64_t> dropped_{0};
  std::atomic<bool> closed_{false};
  std::set<std::string> patterns_;  // guarded by the hub mutex
};

struct HubStats {
  std::size_t sessions{0};
  std::uint64_t published{0};
  std::uint64_t delivered{0};
  std::uint64_t dropped{0};
  std::size_t latched{0};
};

/// In-process publish/subscribe core shared by every transport. Must outlive
/// its sessions.
class Hub {
 public:
  explicit Hub(HubConfig cfg = {});
  Hub(const Hub&) = delete;
  Hub& operator=(const Hub&) = delete;

  const HubConfig& config() const { return cfg_; }

  /// Throws HubError(NamespaceViolation) for an invalid robot namespace.
  std::shared_ptr<Session> connect(Hello hello);

  /// Observer for every accepted publish, in acceptance order.
  void set_audit(std::function<void(const Envelope&)> fn);
  HubStats stats() const;
  /// Newest retained envelope per (topic, publisher) matching `pattern`.
  std::vector<EnvelopePtr> latched(const std::string& pattern) const;

 private:
  friend class Session;
  void publish(Session& from, Envelope env);
  void subscribe(Session& s, const std::string& pattern);
  void unsubscribe(Session& s, const std::string& pattern);
  void disconnect(Session& s);

  HubConfig cfg_;
  mutable std::mutex mu_;
  std::uint64_t next_id_{1};
  std::map<std::uint64_t, Session*> sessions_;
  std::map<std::pair<std::string, std::string>, EnvelopePtr> latched_;
  std::map<std::pair<std::uint64_t, std::string>, std::uint64_t> last_sequence_;
  std::function<void(const Envelope&)> audit_;
  std::uint64_t published_{0};
  std::uint64_t delivered_{0};
  std::uint64_t dropped_closed_{0};
};

}  // namespace quadslam::net
