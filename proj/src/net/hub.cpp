#include "quadslam/net/hub.hpp"

#include <algorithm>

namespace quadslam::net {

std::string_view to_string(Role r) {
  switch (r) {
    case Role::Robot: return "robot";
    case Role::Merger: return "merger";
    case Role::Ui: return "ui";
  }
  return "robot";
}

std::optional<Role> parse_role(std::string_view s) {
  if (s == "robot") return Role::Robot;
  if (s == "merger") return Role::Merger;
  if (s == "ui") return Role::Ui;
  return std::nullopt;
}

Session::Session(Hub& hub, std::uint64_t id, Hello hello, std::size_t depth)
    : hub_(hub), id_(id), hello_(std::move(hello)), depth_(std::max<std::size_t>(1, depth)) {
  publisher_ = !hello_.name.empty() ? hello_.name : hello_.role == Role::Robot ? hello_.ns : std::string(to_string(hello_.role));
}

Session::~Session() { close(); }

void Session::publish(Envelope env) {
  if (closed()) throw HubError(HubErrorCode::Closed, "session closed");
  hub_.publish(*this, std::move(env));
}

void Session::subscribe(const std::string& pattern) {
  if (closed()) throw HubError(HubErrorCode::Closed, "session closed");
  hub_.subscribe(*this, pattern);
}

void Session::unsubscribe(const std::string& pattern) { hub_.unsubscribe(*this, pattern); }

EnvelopePtr Session::next(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, timeout, [&] { return !queue_.empty() || closed_.load(); });
  if (queue_.empty()) return nullptr;
  auto e = std::move(queue_.front());
  queue_.pop_front();
  return e;
}

EnvelopePtr Session::try_next() {
  std::lock_guard lock(mu_);
  if (queue_.empty()) return nullptr;
  auto e = std::move(queue_.front());
  queue_.pop_front();
  return e;
}

std::size_t Session::queued() const {
  std::lock_guard lock(mu_);
  return queue_.size();
}

void Session::set_notify(std::function<void()> fn) {
  std::lock_guard lock(mu_);
  notify_ = std::move(fn);
}

void Session::close() {
  if (closed_.exchange(true)) return;
  hub_.disconnect(*this);
  std::lock_guard lock(mu_);
  notify_ = nullptr;
  cv_.notify_all();
}

void Session::enqueue(const EnvelopePtr& env) {
  std::function<void()> notify;
  {
    std::lock_guard lock(mu_);
    if (closed_.load()) return;
    if (queue_.size() >= depth_) {
      auto victim = std::find_if(queue_.begin(), queue_.end(),
                                 [](const EnvelopePtr& e) { return !is_latched(e->payload_type); });
      if (victim == queue_.end() && is_latched(env->payload_type))
        victim = std::find_if(queue_.begin(), queue_.end(), [&](const EnvelopePtr& e) {
          return e->topic == env->topic && e->publisher == env->publisher;
        });
      if (victim == queue_.end()) victim = queue_.begin();
      queue_.erase(victim);
      dropped_.fetch_add(1);
    }
    queue_.push_back(env);
    notify = notify_;
    cv_.notify_one();
  }
  if (notify) notify();
}

Hub::Hub(HubConfig cfg) : cfg_(cfg) {}

std::shared_ptr<Session> Hub::connect(Hello hello) {
  if (hello.role == Role::Robot && (!valid_topic(hello.ns) || hello.ns.find('/') != std::string::npos ||
                                    hello.ns == kMergedNamespace))
    throw HubError(HubErrorCode::NamespaceViolation, "invalid robot namespace '" + hello.ns + "'");
  std::lock_guard lock(mu_);
  auto s = std::make_shared<Session>(*this, next_id_++, std::move(hello), cfg_.queue_depth);
  sessions_[s->id()] = s.get();
  return s;
}

void Hub::set_audit(std::function<void(const Envelope&)> fn) {
  std::lock_guard lock(mu_);
  audit_ = std::move(fn);
}

HubStats Hub::stats() const {
  std::lock_guard lock(mu_);
  HubStats st;
  st.sessions = sessions_.size();
  st.published = published_;
  st.delivered = delivered_;
  st.dropped = dropped_closed_;
  for (const auto& [id, s] : sessions_) st.dropped += s->dropped();
  st.latched = latched_.size();
  return st;
}

std::vector<EnvelopePtr> Hub::latched(const std::string& pattern) const {
  std::lock_guard lock(mu_);
  std::vector<EnvelopePtr> out;
  for (const auto& [key, env] : latched_)
    if (topic_matches(pattern, key.first)) out.push_back(env);
  return out;
}

void Hub::publish(Session& from, Envelope env) {
  if (!valid_topic(env.topic)) throw HubError(HubErrorCode::MalformedTopic, "malformed topic '" + env.topic + "'");
  const auto& hello = from.hello();
  if (hello.role == Role::Robot && topic_namespace(env.topic) != hello.ns)
    throw HubError(HubErrorCode::NamespaceViolation,
                   "'" + hello.ns + "' may not publish on '" + env.topic + "'");
  if (env.payload.size() > cfg_.max_payload)
    throw HubError(HubErrorCode::Oversized, "payload of " + std::to_string(env.payload.size()) + " bytes exceeds " +
                                                std::to_string(cfg_.max_payload));
  env.publisher = from.publisher();
  auto shared = std::make_shared<const Envelope>(std::move(env));

  std::lock_guard lock(mu_);
  auto& last = last_sequence_[{from.id(), shared->topic}];
  if (shared->sequence <= last)
    throw HubError(HubErrorCode::SequenceRegression, "sequence " + std::to_string(shared->sequence) +
                                                         " not above " + std::to_string(last) + " on " +
                                                         shared->topic);
  last = shared->sequence;
  ++published_;
  if (is_latched(shared->payload_type)) latched_[{shared->topic, shared->publisher}] = shared;
  if (audit_) audit_(*shared);
  for (const auto& [id, s] : sessions_) {
    const bool wanted = std::any_of(s->patterns_.begin(), s->patterns_.end(),
                                    [&](const std::string& p) { return topic_matches(p, shared->topic); });
    if (!wanted) continue;
    s->enqueue(shared);
    ++delivered_;
  }
}

void Hub::subscribe(Session& s, const std::string& pattern) {
  if (!valid_pattern(pattern)) throw HubError(HubErrorCode::MalformedPattern, "malformed pattern '" + pattern + "'");
  std::lock_guard lock(mu_);
  const bool already = std::any_of(s.patterns_.begin(), s.patterns_.end(),
                                   [&](const std::string& p) { return p == pattern; });
  if (already) return;
  for (const auto& [key, env] : latched_) {
    if (!topic_matches(pattern, key.first)) continue;
    // Already delivered through an earlier, overlapping subscription.
    const bool covered = std::any_of(s.patterns_.begin(), s.patterns_.end(),
                                     [&](const std::string& p) { return topic_matches(p, key.first); });
    if (covered) continue;
    s.enqueue(env);
    ++delivered_;
  }
  s.patterns_.insert(pattern);
}

void Hub::unsubscribe(Session& s, const std::string& pattern) {
  std::lock_guard lock(mu_);
  s.patterns_.erase(pattern);
}

void Hub::disconnect(Session& s) {
  std::lock_guard lock(mu_);
  sessions_.erase(s.id());
  dropped_closed_ += s.dropped();
  for (auto it = last_sequence_.begin(); it != last_sequence_.end();)
    it = it->first.first == s.id() ? last_sequence_.erase(it) : std::next(it);
}

}  // namespace quadslam::net
