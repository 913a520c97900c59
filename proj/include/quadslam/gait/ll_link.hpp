#pragma once

#include "quadslam/core/blocking_queue.hpp"
#include "quadslam/gait/servo.hpp"

#include <atomic>
#include <cstdint>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

namespace quadslam::gait {

/// The only HL→LL path: raw bytes, single producer, single consumer.
class LlChannel {
 public:
  explicit LlChannel(std::size_t capacity = 64) : queue_(capacity) {}

  bool send(std::vector<std::uint8_t> bytes) { return queue_.push(std::move(bytes)); }
  bool send(const LlFrame& frame) { return send(std::vector<std::uint8_t>(frame.begin(), frame.end())); }
  std::optional<std::vector<std::uint8_t>> receive() { return queue_.pop(); }
  void close() { queue_.close(); }

 private:
  BlockingQueue<std::vector<std::uint8_t>> queue_;
};

/// Low-level consumer: decodes frames and holds the servo targets. Corrupt
/// frames are counted and dropped; the previous targets stay in force.
class LowLevelController {
 public:
  explicit LowLevelController(LlChannel& channel);
  ~LowLevelController();
  LowLevelController(const LowLevelController&) = delete;
  LowLevelController& operator=(const LowLevelController&) = delete;

  /// Closes the channel and waits for the consumer thread to drain it.
  void stop();

  std::optional<ServoCommand> current() const;
  std::uint64_t accepted() const { return accepted_.load(); }
  std::uint64_t rejected() const { return rejected_.load(); }

 private:
  void run();

  LlChannel& channel_;
  mutable std::mutex mu_;
  std::optional<ServoCommand> current_;
  std::atomic<std::uint64_t> accepted_{0};
  std::atomic<std::uint64_t> rejected_{0};
  std::thread worker_;
};

}  // namespace quadslam::gait
