#include "quadslam/gait/ll_link.hpp"

namespace quadslam::gait {

LowLevelController::LowLevelController(LlChannel& channel)
    : channel_(channel), worker_([this] { run(); }) {}

LowLevelController::~LowLevelController() { stop(); }

void LowLevelController::stop() {
  channel_.close();
  if (worker_.joinable()) worker_.join();
}

std::optional<ServoCommand> LowLevelController::current() const {
  std::lock_guard lock(mu_);
  return current_;
}

void LowLevelController::run() {
  while (auto bytes = channel_.receive()) {
    try {
      ServoCommand cmd = ll_decode(*bytes);
      {
        std::lock_guard lock(mu_);
        current_ = cmd;
      }
      accepted_.fetch_add(1);
    } catch (const FrameDecodeError&) {
      rejected_.fetch_add(1);
    }
  }
}

}  // namespace quadslam::gait
