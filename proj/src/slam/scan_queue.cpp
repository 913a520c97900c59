#include "quadslam/slam/scan_queue.hpp"

#include <stdexcept>

namespace quadslam::slam {

ScanQueue::ScanQueue(MappingMode mode, std::size_t capacity) : mode_(mode), capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("queue capacity must be > 0");
}

bool ScanQueue::push(ScanItem item) {
  std::unique_lock lock(mu_);
  if (mode_ == MappingMode::Synchronous) {
    not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
    if (closed_) return false;
    items_.push_back(std::move(item));
  } else {
    if (closed_) return false;
    if (!items_.empty()) {
      item.odom_delta = compose(items_.back().odom_delta, item.odom_delta);
      items_.back() = std::move(item);
      ++dropped_;
    } else {
      items_.push_back(std::move(item));
    }
  }
  not_empty_.notify_one();
  return true;
}

std::optional<ScanItem> ScanQueue::pop() {
  std::unique_lock lock(mu_);
  not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
  if (items_.empty()) return std::nullopt;
  ScanItem v = std::move(items_.front());
  items_.pop_front();
  not_full_.notify_one();
  return v;
}

void ScanQueue::close() {
  std::lock_guard lock(mu_);
  closed_ = true;
  not_empty_.notify_all();
  not_full_.notify_all();
}

std::uint64_t ScanQueue::dropped() const {
  std::lock_guard lock(mu_);
  return dropped_;
}

}  // namespace quadslam::slam
