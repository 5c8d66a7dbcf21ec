#include "mpo_lab/replay.hpp"

namespace mpo {

ReplayBuffer::ReplayBuffer(std::size_t capacity_steps) : capacity_(capacity_steps) {
  require(capacity_steps >= 1, "ReplayBuffer: capacity must be positive");
}

void ReplayBuffer::append(Trajectory trajectory) {
  if (trajectory.empty()) throw DimensionError("ReplayBuffer::append: empty trajectory");
  for (const Transition& t : trajectory)
    if (!std::isfinite(t.reward) || !std::isfinite(t.behavior_log_prob))
      throw NumericError("ReplayBuffer::append: non-finite transition");
  total_steps_ += trajectory.size();
  trajectories_.push_back(std::move(trajectory));
  while (total_steps_ > capacity_ && trajectories_.size() > 1) {
    total_steps_ -= trajectories_.front().size();
    trajectories_.pop_front();
  }
}

std::vector<TrajectoryWindow> ReplayBuffer::sample_windows(int count, int length, Rng& rng) const {
  if (total_steps_ == 0) throw DomainError("ReplayBuffer::sample_windows: buffer is empty");
  require(count >= 1 && length >= 1, "ReplayBuffer::sample_windows: bad count or length");

  std::vector<TrajectoryWindow> windows;
  windows.reserve(count);
  for (int i = 0; i < count; ++i) {
    Index pick = rng.uniform_index(static_cast<Index>(total_steps_));
    std::size_t traj = 0;
    while (pick >= static_cast<Index>(trajectories_[traj].size())) {
      pick -= static_cast<Index>(trajectories_[traj].size());
      ++traj;
    }
    const Trajectory& source = trajectories_[traj];
    const std::size_t start = static_cast<std::size_t>(pick);
    const std::size_t stop = std::min(start + static_cast<std::size_t>(length), source.size());
    TrajectoryWindow w;
    w.transitions.assign(source.begin() + start, source.begin() + stop);
    windows.push_back(std::move(w));
  }
  return windows;
}

}  // namespace mpo
