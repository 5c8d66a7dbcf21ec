#pragma once

#include <deque>
#include <vector>

#include "mpo_lab/control_env.hpp"
#include "mpo_lab/rng.hpp"

namespace mpo {

// Contiguous slice of one stored trajectory.
struct TrajectoryWindow {
  std::vector<Transition> transitions;

  int length() const { return static_cast<int>(transitions.size()); }
};

// Trajectory-granular experience replay with a step-count capacity and
// oldest-trajectory-first eviction. The newest trajectory is always kept,
// even if it alone exceeds the capacity.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity_steps);

  void append(Trajectory trajectory);

  std::size_t total_steps() const { return total_steps_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t num_trajectories() const { return trajectories_.size(); }
  const Trajectory& trajectory(std::size_t i) const { return trajectories_[i]; }

  // Draws `count` windows of up to `length` transitions each. Start
  // positions are uniform over all stored transitions; windows are truncated
  // at trajectory ends and never cross trajectory boundaries.
  std::vector<TrajectoryWindow> sample_windows(int count, int length, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::deque<Trajectory> trajectories_;
  std::size_t total_steps_ = 0;
};

}  // namespace mpo
