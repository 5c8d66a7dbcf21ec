#include <doctest.h>

#include "mpo_lab/replay.hpp"

using namespace mpo;

namespace {

Trajectory make_traj(int length, double tag) {
  Trajectory t(length);
  for (int i = 0; i < length; ++i) {
    t[i].state = Vector::Constant(1, tag);
    t[i].action = Vector::Constant(1, double(i));
    t[i].reward = tag + i;
    t[i].next_state = Vector::Constant(1, tag);
    t[i].behavior_log_prob = -1.0;
  }
  return t;
}

}  // namespace

TEST_CASE("eviction arithmetic: capacity 10, three trajectories of 5") {
  ReplayBuffer buffer(10);
  buffer.append(make_traj(5, 0.0));
  buffer.append(make_traj(5, 1.0));
  buffer.append(make_traj(5, 2.0));
  CHECK(buffer.total_steps() == 10);
  CHECK(buffer.num_trajectories() == 2);
  CHECK(buffer.trajectory(0)[0].state[0] == 1.0);  // oldest evicted
}

TEST_CASE("append then sample round-trips transitions bitwise") {
  ReplayBuffer buffer(100);
  buffer.append(make_traj(5, 3.0));
  Rng rng(1);
  const auto windows = buffer.sample_windows(1, 5, rng);
  REQUIRE(windows.size() == 1);
  REQUIRE(windows[0].length() == 5);
  for (int i = 0; i < 5; ++i) {
    CHECK(windows[0].transitions[i].reward == buffer.trajectory(0)[i].reward);
    CHECK(windows[0].transitions[i].action[0] == buffer.trajectory(0)[i].action[0]);
  }
}

TEST_CASE("eviction is first-in-first-out over 100 appends") {
  ReplayBuffer buffer(50);  // keeps the ten newest 5-step trajectories
  for (int k = 0; k < 100; ++k) buffer.append(make_traj(5, double(k)));
  CHECK(buffer.total_steps() == 50);
  REQUIRE(buffer.num_trajectories() == 10);
  for (int i = 0; i < 10; ++i) CHECK(buffer.trajectory(i)[0].state[0] == double(90 + i));
}

TEST_CASE("a single oversized trajectory is kept") {
  ReplayBuffer buffer(10);
  buffer.append(make_traj(25, 1.0));
  CHECK(buffer.total_steps() == 25);
  buffer.append(make_traj(4, 2.0));
  CHECK(buffer.num_trajectories() == 1);
  CHECK(buffer.trajectory(0)[0].state[0] == 2.0);
}

TEST_CASE("empty trajectories and empty buffers are rejected") {
  ReplayBuffer buffer(10);
  CHECK_THROWS_AS(buffer.append(Trajectory{}), DimensionError);
  Rng rng(2);
  CHECK_THROWS_AS(buffer.sample_windows(1, 1, rng), DomainError);
}

TEST_CASE("window of length one is a single transition") {
  ReplayBuffer buffer(100);
  buffer.append(make_traj(7, 1.0));
  Rng rng(3);
  for (const auto& w : buffer.sample_windows(20, 1, rng)) CHECK(w.length() == 1);
}

TEST_CASE("whole trajectory is returned when lengths match") {
  ReplayBuffer buffer(100);
  buffer.append(make_traj(5, 1.0));
  Rng rng(4);
  bool saw_full = false;
  for (const auto& w : buffer.sample_windows(50, 5, rng)) {
    CHECK(w.length() >= 1);
    CHECK(w.length() <= 5);
    if (w.transitions[0].action[0] == 0.0) {
      CHECK(w.length() == 5);
      saw_full = true;
    }
  }
  CHECK(saw_full);
}

TEST_CASE("windows never cross trajectory boundaries") {
  ReplayBuffer buffer(100);
  buffer.append(make_traj(6, 1.0));
  buffer.append(make_traj(6, 2.0));
  Rng rng(5);
  for (const auto& w : buffer.sample_windows(200, 4, rng)) {
    const double tag = w.transitions[0].state[0];
    for (const auto& t : w.transitions) CHECK(t.state[0] == tag);
  }
}

TEST_CASE("start positions are uniform within two percent at 100k draws") {
  ReplayBuffer buffer(1000);
  buffer.append(make_traj(10, 1.0));
  buffer.append(make_traj(10, 2.0));
  Rng rng(6);
  const int n = 100000;
  std::map<std::pair<double, double>, int> counts;
  const auto windows = buffer.sample_windows(n, 3, rng);
  for (const auto& w : windows)
    counts[{w.transitions[0].state[0], w.transitions[0].action[0]}] += 1;
  CHECK(counts.size() == 20);
  for (const auto& [key, count] : counts)
    CHECK(std::abs(double(count) / n - 0.05) < 0.02 * 0.05 + 0.002);
}

TEST_CASE("non-finite behavior log probs are rejected at append time") {
  ReplayBuffer buffer(10);
  Trajectory t = make_traj(2, 1.0);
  t[1].behavior_log_prob = -std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(buffer.append(std::move(t)), NumericError);
}
