#pragma once

#include <ostream>
#include <string>

#include "mpo_lab/types.hpp"

namespace mpo {

// One row of the training diagnostics stream.
struct MetricsRow {
  long iteration = 0;
  long env_steps = 0;
  long episodes = 0;
  double mean_return = 0.0;
  double q_loss = 0.0;
  double eta = 0.0;
  double eta_mu = 0.0;
  double eta_sigma = 0.0;
  double kl_mean = 0.0;
  double kl_cov = 0.0;
  double dual_value = 0.0;
};

// Locale-independent CSV emitter with a fixed column set. The header is
// written on the first row.
class MetricsWriter {
 public:
  explicit MetricsWriter(std::ostream& out) : out_(out) {}

  void append(const MetricsRow& row);

  static const char* header();

 private:
  std::ostream& out_;
  bool header_written_ = false;
};

// Shortest round-trip decimal formatting, independent of the global locale.
std::string format_metric(double v);

}  // namespace mpo
