#include "mpo_lab/metrics.hpp"

#include <charconv>

namespace mpo {

std::string format_metric(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

const char* MetricsWriter::header() {
  return "iteration,env_steps,episodes,mean_return,q_loss,eta,eta_mu,eta_sigma,"
         "kl_mean,kl_cov,dual_value";
}

void MetricsWriter::append(const MetricsRow& row) {
  if (!header_written_) {
    out_ << header() << "\n";
    header_written_ = true;
  }
  out_ << row.iteration << ',' << row.env_steps << ',' << row.episodes << ','
       << format_metric(row.mean_return) << ',' << format_metric(row.q_loss) << ','
       << format_metric(row.eta) << ',' << format_metric(row.eta_mu) << ','
       << format_metric(row.eta_sigma) << ',' << format_metric(row.kl_mean) << ','
       << format_metric(row.kl_cov) << ',' << format_metric(row.dual_value) << "\n";
  out_.flush();
}

}  // namespace mpo
