#include <doctest.h>

#include <sstream>

#include "mpo_lab/metrics.hpp"

using namespace mpo;

TEST_CASE("first append writes the header then the row") {
  std::ostringstream out;
  MetricsWriter writer(out);
  MetricsRow row;
  row.iteration = 1;
  row.env_steps = 200;
  row.episodes = 1;
  row.mean_return = -1234.5;
  writer.append(row);
  const std::string text = out.str();
  CHECK(text.rfind("iteration,env_steps,episodes,mean_return,q_loss,eta,eta_mu,eta_sigma,"
                   "kl_mean,kl_cov,dual_value\n",
                   0) == 0);
  CHECK(text.find("\n1,200,1,-1234.5,0,") != std::string::npos);
}

TEST_CASE("column count is constant across rows") {
  std::ostringstream out;
  MetricsWriter writer(out);
  for (int i = 0; i < 5; ++i) {
    MetricsRow row;
    row.iteration = i;
    row.eta = 0.1 * i;
    row.dual_value = -3.5e-7 * i;
    writer.append(row);
  }
  std::istringstream in(out.str());
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    CHECK(std::count(line.begin(), line.end(), ',') == 10);
    ++rows;
  }
  CHECK(rows == 6);  // header + 5
}

TEST_CASE("values survive a parse round-trip at full precision") {
  std::ostringstream out;
  MetricsWriter writer(out);
  MetricsRow row;
  row.mean_return = -237.4568913241;
  row.q_loss = 1.25e-13;
  row.eta = 1.0 / 3.0;
  writer.append(row);

  std::istringstream in(out.str());
  std::string header, data;
  std::getline(in, header);
  std::getline(in, data);
  std::vector<std::string> cells;
  std::stringstream ss(data);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  REQUIRE(cells.size() == 11);
  CHECK(std::stod(cells[3]) == row.mean_return);
  CHECK(std::stod(cells[4]) == row.q_loss);
  CHECK(std::stod(cells[5]) == row.eta);
}

TEST_CASE("formatting is locale independent") {
  CHECK(format_metric(0.5) == "0.5");
  CHECK(format_metric(-3.25) == "-3.25");
  CHECK(format_metric(1e21).find(',') == std::string::npos);
}
