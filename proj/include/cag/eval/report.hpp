#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "cag/models/model.hpp"

namespace cag::eval {

using models::Architecture;

struct CellStats {
  Architecture architecture{};
  double mean = 0.0;
  double stdev = 0.0;  // sample stdev over seeds; 0 for one seed
  std::size_t seeds = 0;
  bool single_seed = false;
};

// Difference between the mean accuracy of `plus` cells and of `minus` cells.
// stdev = sqrt of the summed variances of every member cell.
struct Delta {
  std::string contrast;  // "syn", "comp" or "attn"
  std::vector<Architecture> plus;
  std::vector<Architecture> minus;
  bool available = false;
  double mean = 0.0;
  double stdev = 0.0;
  std::string label() const;  // "ActionLSTM,RNNG - LSTM"
};

struct ControlledReport {
  std::map<Architecture, CellStats> cells;
  std::vector<Delta> deltas;
};

// The fixed set of contrasts between minimally different cells.
const std::vector<Delta>& delta_layout();

ControlledReport controlled_report(const std::map<std::pair<Architecture, int>, double>& accuracy_by_seed);
ControlledReport controlled_report_from_stats(const std::vector<CellStats>& cells);

void write_report_csv(std::ostream& out, const ControlledReport& report);

// Standalone SVG charts.
std::string accuracy_bar_svg(const ControlledReport& report);
std::string accuracy_perplexity_svg(const std::vector<std::pair<std::string, std::pair<double, double>>>& points);

}  // namespace cag::eval
