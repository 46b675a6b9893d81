#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace scm {

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

/// Static log-log line chart. Non-positive or non-finite points are skipped.
void write_loglog_svg(std::ostream& out, const std::vector<PlotSeries>& series, const std::string& title,
                      const std::string& xlabel, const std::string& ylabel);

}  // namespace scm
