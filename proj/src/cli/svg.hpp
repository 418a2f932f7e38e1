#pragma once

#include <string>
#include <vector>

namespace gridest::cli {

struct XyPoint {
  double x = 0.0, y = 0.0;
};

struct XySeries {
  std::string label;
  std::string color;
  std::vector<XyPoint> points;
  bool line = false;  // scatter unless set
};

void write_xy_svg(const std::string& path, const std::string& title, const std::string& x_label,
                  const std::string& y_label, const std::vector<XySeries>& series);

void write_histogram_svg(const std::string& path, const std::string& title,
                         const std::string& x_label, const std::vector<double>& values, int bins);

}  // namespace gridest::cli
