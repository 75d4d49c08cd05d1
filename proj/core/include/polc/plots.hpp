#pragma once

#include <string>
#include <vector>

namespace polc::plots {

struct Series {
  std::string name;
  std::vector<double> x, y;
};

// Minimal SVG line chart; every figure is reproducible from its CSV.
void write_line_svg(const std::string& path, const std::string& title, const std::string& xlabel,
                    const std::string& ylabel, const std::vector<Series>& series);

}  // namespace polc::plots
