#include "polc/plots.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "polc/common.hpp"

namespace polc::plots {

void write_line_svg(const std::string& path, const std::string& title, const std::string& xlabel,
                    const std::string& ylabel, const std::vector<Series>& series) {
  const int W = 640, H = 420, ml = 70, mr = 20, mt = 40, mb = 50;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  if (!std::isfinite(xmin)) {
    xmin = 0;
    xmax = 1;
    ymin = 0;
    ymax = 1;
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr); };
  auto py = [&](double y) { return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb); };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  std::ofstream os(path);
  POLC_CHECK_T(os.good(), IoError, "cannot write " + path);
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
  os << "<rect width='100%' height='100%' fill='white'/>\n";
  os << "<text x='" << W / 2 << "' y='22' text-anchor='middle' font-size='15'>" << title << "</text>\n";
  os << "<line x1='" << ml << "' y1='" << H - mb << "' x2='" << W - mr << "' y2='" << H - mb
     << "' stroke='black'/>\n";
  os << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << H - mb << "' stroke='black'/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double xv = xmin + (xmax - xmin) * t / 4.0;
    const double yv = ymin + (ymax - ymin) * t / 4.0;
    os << "<text x='" << px(xv) << "' y='" << H - mb + 18 << "' text-anchor='middle' font-size='11'>" << xv
       << "</text>\n";
    os << "<text x='" << ml - 8 << "' y='" << py(yv) + 4 << "' text-anchor='end' font-size='11'>" << yv
       << "</text>\n";
  }
  os << "<text x='" << W / 2 << "' y='" << H - 12 << "' text-anchor='middle' font-size='13'>" << xlabel
     << "</text>\n";
  os << "<text x='18' y='" << H / 2 << "' text-anchor='middle' font-size='13' transform='rotate(-90 18 "
     << H / 2 << ")'>" << ylabel << "</text>\n";
  int ci = 0;
  for (const auto& s : series) {
    const char* col = colors[ci % 6];
    os << "<polyline fill='none' stroke='" << col << "' stroke-width='1.5' points='";
    for (std::size_t i = 0; i < s.x.size(); ++i) os << px(s.x[i]) << "," << py(s.y[i]) << " ";
    os << "'/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      os << "<circle cx='" << px(s.x[i]) << "' cy='" << py(s.y[i]) << "' r='2.5' fill='" << col << "'/>\n";
    os << "<text x='" << W - mr - 8 << "' y='" << mt + 16 * (ci + 1)
       << "' text-anchor='end' font-size='12' fill='" << col << "'>" << s.name << "</text>\n";
    ++ci;
  }
  os << "</svg>\n";
}

}  // namespace polc::plots
