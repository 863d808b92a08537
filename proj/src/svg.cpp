#include "pedsurv/svg.hpp"

#include <algorithm>
#include <sstream>

namespace pedsurv {

namespace {

constexpr double W = 640, H = 480;
constexpr double ML = 60, MR = 20, MT = 40, MB = 50;

struct Mapper {
  double t_max;
  double x(double t) const { return ML + (W - ML - MR) * t / t_max; }
  double y(double s) const { return MT + (H - MT - MB) * (1.0 - s); }
};

// step path through (0,1) then the curve's jump points
std::string step_path(const Mapper& m, const std::vector<double>& t,
                      const std::vector<double>& v, bool reverse = false) {
  std::ostringstream p;
  p.precision(6);
  double px = m.x(0), py = m.y(1.0);
  std::vector<std::pair<double, double>> pts;
  pts.emplace_back(px, py);
  double last = 1.0;
  for (size_t i = 0; i < t.size(); ++i) {
    if (t[i] > m.t_max) break;
    pts.emplace_back(m.x(t[i]), m.y(last));
    pts.emplace_back(m.x(t[i]), m.y(v[i]));
    last = v[i];
  }
  pts.emplace_back(m.x(m.t_max), m.y(last));
  if (reverse) std::reverse(pts.begin(), pts.end());
  for (size_t i = 0; i < pts.size(); ++i)
    p << (i == 0 && !reverse ? "M" : "L") << pts[i].first << ' ' << pts[i].second;
  return p.str();
}

}  // namespace

std::string render_survival_svg(const std::vector<PlotSeries>& series,
                                const std::string& title, double t_max) {
  if (t_max <= 0.0)
    for (const auto& s : series)
      for (double t : s.curve.times) t_max = std::max(t_max, t);
  if (t_max <= 0.0) t_max = 1.0;
  Mapper m{t_max};

  std::ostringstream os;
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='"
     << H << "' viewBox='0 0 " << W << ' ' << H << "'>\n";
  os << "<rect width='100%' height='100%' fill='white'/>\n";
  os << "<text x='" << W / 2 << "' y='24' text-anchor='middle' font-size='16'>"
     << title << "</text>\n";

  // axes and ticks
  os << "<line x1='" << ML << "' y1='" << m.y(0) << "' x2='" << W - MR
     << "' y2='" << m.y(0) << "' stroke='black'/>\n";
  os << "<line x1='" << ML << "' y1='" << m.y(0) << "' x2='" << ML << "' y2='"
     << MT << "' stroke='black'/>\n";
  for (int i = 0; i <= 5; ++i) {
    double s = i / 5.0;
    os << "<text x='" << ML - 8 << "' y='" << m.y(s) + 4
       << "' text-anchor='end' font-size='11'>" << s << "</text>\n";
    os << "<line x1='" << ML - 4 << "' y1='" << m.y(s) << "' x2='" << ML
       << "' y2='" << m.y(s) << "' stroke='black'/>\n";
  }
  for (int i = 0; i <= 5; ++i) {
    double t = t_max * i / 5.0;
    os << "<text x='" << m.x(t) << "' y='" << m.y(0) + 18
       << "' text-anchor='middle' font-size='11'>" << t << "</text>\n";
    os << "<line x1='" << m.x(t) << "' y1='" << m.y(0) << "' x2='" << m.x(t)
       << "' y2='" << m.y(0) + 4 << "' stroke='black'/>\n";
  }
  os << "<text x='" << (ML + W - MR) / 2 << "' y='" << H - 12
     << "' text-anchor='middle' font-size='13'>age (years)</text>\n";
  os << "<text x='16' y='" << (MT + H - MB) / 2
     << "' text-anchor='middle' font-size='13' transform='rotate(-90 16 "
     << (MT + H - MB) / 2 << ")'>survival</text>\n";

  int li = 0;
  for (const auto& s : series) {
    if (s.bands) {
      os << "<path d='" << step_path(m, s.curve.times, s.curve.upper)
         << step_path(m, s.curve.times, s.curve.lower, true)
         << "Z' fill='" << s.color << "' fill-opacity='0.15' stroke='none'/>\n";
    }
    os << "<path d='" << step_path(m, s.curve.times, s.curve.survival)
       << "' fill='none' stroke='" << s.color << "' stroke-width='1.5'/>\n";
    os << "<text x='" << W - MR - 8 << "' y='" << MT + 16 + 16 * li
       << "' text-anchor='end' font-size='12' fill='" << s.color << "'>"
       << s.label << "</text>\n";
    ++li;
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace pedsurv
