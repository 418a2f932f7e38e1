#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "gridest/common.hpp"

namespace gridest::cli {

namespace {

constexpr double kW = 720, kH = 480;
constexpr double kL = 70, kR = 24, kT = 40, kB = 56;

struct Frame {
  double x_lo = 0, x_hi = 1, y_lo = 0, y_hi = 1;
  double sx(double x) const { return kL + (x - x_lo) / (x_hi - x_lo) * (kW - kL - kR); }
  double sy(double y) const { return kH - kB - (y - y_lo) / (y_hi - y_lo) * (kH - kT - kB); }
};

void pad(double& lo, double& hi) {
  if (hi <= lo) {
    lo -= 0.5;
    hi += 0.5;
    return;
  }
  double m = 0.05 * (hi - lo);
  lo -= m;
  hi += m;
}

void open_svg(std::ofstream& out, const std::string& title) {
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kW << "' height='" << kH
      << "' viewBox='0 0 " << kW << " " << kH << "'>\n"
      << "<rect width='100%' height='100%' fill='white'/>\n"
      << "<text x='" << kW / 2 << "' y='22' text-anchor='middle' font-family='sans-serif' "
      << "font-size='15'>" << title << "</text>\n";
}

void axes(std::ofstream& out, const Frame& f, const std::string& x_label,
          const std::string& y_label) {
  out << "<line x1='" << kL << "' y1='" << kH - kB << "' x2='" << kW - kR << "' y2='" << kH - kB
      << "' stroke='black'/>\n"
      << "<line x1='" << kL << "' y1='" << kT << "' x2='" << kL << "' y2='" << kH - kB
      << "' stroke='black'/>\n";
  char buf[64];
  for (int i = 0; i <= 5; ++i) {
    double x = f.x_lo + (f.x_hi - f.x_lo) * i / 5.0;
    double y = f.y_lo + (f.y_hi - f.y_lo) * i / 5.0;
    std::snprintf(buf, sizeof buf, "%.4g", x);
    out << "<text x='" << f.sx(x) << "' y='" << kH - kB + 18
        << "' text-anchor='middle' font-family='sans-serif' font-size='11'>" << buf
        << "</text>\n";
    std::snprintf(buf, sizeof buf, "%.4g", y);
    out << "<text x='" << kL - 8 << "' y='" << f.sy(y) + 4
        << "' text-anchor='end' font-family='sans-serif' font-size='11'>" << buf << "</text>\n";
  }
  out << "<text x='" << (kL + kW - kR) / 2 << "' y='" << kH - 14
      << "' text-anchor='middle' font-family='sans-serif' font-size='13'>" << x_label
      << "</text>\n"
      << "<text x='18' y='" << (kT + kH - kB) / 2
      << "' text-anchor='middle' font-family='sans-serif' font-size='13' transform='rotate(-90 18 "
      << (kT + kH - kB) / 2 << ")'>" << y_label << "</text>\n";
}

}  // namespace

void write_xy_svg(const std::string& path, const std::string& title, const std::string& x_label,
                  const std::string& y_label, const std::vector<XySeries>& series) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::missing_file, "cannot write " + path);

  Frame f;
  bool first = true;
  for (const auto& s : series)
    for (const auto& p : s.points) {
      if (first) {
        f.x_lo = f.x_hi = p.x;
        f.y_lo = f.y_hi = p.y;
        first = false;
      }
      f.x_lo = std::min(f.x_lo, p.x);
      f.x_hi = std::max(f.x_hi, p.x);
      f.y_lo = std::min(f.y_lo, p.y);
      f.y_hi = std::max(f.y_hi, p.y);
    }
  pad(f.x_lo, f.x_hi);
  pad(f.y_lo, f.y_hi);

  open_svg(out, title);
  axes(out, f, x_label, y_label);
  double ly = kT + 6;
  for (const auto& s : series) {
    if (s.line && s.points.size() > 1) {
      out << "<polyline fill='none' stroke='" << s.color << "' stroke-width='1.5' points='";
      for (const auto& p : s.points) out << f.sx(p.x) << "," << f.sy(p.y) << " ";
      out << "'/>\n";
    } else {
      for (const auto& p : s.points)
        out << "<circle cx='" << f.sx(p.x) << "' cy='" << f.sy(p.y) << "' r='2.4' fill='"
            << s.color << "'/>\n";
    }
    out << "<text x='" << kW - kR - 6 << "' y='" << ly
        << "' text-anchor='end' font-family='sans-serif' font-size='12' fill='" << s.color << "'>"
        << s.label << "</text>\n";
    ly += 16;
  }
  out << "</svg>\n";
}

void write_histogram_svg(const std::string& path, const std::string& title,
                         const std::string& x_label, const std::vector<double>& values,
                         int bins) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::missing_file, "cannot write " + path);
  if (values.empty() || bins < 1) {
    open_svg(out, title + " (no data)");
    out << "</svg>\n";
    return;
  }
  double lo = *std::min_element(values.begin(), values.end());
  double hi = *std::max_element(values.begin(), values.end());
  if (hi <= lo) hi = lo + 1.0;
  std::vector<int> counts(bins, 0);
  for (double v : values) {
    int b = std::min(bins - 1, int((v - lo) / (hi - lo) * bins));
    counts[b]++;
  }
  Frame f;
  f.x_lo = lo;
  f.x_hi = hi;
  f.y_lo = 0;
  f.y_hi = *std::max_element(counts.begin(), counts.end()) * 1.05 + 1;

  open_svg(out, title);
  axes(out, f, x_label, "count");
  const double bw = (f.sx(hi) - f.sx(lo)) / bins;
  for (int b = 0; b < bins; ++b) {
    double x = f.sx(lo + (hi - lo) * b / bins);
    double y = f.sy(counts[b]);
    out << "<rect x='" << x << "' y='" << y << "' width='" << bw * 0.92 << "' height='"
        << (kH - kB - y) << "' fill='#4878a8'/>\n";
  }
  out << "</svg>\n";
}

}  // namespace gridest::cli
