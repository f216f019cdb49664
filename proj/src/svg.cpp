#include "lbmpc/svg.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <sstream>

#include "lbmpc/csv.hpp"
#include "lbmpc/errors.hpp"

namespace lbmpc {

namespace {

struct Margins {
  double left = 64, right = 16, top = 32, bottom = 48;
};

double tx(double v, double lo, double hi, double a, double b) {
  if (hi <= lo) return 0.5 * (a + b);
  return a + (v - lo) / (hi - lo) * (b - a);
}

std::vector<double> nice_ticks(double lo, double hi, int target = 6) {
  std::vector<double> ticks;
  if (!(hi > lo)) return {lo};
  const double span = hi - lo;
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (raw <= m * mag) {
      step = m * mag;
      break;
    }
  }
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-12 * span; v += step) {
    ticks.push_back(v);
  }
  return ticks;
}

}  // namespace

void write_svg_plot(std::ostream& os, const PlotSpec& spec,
                    const std::vector<PlotSeries>& series) {
  Margins m;
  auto mapx = [&](double v) { return spec.log_x ? std::log10(std::max(v, 1e-300)) : v; };
  auto mapy = [&](double v) { return spec.log_y ? std::log10(std::max(v, 1e-300)) : v; };

  double xlo = 0, xhi = 1, ylo = 0, yhi = 1;
  bool first = true;
  for (const auto& s : series) {
    for (size_t i = 0; i < s.x.size(); ++i) {
      const double bx = mapx(s.x[i]);
      double ylo_i = s.y[i], yhi_i = s.y[i];
      if (s.band_halfwidth.size() == s.x.size()) {
        ylo_i -= s.band_halfwidth[i];
        yhi_i += s.band_halfwidth[i];
      }
      const double by0 = mapy(ylo_i), by1 = mapy(yhi_i);
      if (first) {
        xlo = xhi = bx;
        ylo = by0;
        yhi = by1;
        first = false;
      }
      xlo = std::min(xlo, bx);
      xhi = std::max(xhi, bx);
      ylo = std::min(ylo, std::min(by0, by1));
      yhi = std::max(yhi, std::max(by0, by1));
    }
  }
  if (!(yhi > ylo)) yhi = ylo + 1.0;
  if (!(xhi > xlo)) xhi = xlo + 1.0;

  const double px0 = m.left, px1 = spec.width - m.right;
  const double py0 = spec.height - m.bottom, py1 = m.top;
  auto X = [&](double v) { return tx(mapx(v), xlo, xhi, px0, px1); };
  auto Y = [&](double v) { return tx(mapy(v), ylo, yhi, py0, py1); };

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width << "\" height=\""
     << spec.height << "\" viewBox=\"0 0 " << spec.width << " " << spec.height << "\">\n";

  // data payload for round-trip tests
  os << "<metadata id=\"series-data\">{";
  for (size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    if (si) os << ",";
    os << "\"" << s.label << "\":{\"x\":[";
    for (size_t i = 0; i < s.x.size(); ++i) os << (i ? "," : "") << fmt_double(s.x[i]);
    os << "],\"y\":[";
    for (size_t i = 0; i < s.y.size(); ++i) os << (i ? "," : "") << fmt_double(s.y[i]);
    os << "]";
    if (s.band_halfwidth.size() == s.x.size()) {
      os << ",\"band\":[";
      for (size_t i = 0; i < s.band_halfwidth.size(); ++i) {
        os << (i ? "," : "") << fmt_double(s.band_halfwidth[i]);
      }
      os << "]";
    }
    os << "}";
  }
  os << "}</metadata>\n";

  os << "<rect x=\"0\" y=\"0\" width=\"" << spec.width << "\" height=\"" << spec.height
     << "\" fill=\"white\"/>\n";

  // axes
  os << "<line x1=\"" << px0 << "\" y1=\"" << py0 << "\" x2=\"" << px1 << "\" y2=\"" << py0
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << px0 << "\" y1=\"" << py0 << "\" x2=\"" << px0 << "\" y2=\"" << py1
     << "\" stroke=\"black\"/>\n";
  for (double t : nice_ticks(xlo, xhi)) {
    const double px = tx(t, xlo, xhi, px0, px1);
    os << "<line x1=\"" << px << "\" y1=\"" << py0 << "\" x2=\"" << px << "\" y2=\"" << py0 + 5
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << px << "\" y=\"" << py0 + 20
       << "\" font-size=\"11\" text-anchor=\"middle\">"
       << (spec.log_x ? "1e" + fmt_double(t) : fmt_double(t)) << "</text>\n";
  }
  for (double t : nice_ticks(ylo, yhi)) {
    const double py = tx(t, ylo, yhi, py0, py1);
    os << "<line x1=\"" << px0 - 5 << "\" y1=\"" << py << "\" x2=\"" << px0 << "\" y2=\"" << py
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << px0 - 8 << "\" y=\"" << py + 4
       << "\" font-size=\"11\" text-anchor=\"end\">"
       << (spec.log_y ? "1e" + fmt_double(t) : fmt_double(t)) << "</text>\n";
  }
  os << "<text x=\"" << 0.5 * (px0 + px1) << "\" y=\"" << spec.height - 12
     << "\" font-size=\"12\" text-anchor=\"middle\">" << spec.x_label << "</text>\n";
  os << "<text x=\"16\" y=\"" << 0.5 * (py0 + py1)
     << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << 0.5 * (py0 + py1) << ")\">" << spec.y_label << "</text>\n";
  os << "<text x=\"" << 0.5 * (px0 + px1) << "\" y=\"20\" font-size=\"13\" "
     << "text-anchor=\"middle\">" << spec.title << "</text>\n";

  // shaded band first so lines draw on top
  for (const auto& s : series) {
    if (s.band_halfwidth.size() != s.x.size() || s.x.empty()) continue;
    os << "<polygon fill=\"" << s.color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
    for (size_t i = 0; i < s.x.size(); ++i) {
      os << X(s.x[i]) << "," << Y(s.y[i] + s.band_halfwidth[i]) << " ";
    }
    for (size_t i = s.x.size(); i-- > 0;) {
      os << X(s.x[i]) << "," << Y(s.y[i] - s.band_halfwidth[i]) << " ";
    }
    os << "\"/>\n";
  }
  for (const auto& s : series) {
    if (s.x.empty()) continue;
    os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < s.x.size(); ++i) os << X(s.x[i]) << "," << Y(s.y[i]) << " ";
    os << "\"/>\n";
  }
  // legend
  double ly = py1 + 12;
  for (const auto& s : series) {
    os << "<line x1=\"" << px1 - 150 << "\" y1=\"" << ly << "\" x2=\"" << px1 - 120 << "\" y2=\""
       << ly << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << px1 - 114 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">" << s.label
       << "</text>\n";
    ly += 16;
  }
  os << "</svg>\n";
}

std::string read_svg_metadata(std::istream& is) {
  std::stringstream ss;
  ss << is.rdbuf();
  const std::string all = ss.str();
  const std::string open = "<metadata id=\"series-data\">";
  const auto a = all.find(open);
  if (a == std::string::npos) throw ContractError("read_svg_metadata: no metadata block");
  const auto b = all.find("</metadata>", a);
  if (b == std::string::npos) throw ContractError("read_svg_metadata: unterminated metadata");
  return all.substr(a + open.size(), b - a - open.size());
}

}  // namespace lbmpc
