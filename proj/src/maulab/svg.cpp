#include "maulab/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace maulab::svg {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

Document::Document(double width, double height) : width_(width), height_(height) {}

void Document::rect(double x, double y, double w, double h, const std::string& fill,
                    const std::string& stroke) {
  body_ += "<rect x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" width=\"" + fmt(w) +
           "\" height=\"" + fmt(h) + "\" fill=\"" + fill + "\"";
  if (!stroke.empty()) body_ += " stroke=\"" + stroke + "\" fill-opacity=\"0.9\"";
  body_ += "/>\n";
}

void Document::line(double x1, double y1, double x2, double y2, const std::string& color,
                    double width) {
  body_ += "<path d=\"M " + fmt(x1) + " " + fmt(y1) + " L " + fmt(x2) + " " + fmt(y2) +
           "\" stroke=\"" + color + "\" stroke-width=\"" + fmt(width) + "\" fill=\"none\"/>\n";
}

void Document::polyline(const std::vector<std::pair<double, double>>& points,
                        const std::string& color, double width) {
  if (points.empty()) return;
  std::string d = "M " + fmt(points[0].first) + " " + fmt(points[0].second);
  for (size_t i = 1; i < points.size(); ++i)
    d += " L " + fmt(points[i].first) + " " + fmt(points[i].second);
  body_ += "<path d=\"" + d + "\" stroke=\"" + color + "\" stroke-width=\"" + fmt(width) +
           "\" fill=\"none\"/>\n";
}

void Document::text(double x, double y, const std::string& content, double size,
                    const std::string& color, const std::string& anchor) {
  body_ += "<text x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" font-size=\"" + fmt(size) +
           "\" font-family=\"monospace\" fill=\"" + color + "\" text-anchor=\"" + anchor +
           "\">" + escape(content) + "</text>\n";
}

std::string Document::str() const {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(width_) + "\" height=\"" +
         fmt(height_) + "\" viewBox=\"0 0 " + fmt(width_) + " " + fmt(height_) + "\">\n" +
         body_ + "</svg>\n";
}

std::string gray(double value) {
  value = std::clamp(value, 0.0, 1.0);
  int level = static_cast<int>(std::lround(255.0 * (1.0 - value)));
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", level, level, level);
  return buf;
}

std::string line_chart(const std::string& title, const std::vector<Series>& series,
                       const std::string& x_label, const std::string& y_label) {
  const double width = 640, height = 400;
  const double left = 70, right = 20, top = 40, bottom = 50;
  Document doc(width, height);
  doc.rect(0, 0, width, height, "#ffffff");
  doc.text(width / 2, 24, title, 14, "#111111", "middle");

  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const Series& s : series)
    for (auto [x, y] : s.points) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (xmin > xmax) {
    xmin = 0;
    xmax = 1;
  }
  if (ymin > ymax) {
    ymin = 0;
    ymax = 1;
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;

  double plot_w = width - left - right, plot_h = height - top - bottom;
  auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * plot_w; };
  auto py = [&](double y) { return top + (1.0 - (y - ymin) / (ymax - ymin)) * plot_h; };

  doc.line(left, top, left, top + plot_h, "#333333");
  doc.line(left, top + plot_h, left + plot_w, top + plot_h, "#333333");
  for (int i = 0; i <= 4; ++i) {
    double fx = xmin + (xmax - xmin) * i / 4.0;
    double fy = ymin + (ymax - ymin) * i / 4.0;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", fx);
    doc.text(px(fx), top + plot_h + 18, buf, 10, "#333333", "middle");
    std::snprintf(buf, sizeof buf, "%.3g", fy);
    doc.text(left - 6, py(fy) + 3, buf, 10, "#333333", "end");
    doc.line(left, py(fy), left + plot_w, py(fy), "#dddddd", 0.5);
  }
  doc.text(left + plot_w / 2, height - 14, x_label, 11, "#333333", "middle");
  doc.text(16, top - 10, y_label, 11, "#333333", "start");

  double legend_y = top - 10;
  double legend_x = left + 120;
  for (const Series& s : series) {
    std::vector<std::pair<double, double>> pts;
    pts.reserve(s.points.size());
    for (auto [x, y] : s.points) pts.emplace_back(px(x), py(y));
    Document& d = doc;
    d.polyline(pts, s.color);
    d.line(legend_x, legend_y - 4, legend_x + 18, legend_y - 4, s.color, 2.0);
    d.text(legend_x + 24, legend_y, s.label, 10, "#333333");
    legend_x += 140;
  }
  return doc.str();
}

}  // namespace maulab::svg
