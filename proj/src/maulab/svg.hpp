#ifndef MAULAB_SVG_HPP
#define MAULAB_SVG_HPP

#include <string>
#include <vector>

namespace maulab::svg {

// Minimal hand-emitted SVG: rect/text/path primitives only.
class Document {
 public:
  Document(double width, double height);

  void rect(double x, double y, double w, double h, const std::string& fill,
            const std::string& stroke = "");
  void line(double x1, double y1, double x2, double y2, const std::string& color,
            double width = 1.0);
  void polyline(const std::vector<std::pair<double, double>>& points,
                const std::string& color, double width = 1.5);
  void text(double x, double y, const std::string& content, double size = 11.0,
            const std::string& color = "#222222", const std::string& anchor = "start");

  std::string str() const;

 private:
  double width_, height_;
  std::string body_;
};

std::string gray(double value);  // 0 (white) .. 1 (black)

struct Series {
  std::string label;
  std::string color;
  std::vector<std::pair<double, double>> points;  // (x, y)
};

// Log-style training curve with axes and a small legend.
std::string line_chart(const std::string& title, const std::vector<Series>& series,
                       const std::string& x_label, const std::string& y_label);

}  // namespace maulab::svg

#endif
