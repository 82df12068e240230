#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace msdpf::svg {

// One aggregate row as read back from an aggregate CSV.
struct AggregatePoint {
  std::string method;
  double K = 0.0;
  std::optional<double> Po;
  double mean = 0.0;
  double stddev = 0.0;
};

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

class Canvas {
 public:
  static constexpr double kWidth = 640, kHeight = 400;
  static constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 60;

  Canvas(double y_lo, double y_hi) : y_lo_(y_lo), y_hi_(y_hi > y_lo ? y_hi : y_lo + 1.0) {
    body_ += "<rect x=\"0\" y=\"0\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
             "\" fill=\"white\"/>\n";
  }

  double plot_w() const { return kWidth - kLeft - kRight; }
  double plot_h() const { return kHeight - kTop - kBottom; }
  double y_px(double v) const { return kTop + plot_h() * (1.0 - (v - y_lo_) / (y_hi_ - y_lo_)); }

  void line(double x1, double y1, double x2, double y2, const std::string& stroke, double width = 1.0) {
    body_ += "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) + "\" y2=\"" + num(y2) +
             "\" stroke=\"" + stroke + "\" stroke-width=\"" + num(width) + "\"/>\n";
  }
  void rect(double x, double y, double w, double h, const std::string& fill) {
    body_ += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w) + "\" height=\"" + num(h) +
             "\" fill=\"" + fill + "\"/>\n";
  }
  void text(double x, double y, const std::string& s, const std::string& anchor = "middle", int size = 12) {
    body_ += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-family=\"sans-serif\" font-size=\"" +
             std::to_string(size) + "\" text-anchor=\"" + anchor + "\">" + escape(s) + "</text>\n";
  }

  void axes(const std::string& title, const std::string& xlabel, const std::string& ylabel) {
    line(kLeft, kTop, kLeft, kTop + plot_h(), "black");
    line(kLeft, kTop + plot_h(), kLeft + plot_w(), kTop + plot_h(), "black");
    for (int i = 0; i <= 5; ++i) {
      const double v = y_lo_ + (y_hi_ - y_lo_) * i / 5.0;
      const double y = y_px(v);
      line(kLeft - 4, y, kLeft, y, "black");
      text(kLeft - 6, y + 4, label(v), "end", 10);
    }
    text(kWidth / 2, 22, title, "middle", 14);
    text(kLeft + plot_w() / 2, kHeight - 15, xlabel);
    body_ += "<text x=\"16\" y=\"" + num(kTop + plot_h() / 2) +
             "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
             num(kTop + plot_h() / 2) + ")\">" + escape(ylabel) + "</text>\n";
  }

  std::string document() const {
    return "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
           "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" +
           num(kWidth) + "\" height=\"" + num(kHeight) + "\" viewBox=\"0 0 " + num(kWidth) + " " + num(kHeight) +
           "\">\n" + body_ + "</svg>\n";
  }

 private:
  double y_lo_, y_hi_;
  std::string body_;
};

inline const std::vector<std::string>& palette() {
  static const std::vector<std::string> p{"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
  return p;
}

inline std::vector<std::string> methods_in_order(const std::vector<AggregatePoint>& pts) {
  std::vector<std::string> m;
  for (const auto& p : pts)
    if (std::find(m.begin(), m.end(), p.method) == m.end()) m.push_back(p.method);
  return m;
}

// Mean MSE against K, one polyline per method.
inline std::string mse_vs_k(const std::vector<AggregatePoint>& pts, const std::string& title) {
  if (pts.empty()) throw std::invalid_argument("mse_vs_k: no data");
  std::vector<double> ks;
  double hi = 0.0;
  for (const auto& p : pts) {
    if (std::find(ks.begin(), ks.end(), p.K) == ks.end()) ks.push_back(p.K);
    hi = std::max(hi, p.mean);
  }
  std::sort(ks.begin(), ks.end());
  Canvas c(0.0, hi * 1.1);
  c.axes(title, "K (number of model components)", "averaged MSE");
  const double step = ks.size() > 1 ? c.plot_w() / static_cast<double>(ks.size() - 1) : 0.0;
  auto x_of = [&](double k) {
    const auto i = static_cast<double>(std::find(ks.begin(), ks.end(), k) - ks.begin());
    return ks.size() > 1 ? Canvas::kLeft + i * step : Canvas::kLeft + c.plot_w() / 2;
  };
  for (double k : ks) {
    const double x = x_of(k);
    c.line(x, Canvas::kTop + c.plot_h(), x, Canvas::kTop + c.plot_h() + 4, "black");
    c.text(x, Canvas::kTop + c.plot_h() + 16, label(k), "middle", 10);
  }
  const auto methods = methods_in_order(pts);
  for (std::size_t m = 0; m < methods.size(); ++m) {
    const auto& colour = palette()[m % palette().size()];
    std::vector<std::pair<double, double>> xy;
    for (const auto& p : pts)
      if (p.method == methods[m]) xy.emplace_back(x_of(p.K), c.y_px(p.mean));
    std::sort(xy.begin(), xy.end());
    for (std::size_t i = 1; i < xy.size(); ++i)
      c.line(xy[i - 1].first, xy[i - 1].second, xy[i].first, xy[i].second, colour, 2.0);
    for (const auto& [x, y] : xy) c.rect(x - 3, y - 3, 6, 6, colour);
    const double ly = Canvas::kTop + 10 + 16.0 * static_cast<double>(m);
    c.rect(Canvas::kWidth - 150, ly - 8, 12, 12, colour);
    c.text(Canvas::kWidth - 132, ly + 2, methods[m], "start", 11);
  }
  return c.document();
}

// Grouped bars of mean MSE per P_o with mean +/- 2 std error bars.
inline std::string mse_bars_vs_po(const std::vector<AggregatePoint>& pts, const std::string& title) {
  if (pts.empty()) throw std::invalid_argument("mse_bars_vs_po: no data");
  std::vector<double> pos;
  double hi = 0.0;
  for (const auto& p : pts) {
    const double po = p.Po.value_or(std::numeric_limits<double>::quiet_NaN());
    if (std::find(pos.begin(), pos.end(), po) == pos.end()) pos.push_back(po);
    hi = std::max(hi, p.mean + 2.0 * p.stddev);
  }
  std::sort(pos.begin(), pos.end());
  Canvas c(0.0, hi * 1.1);
  c.axes(title, "true P_o", "MSE (mean, +/- 2 std)");
  const auto methods = methods_in_order(pts);
  const double group_w = c.plot_w() / static_cast<double>(pos.size());
  const double bar_w = group_w * 0.7 / static_cast<double>(methods.size());
  for (std::size_t g = 0; g < pos.size(); ++g) {
    const double gx = Canvas::kLeft + group_w * static_cast<double>(g);
    c.text(gx + group_w / 2, Canvas::kTop + c.plot_h() + 16, label(pos[g]), "middle", 10);
    for (std::size_t m = 0; m < methods.size(); ++m) {
      for (const auto& p : pts) {
        if (p.method != methods[m] || p.Po.value_or(std::numeric_limits<double>::quiet_NaN()) != pos[g]) continue;
        const auto& colour = palette()[m % palette().size()];
        const double x = gx + group_w * 0.15 + bar_w * static_cast<double>(m);
        const double top = c.y_px(p.mean);
        c.rect(x, top, bar_w * 0.9, Canvas::kTop + c.plot_h() - top, colour);
        const double cx = x + bar_w * 0.45;
        const double lo_px = c.y_px(std::max(0.0, p.mean - 2.0 * p.stddev));
        const double hi_px = c.y_px(p.mean + 2.0 * p.stddev);
        c.line(cx, lo_px, cx, hi_px, "black");
        c.line(cx - 4, lo_px, cx + 4, lo_px, "black");
        c.line(cx - 4, hi_px, cx + 4, hi_px, "black");
      }
    }
  }
  for (std::size_t m = 0; m < methods.size(); ++m) {
    const double ly = Canvas::kTop + 10 + 16.0 * static_cast<double>(m);
    c.rect(Canvas::kWidth - 150, ly - 8, 12, 12, palette()[m % palette().size()]);
    c.text(Canvas::kWidth - 132, ly + 2, methods[m], "start", 11);
  }
  return c.document();
}

}  // namespace msdpf::svg
