#include "exotune/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

namespace exotune {

CiBand confidence_band(const std::vector<std::vector<double>>& traces, double z) {
  std::size_t length = 0;
  for (const auto& t : traces) length = std::max(length, t.size());
  CiBand band;
  band.mean.resize(length);
  band.lower.resize(length);
  band.upper.resize(length);
  band.count.resize(length);
  for (std::size_t i = 0; i < length; ++i) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& t : traces) {
      if (i < t.size()) {
        sum += t[i];
        ++n;
      }
    }
    const double mean = sum / static_cast<double>(n);
    double half = 0.0;
    if (n > 1) {
      double ss = 0.0;
      for (const auto& t : traces) {
        if (i < t.size()) ss += (t[i] - mean) * (t[i] - mean);
      }
      half = z * std::sqrt(ss / static_cast<double>(n - 1)) / std::sqrt(static_cast<double>(n));
    }
    band.mean[i] = mean;
    band.lower[i] = mean - half;
    band.upper[i] = mean + half;
    band.count[i] = n;
  }
  return band;
}

std::vector<CellTraces> group_by_cell(const Dataset& dataset) {
  std::map<std::pair<double, double>, CellTraces> cells;
  CellTraces* current = nullptr;
  std::int64_t episode = std::numeric_limits<std::int64_t>::min();
  for (const auto& t : dataset.transitions) {
    if (t.episode_id != episode) {
      episode = t.episode_id;
      auto& cell = cells[{t.action.biceps, t.action.triceps}];
      cell.action = t.action;
      cell.angle.emplace_back();
      cell.effort_biceps.emplace_back();
      cell.effort_triceps.emplace_back();
      current = &cell;
    }
    current->angle.back().push_back(t.state.angle);
    current->effort_biceps.back().push_back(t.state.effort_biceps);
    current->effort_triceps.back().push_back(t.state.effort_triceps);
  }
  std::vector<CellTraces> out;
  for (auto& [key, cell] : cells) out.push_back(std::move(cell));
  return out;
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

// Plot area in pixels plus the data range it shows.
struct Frame {
  double x, y, w, h;
  double xmin, xmax, ymin, ymax;

  double px(double v) const { return x + (v - xmin) / (xmax - xmin) * w; }
  double py(double v) const { return y + h - (v - ymin) / (ymax - ymin) * h; }
};

// Round tick positions (1, 2 or 5 times a power of ten) inside [lo, hi].
std::vector<double> ticks(double lo, double hi) {
  const double raw = (hi - lo) / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    step = m * mag;
    if (step >= raw) break;
  }
  std::vector<double> out;
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step) {
    out.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
  }
  return out;
}

void widen(double& lo, double& hi) {
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
}

class Svg {
 public:
  Svg(double width, double height) : width_(width), height_(height) {}

  void raw(const std::string& s) { body_ << s << '\n'; }

  void text(double x, double y, const std::string& s, const char* anchor = "start", int size = 11) {
    body_ << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-size=\"" << size
          << "\" text-anchor=\"" << anchor << "\">" << s << "</text>\n";
  }

  void axes(const Frame& f, const std::string& title, const std::string& xlabel) {
    body_ << "<rect x=\"" << num(f.x) << "\" y=\"" << num(f.y) << "\" width=\"" << num(f.w)
          << "\" height=\"" << num(f.h) << "\" fill=\"none\" stroke=\"#333\"/>\n";
    for (double v : ticks(f.xmin, f.xmax)) text(f.px(v), f.y + f.h + 13, label(v), "middle", 9);
    for (double v : ticks(f.ymin, f.ymax)) text(f.x - 4, f.py(v) + 3, label(v), "end", 9);
    text(f.x + f.w / 2, f.y - 6, title, "middle", 12);
    if (!xlabel.empty()) text(f.x + f.w / 2, f.y + f.h + 26, xlabel, "middle", 10);
  }

  void band(const Frame& f, const std::vector<double>& xs, const std::vector<double>& lo,
            const std::vector<double>& hi, const char* color) {
    body_ << "<polygon fill=\"" << color << "\" fill-opacity=\"0.25\" stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) body_ << num(f.px(xs[i])) << ',' << num(f.py(hi[i])) << ' ';
    for (std::size_t i = xs.size(); i-- > 0;) body_ << num(f.px(xs[i])) << ',' << num(f.py(lo[i])) << ' ';
    body_ << "\"/>\n";
  }

  void line(const Frame& f, const std::vector<double>& xs, const std::vector<double>& ys,
            const char* color, double width = 1.2) {
    body_ << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << num(width)
          << "\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) body_ << num(f.px(xs[i])) << ',' << num(f.py(ys[i])) << ' ';
    body_ << "\"/>\n";
  }

  std::string str() const {
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width_) << "\" height=\""
        << num(height_) << "\" viewBox=\"0 0 " << num(width_) << ' ' << num(height_)
        << "\" font-family=\"sans-serif\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << body_.str() << "</svg>\n";
    return out.str();
  }

 private:
  double width_, height_;
  std::ostringstream body_;
};

// Keeps roughly `target` evenly spaced points of a band.
std::vector<std::size_t> thin(std::size_t n, std::size_t target = 400) {
  const std::size_t stride = std::max<std::size_t>(1, (n + target - 1) / target);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < n; i += stride) idx.push_back(i);
  if (n > 0 && idx.back() != n - 1) idx.push_back(n - 1);
  return idx;
}

void band_panel(Svg& svg, const Frame& base, const CiBand& band, const std::string& title,
                const char* color, double ymin, double ymax) {
  const auto idx = thin(band.mean.size());
  std::vector<double> xs, m, lo, hi;
  for (std::size_t i : idx) {
    xs.push_back(static_cast<double>(i));
    m.push_back(band.mean[i]);
    lo.push_back(band.lower[i]);
    hi.push_back(band.upper[i]);
  }
  Frame f = base;
  f.xmin = 0.0;
  f.xmax = std::max(1.0, static_cast<double>(band.mean.size()) - 1.0);
  f.ymin = ymin;
  f.ymax = ymax;
  for (double v : lo) f.ymin = std::min(f.ymin, v);
  for (double v : hi) f.ymax = std::max(f.ymax, v);
  widen(f.ymin, f.ymax);
  svg.axes(f, title, "step");
  if (!xs.empty()) {
    svg.band(f, xs, lo, hi, color);
    svg.line(f, xs, m, color);
  }
}

}  // namespace

std::string cell_traces_svg(const std::vector<CellTraces>& cells) {
  const double pw = 300, ph = 130, mx = 60, my = 70;
  const double width = mx + 3 * (pw + mx);
  const double height = my + static_cast<double>(std::max<std::size_t>(cells.size(), 1)) * (ph + my);
  Svg svg(width, height);
  double y = my;
  for (const auto& cell : cells) {
    const std::string tag = "(" + label(cell.action.biceps) + ", " + label(cell.action.triceps) + ")";
    const std::size_t n = cell.angle.size();
    svg.text(8, y - 28, "thresholds " + tag + ", n=" + std::to_string(n), "start", 12);
    band_panel(svg, {mx, y, pw, ph, 0, 1, 0, 1}, confidence_band(cell.angle), "motor angle (deg)",
               "#1f77b4", 0.0, 0.0);
    band_panel(svg, {mx + (pw + mx), y, pw, ph, 0, 1, 0, 1}, confidence_band(cell.effort_biceps),
               "biceps effort", "#d62728", 0.0, 0.0);
    band_panel(svg, {mx + 2 * (pw + mx), y, pw, ph, 0, 1, 0, 1},
               confidence_band(cell.effort_triceps), "triceps effort", "#2ca02c", 0.0, 0.0);
    y += ph + my;
  }
  return svg.str();
}

std::string loss_curve_svg(const std::vector<double>& losses, std::size_t window) {
  Svg svg(720, 420);
  Frame f{70, 40, 610, 320, 0, 1, 0, 1};
  const bool log_scale = !losses.empty() && std::all_of(losses.begin(), losses.end(), [](double v) { return v > 0.0; });
  auto tr = [&](double v) { return log_scale ? std::log10(v) : v; };

  std::vector<double> smooth(losses.size());
  double run = 0.0;
  for (std::size_t i = 0; i < losses.size(); ++i) {
    run += losses[i];
    if (i >= window) run -= losses[i - window];
    smooth[i] = run / static_cast<double>(std::min(i + 1, window));
  }
  const auto idx = thin(losses.size(), 1500);
  std::vector<double> xs, raw, sm;
  for (std::size_t i : idx) {
    xs.push_back(static_cast<double>(i));
    raw.push_back(tr(losses[i]));
    sm.push_back(tr(smooth[i]));
  }
  f.xmax = std::max(1.0, static_cast<double>(losses.size()) - 1.0);
  if (!raw.empty()) {
    f.ymin = *std::min_element(raw.begin(), raw.end());
    f.ymax = *std::max_element(raw.begin(), raw.end());
  }
  widen(f.ymin, f.ymax);
  svg.axes(f, log_scale ? "TD loss (log10)" : "TD loss", "training step");
  if (!xs.empty()) {
    svg.line(f, xs, raw, "#bbbbbb", 0.8);
    svg.line(f, xs, sm, "#1f77b4", 1.6);
  }
  svg.text(f.x + f.w - 4, f.y + 14, std::to_string(window) + "-step mean", "end", 10);
  return svg.str();
}

std::string oracle_heatmap_svg(const std::vector<OracleCell>& cells) {
  std::vector<double> bs, ts;
  for (const auto& c : cells) {
    bs.push_back(c.action.biceps);
    ts.push_back(c.action.triceps);
  }
  std::sort(bs.begin(), bs.end());
  bs.erase(std::unique(bs.begin(), bs.end()), bs.end());
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());

  const double cw = 64, ch = 40, mx = 90, my = 50;
  Svg svg(mx + cw * static_cast<double>(bs.size()) + 40, my + ch * static_cast<double>(ts.size()) + 60);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& c : cells) {
    lo = std::min(lo, c.mean_reward);
    hi = std::max(hi, c.mean_reward);
  }
  const std::size_t best = cells.empty() ? 0 : best_cell(cells);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& c = cells[i];
    const auto col = std::lower_bound(bs.begin(), bs.end(), c.action.biceps) - bs.begin();
    const auto row = std::lower_bound(ts.begin(), ts.end(), c.action.triceps) - ts.begin();
    const double u = hi > lo ? (c.mean_reward - lo) / (hi - lo) : 1.0;
    // Dark blue (low) to yellow (high).
    char fill[8];
    std::snprintf(fill, sizeof(fill), "#%02x%02x%02x", static_cast<int>(40 + 213 * u),
                  static_cast<int>(30 + 201 * u), static_cast<int>(110 - 80 * u));
    const double x = mx + cw * static_cast<double>(col);
    const double y = my + ch * static_cast<double>(ts.size() - 1 - static_cast<std::size_t>(row));
    svg.raw("<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(cw) + "\" height=\"" +
            num(ch) + "\" fill=\"" + fill + "\" stroke=\"" + (i == best ? "#000" : "#fff") +
            "\" stroke-width=\"" + (i == best ? "3" : "1") + "\"/>");
    char txt[32];
    std::snprintf(txt, sizeof(txt), "%.3f", c.mean_reward);
    svg.text(x + cw / 2, y + ch / 2 + 4, txt, "middle", 10);
  }
  for (std::size_t i = 0; i < bs.size(); ++i)
    svg.text(mx + cw * (static_cast<double>(i) + 0.5), my + ch * static_cast<double>(ts.size()) + 16,
             label(bs[i]), "middle", 10);
  for (std::size_t i = 0; i < ts.size(); ++i)
    svg.text(mx - 6, my + ch * (static_cast<double>(ts.size() - 1 - i) + 0.5) + 4, label(ts[i]), "end", 10);
  svg.text(mx + cw * static_cast<double>(bs.size()) / 2, my + ch * static_cast<double>(ts.size()) + 34,
           "biceps threshold", "middle", 11);
  svg.text(12, my - 10, "triceps threshold", "start", 11);
  svg.text(mx + cw * static_cast<double>(bs.size()) / 2, 20, "static-threshold mean reward", "middle", 12);
  return svg.str();
}

std::string thresholds_svg(const std::vector<ThresholdTraceRow>& rows) {
  std::vector<std::vector<double>> tb, tt, angle;
  std::int64_t episode = std::numeric_limits<std::int64_t>::min();
  for (const auto& r : rows) {
    if (r.episode != episode) {
      episode = r.episode;
      tb.emplace_back();
      tt.emplace_back();
      angle.emplace_back();
    }
    tb.back().push_back(r.th_b);
    tt.back().push_back(r.th_t);
    angle.back().push_back(r.angle);
  }
  const double pw = 620, ph = 140, mx = 70, my = 50;
  Svg svg(mx + pw + 40, my + 3 * (ph + my));
  band_panel(svg, {mx, my, pw, ph, 0, 1, 0, 1}, confidence_band(tb), "biceps threshold", "#d62728",
             kThresholdMin, kThresholdMax);
  band_panel(svg, {mx, my + (ph + my), pw, ph, 0, 1, 0, 1}, confidence_band(tt), "triceps threshold",
             "#2ca02c", kThresholdMin, kThresholdMax);
  band_panel(svg, {mx, my + 2 * (ph + my), pw, ph, 0, 1, 0, 1}, confidence_band(angle),
             "motor angle (deg)", "#1f77b4", 0.0, 0.0);
  return svg.str();
}

}  // namespace exotune
