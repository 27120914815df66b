#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcbf/errors.hpp"
#include "pcbf/scenarios/linear.hpp"
#include "pcbf/scenarios/rover.hpp"
#include "pcbf/sim.hpp"

namespace pcbf::plot {

inline std::string num(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

inline std::string label_num(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

struct Series
{
  std::string name;
  std::vector<double> x, y;
  std::string color = "#1f77b4";
  bool dashed = false;
};

struct Panel
{
  std::string title;
  std::vector<Series> series;
  std::vector<double> hlines;
};

struct Range
{
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v)
  {
    if (!std::isfinite(v)) { return; }
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }

  void finish(double pad = 0.05)
  {
    if (!std::isfinite(lo)) { lo = 0.0, hi = 1.0; }
    if (hi - lo < 1e-12) { lo -= 0.5, hi += 0.5; }
    const double d = (hi - lo) * pad;
    lo -= d;
    hi += d;
  }
};

/// Maps data coordinates to a pixel box.
class Frame
{
public:
  Frame(double x0, double y0, double w, double h, Range xr, Range yr) : x0_(x0), y0_(y0), w_(w), h_(h), xr_(xr), yr_(yr) {}

  double px(double x) const { return x0_ + (x - xr_.lo) / (xr_.hi - xr_.lo) * w_; }
  double py(double y) const { return y0_ + h_ - (y - yr_.lo) / (yr_.hi - yr_.lo) * h_; }
  double sx() const { return w_ / (xr_.hi - xr_.lo); }
  double sy() const { return h_ / (yr_.hi - yr_.lo); }

  std::string axes(const std::string & title) const
  {
    std::string s = "<rect x=\"" + num(x0_) + "\" y=\"" + num(y0_) + "\" width=\"" + num(w_) + "\" height=\"" + num(h_) +
                    "\" fill=\"none\" stroke=\"#444\"/>\n";
    s += text(x0_, y0_ - 6, title, "start", 13);
    s += text(x0_ - 4, y0_ + 4, label_num(yr_.hi), "end", 10);
    s += text(x0_ - 4, y0_ + h_, label_num(yr_.lo), "end", 10);
    s += text(x0_, y0_ + h_ + 14, label_num(xr_.lo), "start", 10);
    s += text(x0_ + w_, y0_ + h_ + 14, label_num(xr_.hi), "end", 10);
    return s;
  }

  std::string polyline(const std::vector<double> & x, const std::vector<double> & y, const std::string & color,
                       bool dashed = false, double width = 1.2) const
  {
    // points closer than a quarter pixel to the last emitted one are dropped, except the final point
    std::string pts;
    double last_x = 0.0, last_y = 0.0;
    const std::size_t n = std::min(x.size(), y.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (!std::isfinite(x[i]) || !std::isfinite(y[i])) { continue; }
      const double sx = px(x[i]), sy = py(y[i]);
      if (!pts.empty() && i + 1 < n && std::abs(sx - last_x) < 0.25 && std::abs(sy - last_y) < 0.25) { continue; }
      if (!pts.empty()) { pts += ' '; }
      pts += num(sx) + "," + num(sy);
      last_x = sx;
      last_y = sy;
    }
    std::string s = "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"" + num(width) + "\"";
    if (dashed) { s += " stroke-dasharray=\"4,3\""; }
    return s + " points=\"" + pts + "\"/>\n";
  }

  std::string hline(double y, const std::string & color = "#999") const
  {
    return "<line x1=\"" + num(x0_) + "\" y1=\"" + num(py(y)) + "\" x2=\"" + num(x0_ + w_) + "\" y2=\"" + num(py(y)) +
           "\" stroke=\"" + color + "\" stroke-dasharray=\"2,2\"/>\n";
  }

  static std::string text(double x, double y, const std::string & t, const char * anchor, int size)
  {
    return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-family=\"sans-serif\" font-size=\"" +
           std::to_string(size) + "\" text-anchor=\"" + anchor + "\">" + t + "</text>\n";
  }

private:
  double x0_, y0_, w_, h_;
  Range xr_, yr_;
};

inline std::string svg_open(double w, double h)
{
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w) + "\" height=\"" + num(h) + "\" viewBox=\"0 0 " +
         num(w) + " " + num(h) + "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

/// Vertically stacked time-series panels sharing the x axis.
inline std::string panels_svg(const std::vector<Panel> & panels)
{
  const double width = 800, panel_h = 200, gap = 60, left = 70, top = 40;
  const double height = top + panels.size() * (panel_h + gap);
  std::string s = svg_open(width, height);
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const auto & panel = panels[p];
    Range xr, yr;
    for (const auto & ser : panel.series) {
      for (double v : ser.x) { xr.add(v); }
      for (double v : ser.y) { yr.add(v); }
    }
    for (double v : panel.hlines) { yr.add(v); }
    xr.finish(0.0);
    yr.finish();
    const Frame f(left, top + p * (panel_h + gap), width - left - 150, panel_h, xr, yr);
    s += f.axes(panel.title);
    for (double v : panel.hlines) { s += f.hline(v); }
    for (std::size_t i = 0; i < panel.series.size(); ++i) {
      const auto & ser = panel.series[i];
      s += f.polyline(ser.x, ser.y, ser.color, ser.dashed);
      const double ly = top + p * (panel_h + gap) + 12 + 16 * i;
      s += "<line x1=\"" + num(width - 140) + "\" y1=\"" + num(ly - 4) + "\" x2=\"" + num(width - 120) + "\" y2=\"" +
           num(ly - 4) + "\" stroke=\"" + ser.color + "\"/>\n";
      s += Frame::text(width - 115, ly, ser.name, "start", 11);
    }
  }
  return s + "</svg>\n";
}

inline const std::vector<std::string> & palette()
{
  static const std::vector<std::string> colors{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  return colors;
}

inline std::vector<double> column(const CsvTrace & tr, int c)
{
  std::vector<double> out;
  out.reserve(tr.rows.size());
  for (const auto & r : tr.rows) { out.push_back(r[static_cast<std::size_t>(c)]); }
  return out;
}

inline std::vector<double> column(const CsvTrace & tr, const std::string & name)
{
  const int c = tr.column(name);
  if (c < 0) { throw MalformedTrace("trace lacks column '" + name + "'"); }
  return column(tr, c);
}

inline std::vector<Series> series_for(const CsvTrace & tr, const std::string & prefix, const std::string & label)
{
  std::vector<Series> out;
  const auto t = column(tr, 0);
  const auto cols = tr.series(prefix);
  for (std::size_t i = 0; i < cols.size(); ++i) {
    out.push_back({label + std::to_string(i), t, column(tr, cols[i]), palette()[i % palette().size()]});
  }
  return out;
}

/// Gap to the front vehicle, chain values, and input against reference.
inline std::string acc_svg(const CsvTrace & tr, double delta)
{
  const auto t = column(tr, 0);
  Panel gap{"gap p_f - x1", {{"gap", t, column(tr, "clearance")}}, {delta}};
  Panel phi{"chain values", series_for(tr, "phi", "phi"), {0.0}};
  Panel u{"input", {{"u", t, column(tr, "u0"), palette()[0]}, {"u_ref", t, column(tr, "uref0"), palette()[1], true}}, {-1.0, 1.0}};
  return panels_svg({gap, phi, u});
}

/// h, min rho and clearance over time.
inline std::string rover_values_svg(const CsvTrace & tr)
{
  const auto t = column(tr, 0);
  std::vector<double> min_rho(tr.rows.size(), std::numeric_limits<double>::infinity());
  for (int c : tr.series("rho")) {
    for (std::size_t i = 0; i < tr.rows.size(); ++i) { min_rho[i] = std::min(min_rho[i], tr.rows[i][static_cast<std::size_t>(c)]); }
  }
  Panel values{"barrier values", {{"h", t, column(tr, "phi0"), palette()[0]}, {"min rho", t, min_rho, palette()[1]}}, {0.0}};
  Panel clr{"clearance", {{"clearance", t, column(tr, "clearance"), palette()[2]}}, {0.0}};
  return panels_svg({values, clr});
}

/// Snapshot record indices: `count` evenly spaced over the trace, last record included.
inline std::vector<std::size_t> snapshots(std::size_t n, int count)
{
  std::vector<std::size_t> out;
  if (n == 0) { return out; }
  for (int i = 0; i < count; ++i) {
    const std::size_t idx = count > 1 ? (n - 1) * static_cast<std::size_t>(i) / static_cast<std::size_t>(count - 1) : n - 1;
    if (out.empty() || out.back() != idx) { out.push_back(idx); }
  }
  return out;
}

/// Top view: obstacles, trajectory, and the C(k) ellipse with its hyperplanes at a few snapshot times.
inline std::string rover_portrait_svg(const CsvTrace & tr, const std::vector<rover::Obstacle> & obstacles, double robot_radius,
                                      double eps, int n_snapshots = 4)
{
  const auto xs = column(tr, "x0");
  const auto ys = column(tr, "x1");
  const auto kcols = tr.series("k");
  if (kcols.size() != static_cast<std::size_t>(rover::idx::eta0) + obstacles.size()) {
    throw MalformedTrace("parameter columns do not match the obstacle list");
  }
  Range xr, yr;
  for (double v : xs) { xr.add(v); }
  for (double v : ys) { yr.add(v); }
  for (const auto & o : obstacles) {
    xr.add(o.center.x() - o.radius), xr.add(o.center.x() + o.radius);
    yr.add(o.center.y() - o.radius), yr.add(o.center.y() + o.radius);
  }
  xr.finish(), yr.finish();
  // Equal aspect ratio.
  const double span = std::max(xr.hi - xr.lo, yr.hi - yr.lo);
  const double cx = 0.5 * (xr.lo + xr.hi), cy = 0.5 * (yr.lo + yr.hi);
  xr = {cx - span / 2, cx + span / 2};
  yr = {cy - span / 2, cy + span / 2};

  const double size = 700, margin = 50;
  std::string s = svg_open(size + 2 * margin, size + 2 * margin);
  const Frame f(margin, margin, size, size, xr, yr);
  s += f.axes("x1-x2 portrait");
  for (const auto & o : obstacles) {
    s += "<circle cx=\"" + num(f.px(o.center.x())) + "\" cy=\"" + num(f.py(o.center.y())) + "\" r=\"" + num(o.radius * f.sx()) +
         "\" fill=\"#999\"/>\n";
  }
  const auto snaps = snapshots(tr.rows.size(), n_snapshots);
  for (std::size_t si = 0; si < snaps.size(); ++si) {
    const auto & row = tr.rows[snaps[si]];
    Vec k(static_cast<Eigen::Index>(kcols.size()));
    for (std::size_t j = 0; j < kcols.size(); ++j) { k(static_cast<Eigen::Index>(j)) = row[static_cast<std::size_t>(kcols[j])]; }
    const double rb = rover::level_radius(std::max(0.0, k(rover::idx::b)), eps);
    const double psi = k(rover::idx::psi);
    const Eigen::Vector2d p(k(rover::idx::p1), k(rover::idx::p2));
    const std::string deg = num(-psi * 180.0 / 3.141592653589793);
    s += "<ellipse cx=\"" + num(f.px(p.x())) + "\" cy=\"" + num(f.py(p.y())) + "\" rx=\"" + num(rb * f.sx()) + "\" ry=\"" +
         num(0.5 * rb * f.sy()) + "\" transform=\"rotate(" + deg + " " + num(f.px(p.x())) + " " + num(f.py(p.y())) +
         ")\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.5\"/>\n";
    s += "<ellipse cx=\"" + num(f.px(p.x())) + "\" cy=\"" + num(f.py(p.y())) + "\" rx=\"" + num((rb + robot_radius) * f.sx()) +
         "\" ry=\"" + num((0.5 * rb + robot_radius) * f.sy()) + "\" transform=\"rotate(" + deg + " " + num(f.px(p.x())) + " " +
         num(f.py(p.y())) + ")\" fill=\"none\" stroke=\"#d62728\" stroke-dasharray=\"3,3\"/>\n";
    for (std::size_t i = 0; i < obstacles.size(); ++i) {
      const double eta = k(rover::idx::eta0 + static_cast<Eigen::Index>(i));
      const Eigen::Vector2d n(std::cos(eta), std::sin(eta));
      const double th = eta - psi;
      const double support = rb * std::sqrt(std::cos(th) * std::cos(th) + 0.25 * std::sin(th) * std::sin(th)) + robot_radius;
      const Eigen::Vector2d foot = p + support * n;
      const Eigen::Vector2d dir(-n.y(), n.x());
      const Eigen::Vector2d a = foot - 1.0 * dir, b = foot + 1.0 * dir;
      s += "<line x1=\"" + num(f.px(a.x())) + "\" y1=\"" + num(f.py(a.y())) + "\" x2=\"" + num(f.px(b.x())) + "\" y2=\"" +
           num(f.py(b.y())) + "\" stroke=\"#1f77b4\" stroke-width=\"0.8\"/>\n";
    }
  }
  s += f.polyline(xs, ys, "#000", false, 1.5);
  return s + "</svg>\n";
}

/// h, lambda_min of the matrix constraints, V and the constrained output.
inline std::string linear_series_svg(const CsvTrace & tr, const linear::Constants & c = {})
{
  const auto t = column(tr, 0);
  const auto xcols = tr.series("x");
  std::vector<double> v, x2;
  for (const auto & row : tr.rows) {
    Vec x(static_cast<Eigen::Index>(xcols.size()));
    for (std::size_t j = 0; j < xcols.size(); ++j) { x(static_cast<Eigen::Index>(j)) = row[static_cast<std::size_t>(xcols[j])]; }
    v.push_back(linear::clf(c, x).value);
    x2.push_back(c.c.dot(x));
  }
  Panel h{"h", {{"h", t, column(tr, "phi0")}}, {0.0}};
  Panel rho{"lambda_min(rho_i)", series_for(tr, "rho", "rho"), {0.0}};
  Panel clf{"V", {{"V", t, v}}, {}};
  Panel out{"output x2", {{"x2", t, x2}}, {-1.0, 1.0}};
  return panels_svg({h, rho, clf, out});
}

inline std::string linear_portrait_svg(const CsvTrace & tr)
{
  const auto x1 = column(tr, "x0");
  const auto x2 = column(tr, "x1");
  Range xr, yr;
  for (double v : x1) { xr.add(v); }
  for (double v : x2) { yr.add(v); }
  yr.add(-1.0), yr.add(1.0);
  xr.finish(), yr.finish();
  std::string s = svg_open(800, 500);
  const Frame f(70, 40, 680, 400, xr, yr);
  s += f.axes("x1-x2 portrait");
  s += f.hline(1.0, "#d62728");
  s += f.hline(-1.0, "#d62728");
  s += f.polyline(x1, x2, "#000", false, 1.5);
  return s + "</svg>\n";
}

/// Renders every figure for a scenario; keys are file names.
inline std::map<std::string, std::string> render(const std::string & scenario, const CsvTrace & tr, const nlohmann::json & scene)
{
  if (tr.rows.empty()) { throw MalformedTrace("trace has no records"); }
  std::map<std::string, std::string> out;
  if (scenario == "acc") {
    out["acc.svg"] = acc_svg(tr, scene.value("delta", 0.5));
  } else if (scenario == "rover") {
    if (!scene.contains("obstacles")) { throw MalformedTrace("rover plot needs the obstacle list"); }
    std::vector<rover::Obstacle> obs;
    for (const auto & o : scene.at("obstacles")) {
      obs.push_back({{o.at("x").get<double>(), o.at("y").get<double>()}, o.at("r").get<double>()});
    }
    out["rover_portrait.svg"] = rover_portrait_svg(tr, obs, scene.value("robot_radius", 0.3), scene.value("eps", 0.01));
    out["rover_values.svg"] = rover_values_svg(tr);
  } else if (scenario == "linear") {
    out["linear_series.svg"] = linear_series_svg(tr);
    out["linear_portrait.svg"] = linear_portrait_svg(tr);
  } else {
    throw ConfigError("unknown scenario '" + scenario + "'");
  }
  return out;
}

}  // namespace pcbf::plot
