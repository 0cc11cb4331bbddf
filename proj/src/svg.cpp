#include "smdm/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace smdm {

namespace {

constexpr int kWidth = 640;
constexpr int kHeight = 420;
constexpr int kMarginLeft = 64;
constexpr int kMarginRight = 20;
constexpr int kMarginTop = 32;
constexpr int kMarginBottom = 48;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

struct Range {
  double lo = 0.0, hi = 1.0;

  double map(double v, double out_lo, double out_hi) const {
    return out_lo + (v - lo) / (hi - lo) * (out_hi - out_lo);
  }
};

// Covers [min, max] with a 5% margin on each side.
Range padded_range(double mn, double mx) {
  if (!(mn <= mx)) {
    mn = 0.0;
    mx = 1.0;
  }
  double span = mx - mn;
  if (span == 0.0) span = std::max(1.0, std::fabs(mn));
  return Range{mn - 0.05 * span, mx + 0.05 * span};
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else out += c;
  }
  return out;
}

}  // namespace

std::string render_line_chart(const std::string& title, const std::string& x_label,
                              const std::string& y_label,
                              const std::vector<SvgSeries>& series) {
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : series)
    for (size_t i = 0; i < s.x.size(); ++i) {
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  Range rx = padded_range(xmin, xmax);
  Range ry = padded_range(ymin, ymax);
  const double px0 = kMarginLeft, px1 = kWidth - kMarginRight;
  const double py0 = kHeight - kMarginBottom, py1 = kMarginTop;  // y grows up

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(kWidth) +
         "\" height=\"" + std::to_string(kHeight) + "\" data-xmin=\"" + num(rx.lo) +
         "\" data-xmax=\"" + num(rx.hi) + "\" data-ymin=\"" + num(ry.lo) +
         "\" data-ymax=\"" + num(ry.hi) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + num(kWidth / 2.0) + "\" y=\"20\" text-anchor=\"middle\" "
         "font-size=\"14\">" + escape(title) + "</text>\n";
  // axes
  svg += "<line x1=\"" + num(px0) + "\" y1=\"" + num(py0) + "\" x2=\"" + num(px1) +
         "\" y2=\"" + num(py0) + "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + num(px0) + "\" y1=\"" + num(py0) + "\" x2=\"" + num(px0) +
         "\" y2=\"" + num(py1) + "\" stroke=\"black\"/>\n";
  svg += "<text x=\"" + num((px0 + px1) / 2) + "\" y=\"" + num(kHeight - 10.0) +
         "\" text-anchor=\"middle\" font-size=\"12\">" + escape(x_label) + "</text>\n";
  svg += "<text x=\"14\" y=\"" + num((py0 + py1) / 2) +
         "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 14 " +
         num((py0 + py1) / 2) + ")\">" + escape(y_label) + "</text>\n";
  // axis extent labels
  svg += "<text x=\"" + num(px0) + "\" y=\"" + num(py0 + 16) +
         "\" font-size=\"10\">" + num(rx.lo) + "</text>\n";
  svg += "<text x=\"" + num(px1) + "\" y=\"" + num(py0 + 16) +
         "\" text-anchor=\"end\" font-size=\"10\">" + num(rx.hi) + "</text>\n";
  svg += "<text x=\"" + num(px0 - 4) + "\" y=\"" + num(py0) +
         "\" text-anchor=\"end\" font-size=\"10\">" + num(ry.lo) + "</text>\n";
  svg += "<text x=\"" + num(px0 - 4) + "\" y=\"" + num(py1 + 4) +
         "\" text-anchor=\"end\" font-size=\"10\">" + num(ry.hi) + "</text>\n";

  for (size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % (sizeof(kPalette) / sizeof(kPalette[0]))];
    std::string pts;
    for (size_t i = 0; i < series[s].x.size(); ++i) {
      if (i) pts += " ";
      pts += num(rx.map(series[s].x[i], px0, px1)) + "," +
             num(ry.map(series[s].y[i], py0, py1));
    }
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
           "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
    for (size_t i = 0; i < series[s].x.size(); ++i)
      svg += "<circle cx=\"" + num(rx.map(series[s].x[i], px0, px1)) + "\" cy=\"" +
             num(ry.map(series[s].y[i], py0, py1)) + "\" r=\"3\" fill=\"" + color +
             "\"/>\n";
    svg += "<text x=\"" + num(px1 - 4) + "\" y=\"" + num(py1 + 14.0 * (s + 1)) +
           "\" text-anchor=\"end\" font-size=\"11\" fill=\"" + color + "\">" +
           escape(series[s].label) + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

std::string render_keyframe_overlay(const MotionSequence& seq, const KeyframeMask& mask,
                                    const std::vector<int>& joints, int arity) {
  if (mask.frames() != seq.frames)
    throw contract_error("render_keyframe_overlay: mask length mismatch");
  if (arity < 2) throw contract_error("render_keyframe_overlay: arity must be >= 2");
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (int j : joints) {
    if (j < 0 || (j + 1) * arity > seq.dims)
      throw contract_error("render_keyframe_overlay: joint index out of range");
    for (int i = 0; i < seq.frames; ++i) {
      xmin = std::min(xmin, seq.at(i, j * arity));
      xmax = std::max(xmax, seq.at(i, j * arity));
      ymin = std::min(ymin, seq.at(i, j * arity + 1));
      ymax = std::max(ymax, seq.at(i, j * arity + 1));
    }
  }
  Range rx = padded_range(xmin, xmax);
  Range ry = padded_range(ymin, ymax);
  const double px0 = 20, px1 = kWidth - 20;
  const double py0 = kHeight - 20, py1 = 20;

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(kWidth) +
         "\" height=\"" + std::to_string(kHeight) + "\" data-xmin=\"" + num(rx.lo) +
         "\" data-xmax=\"" + num(rx.hi) + "\" data-ymin=\"" + num(ry.lo) +
         "\" data-ymax=\"" + num(ry.hi) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (size_t s = 0; s < joints.size(); ++s) {
    int j = joints[s];
    const char* color = kPalette[s % (sizeof(kPalette) / sizeof(kPalette[0]))];
    std::string pts;
    for (int i = 0; i < seq.frames; ++i) {
      if (i) pts += " ";
      pts += num(rx.map(seq.at(i, j * arity), px0, px1)) + "," +
             num(ry.map(seq.at(i, j * arity + 1), py0, py1));
    }
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
           "\" stroke-width=\"1\" points=\"" + pts + "\"/>\n";
    for (int i = 0; i < seq.frames; ++i) {
      if (!mask.is_keyframe(i)) continue;
      svg += "<circle cx=\"" + num(rx.map(seq.at(i, j * arity), px0, px1)) + "\" cy=\"" +
             num(ry.map(seq.at(i, j * arity + 1), py0, py1)) + "\" r=\"4\" fill=\"none\" "
             "stroke=\"" + color + "\" stroke-width=\"1.5\"/>\n";
    }
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace smdm
