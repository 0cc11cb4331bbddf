#pragma once

// Minimal deterministic SVG emission: metric line charts and keyframe
// overlay plots.  Identical inputs produce identical bytes; the data range
// (with its 5% margin) is exposed as data-* attributes on the root element.

#include <string>
#include <vector>

#include "smdm/keyframes.hpp"
#include "smdm/motion.hpp"

namespace smdm {

struct SvgSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

std::string render_line_chart(const std::string& title, const std::string& x_label,
                              const std::string& y_label,
                              const std::vector<SvgSeries>& series);

// Joint trajectories in the data plane with keyframes marked; arity is the
// coordinate count per joint (2 for planar skeletons).
std::string render_keyframe_overlay(const MotionSequence& seq, const KeyframeMask& mask,
                                    const std::vector<int>& joints, int arity);

}  // namespace smdm
