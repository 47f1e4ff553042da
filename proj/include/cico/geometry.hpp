#pragma once

#include <map>
#include <optional>

namespace cico {

// Axis-aligned box [x1,x2] x [y1,y2] in absolute pixel coordinates.
// Area is (x2-x1)*(y2-y1); no +1 pixel convention anywhere.
struct Box {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  double cx() const { return 0.5 * (x1 + x2); }
  double cy() const { return 0.5 * (y1 + y2); }
};

// Per-frame boxes of one instance. Frames where the instance is absent
// simply have no entry; keys are video frame indices.
using BoxTrack = std::map<int, Box>;

// Intersection-over-union of two boxes. A pair with zero union area
// (both boxes degenerate) yields 0.
double box_iou(const Box& a, const Box& b);

// Elementwise min/max envelope over every box in the track.
Box circumscribed_box(const BoxTrack& track);

// Temporal box consistency at frame t against the frames t-delta and
// t+delta. With both neighbours present the two IoUs are averaged, with one
// the single IoU is returned, with neither the value is undefined (nullopt).
// The instance must exist at t itself.
std::optional<double> t_biou(const BoxTrack& track, int t, int delta);

}  // namespace cico
