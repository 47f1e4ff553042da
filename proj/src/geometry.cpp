#include "cico/geometry.hpp"

#include <algorithm>
#include <stdexcept>

namespace cico {

double box_iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  const double inter = (iw > 0.0 && ih > 0.0) ? iw * ih : 0.0;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

Box circumscribed_box(const BoxTrack& track) {
  if (track.empty())
    throw std::invalid_argument("circumscribed_box: empty track");
  auto it = track.begin();
  Box out = it->second;
  for (++it; it != track.end(); ++it) {
    out.x1 = std::min(out.x1, it->second.x1);
    out.y1 = std::min(out.y1, it->second.y1);
    out.x2 = std::max(out.x2, it->second.x2);
    out.y2 = std::max(out.y2, it->second.y2);
  }
  return out;
}

std::optional<double> t_biou(const BoxTrack& track, int t, int delta) {
  if (delta < 1) throw std::invalid_argument("t_biou: delta must be >= 1");
  auto cur = track.find(t);
  if (cur == track.end())
    throw std::invalid_argument("t_biou: instance absent at frame t");
  double sum = 0.0;
  int sides = 0;
  if (auto prev = track.find(t - delta); prev != track.end()) {
    sum += box_iou(cur->second, prev->second);
    ++sides;
  }
  if (auto next = track.find(t + delta); next != track.end()) {
    sum += box_iou(cur->second, next->second);
    ++sides;
  }
  if (sides == 0) return std::nullopt;
  return sum / sides;
}

}  // namespace cico
