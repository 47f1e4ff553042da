#include "cico/mask.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "cico/errors.hpp"

namespace cico {

BinaryMask::BinaryMask(int h, int w, uint8_t fill) : height(h), width(w) {
  if (h <= 0 || w <= 0)
    throw std::invalid_argument("BinaryMask: dimensions must be positive");
  data.assign(static_cast<size_t>(h) * w, fill);
}

long BinaryMask::count() const {
  return std::accumulate(data.begin(), data.end(), 0L,
                         [](long acc, uint8_t v) { return acc + (v ? 1 : 0); });
}

FloatMask::FloatMask(int h, int w, float fill) : height(h), width(w) {
  if (h <= 0 || w <= 0)
    throw std::invalid_argument("FloatMask: dimensions must be positive");
  data.assign(static_cast<size_t>(h) * w, fill);
}

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  if (a.height != b.height || a.width != b.width)
    throw std::invalid_argument("mask_iou: size mismatch");
  long inter = 0, uni = 0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const bool va = a.data[i] != 0, vb = b.data[i] != 0;
    inter += (va && vb) ? 1 : 0;
    uni += (va || vb) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::optional<double> t_miou(const MaskTrack& track, int t, int delta) {
  if (delta < 1) throw std::invalid_argument("t_miou: delta must be >= 1");
  auto cur = track.find(t);
  if (cur == track.end())
    throw std::invalid_argument("t_miou: instance absent at frame t");
  double sum = 0.0;
  int sides = 0;
  if (auto prev = track.find(t - delta); prev != track.end()) {
    sum += mask_iou(cur->second, prev->second);
    ++sides;
  }
  if (auto next = track.find(t + delta); next != track.end()) {
    sum += mask_iou(cur->second, next->second);
    ++sides;
  }
  if (sides == 0) return std::nullopt;
  return sum / sides;
}

double st_miou(const MaskTrack& pred, const MaskTrack& gt) {
  std::set<int> frames;
  for (const auto& [f, m] : pred) frames.insert(f);
  for (const auto& [f, m] : gt) frames.insert(f);
  long inter = 0, uni = 0;
  for (int f : frames) {
    auto p = pred.find(f);
    auto g = gt.find(f);
    if (p != pred.end() && g != gt.end()) {
      const BinaryMask& a = p->second;
      const BinaryMask& b = g->second;
      if (a.height != b.height || a.width != b.width)
        throw std::invalid_argument("st_miou: size mismatch at a shared frame");
      for (size_t i = 0; i < a.data.size(); ++i) {
        const bool va = a.data[i] != 0, vb = b.data[i] != 0;
        inter += (va && vb) ? 1 : 0;
        uni += (va || vb) ? 1 : 0;
      }
    } else if (p != pred.end()) {
      uni += p->second.count();
    } else if (g != gt.end()) {
      uni += g->second.count();
    }
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

FloatMask crop(const FloatMask& mask, const Box& box) {
  FloatMask out(mask.height, mask.width, 0.0f);
  if (box.x2 <= box.x1 || box.y2 <= box.y1) return out;
  const int x0 = std::max(0, static_cast<int>(std::floor(box.x1)));
  const int y0 = std::max(0, static_cast<int>(std::floor(box.y1)));
  const int x1 = std::min(mask.width, static_cast<int>(std::ceil(box.x2)));
  const int y1 = std::min(mask.height, static_cast<int>(std::ceil(box.y2)));
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) out.at(y, x) = mask.at(y, x);
  return out;
}

Rle rle_encode(const BinaryMask& mask) {
  Rle out;
  out.height = mask.height;
  out.width = mask.width;
  uint8_t current = 0;
  uint32_t run = 0;
  for (int x = 0; x < mask.width; ++x) {
    for (int y = 0; y < mask.height; ++y) {
      const uint8_t v = mask.at(y, x) ? 1 : 0;
      if (v == current) {
        ++run;
      } else {
        out.counts.push_back(run);
        current = v;
        run = 1;
      }
    }
  }
  out.counts.push_back(run);
  return out;
}

BinaryMask rle_decode(const Rle& rle) {
  if (rle.height <= 0 || rle.width <= 0)
    throw FormatError("rle_decode: dimensions must be positive");
  const uint64_t total = static_cast<uint64_t>(rle.height) * rle.width;
  uint64_t sum = 0;
  for (uint32_t c : rle.counts) sum += c;
  if (sum != total)
    throw FormatError("rle_decode: counts sum " + std::to_string(sum) +
                      " does not cover " + std::to_string(rle.height) + "x" +
                      std::to_string(rle.width));
  BinaryMask out(rle.height, rle.width, 0);
  uint64_t pos = 0;
  uint8_t value = 0;
  for (uint32_t c : rle.counts) {
    for (uint32_t i = 0; i < c; ++i, ++pos) {
      const int x = static_cast<int>(pos / rle.height);
      const int y = static_cast<int>(pos % rle.height);
      out.at(y, x) = value;
    }
    value = 1 - value;
  }
  return out;
}

FloatMask bilinear_resize(const FloatMask& src, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0)
    throw std::invalid_argument("bilinear_resize: output dims must be positive");
  FloatMask dst(out_h, out_w, 0.0f);
  const double sy = static_cast<double>(src.height) / out_h;
  const double sx = static_cast<double>(src.width) / out_w;
  for (int y = 0; y < out_h; ++y) {
    // Half-pixel-centre mapping, edges clamped.
    const double fy = (y + 0.5) * sy - 0.5;
    const int y0 = static_cast<int>(std::floor(fy));
    const double wy = fy - y0;
    const int ya = std::clamp(y0, 0, src.height - 1);
    const int yb = std::clamp(y0 + 1, 0, src.height - 1);
    for (int x = 0; x < out_w; ++x) {
      const double fx = (x + 0.5) * sx - 0.5;
      const int x0 = static_cast<int>(std::floor(fx));
      const double wx = fx - x0;
      const int xa = std::clamp(x0, 0, src.width - 1);
      const int xb = std::clamp(x0 + 1, 0, src.width - 1);
      const double v = (1.0 - wy) * ((1.0 - wx) * src.at(ya, xa) + wx * src.at(ya, xb)) +
                       wy * ((1.0 - wx) * src.at(yb, xa) + wx * src.at(yb, xb));
      dst.at(y, x) = static_cast<float>(v);
    }
  }
  return dst;
}

BinaryMask threshold_mask(const FloatMask& mask, float thresh) {
  BinaryMask out(mask.height, mask.width, 0);
  for (size_t i = 0; i < mask.data.size(); ++i)
    out.data[i] = mask.data[i] > thresh ? 1 : 0;
  return out;
}

BinaryMask maxpool_downsample(const BinaryMask& src, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0 || out_h > src.height || out_w > src.width)
    throw std::invalid_argument("maxpool_downsample: bad output dims");
  BinaryMask out(out_h, out_w, 0);
  for (int y = 0; y < out_h; ++y) {
    const int y0 = static_cast<int>(static_cast<long>(y) * src.height / out_h);
    const int y1 = static_cast<int>(static_cast<long>(y + 1) * src.height / out_h);
    for (int x = 0; x < out_w; ++x) {
      const int x0 = static_cast<int>(static_cast<long>(x) * src.width / out_w);
      const int x1 = static_cast<int>(static_cast<long>(x + 1) * src.width / out_w);
      uint8_t v = 0;
      for (int yy = y0; yy < y1 && !v; ++yy)
        for (int xx = x0; xx < x1 && !v; ++xx) v = src.at(yy, xx);
      out.at(y, x) = v;
    }
  }
  return out;
}

}  // namespace cico
