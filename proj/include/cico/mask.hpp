#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "cico/geometry.hpp"

namespace cico {

// Row-major binary mask, values 0/1.
struct BinaryMask {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> data;

  BinaryMask() = default;
  BinaryMask(int h, int w, uint8_t fill = 0);

  uint8_t at(int y, int x) const {
    return data[static_cast<size_t>(y) * width + x];
  }
  uint8_t& at(int y, int x) {
    return data[static_cast<size_t>(y) * width + x];
  }
  long count() const;
};

// Row-major float mask, values in [0,1].
struct FloatMask {
  int height = 0;
  int width = 0;
  std::vector<float> data;

  FloatMask() = default;
  FloatMask(int h, int w, float fill = 0.0f);

  float at(int y, int x) const {
    return data[static_cast<size_t>(y) * width + x];
  }
  float& at(int y, int x) {
    return data[static_cast<size_t>(y) * width + x];
  }
};

// One mask per clip frame, all frames the same size.
struct FloatMaskClip {
  std::vector<FloatMask> frames;
  int frame_count() const { return static_cast<int>(frames.size()); }
};

struct BinaryMaskClip {
  std::vector<BinaryMask> frames;
  int frame_count() const { return static_cast<int>(frames.size()); }
};

// Per-frame masks of one instance, keyed by video frame index. Frames where
// the instance is absent have no entry.
using MaskTrack = std::map<int, BinaryMask>;

// Uncompressed COCO counts: column-major scan of the mask, alternating runs
// starting with zeros (an initial 1-run is encoded as a leading 0 count).
struct Rle {
  int height = 0;
  int width = 0;
  std::vector<uint32_t> counts;
};

// IoU of two same-sized masks. Two empty masks count as identical (1.0).
double mask_iou(const BinaryMask& a, const BinaryMask& b);

// Temporal mask consistency, same neighbour rules as t_biou.
std::optional<double> t_miou(const MaskTrack& track, int t, int delta);

// Video-level spatio-temporal IoU: intersections and unions are accumulated
// over the union of both frame sets before dividing. A frame missing on one
// side counts as an empty mask there. Returns 1 when both tracks are empty.
double st_miou(const MaskTrack& pred, const MaskTrack& gt);

// Zeroes everything outside the box. Pixels are kept when their cell
// intersects the box interior, i.e. columns floor(x1)..ceil(x2)-1 and rows
// floor(y1)..ceil(y2)-1, clipped to the mask. A box with no interior
// (x2 <= x1 or y2 <= y1) blanks the whole mask.
FloatMask crop(const FloatMask& mask, const Box& box);

Rle rle_encode(const BinaryMask& mask);
BinaryMask rle_decode(const Rle& rle);

// Resampling helpers shared by mask assembly and the loss path.
FloatMask bilinear_resize(const FloatMask& src, int out_h, int out_w);
BinaryMask threshold_mask(const FloatMask& mask, float thresh = 0.5f);
// Downsample by marking an output cell when any covered input pixel is set.
BinaryMask maxpool_downsample(const BinaryMask& src, int out_h, int out_w);

}  // namespace cico
