#include "cico/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "cico/errors.hpp"
#include "cico/inference.hpp"

namespace cico {

namespace {

constexpr float kProtoHigh = 10.0f;
constexpr int kMinShapeCells = 6;
constexpr int kMaxShapeCells = 10;

// All randomness flows through these two helpers so the byte stream is a
// pure function of the seed.
int rand_int(std::mt19937_64& rng, int lo, int hi) {
  return lo + static_cast<int>(rng() % static_cast<uint64_t>(hi - lo + 1));
}

struct ShapeSpec {
  bool ellipse = false;
  int category = 0;
  int x0 = 0, y0 = 0;  // spawn position, prototype cells
  int w = 0, h = 0;
  int vx = 0, vy = 0;  // cells per frame
};

// Position after f frames of drift, stopped at the grid boundary.
std::pair<int, int> shape_pos(const ShapeSpec& s, int f, int grid_w, int grid_h) {
  const int x = std::clamp(s.x0 + s.vx * f, 0, grid_w - s.w);
  const int y = std::clamp(s.y0 + s.vy * f, 0, grid_h - s.h);
  return {x, y};
}

BinaryMask render_full(const ShapeSpec& s, int px, int py, int grid_w,
                       int grid_h) {
  BinaryMask mask(grid_h, grid_w, 0);
  if (s.ellipse) {
    const double cx = px + s.w / 2.0;
    const double cy = py + s.h / 2.0;
    const double rx = s.w / 2.0;
    const double ry = s.h / 2.0;
    for (int y = py; y < py + s.h; ++y) {
      for (int x = px; x < px + s.w; ++x) {
        const double dx = (x + 0.5 - cx) / rx;
        const double dy = (y + 0.5 - cy) / ry;
        if (dx * dx + dy * dy <= 1.0) mask.at(y, x) = 1;
      }
    }
  } else {
    for (int y = py; y < py + s.h; ++y)
      for (int x = px; x < px + s.w; ++x) mask.at(y, x) = 1;
  }
  return mask;
}

BinaryMask upsample_blocks(const BinaryMask& src, int factor) {
  BinaryMask out(src.height * factor, src.width * factor, 0);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      out.at(y, x) = src.at(y / factor, x / factor);
  return out;
}

}  // namespace

SynthOutput synth_generate(const SynthParams& params) {
  if (params.videos < 1 || params.frames < 1 || params.shapes < 1)
    throw FormatError("synth: videos, frames and shapes must be >= 1");
  if (params.image_w % kPrototypeStride != 0 ||
      params.image_h % kPrototypeStride != 0 || params.image_w <= 0 ||
      params.image_h <= 0)
    throw FormatError("synth: image dims must be positive multiples of 4");
  if (params.max_speed < 0) throw FormatError("synth: max_speed must be >= 0");
  if (params.clip_len < 1 || params.clip_overlap < 0 ||
      params.clip_overlap >= params.clip_len)
    throw FormatError("synth: need clip_len >= 1 and 0 <= overlap < clip_len");

  const int grid_w = params.image_w / kPrototypeStride;
  const int grid_h = params.image_h / kPrototypeStride;

  // Spawn slots keep shapes apart at t=0 so every instance starts visible.
  const int slots = static_cast<int>(
      std::ceil(std::sqrt(static_cast<double>(params.shapes))));
  const int slot_w = grid_w / slots;
  const int slot_h = grid_h / slots;
  if (slot_w <= kMinShapeCells || slot_h <= kMinShapeCells)
    throw FormatError("synth: too many shapes for this image size");
  const int max_cells = std::min({kMaxShapeCells, slot_w - 1, slot_h - 1});
  const int max_speed_cells = params.max_speed / kPrototypeStride;

  std::mt19937_64 rng(params.seed);

  SynthOutput out;
  for (int s = 0; s < params.shapes; ++s)
    out.annotations.categories.push_back(CategoryInfo{
        s + 1, (s % 2 == 0 ? "rectangle-" : "ellipse-") + std::to_string(s + 1)});

  out.config.head = HeadVariant::yolact;
  out.config.clip_len = params.clip_len;
  out.config.clip_overlap = params.clip_overlap;
  out.config.prototype_channels = params.shapes;
  out.config.embedding_dim = params.shapes;

  int next_annotation_id = 1;
  for (int v = 0; v < params.videos; ++v) {
    const int video_id = v + 1;
    out.annotations.videos.push_back(
        VideoInfo{video_id, params.image_w, params.image_h, params.frames});

    // Shuffled slot assignment, then per-shape geometry.
    std::vector<int> slot_order(static_cast<size_t>(slots) * slots);
    for (size_t i = 0; i < slot_order.size(); ++i)
      slot_order[i] = static_cast<int>(i);
    for (size_t i = slot_order.size() - 1; i > 0; --i)
      std::swap(slot_order[i],
                slot_order[static_cast<size_t>(rand_int(rng, 0, static_cast<int>(i)))]);

    std::vector<ShapeSpec> shapes;
    for (int s = 0; s < params.shapes; ++s) {
      ShapeSpec spec;
      spec.ellipse = (s % 2 == 1);
      spec.category = s + 1;
      spec.w = rand_int(rng, kMinShapeCells, max_cells);
      spec.h = rand_int(rng, kMinShapeCells, max_cells);
      const int slot = slot_order[static_cast<size_t>(s)];
      const int sx = (slot % slots) * slot_w;
      const int sy = (slot / slots) * slot_h;
      spec.x0 = sx + rand_int(rng, 0, slot_w - spec.w);
      spec.y0 = sy + rand_int(rng, 0, slot_h - spec.h);
      spec.vx = rand_int(rng, -max_speed_cells, max_speed_cells);
      spec.vy = rand_int(rng, -max_speed_cells, max_speed_cells);
      shapes.push_back(spec);
    }

    // Visible masks per frame, later-indexed shapes occluding earlier ones.
    std::vector<std::vector<BinaryMask>> visible(
        static_cast<size_t>(params.shapes));
    std::vector<std::vector<Box>> full_boxes(static_cast<size_t>(params.shapes));
    for (int f = 0; f < params.frames; ++f) {
      std::vector<BinaryMask> full;
      for (int s = 0; s < params.shapes; ++s) {
        const auto [px, py] = shape_pos(shapes[s], f, grid_w, grid_h);
        full.push_back(render_full(shapes[s], px, py, grid_w, grid_h));
        full_boxes[s].push_back(Box{
            static_cast<double>(px * kPrototypeStride),
            static_cast<double>(py * kPrototypeStride),
            static_cast<double>((px + shapes[s].w) * kPrototypeStride),
            static_cast<double>((py + shapes[s].h) * kPrototypeStride)});
      }
      for (int s = 0; s < params.shapes; ++s) {
        BinaryMask vis = full[s];
        for (int occ = s + 1; occ < params.shapes; ++occ)
          for (size_t i = 0; i < vis.data.size(); ++i)
            if (full[occ].data[i]) vis.data[i] = 0;
        visible[s].push_back(std::move(vis));
      }
    }

    for (int s = 0; s < params.shapes; ++s) {
      Annotation ann;
      ann.id = next_annotation_id++;
      ann.video_id = video_id;
      ann.category_id = shapes[s].category;
      for (int f = 0; f < params.frames; ++f) {
        ann.segmentations.push_back(
            rle_encode(upsample_blocks(visible[s][f], kPrototypeStride)));
        const Box& b = full_boxes[s][f];
        ann.bboxes.push_back(
            std::array<double, 4>{b.x1, b.y1, b.width(), b.height()});
      }
      out.annotations.annotations.push_back(std::move(ann));
    }

    const std::vector<ClipWindow> windows = partition_clips(
        params.frames, ClipPartitionConfig{params.clip_len, params.clip_overlap});
    for (const ClipWindow& win : windows) {
      ClipNetOut clip;
      clip.video_id = video_id;
      clip.clip_index = win.index;
      clip.frame_start = win.start;
      clip.frame_end = win.end;
      clip.head = HeadVariant::yolact;
      clip.count = params.shapes;
      clip.num_classes = params.shapes;
      clip.embedding_dim = params.shapes;
      clip.mask_param_count = params.shapes;

      clip.prototypes = Tensor4(win.len(), grid_h, grid_w, params.shapes);
      for (int t = 0; t < win.len(); ++t)
        for (int y = 0; y < grid_h; ++y)
          for (int x = 0; x < grid_w; ++x)
            for (int s = 0; s < params.shapes; ++s)
              clip.prototypes.at(t, y, x, s) =
                  visible[s][static_cast<size_t>(win.start + t)].at(y, x)
                      ? kProtoHigh
                      : -kProtoHigh;

      const int cols = params.shapes + 1;
      const float rest =
          0.01f / static_cast<float>(params.shapes);  // spread off-class mass
      clip.scores.assign(static_cast<size_t>(params.shapes) * cols, rest);
      clip.embeddings.assign(
          static_cast<size_t>(params.shapes) * params.shapes, 0.0f);
      clip.mask_params.assign(
          static_cast<size_t>(params.shapes) * params.shapes, 0.0f);
      for (int s = 0; s < params.shapes; ++s) {
        clip.scores[static_cast<size_t>(s) * cols + s + 1] = 0.99f;
        clip.embeddings[static_cast<size_t>(s) * params.shapes + s] = 1.0f;
        clip.mask_params[static_cast<size_t>(s) * params.shapes + s] = 1.0f;
        for (int t = 0; t < win.len(); ++t)
          clip.boxes.push_back(full_boxes[s][static_cast<size_t>(win.start + t)]);
      }
      out.netout.clips.push_back(std::move(clip));
    }
  }
  return out;
}

}  // namespace cico
