#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cico/assembly.hpp"
#include "cico/geometry.hpp"
#include "cico/heads.hpp"
#include "cico/mask.hpp"
#include "cico/tensor.hpp"

namespace cico {

// ---------------------------------------------------------------------------
// Annotation sets (YouTube-VIS style JSON).
// ---------------------------------------------------------------------------

struct VideoInfo {
  int id = 0;
  int width = 0;
  int height = 0;
  int length = 0;  // frame count
};

struct CategoryInfo {
  int id = 0;
  std::string name;
};

// Per-video instance annotation. The per-frame arrays span the whole video;
// null entries mark frames where the instance is absent. Boxes are COCO
// style [x, y, w, h].
struct Annotation {
  int id = 0;
  int video_id = 0;
  int category_id = 0;
  std::vector<std::optional<Rle>> segmentations;
  std::vector<std::optional<std::array<double, 4>>> bboxes;
};

struct AnnotationSet {
  std::vector<VideoInfo> videos;
  std::vector<CategoryInfo> categories;
  std::vector<Annotation> annotations;

  const VideoInfo* find_video(int id) const;
  const CategoryInfo* find_category(int id) const;
};

AnnotationSet read_annotations(const std::string& path);
void write_annotations(const AnnotationSet& set, const std::string& path);

// ---------------------------------------------------------------------------
// Network output container.
//
// Binary layout: magic "CCO1", format version u32, header length u64 (both
// little-endian), a JSON header of that length, then the raw payload. Every
// tensor is float32, little-endian, row-major, addressed by byte offset into
// the payload. The payload holds exactly the bytes the header declares, with
// no gaps or overlaps.
// ---------------------------------------------------------------------------

struct NamedTensor {
  std::vector<int> shape;
  std::vector<float> data;
};

// Decoded per-clip network output. Boxes come either pre-decoded (absolute
// corner coordinates [count, T, 4]) or as anchor-relative regression
// [count, 4T]; exactly one of the two is present.
struct ClipNetOut {
  int video_id = 0;
  int clip_index = 0;
  int frame_start = 0;
  int frame_end = 0;
  HeadVariant head = HeadVariant::yolact;

  Tensor4 prototypes;  // [T, Hp, Wp, k]
  int count = 0;       // prediction records
  int num_classes = 0; // foreground classes; scores carry one extra column

  std::vector<float> scores;      // [count, num_classes + 1], background first
  std::vector<float> embeddings;  // [count, embedding_dim]
  int embedding_dim = 0;
  std::vector<Box> boxes;             // [count * T] when pre-decoded
  std::vector<float> box_regression;  // [count, 4T] otherwise
  std::vector<float> mask_params;     // [count, mask_param_count]
  int mask_param_count = 0;

  int clip_len() const { return frame_end - frame_start + 1; }
  bool has_regression() const { return !box_regression.empty(); }
};

// Anchor layout needed to decode regression-form boxes. Grid dims per level
// derive from the image size and the per-level stride.
struct AnchorLayout {
  AnchorConfig anchors;
  int image_h = 0;
  int image_w = 0;
};

struct NetOutContainer {
  std::vector<ClipNetOut> clips;
  std::optional<AnchorLayout> anchor_layout;
  // Free-form named tensors (network weights and similar).
  std::map<std::string, NamedTensor> extra;
};

NetOutContainer read_netout(const std::string& path);
void write_netout(const NetOutContainer& container, const std::string& path);

std::vector<Box> anchors_for_layout(const AnchorLayout& layout);

// ---------------------------------------------------------------------------
// Prediction results (JSON).
// ---------------------------------------------------------------------------

struct ResultEntry {
  int video_id = 0;
  int category_id = 0;
  double score = 0.0;
  std::vector<std::optional<Rle>> segmentations;  // one slot per video frame
};

using ResultsFile = std::vector<ResultEntry>;

ResultsFile read_results(const std::string& path);
void write_results(const ResultsFile& results, const std::string& path);

// ---------------------------------------------------------------------------
// Engine configuration (JSON).
// ---------------------------------------------------------------------------

struct EngineConfig {
  HeadVariant head = HeadVariant::yolact;
  int clip_len = 3;
  int clip_overlap = 1;
  double confidence_thresh = 0.1;
  double nms_thresh = 0.5;
  int top_k = 100;
  double track_alpha_embed = 1.0 / 3.0;
  double track_alpha_miou = 1.0 / 3.0;
  double track_alpha_biou = 1.0 / 3.0;
  double track_tau = 0.3;
  double loss_weight_cls = 1.0;
  double loss_weight_reg = 1.0;
  double loss_weight_mask = 1.0;
  double loss_weight_track = 1.0;
  double matcher_eps_pos = 0.5;
  double matcher_eps_neg = 0.4;
  AnchorConfig anchor_config{
      {24.0, 48.0, 96.0, 192.0, 384.0}, {0.5, 1.0, 2.0}, {8, 16, 32, 64, 128}};
  int embedding_dim = 8;
  int prototype_channels = 8;
};

EngineConfig read_engine_config(const std::string& path);
void write_engine_config(const EngineConfig& cfg, const std::string& path);
void validate_engine_config(const EngineConfig& cfg);

}  // namespace cico
