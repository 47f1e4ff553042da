#include "cico/inference.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "cico/errors.hpp"
#include "cico/heads.hpp"

namespace cico {

std::vector<ClipWindow> partition_clips(int video_len,
                                        const ClipPartitionConfig& cfg) {
  if (video_len < 1)
    throw std::invalid_argument("partition_clips: video length must be >= 1");
  if (cfg.clip_len < 1 || cfg.overlap < 0 || cfg.overlap >= cfg.clip_len)
    throw std::invalid_argument(
        "partition_clips: need clip_len >= 1 and 0 <= overlap < clip_len");
  std::vector<ClipWindow> out;
  if (video_len <= cfg.clip_len) {
    out.push_back(ClipWindow{0, 0, video_len - 1});
    return out;
  }
  const int stride = cfg.clip_len - cfg.overlap;
  int start = 0;
  while (start + cfg.clip_len <= video_len) {
    out.push_back(ClipWindow{static_cast<int>(out.size()), start,
                             start + cfg.clip_len - 1});
    start += stride;
  }
  // Trailing frames get an end-aligned window.
  if (out.back().end < video_len - 1)
    out.push_back(ClipWindow{static_cast<int>(out.size()),
                             video_len - cfg.clip_len, video_len - 1});
  return out;
}

std::vector<DetCandidate> filter_confidence(const std::vector<float>& scores,
                                            int count, int cols, double thresh) {
  if (cols < 2)
    throw std::invalid_argument("filter_confidence: need a background column");
  if (scores.size() != static_cast<size_t>(count) * cols)
    throw std::invalid_argument("filter_confidence: score matrix size mismatch");
  std::vector<DetCandidate> out;
  for (int i = 0; i < count; ++i) {
    for (int k = 1; k < cols; ++k) {
      const double p = scores[static_cast<size_t>(i) * cols + k];
      if (p >= thresh) out.push_back(DetCandidate{i, k, p});
    }
  }
  return out;
}

std::vector<ClipDetection> nms_clip(std::vector<ClipDetection> dets,
                                    double thresh) {
  std::stable_sort(dets.begin(), dets.end(),
                   [](const ClipDetection& a, const ClipDetection& b) {
                     if (a.score != b.score) return a.score > b.score;
                     if (a.anchor != b.anchor) return a.anchor < b.anchor;
                     return a.category < b.category;
                   });
  std::vector<ClipDetection> kept;
  for (ClipDetection& det : dets) {
    bool suppressed = false;
    for (const ClipDetection& k : kept) {
      if (k.category != det.category) continue;
      if (box_iou(k.cbox, det.cbox) > thresh) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(std::move(det));
  }
  return kept;
}

std::vector<ClipDetection> run_clip(const ClipNetOut& net,
                                    const InferenceConfig& cfg,
                                    const NetOutContainer& container) {
  const int t_len = net.clip_len();
  const int cols = net.num_classes + 1;

  // Per-record frame boxes, decoding against anchors when needed.
  std::vector<std::vector<Box>> record_boxes(static_cast<size_t>(net.count));
  if (net.has_regression()) {
    if (!container.anchor_layout)
      throw FormatError("run_clip: regression boxes need an anchor layout");
    const std::vector<Box> anchors = anchors_for_layout(*container.anchor_layout);
    if (static_cast<int>(anchors.size()) != net.count)
      throw FormatError("run_clip: anchor layout yields " +
                        std::to_string(anchors.size()) + " anchors but clip has " +
                        std::to_string(net.count) + " records");
    for (int i = 0; i < net.count; ++i) {
      const std::vector<float> row(
          net.box_regression.begin() + static_cast<size_t>(i) * 4 * t_len,
          net.box_regression.begin() + static_cast<size_t>(i + 1) * 4 * t_len);
      record_boxes[i] = decode_boxes(anchors[i], row);
    }
  } else {
    for (int i = 0; i < net.count; ++i)
      record_boxes[i].assign(
          net.boxes.begin() + static_cast<size_t>(i) * t_len,
          net.boxes.begin() + static_cast<size_t>(i + 1) * t_len);
  }

  std::vector<ClipDetection> dets;
  for (const DetCandidate& cand :
       filter_confidence(net.scores, net.count, cols, cfg.confidence_thresh)) {
    ClipDetection det;
    det.video_id = net.video_id;
    det.clip_index = net.clip_index;
    det.frame_start = net.frame_start;
    det.anchor = cand.anchor;
    det.category = cand.category;
    det.score = cand.score;
    det.embedding.assign(
        net.embeddings.begin() +
            static_cast<size_t>(cand.anchor) * net.embedding_dim,
        net.embeddings.begin() +
            static_cast<size_t>(cand.anchor + 1) * net.embedding_dim);
    det.frame_boxes = record_boxes[cand.anchor];
    BoxTrack track;
    for (int t = 0; t < t_len; ++t) track[t] = det.frame_boxes[t];
    det.cbox = circumscribed_box(track);
    dets.push_back(std::move(det));
  }

  dets = nms_clip(std::move(dets), cfg.nms_thresh);
  if (static_cast<int>(dets.size()) > cfg.top_k) dets.resize(cfg.top_k);

  // Masks are assembled only for the survivors.
  const int out_h = net.prototypes.h * kPrototypeStride;
  const int out_w = net.prototypes.w * kPrototypeStride;
  for (ClipDetection& det : dets) {
    const std::vector<float> theta(
        net.mask_params.begin() +
            static_cast<size_t>(det.anchor) * net.mask_param_count,
        net.mask_params.begin() +
            static_cast<size_t>(det.anchor + 1) * net.mask_param_count);
    FloatMaskClip soft;
    if (net.head == HeadVariant::yolact) {
      soft = assemble_yolact(net.prototypes, MaskParamsYolact{theta}, det.cbox);
    } else {
      soft = assemble_condinst(net.prototypes, MaskParamsCondInst{theta},
                               det.cbox);
    }
    det.mask = finalize_mask(soft, out_h, out_w);
  }
  return dets;
}

}  // namespace cico
