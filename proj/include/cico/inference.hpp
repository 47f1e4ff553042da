#pragma once

#include <vector>

#include "cico/assembly.hpp"
#include "cico/formats.hpp"
#include "cico/geometry.hpp"
#include "cico/mask.hpp"

namespace cico {

struct ClipPartitionConfig {
  int clip_len = 3;
  int overlap = 1;  // shared frames between consecutive clips
};

struct ClipWindow {
  int index = 0;
  int start = 0;
  int end = 0;  // inclusive
  int len() const { return end - start + 1; }
};

// Splits a video into clip windows advancing by clip_len - overlap. When the
// regular stride leaves trailing frames uncovered, a final window is aligned
// to the video end (overlapping its predecessor more than usual). A video
// shorter than clip_len becomes one whole-video window.
std::vector<ClipWindow> partition_clips(int video_len,
                                        const ClipPartitionConfig& cfg);

struct InferenceConfig {
  double confidence_thresh = 0.1;
  double nms_thresh = 0.5;
  int top_k = 100;
};

// One surviving (anchor, class) candidate before mask assembly.
struct DetCandidate {
  int anchor = 0;
  int category = 0;  // 1-based; 0 is background and never emitted
  double score = 0.0;
};

// Keeps every (record, foreground class) pair whose probability reaches the
// threshold. scores is a [count, cols] matrix with background in column 0.
std::vector<DetCandidate> filter_confidence(const std::vector<float>& scores,
                                            int count, int cols, double thresh);

struct ClipDetection {
  int video_id = 0;
  int clip_index = 0;
  int frame_start = 0;
  int anchor = 0;
  int category = 0;
  double score = 0.0;
  std::vector<float> embedding;
  std::vector<Box> frame_boxes;  // one per clip frame
  Box cbox;                      // circumscribed over frame_boxes
  BinaryMaskClip mask;           // input resolution, filled after suppression
};

// Greedy class-wise suppression on circumscribed boxes: detections are
// visited in score order and dropped when they overlap an already kept
// detection of the same category more than the threshold.
std::vector<ClipDetection> nms_clip(std::vector<ClipDetection> dets,
                                    double thresh);

// Full per-clip pass: confidence filter, box decode when the container holds
// regression, suppression, top-k and mask assembly for the survivors.
std::vector<ClipDetection> run_clip(const ClipNetOut& net,
                                    const InferenceConfig& cfg,
                                    const NetOutContainer& container);

}  // namespace cico
