#pragma once

#include <map>
#include <vector>

#include "cico/inference.hpp"

namespace cico {

struct MatchScoreConfig {
  double alpha_embed = 1.0 / 3.0;
  double alpha_miou = 1.0 / 3.0;
  double alpha_biou = 1.0 / 3.0;
  double tau = 0.3;  // minimum score to continue an existing track
};

// Association score between a detection of the previous clip and one of the
// current clip: weighted sum of embedding similarity plus mask and box IoU
// averaged over the frames both clips cover. With no shared frames the last
// frame of the previous clip is compared against the first of the current.
double match_score(const ClipDetection& prev, const ClipDetection& cur,
                   const MatchScoreConfig& cfg);

struct LinkDecision {
  int det = 0;       // index into the clip's detection list
  int id = 0;
  bool fresh = false;
  double best_score = 0.0;
  int best_prev = -1;  // index into the previous clip's detections
};

struct TrackState {
  int clips_seen = 0;
  int max_id = 0;
  std::vector<ClipDetection> prev_dets;
  std::vector<int> prev_ids;
};

// Assigns a track id to every detection of the current clip. The first clip
// seeds ids 1..N in list order; later clips greedily claim the best-scoring
// unconsumed previous detection in descending score order, opening a fresh id
// when the best score does not exceed tau. Returns one id per detection.
std::vector<int> link_clips(TrackState& state,
                            const std::vector<ClipDetection>& dets,
                            const MatchScoreConfig& cfg,
                            std::vector<LinkDecision>* decisions = nullptr);

struct TrackedDetection {
  ClipDetection det;
  int id = 0;
};

struct VideoTrack {
  int id = 0;
  int category = 0;
  double score = 0.0;
  std::map<int, BinaryMask> frame_masks;   // absolute frame index
  std::map<int, Box> frame_boxes;
};

// Collapses per-clip detections sharing an id into one track per id. On
// frames covered by several clips the later clip wins; the category is the
// modal one over the clips (ties broken by higher mean score, then lower
// id) and the track score is the mean clip score.
std::vector<VideoTrack> merge_video(const std::vector<TrackedDetection>& dets);

}  // namespace cico
