#pragma once

#include <string>
#include <vector>

#include "cico/formats.hpp"
#include "cico/inference.hpp"
#include "cico/tracking.hpp"

namespace cico {

struct EngineOptions {
  int threads = 1;
  // When non-empty, per-clip association decisions are written here as JSON
  // lines.
  std::string track_dump_path;
};

struct VideoResult {
  int video_id = 0;
  int frame_count = 0;
  int width = 0;
  int height = 0;
  std::vector<VideoTrack> tracks;
};

// Runs every clip of the container through detection, links clips into
// tracks per video and merges them. Clips may be processed by several
// workers; results do not depend on the worker count.
std::vector<VideoResult> run_container(const NetOutContainer& container,
                                       const EngineConfig& cfg,
                                       const EngineOptions& opts = {});

ResultsFile results_from_videos(const std::vector<VideoResult>& videos);

struct LossReport {
  double cls = 0.0;
  double reg = 0.0;
  double mask = 0.0;
  double track = 0.0;
  double total = 0.0;
  int clips = 0;
};

// Computes the four loss components of a container against ground truth,
// averaged over clips, and their weighted sum. Records must line up with the
// anchor grid of the config at each video's resolution.
LossReport evaluate_losses(const NetOutContainer& container,
                           const AnnotationSet& gt, const EngineConfig& cfg);

}  // namespace cico
