#pragma once

#include <array>
#include <vector>

#include "cico/formats.hpp"

namespace cico {

// Distribution of temporal consistency values for one frame gap. Histograms
// bucket [0,1] into 20 bins of width 0.05, the last bin closed at 1.
struct DeltaCoherence {
  int delta = 0;
  std::array<long, 20> biou_hist{};
  std::array<long, 20> miou_hist{};
  long biou_samples = 0;
  long miou_samples = 0;
  double frac_biou_ge_075 = 0.0;
  double frac_miou_ge_075 = 0.0;
};

struct CoherenceReport {
  std::vector<DeltaCoherence> per_delta;  // deltas 1..delta_max
};

// Sweeps every instance and frame of the ground truth for each gap in
// 1..delta_max. Frames where the neighbour rule leaves the value undefined
// are skipped, not counted as zero.
CoherenceReport coherence_stats(const AnnotationSet& gt, int delta_max);

struct CategoryAp {
  int category_id = 0;
  double ap = 0.0;
};

struct EvalReport {
  double ap = 0.0;    // averaged over thresholds 0.50:0.05:0.95
  double ap50 = 0.0;
  double ap75 = 0.0;
  double ar1 = 0.0;   // recall keeping 1 prediction per video
  double ar10 = 0.0;  // recall keeping 10 predictions per video
  std::vector<CategoryAp> per_category;
};

// Track-level average precision in the YouTube-VIS protocol: predictions are
// matched greedily in score order to the unmatched ground-truth track of the
// same video and category with the highest video-level mask IoU, precision
// is interpolated at 101 recall points and means are taken over categories
// that carry ground truth.
EvalReport evaluate(const ResultsFile& results, const AnnotationSet& gt);

}  // namespace cico
