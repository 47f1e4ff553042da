#pragma once

#include <array>
#include <vector>

#include "cico/assembly.hpp"
#include "cico/geometry.hpp"
#include "cico/mask.hpp"

namespace cico {

struct MatcherConfig {
  double eps_pos = 0.5;  // strict lower bound for positives
  double eps_neg = 0.4;  // strict upper bound for negatives
  // Match against the box circumscribing frames {t-1, t, t+1} instead of the
  // single-frame box.
  bool use_circumscribed = true;
};

enum class SampleKind { positive, negative, ignored };

struct MatchResult {
  std::vector<SampleKind> kinds;  // per anchor
  std::vector<int> matched_gt;    // best ground-truth index per anchor, -1 if none
  int n_pos = 0;
  int n_neg = 0;
};

// One annotated instance over the frames of a clip. Box and mask keys are
// absolute video frame indices; frames without entries mean absence.
struct GroundTruthInstance {
  int id = 0;
  int category = 0;
  BoxTrack boxes;
  MaskTrack masks;  // input-resolution masks
};

struct GroundTruthClip {
  int frame_start = 0;
  int frame_end = 0;
  std::vector<GroundTruthInstance> instances;
};

// Reference box used for anchor matching at frame t: either the frame box or
// the circumscribed box over the neighbouring-frame window, restricted to
// frames where the instance exists. The instance must exist at t.
Box matcher_box(const GroundTruthInstance& inst, int t, const MatcherConfig& cfg);

// Threshold rule per anchor against its best-overlap ground truth: positive
// above eps_pos, negative below eps_neg, ignored in between (inclusive).
// With no ground truths every anchor is negative.
MatchResult match_samples(const std::vector<Box>& anchors,
                          const std::vector<Box>& gt_boxes,
                          const MatcherConfig& cfg);

// Mean cross-entropy over rows of a [n, cols] probability matrix against
// integer targets. Probabilities are clamped below at 1e-7.
double loss_cls(const std::vector<float>& probs, int cols,
                const std::vector<int>& targets);

double smooth_l1(double x);

// Smooth-L1 summed over each sample's coordinates, averaged over samples.
double loss_reg(const std::vector<float>& pred, const std::vector<float>& target,
                int coords_per_sample);

// Binary cross-entropy between assembled masks and ground truth, restricted
// to the ground-truth circumscribed box, averaged over in-box pixels and
// frames per positive and then over positives. thetas holds one parameter row
// per anchor; only rows of positive anchors are read.
double loss_mask(const PrototypeCube& protos,
                 const std::vector<std::vector<float>>& thetas,
                 HeadVariant head, const GroundTruthClip& gt,
                 const MatchResult& matches);

// Cosine similarity mapped to [0,1]: (cos + 1) / 2.
double embed_similarity(const std::vector<float>& a, const std::vector<float>& b);

// Contrastive log loss over all ordered pairs of positive samples, self-pairs
// included, normalised by the squared positive count.
double loss_track(const std::vector<std::vector<float>>& embeddings,
                  const std::vector<int>& ids);

struct LossWeights {
  double cls = 1.0;
  double reg = 1.0;
  double mask = 1.0;
  double track = 1.0;
};

// Components ordered cls, reg, mask, track.
double loss_total(const std::array<double, 4>& components, const LossWeights& w);

}  // namespace cico
