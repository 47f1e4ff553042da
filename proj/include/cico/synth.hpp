#pragma once

#include <cstdint>

#include "cico/formats.hpp"

namespace cico {

// Parameters for the synthetic video generator. Geometry lives on the
// prototype grid (one cell = 4 input pixels) so that rendered masks survive
// the resize pipeline unchanged; image dims must be multiples of 4.
struct SynthParams {
  int videos = 2;
  int frames = 12;
  int shapes = 3;  // instances per video
  int image_w = 128;
  int image_h = 128;
  int max_speed = 8;  // pixels per frame, snapped to the 4 px grid
  uint64_t seed = 1;
  int clip_len = 3;
  int clip_overlap = 1;
};

struct SynthOutput {
  AnnotationSet annotations;
  NetOutContainer netout;
  EngineConfig config;
};

// Renders moving rectangles and ellipses with later-indexed shapes occluding
// earlier ones, and emits the matching ideal network output: prototype
// channels saturated to the visible masks, near-one class scores, one-hot
// embeddings and mask coefficients, and exact per-frame boxes. The same seed
// always produces identical output.
SynthOutput synth_generate(const SynthParams& params);

}  // namespace cico
