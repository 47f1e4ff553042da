#pragma once

#include <vector>

#include "cico/geometry.hpp"
#include "cico/tensor.hpp"

namespace cico {

// Feature cube [T, h, w, C] for one pyramid level.
using FeatureCube = Tensor4;

// A 2d layer runs on each frame independently and must have kt = 1 with no
// temporal padding. A 3d layer convolves across frames as well; its temporal
// padding replicates the edge frames while spatial padding is zero-filled.
enum class ConvKind { conv2d, conv3d };

struct ConvLayerSpec {
  ConvKind kind = ConvKind::conv3d;
  int kt = 1, kh = 3, kw = 3;
  int in_ch = 0, out_ch = 0;
  int pt = 0, ph = 1, pw = 1;
  bool relu = false;
  std::vector<float> weights;  // [out][in][kt][kh][kw]
  std::vector<float> bias;     // [out]
};

// Convenience builder that sizes the weight and bias buffers with zeros.
ConvLayerSpec make_conv(ConvKind kind, int kt, int kh, int kw, int in_ch,
                        int out_ch, int pt, int ph, int pw, bool relu);

// Cross-correlation with the padding semantics above. Output dims follow
// in + 2*pad - kernel + 1 per axis.
FeatureCube conv_forward(const FeatureCube& in, const ConvLayerSpec& layer);

// Transposed 2x2 stride-2 spatial convolution; doubles h and w, keeps T.
struct DeconvLayerSpec {
  int in_ch = 0, out_ch = 0;
  bool relu = true;
  std::vector<float> weights;  // [out][in][2][2]
  std::vector<float> bias;     // [out]
};

DeconvLayerSpec make_deconv(int in_ch, int out_ch, bool relu);

FeatureCube deconv_upsample(const FeatureCube& in, const DeconvLayerSpec& layer);

// Anchor layout per level: scales/strides are indexed by level, aspect
// ratios are shared. Cell (r, c) centres its anchors at
// ((c + 0.5) * stride, (r + 0.5) * stride).
struct AnchorConfig {
  std::vector<double> scales;
  std::vector<double> ratios;  // width/height
  std::vector<int> strides;
};

std::vector<Box> generate_anchors(const AnchorConfig& cfg, int level, int rows,
                                  int cols);

inline constexpr double kBoxVarianceCenter = 0.1;
inline constexpr double kBoxVarianceSize = 0.2;

// SSD-style decode of 4T regression values against one anchor into T boxes.
std::vector<Box> decode_boxes(const Box& anchor,
                              const std::vector<float>& regression);
// Exact inverse of decode_boxes for positive-size boxes.
std::vector<float> encode_boxes(const Box& anchor,
                                const std::vector<Box>& boxes);

// Clip prediction head. The box/mask and tracking towers see the whole clip
// and collapse it with a final kt = T layer; classification runs per frame
// and mean-pools its logits over the clip.
struct CphConfig {
  int clip_len = 3;
  int num_classes = 0;    // foreground classes; logits cover classes + 1
  int embedding_dim = 8;
  int mask_params = 0;
  int anchors_per_cell = 3;
  int tower_depth = 4;
};

struct CphWeights {
  std::vector<ConvLayerSpec> box_tower;  // shared by box and mask branches
  ConvLayerSpec box_pred;                // kt = T, out = A * 4T
  ConvLayerSpec mask_pred;               // kt = T, out = A * mask_params
  std::vector<ConvLayerSpec> track_tower;
  ConvLayerSpec track_pred;              // kt = T, out = A * embedding_dim
  std::vector<ConvLayerSpec> cls_tower;  // 2d
  ConvLayerSpec cls_pred;                // 2d, out = A * (classes + 1)
};

// Flat per-anchor predictions for one level, anchors ordered row-major by
// cell then by anchor slot within the cell.
struct RawClipPredictions {
  int count = 0;
  int num_classes = 0;
  int clip_len = 0;
  int embedding_dim = 0;
  int mask_params = 0;
  std::vector<float> class_logits;    // [count, classes + 1]
  std::vector<float> embeddings;      // [count, embedding_dim]
  std::vector<float> box_regression;  // [count, 4 * clip_len]
  std::vector<float> mask_coeffs;     // [count, mask_params]
};

RawClipPredictions cph_forward(const FeatureCube& features, const CphConfig& cfg,
                               const CphWeights& weights);

// Builds structurally valid zero-initialised weights for the given config
// and feature channel count.
CphWeights make_cph_weights(const CphConfig& cfg, int feature_ch);

// Clip mask head: three 3x3x3 layers, a 2x spatial deconv, a 1x3x3 layer
// (all relu) and a linear 1x1x1 projection down to the prototype channels.
struct CmhWeights {
  ConvLayerSpec conv1, conv2, conv3;
  DeconvLayerSpec deconv;
  ConvLayerSpec conv4;
  ConvLayerSpec proj;
};

CmhWeights make_cmh_weights(int feature_ch, int proto_channels);

FeatureCube cmh_forward(const FeatureCube& fused, const CmhWeights& weights);

// Row-wise in-place softmax over a [rows, cols] matrix.
void softmax_rows(std::vector<float>& logits, int cols);

}  // namespace cico
