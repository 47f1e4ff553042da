#include "cico/heads.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace cico {

ConvLayerSpec make_conv(ConvKind kind, int kt, int kh, int kw, int in_ch,
                        int out_ch, int pt, int ph, int pw, bool relu) {
  ConvLayerSpec layer;
  layer.kind = kind;
  layer.kt = kt;
  layer.kh = kh;
  layer.kw = kw;
  layer.in_ch = in_ch;
  layer.out_ch = out_ch;
  layer.pt = pt;
  layer.ph = ph;
  layer.pw = pw;
  layer.relu = relu;
  layer.weights.assign(
      static_cast<size_t>(out_ch) * in_ch * kt * kh * kw, 0.0f);
  layer.bias.assign(static_cast<size_t>(out_ch), 0.0f);
  return layer;
}

static void validate_conv(const FeatureCube& in, const ConvLayerSpec& layer) {
  if (layer.in_ch != in.c)
    throw std::invalid_argument("conv_forward: input has " +
                                std::to_string(in.c) + " channels, layer expects " +
                                std::to_string(layer.in_ch));
  if (layer.kt < 1 || layer.kh < 1 || layer.kw < 1 || layer.out_ch < 1)
    throw std::invalid_argument("conv_forward: bad kernel spec");
  if (layer.kind == ConvKind::conv2d && (layer.kt != 1 || layer.pt != 0))
    throw std::invalid_argument("conv_forward: 2d layer must have kt=1, pt=0");
  const size_t expect_w = static_cast<size_t>(layer.out_ch) * layer.in_ch *
                          layer.kt * layer.kh * layer.kw;
  if (layer.weights.size() != expect_w)
    throw std::invalid_argument("conv_forward: weight buffer size mismatch");
  if (layer.bias.size() != static_cast<size_t>(layer.out_ch))
    throw std::invalid_argument("conv_forward: bias buffer size mismatch");
}

FeatureCube conv_forward(const FeatureCube& in, const ConvLayerSpec& layer) {
  validate_conv(in, layer);
  const int t_out = in.t + 2 * layer.pt - layer.kt + 1;
  const int h_out = in.h + 2 * layer.ph - layer.kh + 1;
  const int w_out = in.w + 2 * layer.pw - layer.kw + 1;
  if (t_out < 1 || h_out < 1 || w_out < 1)
    throw std::invalid_argument("conv_forward: kernel larger than padded input");

  FeatureCube out(t_out, h_out, w_out, layer.out_ch);
  const int khw = layer.kh * layer.kw;
  for (int ot = 0; ot < t_out; ++ot) {
    for (int oy = 0; oy < h_out; ++oy) {
      for (int ox = 0; ox < w_out; ++ox) {
        for (int oc = 0; oc < layer.out_ch; ++oc) {
          double acc = layer.bias[oc];
          for (int dt = 0; dt < layer.kt; ++dt) {
            // Temporal padding replicates the edge frames.
            const int it = std::clamp(ot + dt - layer.pt, 0, in.t - 1);
            for (int dy = 0; dy < layer.kh; ++dy) {
              const int iy = oy + dy - layer.ph;
              if (iy < 0 || iy >= in.h) continue;
              for (int dx = 0; dx < layer.kw; ++dx) {
                const int ix = ox + dx - layer.pw;
                if (ix < 0 || ix >= in.w) continue;
                const size_t wbase =
                    ((static_cast<size_t>(oc) * layer.in_ch) * layer.kt + dt) *
                        khw +
                    dy * layer.kw + dx;
                for (int ic = 0; ic < layer.in_ch; ++ic) {
                  acc += static_cast<double>(in.at(it, iy, ix, ic)) *
                         layer.weights[wbase +
                                       static_cast<size_t>(ic) * layer.kt * khw];
                }
              }
            }
          }
          if (layer.relu && acc < 0.0) acc = 0.0;
          out.at(ot, oy, ox, oc) = static_cast<float>(acc);
        }
      }
    }
  }
  return out;
}

DeconvLayerSpec make_deconv(int in_ch, int out_ch, bool relu) {
  DeconvLayerSpec layer;
  layer.in_ch = in_ch;
  layer.out_ch = out_ch;
  layer.relu = relu;
  layer.weights.assign(static_cast<size_t>(out_ch) * in_ch * 4, 0.0f);
  layer.bias.assign(static_cast<size_t>(out_ch), 0.0f);
  return layer;
}

FeatureCube deconv_upsample(const FeatureCube& in, const DeconvLayerSpec& layer) {
  if (layer.in_ch != in.c)
    throw std::invalid_argument("deconv_upsample: channel mismatch");
  if (layer.weights.size() !=
          static_cast<size_t>(layer.out_ch) * layer.in_ch * 4 ||
      layer.bias.size() != static_cast<size_t>(layer.out_ch))
    throw std::invalid_argument("deconv_upsample: weight buffer size mismatch");
  FeatureCube out(in.t, in.h * 2, in.w * 2, layer.out_ch);
  // Kernel 2, stride 2: every output cell sees exactly one input cell.
  for (int t = 0; t < in.t; ++t) {
    for (int y = 0; y < in.h; ++y) {
      for (int x = 0; x < in.w; ++x) {
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            for (int oc = 0; oc < layer.out_ch; ++oc) {
              double acc = layer.bias[oc];
              for (int ic = 0; ic < layer.in_ch; ++ic) {
                const size_t wi =
                    ((static_cast<size_t>(oc) * layer.in_ch + ic) * 2 + dy) * 2 +
                    dx;
                acc += static_cast<double>(in.at(t, y, x, ic)) * layer.weights[wi];
              }
              if (layer.relu && acc < 0.0) acc = 0.0;
              out.at(t, 2 * y + dy, 2 * x + dx, oc) = static_cast<float>(acc);
            }
          }
        }
      }
    }
  }
  return out;
}

std::vector<Box> generate_anchors(const AnchorConfig& cfg, int level, int rows,
                                  int cols) {
  if (level < 0 || level >= static_cast<int>(cfg.scales.size()) ||
      level >= static_cast<int>(cfg.strides.size()))
    throw std::invalid_argument("generate_anchors: level out of range");
  if (cfg.ratios.empty())
    throw std::invalid_argument("generate_anchors: no aspect ratios");
  if (rows < 1 || cols < 1)
    throw std::invalid_argument("generate_anchors: grid dims must be positive");
  const double scale = cfg.scales[level];
  const double stride = cfg.strides[level];
  std::vector<Box> out;
  out.reserve(static_cast<size_t>(rows) * cols * cfg.ratios.size());
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const double cx = (c + 0.5) * stride;
      const double cy = (r + 0.5) * stride;
      for (double ratio : cfg.ratios) {
        const double w = scale * std::sqrt(ratio);
        const double h = scale / std::sqrt(ratio);
        out.push_back(Box{cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2});
      }
    }
  }
  return out;
}

std::vector<Box> decode_boxes(const Box& anchor,
                              const std::vector<float>& regression) {
  if (regression.empty() || regression.size() % 4 != 0)
    throw std::invalid_argument("decode_boxes: regression length must be 4*T");
  const size_t t_len = regression.size() / 4;
  std::vector<Box> out;
  out.reserve(t_len);
  const double aw = anchor.width(), ah = anchor.height();
  for (size_t t = 0; t < t_len; ++t) {
    const double dx = regression[4 * t + 0], dy = regression[4 * t + 1];
    const double dw = regression[4 * t + 2], dh = regression[4 * t + 3];
    const double cx = anchor.cx() + dx * kBoxVarianceCenter * aw;
    const double cy = anchor.cy() + dy * kBoxVarianceCenter * ah;
    const double w = aw * std::exp(dw * kBoxVarianceSize);
    const double h = ah * std::exp(dh * kBoxVarianceSize);
    out.push_back(Box{cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2});
  }
  return out;
}

std::vector<float> encode_boxes(const Box& anchor,
                                const std::vector<Box>& boxes) {
  if (anchor.width() <= 0 || anchor.height() <= 0)
    throw std::invalid_argument("encode_boxes: degenerate anchor");
  std::vector<float> out;
  out.reserve(boxes.size() * 4);
  for (const Box& b : boxes) {
    if (b.width() <= 0 || b.height() <= 0)
      throw std::invalid_argument("encode_boxes: degenerate target box");
    out.push_back(static_cast<float>((b.cx() - anchor.cx()) /
                                     (kBoxVarianceCenter * anchor.width())));
    out.push_back(static_cast<float>((b.cy() - anchor.cy()) /
                                     (kBoxVarianceCenter * anchor.height())));
    out.push_back(static_cast<float>(std::log(b.width() / anchor.width()) /
                                     kBoxVarianceSize));
    out.push_back(static_cast<float>(std::log(b.height() / anchor.height()) /
                                     kBoxVarianceSize));
  }
  return out;
}

static FeatureCube run_tower(FeatureCube x,
                             const std::vector<ConvLayerSpec>& tower) {
  for (const ConvLayerSpec& layer : tower) x = conv_forward(x, layer);
  return x;
}

RawClipPredictions cph_forward(const FeatureCube& features, const CphConfig& cfg,
                               const CphWeights& weights) {
  if (features.t != cfg.clip_len)
    throw std::invalid_argument("cph_forward: feature cube frame count " +
                                std::to_string(features.t) +
                                " does not match clip_len " +
                                std::to_string(cfg.clip_len));
  if (cfg.num_classes < 1 || cfg.anchors_per_cell < 1 ||
      cfg.embedding_dim < 1 || cfg.mask_params < 1)
    throw std::invalid_argument("cph_forward: bad head config");

  const FeatureCube shared = run_tower(features, weights.box_tower);
  const FeatureCube box_out = conv_forward(shared, weights.box_pred);
  const FeatureCube mask_out = conv_forward(shared, weights.mask_pred);
  const FeatureCube track_out =
      conv_forward(run_tower(features, weights.track_tower), weights.track_pred);
  const FeatureCube cls_out =
      conv_forward(run_tower(features, weights.cls_tower), weights.cls_pred);

  const int a = cfg.anchors_per_cell;
  const int t_len = cfg.clip_len;
  const int cols = cfg.num_classes + 1;
  if (box_out.t != 1 || track_out.t != 1)
    throw std::invalid_argument(
        "cph_forward: clip-level prediction layers must collapse time to 1");
  if (box_out.h != features.h || box_out.w != features.w)
    throw std::invalid_argument("cph_forward: towers must preserve spatial dims");
  if (box_out.c != a * 4 * t_len || mask_out.c != a * cfg.mask_params ||
      track_out.c != a * cfg.embedding_dim || cls_out.c != a * cols)
    throw std::invalid_argument("cph_forward: prediction channel mismatch");
  if (cls_out.t != features.t)
    throw std::invalid_argument("cph_forward: classification must run per frame");

  RawClipPredictions out;
  out.count = features.h * features.w * a;
  out.num_classes = cfg.num_classes;
  out.clip_len = t_len;
  out.embedding_dim = cfg.embedding_dim;
  out.mask_params = cfg.mask_params;
  out.class_logits.resize(static_cast<size_t>(out.count) * cols);
  out.embeddings.resize(static_cast<size_t>(out.count) * cfg.embedding_dim);
  out.box_regression.resize(static_cast<size_t>(out.count) * 4 * t_len);
  out.mask_coeffs.resize(static_cast<size_t>(out.count) * cfg.mask_params);

  for (int y = 0; y < features.h; ++y) {
    for (int x = 0; x < features.w; ++x) {
      for (int ai = 0; ai < a; ++ai) {
        const size_t rec = (static_cast<size_t>(y) * features.w + x) * a + ai;
        for (int k = 0; k < cols; ++k) {
          // Frame logits are averaged over the clip.
          double acc = 0.0;
          for (int t = 0; t < cls_out.t; ++t)
            acc += cls_out.at(t, y, x, ai * cols + k);
          out.class_logits[rec * cols + k] =
              static_cast<float>(acc / cls_out.t);
        }
        for (int k = 0; k < cfg.embedding_dim; ++k)
          out.embeddings[rec * cfg.embedding_dim + k] =
              track_out.at(0, y, x, ai * cfg.embedding_dim + k);
        for (int k = 0; k < 4 * t_len; ++k)
          out.box_regression[rec * 4 * t_len + k] =
              box_out.at(0, y, x, ai * 4 * t_len + k);
        for (int k = 0; k < cfg.mask_params; ++k)
          out.mask_coeffs[rec * cfg.mask_params + k] =
              mask_out.at(0, y, x, ai * cfg.mask_params + k);
      }
    }
  }
  return out;
}

CphWeights make_cph_weights(const CphConfig& cfg, int feature_ch) {
  CphWeights w;
  const int t_len = cfg.clip_len;
  for (int i = 0; i < cfg.tower_depth; ++i) {
    w.box_tower.push_back(make_conv(ConvKind::conv3d, 3, 3, 3, feature_ch,
                                    feature_ch, 1, 1, 1, true));
    w.track_tower.push_back(make_conv(ConvKind::conv3d, 3, 3, 3, feature_ch,
                                      feature_ch, 1, 1, 1, true));
    w.cls_tower.push_back(make_conv(ConvKind::conv2d, 1, 3, 3, feature_ch,
                                    feature_ch, 0, 1, 1, true));
  }
  const int a = cfg.anchors_per_cell;
  w.box_pred = make_conv(ConvKind::conv3d, t_len, 3, 3, feature_ch, a * 4 * t_len,
                         0, 1, 1, false);
  w.mask_pred = make_conv(ConvKind::conv3d, t_len, 3, 3, feature_ch,
                          a * cfg.mask_params, 0, 1, 1, false);
  w.track_pred = make_conv(ConvKind::conv3d, t_len, 3, 3, feature_ch,
                           a * cfg.embedding_dim, 0, 1, 1, false);
  w.cls_pred = make_conv(ConvKind::conv2d, 1, 3, 3, feature_ch,
                         a * (cfg.num_classes + 1), 0, 1, 1, false);
  return w;
}

CmhWeights make_cmh_weights(int feature_ch, int proto_channels) {
  CmhWeights w;
  w.conv1 = make_conv(ConvKind::conv3d, 3, 3, 3, feature_ch, feature_ch, 1, 1, 1,
                      true);
  w.conv2 = make_conv(ConvKind::conv3d, 3, 3, 3, feature_ch, feature_ch, 1, 1, 1,
                      true);
  w.conv3 = make_conv(ConvKind::conv3d, 3, 3, 3, feature_ch, feature_ch, 1, 1, 1,
                      true);
  w.deconv = make_deconv(feature_ch, feature_ch, true);
  w.conv4 = make_conv(ConvKind::conv3d, 1, 3, 3, feature_ch, feature_ch, 0, 1, 1,
                      true);
  w.proj = make_conv(ConvKind::conv3d, 1, 1, 1, feature_ch, proto_channels, 0, 0,
                     0, false);
  return w;
}

FeatureCube cmh_forward(const FeatureCube& fused, const CmhWeights& weights) {
  FeatureCube x = conv_forward(fused, weights.conv1);
  x = conv_forward(x, weights.conv2);
  x = conv_forward(x, weights.conv3);
  x = deconv_upsample(x, weights.deconv);
  x = conv_forward(x, weights.conv4);
  x = conv_forward(x, weights.proj);
  if (x.h != fused.h * 2 || x.w != fused.w * 2 || x.t != fused.t)
    throw std::invalid_argument("cmh_forward: unexpected output shape");
  return x;
}

void softmax_rows(std::vector<float>& logits, int cols) {
  if (cols < 1 || logits.size() % cols != 0)
    throw std::invalid_argument("softmax_rows: bad column count");
  const size_t rows = logits.size() / cols;
  for (size_t r = 0; r < rows; ++r) {
    float* row = logits.data() + r * cols;
    double mx = row[0];
    for (int k = 1; k < cols; ++k) mx = std::max(mx, static_cast<double>(row[k]));
    double sum = 0.0;
    for (int k = 0; k < cols; ++k) sum += std::exp(row[k] - mx);
    for (int k = 0; k < cols; ++k)
      row[k] = static_cast<float>(std::exp(row[k] - mx) / sum);
  }
}

}  // namespace cico
