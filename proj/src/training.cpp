#include "cico/training.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace cico {

namespace {

constexpr double kProbFloor = 1e-7;

Box clip_cbox(const GroundTruthInstance& inst, int frame_start, int frame_end) {
  BoxTrack window;
  for (auto it = inst.boxes.lower_bound(frame_start);
       it != inst.boxes.end() && it->first <= frame_end; ++it)
    window[it->first] = it->second;
  if (window.empty())
    throw std::invalid_argument("loss_mask: instance has no boxes inside the clip");
  return circumscribed_box(window);
}

}  // namespace

Box matcher_box(const GroundTruthInstance& inst, int t, const MatcherConfig& cfg) {
  auto cur = inst.boxes.find(t);
  if (cur == inst.boxes.end())
    throw std::invalid_argument("matcher_box: instance absent at frame " +
                                std::to_string(t));
  if (!cfg.use_circumscribed) return cur->second;
  BoxTrack window;
  for (int f = t - 1; f <= t + 1; ++f)
    if (auto it = inst.boxes.find(f); it != inst.boxes.end())
      window[f] = it->second;
  return circumscribed_box(window);
}

MatchResult match_samples(const std::vector<Box>& anchors,
                          const std::vector<Box>& gt_boxes,
                          const MatcherConfig& cfg) {
  if (cfg.eps_neg > cfg.eps_pos)
    throw std::invalid_argument("match_samples: eps_neg must not exceed eps_pos");
  MatchResult out;
  out.kinds.resize(anchors.size(), SampleKind::negative);
  out.matched_gt.assign(anchors.size(), -1);
  for (size_t i = 0; i < anchors.size(); ++i) {
    double best = -1.0;
    int best_gt = -1;
    for (size_t g = 0; g < gt_boxes.size(); ++g) {
      const double iou = box_iou(anchors[i], gt_boxes[g]);
      if (iou > best) {
        best = iou;
        best_gt = static_cast<int>(g);
      }
    }
    if (best_gt < 0) {
      out.kinds[i] = SampleKind::negative;
    } else if (best > cfg.eps_pos) {
      out.kinds[i] = SampleKind::positive;
      out.matched_gt[i] = best_gt;
    } else if (best < cfg.eps_neg) {
      out.kinds[i] = SampleKind::negative;
    } else {
      out.kinds[i] = SampleKind::ignored;
    }
  }
  for (SampleKind k : out.kinds) {
    if (k == SampleKind::positive) ++out.n_pos;
    if (k == SampleKind::negative) ++out.n_neg;
  }
  return out;
}

double loss_cls(const std::vector<float>& probs, int cols,
                const std::vector<int>& targets) {
  if (cols < 2) throw std::invalid_argument("loss_cls: need at least 2 columns");
  if (targets.empty()) throw std::invalid_argument("loss_cls: no samples");
  if (probs.size() != targets.size() * static_cast<size_t>(cols))
    throw std::invalid_argument("loss_cls: probability matrix size mismatch");
  double sum = 0.0;
  for (size_t i = 0; i < targets.size(); ++i) {
    const int t = targets[i];
    if (t < 0 || t >= cols)
      throw std::invalid_argument("loss_cls: target out of range");
    const double p =
        std::max(static_cast<double>(probs[i * cols + t]), kProbFloor);
    sum -= std::log(p);
  }
  return sum / static_cast<double>(targets.size());
}

double smooth_l1(double x) {
  const double ax = std::abs(x);
  if (ax < 1.0) return 0.5 * x * x;
  return ax - 0.5;
}

double loss_reg(const std::vector<float>& pred, const std::vector<float>& target,
                int coords_per_sample) {
  if (coords_per_sample < 1)
    throw std::invalid_argument("loss_reg: coords_per_sample must be positive");
  if (pred.size() != target.size() || pred.empty() ||
      pred.size() % coords_per_sample != 0)
    throw std::invalid_argument("loss_reg: buffer size mismatch");
  const size_t n = pred.size() / coords_per_sample;
  double sum = 0.0;
  for (size_t i = 0; i < pred.size(); ++i)
    sum += smooth_l1(static_cast<double>(pred[i]) - target[i]);
  return sum / static_cast<double>(n);
}

double loss_mask(const PrototypeCube& protos,
                 const std::vector<std::vector<float>>& thetas,
                 HeadVariant head, const GroundTruthClip& gt,
                 const MatchResult& matches) {
  if (matches.n_pos < 1)
    throw std::invalid_argument("loss_mask: no positive samples");
  if (thetas.size() != matches.kinds.size())
    throw std::invalid_argument("loss_mask: one theta row per anchor required");
  const int t_len = gt.frame_end - gt.frame_start + 1;
  if (protos.t != t_len)
    throw std::invalid_argument("loss_mask: prototype frames do not match clip");

  double total = 0.0;
  for (size_t i = 0; i < matches.kinds.size(); ++i) {
    if (matches.kinds[i] != SampleKind::positive) continue;
    const GroundTruthInstance& inst = gt.instances.at(matches.matched_gt[i]);
    const Box cbox = clip_cbox(inst, gt.frame_start, gt.frame_end);

    FloatMaskClip pred;
    if (head == HeadVariant::yolact) {
      pred = assemble_yolact(protos, MaskParamsYolact{thetas[i]}, cbox);
    } else {
      pred = assemble_condinst(protos, MaskParamsCondInst{thetas[i]}, cbox);
    }

    // In-box region on the prototype grid, rounded outwards.
    const int x0 = std::clamp(
        static_cast<int>(std::floor(cbox.x1 / kPrototypeStride)), 0, protos.w - 1);
    const int y0 = std::clamp(
        static_cast<int>(std::floor(cbox.y1 / kPrototypeStride)), 0, protos.h - 1);
    const int x1 = std::clamp(
        static_cast<int>(std::ceil(cbox.x2 / kPrototypeStride)), x0 + 1, protos.w);
    const int y1 = std::clamp(
        static_cast<int>(std::ceil(cbox.y2 / kPrototypeStride)), y0 + 1, protos.h);
    const long box_pixels = static_cast<long>(x1 - x0) * (y1 - y0);

    double bce = 0.0;
    for (int t = 0; t < t_len; ++t) {
      const int frame = gt.frame_start + t;
      BinaryMask target(protos.h, protos.w, 0);
      if (auto it = inst.masks.find(frame); it != inst.masks.end())
        target = maxpool_downsample(it->second, protos.h, protos.w);
      const FloatMask& p = pred.frames[t];
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
          const double v = std::clamp(static_cast<double>(p.at(y, x)), kProbFloor,
                                      1.0 - kProbFloor);
          bce -= target.at(y, x) ? std::log(v) : std::log(1.0 - v);
        }
      }
    }
    total += bce / (static_cast<double>(box_pixels) * t_len);
  }
  return total / matches.n_pos;
}

double embed_similarity(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size() || a.empty())
    throw std::invalid_argument("embed_similarity: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0)
    throw std::invalid_argument("embed_similarity: zero-norm embedding");
  const double cos = dot / (std::sqrt(na) * std::sqrt(nb));
  return 0.5 * (cos + 1.0);
}

double loss_track(const std::vector<std::vector<float>>& embeddings,
                  const std::vector<int>& ids) {
  if (embeddings.size() != ids.size())
    throw std::invalid_argument("loss_track: one id per embedding required");
  const size_t n = embeddings.size();
  if (n == 0) return 0.0;
  double sum = 0.0;
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) {
      const double d = embed_similarity(embeddings[i], embeddings[j]);
      // Clamp the log argument so saturated pairs contribute exactly 0.
      if (ids[i] == ids[j])
        sum += std::log(std::max(d, kProbFloor));
      else
        sum += std::log(std::max(1.0 - d, kProbFloor));
    }
  }
  return -sum / (static_cast<double>(n) * n);
}

double loss_total(const std::array<double, 4>& components, const LossWeights& w) {
  return w.cls * components[0] + w.reg * components[1] + w.mask * components[2] +
         w.track * components[3];
}

}  // namespace cico
