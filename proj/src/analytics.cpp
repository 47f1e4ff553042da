#include "cico/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cico/errors.hpp"

namespace cico {

namespace {

int hist_bin(double v) {
  const int bin = static_cast<int>(std::floor(v / 0.05));
  return std::clamp(bin, 0, 19);
}

}  // namespace

CoherenceReport coherence_stats(const AnnotationSet& gt, int delta_max) {
  if (delta_max < 1)
    throw FormatError("coherence_stats: delta_max must be >= 1");
  if (gt.annotations.empty())
    throw FormatError("coherence_stats: annotation set has no instances");

  // Decode each instance once; the sweep below revisits frames per delta.
  struct Decoded {
    BoxTrack boxes;
    MaskTrack masks;
  };
  std::vector<Decoded> instances;
  instances.reserve(gt.annotations.size());
  for (const Annotation& ann : gt.annotations) {
    Decoded d;
    for (size_t f = 0; f < ann.bboxes.size(); ++f) {
      if (!ann.bboxes[f]) continue;
      const auto& b = *ann.bboxes[f];
      d.boxes[static_cast<int>(f)] =
          Box{b[0], b[1], b[0] + b[2], b[1] + b[3]};
    }
    for (size_t f = 0; f < ann.segmentations.size(); ++f)
      if (ann.segmentations[f])
        d.masks[static_cast<int>(f)] = rle_decode(*ann.segmentations[f]);
    instances.push_back(std::move(d));
  }

  CoherenceReport report;
  for (int delta = 1; delta <= delta_max; ++delta) {
    DeltaCoherence dc;
    dc.delta = delta;
    long biou_hits = 0, miou_hits = 0;
    for (const Decoded& inst : instances) {
      for (const auto& [t, box] : inst.boxes) {
        const auto v = t_biou(inst.boxes, t, delta);
        if (!v) continue;
        ++dc.biou_samples;
        ++dc.biou_hist[hist_bin(*v)];
        if (*v >= 0.75) ++biou_hits;
      }
      for (const auto& [t, m] : inst.masks) {
        const auto v = t_miou(inst.masks, t, delta);
        if (!v) continue;
        ++dc.miou_samples;
        ++dc.miou_hist[hist_bin(*v)];
        if (*v >= 0.75) ++miou_hits;
      }
    }
    dc.frac_biou_ge_075 =
        dc.biou_samples ? static_cast<double>(biou_hits) / dc.biou_samples : 0.0;
    dc.frac_miou_ge_075 =
        dc.miou_samples ? static_cast<double>(miou_hits) / dc.miou_samples : 0.0;
    report.per_delta.push_back(dc);
  }
  return report;
}

namespace {

constexpr int kRecallPoints = 101;

struct GtTrack {
  int ann_index = 0;
  int video_id = 0;
  MaskTrack masks;
};

struct PredTrack {
  int index = 0;  // original position, used for deterministic ordering
  int video_id = 0;
  double score = 0.0;
  MaskTrack masks;
};

// Precision interpolated at 101 evenly spaced recall points from the raw
// PR staircase of one category and threshold.
double ap_101(const std::vector<char>& tp_flags, long gt_count) {
  if (gt_count == 0) return 0.0;
  std::vector<double> precision, recall;
  long tp = 0, fp = 0;
  for (char flag : tp_flags) {
    if (flag)
      ++tp;
    else
      ++fp;
    precision.push_back(static_cast<double>(tp) / (tp + fp));
    recall.push_back(static_cast<double>(tp) / gt_count);
  }
  // Monotone envelope from the right.
  for (int i = static_cast<int>(precision.size()) - 2; i >= 0; --i)
    precision[i] = std::max(precision[i], precision[i + 1]);
  double sum = 0.0;
  for (int i = 0; i < kRecallPoints; ++i) {
    const double r = static_cast<double>(i) / (kRecallPoints - 1);
    double best = 0.0;
    for (size_t j = 0; j < recall.size(); ++j) {
      if (recall[j] >= r - 1e-12) {
        best = precision[j];
        break;
      }
    }
    sum += best;
  }
  return sum / kRecallPoints;
}

}  // namespace

EvalReport evaluate(const ResultsFile& results, const AnnotationSet& gt) {
  // Ground-truth tracks grouped by category.
  std::map<int, std::vector<GtTrack>> gt_by_cat;
  for (size_t i = 0; i < gt.annotations.size(); ++i) {
    const Annotation& ann = gt.annotations[i];
    GtTrack track;
    track.ann_index = static_cast<int>(i);
    track.video_id = ann.video_id;
    for (size_t f = 0; f < ann.segmentations.size(); ++f)
      if (ann.segmentations[f])
        track.masks[static_cast<int>(f)] = rle_decode(*ann.segmentations[f]);
    gt_by_cat[ann.category_id].push_back(std::move(track));
  }

  std::map<int, std::vector<PredTrack>> pred_by_cat;
  for (size_t i = 0; i < results.size(); ++i) {
    const ResultEntry& r = results[i];
    const VideoInfo* video = gt.find_video(r.video_id);
    if (!video)
      throw FormatError("evaluate: results[" + std::to_string(i) +
                        "] references unknown video " +
                        std::to_string(r.video_id));
    if (!gt.find_category(r.category_id))
      throw FormatError("evaluate: results[" + std::to_string(i) +
                        "] references unknown category " +
                        std::to_string(r.category_id));
    if (r.segmentations.size() != static_cast<size_t>(video->length))
      throw FormatError("evaluate: results[" + std::to_string(i) + "] carries " +
                        std::to_string(r.segmentations.size()) +
                        " frames, video has " + std::to_string(video->length));
    PredTrack track;
    track.index = static_cast<int>(i);
    track.video_id = r.video_id;
    track.score = r.score;
    for (size_t f = 0; f < r.segmentations.size(); ++f) {
      if (!r.segmentations[f]) continue;
      const Rle& rle = *r.segmentations[f];
      if (rle.height != video->height || rle.width != video->width)
        throw FormatError("evaluate: results[" + std::to_string(i) +
                          "] frame " + std::to_string(f) +
                          " RLE size does not match video " +
                          std::to_string(r.video_id));
      track.masks[static_cast<int>(f)] = rle_decode(rle);
    }
    pred_by_cat[r.category_id].push_back(std::move(track));
  }

  std::vector<double> thresholds;
  for (int i = 0; i < 10; ++i) thresholds.push_back(0.5 + 0.05 * i);

  EvalReport report;
  double ap_sum = 0.0, ap50_sum = 0.0, ap75_sum = 0.0;
  double ar1_sum = 0.0, ar10_sum = 0.0;
  int categories_counted = 0;

  for (const auto& [cat, gts] : gt_by_cat) {
    std::vector<PredTrack> preds;
    if (auto it = pred_by_cat.find(cat); it != pred_by_cat.end())
      preds = it->second;
    std::stable_sort(preds.begin(), preds.end(),
                     [](const PredTrack& a, const PredTrack& b) {
                       if (a.score != b.score) return a.score > b.score;
                       return a.index < b.index;
                     });

    // Video-level IoU of every (prediction, ground truth) pair in the same
    // video, shared across thresholds.
    std::vector<std::vector<double>> ious(preds.size(),
                                          std::vector<double>(gts.size(), 0.0));
    for (size_t p = 0; p < preds.size(); ++p)
      for (size_t g = 0; g < gts.size(); ++g)
        if (preds[p].video_id == gts[g].video_id)
          ious[p][g] = st_miou(preds[p].masks, gts[g].masks);

    auto greedy_flags = [&](const std::vector<size_t>& pred_order,
                            double thresh) {
      std::vector<char> taken(gts.size(), 0);
      std::vector<char> tp;
      long matched = 0;
      for (size_t p : pred_order) {
        double best = -1.0;
        int best_g = -1;
        for (size_t g = 0; g < gts.size(); ++g) {
          if (taken[g] || preds[p].video_id != gts[g].video_id) continue;
          if (ious[p][g] > best) {
            best = ious[p][g];
            best_g = static_cast<int>(g);
          }
        }
        if (best_g >= 0 && best >= thresh) {
          taken[best_g] = 1;
          tp.push_back(1);
          ++matched;
        } else {
          tp.push_back(0);
        }
      }
      return std::pair<std::vector<char>, long>(std::move(tp), matched);
    };

    std::vector<size_t> all_order(preds.size());
    std::iota(all_order.begin(), all_order.end(), size_t{0});

    auto top_n_order = [&](int n) {
      std::map<int, int> used;
      std::vector<size_t> order;
      for (size_t p = 0; p < preds.size(); ++p)
        if (used[preds[p].video_id]++ < n) order.push_back(p);
      return order;
    };
    const std::vector<size_t> top1 = top_n_order(1);
    const std::vector<size_t> top10 = top_n_order(10);

    double cat_ap = 0.0, cat_ar1 = 0.0, cat_ar10 = 0.0;
    double cat_ap50 = 0.0, cat_ap75 = 0.0;
    for (double thresh : thresholds) {
      auto [flags, matched] = greedy_flags(all_order, thresh);
      const double ap = ap_101(flags, static_cast<long>(gts.size()));
      cat_ap += ap;
      if (thresh == 0.5) cat_ap50 = ap;
      if (std::abs(thresh - 0.75) < 1e-9) cat_ap75 = ap;
      cat_ar1 += static_cast<double>(greedy_flags(top1, thresh).second) /
                 static_cast<double>(gts.size());
      cat_ar10 += static_cast<double>(greedy_flags(top10, thresh).second) /
                  static_cast<double>(gts.size());
    }
    cat_ap /= thresholds.size();
    cat_ar1 /= thresholds.size();
    cat_ar10 /= thresholds.size();

    report.per_category.push_back(CategoryAp{cat, cat_ap});
    ap_sum += cat_ap;
    ap50_sum += cat_ap50;
    ap75_sum += cat_ap75;
    ar1_sum += cat_ar1;
    ar10_sum += cat_ar10;
    ++categories_counted;
  }

  if (categories_counted > 0) {
    report.ap = ap_sum / categories_counted;
    report.ap50 = ap50_sum / categories_counted;
    report.ap75 = ap75_sum / categories_counted;
    report.ar1 = ar1_sum / categories_counted;
    report.ar10 = ar10_sum / categories_counted;
  }
  return report;
}

}  // namespace cico
