#include "cico/tracking.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "cico/training.hpp"

namespace cico {

double match_score(const ClipDetection& prev, const ClipDetection& cur,
                   const MatchScoreConfig& cfg) {
  const double sim = embed_similarity(prev.embedding, cur.embedding);

  const int prev_end = prev.frame_start + prev.mask.frame_count() - 1;
  const int lo = std::max(prev.frame_start, cur.frame_start);
  const int hi = std::min(prev_end,
                          cur.frame_start + cur.mask.frame_count() - 1);

  double miou = 0.0, biou = 0.0;
  if (lo <= hi) {
    // Average agreement over the frames both clips cover.
    for (int f = lo; f <= hi; ++f) {
      const int pi = f - prev.frame_start;
      const int ci = f - cur.frame_start;
      miou += mask_iou(prev.mask.frames[pi], cur.mask.frames[ci]);
      biou += box_iou(prev.frame_boxes[pi], cur.frame_boxes[ci]);
    }
    miou /= (hi - lo + 1);
    biou /= (hi - lo + 1);
  } else {
    // No shared frames: compare the nearest frames across the gap.
    miou = mask_iou(prev.mask.frames.back(), cur.mask.frames.front());
    biou = box_iou(prev.frame_boxes.back(), cur.frame_boxes.front());
  }
  return cfg.alpha_embed * sim + cfg.alpha_miou * miou + cfg.alpha_biou * biou;
}

std::vector<int> link_clips(TrackState& state,
                            const std::vector<ClipDetection>& dets,
                            const MatchScoreConfig& cfg,
                            std::vector<LinkDecision>* decisions) {
  std::vector<int> ids(dets.size(), 0);
  if (state.clips_seen == 0) {
    for (size_t i = 0; i < dets.size(); ++i) {
      ids[i] = ++state.max_id;
      if (decisions)
        decisions->push_back(
            LinkDecision{static_cast<int>(i), ids[i], true, 0.0, -1});
    }
  } else {
    std::vector<size_t> order(dets.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      return dets[a].score > dets[b].score;
    });
    std::vector<bool> consumed(state.prev_dets.size(), false);
    for (size_t idx : order) {
      double best = 0.0;
      int best_prev = -1;
      for (size_t j = 0; j < state.prev_dets.size(); ++j) {
        if (consumed[j]) continue;
        const double s = match_score(state.prev_dets[j], dets[idx], cfg);
        if (s > best) {
          best = s;
          best_prev = static_cast<int>(j);
        }
      }
      if (best_prev >= 0 && best > cfg.tau) {
        ids[idx] = state.prev_ids[best_prev];
        consumed[best_prev] = true;
        if (decisions)
          decisions->push_back(LinkDecision{static_cast<int>(idx), ids[idx],
                                            false, best, best_prev});
      } else {
        ids[idx] = ++state.max_id;
        if (decisions)
          decisions->push_back(
              LinkDecision{static_cast<int>(idx), ids[idx], true, best, -1});
      }
    }
  }
  state.prev_dets = dets;
  state.prev_ids = ids;
  ++state.clips_seen;
  return ids;
}

std::vector<VideoTrack> merge_video(const std::vector<TrackedDetection>& dets) {
  std::map<int, std::vector<const TrackedDetection*>> by_id;
  for (const TrackedDetection& td : dets) by_id[td.id].push_back(&td);

  std::vector<VideoTrack> out;
  for (auto& [id, group] : by_id) {
    std::stable_sort(group.begin(), group.end(),
                     [](const TrackedDetection* a, const TrackedDetection* b) {
                       return a->det.clip_index < b->det.clip_index;
                     });
    VideoTrack track;
    track.id = id;

    std::map<int, std::pair<int, double>> votes;  // category -> (count, score sum)
    double score_sum = 0.0;
    for (const TrackedDetection* td : group) {
      const ClipDetection& d = td->det;
      // Ascending clip order, so later clips overwrite shared frames.
      for (int t = 0; t < d.mask.frame_count(); ++t) {
        track.frame_masks[d.frame_start + t] = d.mask.frames[t];
        track.frame_boxes[d.frame_start + t] = d.frame_boxes[t];
      }
      auto& v = votes[d.category];
      v.first += 1;
      v.second += d.score;
      score_sum += d.score;
    }
    int best_cat = 0, best_count = -1;
    double best_mean = -1.0;
    for (const auto& [cat, v] : votes) {
      const double mean = v.second / v.first;
      if (v.first > best_count ||
          (v.first == best_count && mean > best_mean)) {
        best_cat = cat;
        best_count = v.first;
        best_mean = mean;
      }
    }
    track.category = best_cat;
    track.score = score_sum / static_cast<double>(group.size());
    out.push_back(std::move(track));
  }
  return out;
}

}  // namespace cico
