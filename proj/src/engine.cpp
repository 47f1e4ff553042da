#include "cico/engine.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <future>
#include <map>
#include <mutex>
#include <stdexcept>

#include <json.hpp>

#include "cico/errors.hpp"
#include "cico/training.hpp"

namespace cico {

namespace {

using nlohmann::json;

// Runs fn(i) for i in [0, n) across the requested number of workers. Each
// index writes only its own slot, so the schedule cannot affect results.
template <typename Fn>
void parallel_for(int n, int threads, Fn fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::future<void>> workers;
  std::atomic<int> next{0};
  for (int w = 0; w < threads; ++w)
    workers.push_back(std::async(std::launch::async, [&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    }));
  for (auto& worker : workers) worker.get();
}

}  // namespace

std::vector<VideoResult> run_container(const NetOutContainer& container,
                                       const EngineConfig& cfg,
                                       const EngineOptions& opts) {
  validate_engine_config(cfg);

  std::map<int, std::vector<const ClipNetOut*>> by_video;
  for (const ClipNetOut& clip : container.clips)
    by_video[clip.video_id].push_back(&clip);
  for (auto& [video_id, clips] : by_video) {
    std::sort(clips.begin(), clips.end(),
              [](const ClipNetOut* a, const ClipNetOut* b) {
                return a->clip_index < b->clip_index;
              });
    for (size_t i = 0; i < clips.size(); ++i)
      if (clips[i]->clip_index != static_cast<int>(i))
        throw FormatError("run_container: video " + std::to_string(video_id) +
                          " clip indices are not dense from 0");
  }

  InferenceConfig infer_cfg;
  infer_cfg.confidence_thresh = cfg.confidence_thresh;
  infer_cfg.nms_thresh = cfg.nms_thresh;
  infer_cfg.top_k = cfg.top_k;

  // Flat task list over all clips; detection is independent per clip.
  std::vector<const ClipNetOut*> tasks;
  for (const auto& [video_id, clips] : by_video)
    tasks.insert(tasks.end(), clips.begin(), clips.end());
  std::vector<std::vector<ClipDetection>> detections(tasks.size());
  std::exception_ptr first_error;
  std::mutex error_mutex;
  parallel_for(static_cast<int>(tasks.size()), opts.threads, [&](int i) {
    try {
      detections[static_cast<size_t>(i)] =
          run_clip(*tasks[static_cast<size_t>(i)], infer_cfg, container);
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!first_error) first_error = std::current_exception();
    }
  });
  if (first_error) std::rethrow_exception(first_error);

  std::map<const ClipNetOut*, size_t> task_slot;
  for (size_t i = 0; i < tasks.size(); ++i) task_slot[tasks[i]] = i;

  std::ofstream dump;
  if (!opts.track_dump_path.empty()) {
    dump.open(opts.track_dump_path, std::ios::trunc);
    if (!dump)
      throw IoError("cannot open " + opts.track_dump_path + " for writing");
  }

  MatchScoreConfig match_cfg;
  match_cfg.alpha_embed = cfg.track_alpha_embed;
  match_cfg.alpha_miou = cfg.track_alpha_miou;
  match_cfg.alpha_biou = cfg.track_alpha_biou;
  match_cfg.tau = cfg.track_tau;

  std::vector<VideoResult> out;
  for (const auto& [video_id, clips] : by_video) {
    TrackState state;
    std::vector<TrackedDetection> tracked;
    VideoResult result;
    result.video_id = video_id;
    for (const ClipNetOut* clip : clips) {
      const std::vector<ClipDetection>& dets = detections[task_slot[clip]];
      std::vector<LinkDecision> decisions;
      const std::vector<int> ids = link_clips(state, dets, match_cfg, &decisions);
      for (size_t i = 0; i < dets.size(); ++i)
        tracked.push_back(TrackedDetection{dets[i], ids[i]});
      if (dump.is_open()) {
        json line;
        line["video_id"] = video_id;
        line["clip_index"] = clip->clip_index;
        json decs = json::array();
        for (const LinkDecision& d : decisions)
          decs.push_back({{"det", d.det},
                          {"id", d.id},
                          {"fresh", d.fresh},
                          {"best_score", d.best_score},
                          {"best_prev", d.best_prev}});
        line["decisions"] = std::move(decs);
        dump << line.dump() << "\n";
      }
      result.frame_count = std::max(result.frame_count, clip->frame_end + 1);
      const int w = clip->prototypes.w * kPrototypeStride;
      const int h = clip->prototypes.h * kPrototypeStride;
      if (result.width == 0) {
        result.width = w;
        result.height = h;
      } else if (result.width != w || result.height != h) {
        throw FormatError("run_container: video " + std::to_string(video_id) +
                          " mixes prototype resolutions");
      }
    }
    result.tracks = merge_video(tracked);
    out.push_back(std::move(result));
  }
  if (dump.is_open()) {
    dump.flush();
    if (!dump) throw IoError("write failed on " + opts.track_dump_path);
  }
  return out;
}

ResultsFile results_from_videos(const std::vector<VideoResult>& videos) {
  ResultsFile out;
  for (const VideoResult& video : videos) {
    for (const VideoTrack& track : video.tracks) {
      ResultEntry entry;
      entry.video_id = video.video_id;
      entry.category_id = track.category;
      entry.score = track.score;
      entry.segmentations.assign(static_cast<size_t>(video.frame_count),
                                 std::nullopt);
      for (const auto& [frame, mask] : track.frame_masks)
        if (frame >= 0 && frame < video.frame_count)
          entry.segmentations[static_cast<size_t>(frame)] = rle_encode(mask);
      out.push_back(std::move(entry));
    }
  }
  return out;
}

LossReport evaluate_losses(const NetOutContainer& container,
                           const AnnotationSet& gt, const EngineConfig& cfg) {
  validate_engine_config(cfg);
  if (container.clips.empty())
    throw FormatError("evaluate_losses: container has no clips");

  const MatcherConfig matcher{cfg.matcher_eps_pos, cfg.matcher_eps_neg, true};
  const LossWeights weights{cfg.loss_weight_cls, cfg.loss_weight_reg,
                            cfg.loss_weight_mask, cfg.loss_weight_track};

  double cls_sum = 0, reg_sum = 0, mask_sum = 0, track_sum = 0;
  int cls_n = 0, reg_n = 0, mask_n = 0, track_n = 0;

  for (const ClipNetOut& clip : container.clips) {
    const VideoInfo* video = gt.find_video(clip.video_id);
    if (!video)
      throw FormatError("evaluate_losses: container references unknown video " +
                        std::to_string(clip.video_id));
    const int t_len = clip.clip_len();
    const int t_mid = clip.frame_start + (t_len - 1) / 2;

    // Instances of this video restricted to the clip window.
    std::vector<GroundTruthInstance> instances;
    for (const Annotation& ann : gt.annotations) {
      if (ann.video_id != clip.video_id) continue;
      GroundTruthInstance inst;
      inst.id = ann.id;
      inst.category = ann.category_id;
      for (int f = clip.frame_start; f <= clip.frame_end; ++f) {
        if (f < 0 || f >= video->length) continue;
        if (ann.bboxes[static_cast<size_t>(f)]) {
          const auto& b = *ann.bboxes[static_cast<size_t>(f)];
          inst.boxes[f] = Box{b[0], b[1], b[0] + b[2], b[1] + b[3]};
        }
        if (ann.segmentations[static_cast<size_t>(f)])
          inst.masks[f] = rle_decode(*ann.segmentations[static_cast<size_t>(f)]);
      }
      if (!inst.boxes.empty()) instances.push_back(std::move(inst));
    }

    std::vector<Box> anchors;
    {
      AnchorLayout layout{cfg.anchor_config, video->height, video->width};
      anchors = anchors_for_layout(layout);
    }
    if (static_cast<int>(anchors.size()) != clip.count)
      throw FormatError(
          "evaluate_losses: clip " + std::to_string(clip.clip_index) +
          " of video " + std::to_string(clip.video_id) + " has " +
          std::to_string(clip.count) + " records but the anchor grid has " +
          std::to_string(anchors.size()));

    // Matcher targets come from instances present at the central frame.
    std::vector<Box> gt_boxes;
    std::vector<int> gt_instance;  // index into instances
    for (size_t i = 0; i < instances.size(); ++i) {
      if (!instances[i].boxes.count(t_mid)) continue;
      gt_boxes.push_back(matcher_box(instances[i], t_mid, matcher));
      gt_instance.push_back(static_cast<int>(i));
    }
    const MatchResult matches = match_samples(anchors, gt_boxes, matcher);

    const int cols = clip.num_classes + 1;
    std::vector<float> sel_probs;
    std::vector<int> sel_targets;
    for (size_t i = 0; i < matches.kinds.size(); ++i) {
      if (matches.kinds[i] == SampleKind::ignored) continue;
      int target = 0;
      if (matches.kinds[i] == SampleKind::positive) {
        const int cat =
            instances[static_cast<size_t>(gt_instance[static_cast<size_t>(
                          matches.matched_gt[i])])].category;
        if (cat < 1 || cat > clip.num_classes)
          throw FormatError("evaluate_losses: category " + std::to_string(cat) +
                            " exceeds the score columns of the container");
        target = cat;
      }
      sel_probs.insert(sel_probs.end(),
                       clip.scores.begin() + static_cast<size_t>(i) * cols,
                       clip.scores.begin() + static_cast<size_t>(i + 1) * cols);
      sel_targets.push_back(target);
    }
    if (!sel_targets.empty()) {
      cls_sum += loss_cls(sel_probs, cols, sel_targets);
      ++cls_n;
    }

    if (matches.n_pos > 0) {
      std::vector<float> pred_reg, gt_reg;
      std::vector<std::vector<float>> track_embeddings;
      std::vector<int> track_ids;
      for (size_t i = 0; i < matches.kinds.size(); ++i) {
        if (matches.kinds[i] != SampleKind::positive) continue;
        const GroundTruthInstance& inst =
            instances[static_cast<size_t>(gt_instance[static_cast<size_t>(
                matches.matched_gt[i])])];
        // Predicted regression, either direct or re-encoded from boxes.
        if (clip.has_regression()) {
          pred_reg.insert(
              pred_reg.end(),
              clip.box_regression.begin() + static_cast<size_t>(i) * 4 * t_len,
              clip.box_regression.begin() +
                  static_cast<size_t>(i + 1) * 4 * t_len);
        } else {
          const std::vector<Box> frame_boxes(
              clip.boxes.begin() + static_cast<size_t>(i) * t_len,
              clip.boxes.begin() + static_cast<size_t>(i + 1) * t_len);
          const std::vector<float> enc = encode_boxes(anchors[i], frame_boxes);
          pred_reg.insert(pred_reg.end(), enc.begin(), enc.end());
        }
        // Target regression; frames where the instance is absent fall back
        // to its circumscribed box over the clip.
        const Box fallback = circumscribed_box(inst.boxes);
        std::vector<Box> target_boxes;
        for (int t = 0; t < t_len; ++t) {
          auto it = inst.boxes.find(clip.frame_start + t);
          target_boxes.push_back(it != inst.boxes.end() ? it->second : fallback);
        }
        const std::vector<float> enc = encode_boxes(anchors[i], target_boxes);
        gt_reg.insert(gt_reg.end(), enc.begin(), enc.end());

        track_embeddings.emplace_back(
            clip.embeddings.begin() +
                static_cast<size_t>(i) * clip.embedding_dim,
            clip.embeddings.begin() +
                static_cast<size_t>(i + 1) * clip.embedding_dim);
        track_ids.push_back(inst.id);
      }
      reg_sum += loss_reg(pred_reg, gt_reg, 4 * t_len);
      ++reg_n;

      GroundTruthClip gt_clip;
      gt_clip.frame_start = clip.frame_start;
      gt_clip.frame_end = clip.frame_end;
      for (int idx : gt_instance)
        gt_clip.instances.push_back(instances[static_cast<size_t>(idx)]);
      std::vector<std::vector<float>> thetas;
      thetas.reserve(static_cast<size_t>(clip.count));
      for (int i = 0; i < clip.count; ++i)
        thetas.emplace_back(
            clip.mask_params.begin() +
                static_cast<size_t>(i) * clip.mask_param_count,
            clip.mask_params.begin() +
                static_cast<size_t>(i + 1) * clip.mask_param_count);
      mask_sum += loss_mask(clip.prototypes, thetas, clip.head, gt_clip, matches);
      ++mask_n;

      track_sum += loss_track(track_embeddings, track_ids);
      ++track_n;
    }
  }

  LossReport report;
  report.clips = static_cast<int>(container.clips.size());
  report.cls = cls_n ? cls_sum / cls_n : 0.0;
  report.reg = reg_n ? reg_sum / reg_n : 0.0;
  report.mask = mask_n ? mask_sum / mask_n : 0.0;
  report.track = track_n ? track_sum / track_n : 0.0;
  report.total =
      loss_total({report.cls, report.reg, report.mask, report.track}, weights);
  return report;
}

}  // namespace cico
