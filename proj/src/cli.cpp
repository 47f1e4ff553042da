#include "cico/cli.hpp"

#include <filesystem>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cico/analytics.hpp"
#include "cico/engine.hpp"
#include "cico/errors.hpp"
#include "cico/synth.hpp"

namespace cico {

namespace {

using nlohmann::json;

void emit(const json& j, const std::string& out_path) {
  const std::string text = j.dump(2) + "\n";
  if (!out_path.empty()) {
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + out_path + " for writing");
    out << text;
    if (!out) throw IoError("write failed on " + out_path);
  } else {
    std::cout << text;
  }
}

json rle_json(const Rle& rle) {
  return json{{"size", {rle.height, rle.width}}, {"counts", rle.counts}};
}

int run_synth(const SynthParams& params, const std::string& out_dir) {
  const SynthOutput out = synth_generate(params);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create directory " + out_dir);
  write_annotations(out.annotations, out_dir + "/annotations.json");
  write_netout(out.netout, out_dir + "/netout.cco");
  write_engine_config(out.config, out_dir + "/config.json");
  std::cout << "wrote " << out_dir << "/annotations.json, netout.cco, config.json"
            << std::endl;
  return 0;
}

int run_infer(const std::string& netout_path, const std::string& config_path,
              const std::string& out_path, const std::string& dump_path,
              int threads) {
  const NetOutContainer container = read_netout(netout_path);
  const EngineConfig cfg = read_engine_config(config_path);
  EngineOptions opts;
  opts.threads = threads;
  opts.track_dump_path = dump_path;
  const std::vector<VideoResult> videos = run_container(container, cfg, opts);
  write_results(results_from_videos(videos), out_path);
  size_t tracks = 0;
  for (const VideoResult& v : videos) tracks += v.tracks.size();
  std::cout << "wrote " << out_path << " (" << videos.size() << " videos, "
            << tracks << " tracks)" << std::endl;
  return 0;
}

int run_loss(const std::string& netout_path, const std::string& gt_path,
             const std::string& config_path, const std::string& out_path) {
  const NetOutContainer container = read_netout(netout_path);
  const AnnotationSet gt = read_annotations(gt_path);
  const EngineConfig cfg = read_engine_config(config_path);
  const LossReport report = evaluate_losses(container, gt, cfg);
  emit(json{{"cls", report.cls},
            {"reg", report.reg},
            {"mask", report.mask},
            {"track", report.track},
            {"total", report.total},
            {"clips", report.clips}},
       out_path);
  return 0;
}

int run_eval(const std::string& results_path, const std::string& gt_path,
             const std::string& out_path) {
  const ResultsFile results = read_results(results_path);
  const AnnotationSet gt = read_annotations(gt_path);
  const EvalReport report = evaluate(results, gt);
  json per_category = json::array();
  for (const CategoryAp& c : report.per_category)
    per_category.push_back({{"category_id", c.category_id}, {"ap", c.ap}});
  emit(json{{"ap", report.ap},
            {"ap50", report.ap50},
            {"ap75", report.ap75},
            {"ar1", report.ar1},
            {"ar10", report.ar10},
            {"per_category", std::move(per_category)}},
       out_path);
  return 0;
}

int run_coherence(const std::string& gt_path, int delta_max,
                  const std::string& out_path) {
  const AnnotationSet gt = read_annotations(gt_path);
  const CoherenceReport report = coherence_stats(gt, delta_max);
  json deltas = json::array();
  for (const DeltaCoherence& d : report.per_delta)
    deltas.push_back({{"delta", d.delta},
                      {"biou_hist", d.biou_hist},
                      {"miou_hist", d.miou_hist},
                      {"biou_samples", d.biou_samples},
                      {"miou_samples", d.miou_samples},
                      {"frac_biou_ge_075", d.frac_biou_ge_075},
                      {"frac_miou_ge_075", d.frac_miou_ge_075}});
  emit(json{{"per_delta", std::move(deltas)}}, out_path);
  return 0;
}

int run_assemble(const std::string& netout_path, const std::string& config_path,
                 int clip_index, int video_id, const std::string& out_path) {
  const NetOutContainer container = read_netout(netout_path);
  const EngineConfig cfg = read_engine_config(config_path);
  const ClipNetOut* clip = nullptr;
  for (const ClipNetOut& c : container.clips)
    if (c.clip_index == clip_index && (video_id == 0 || c.video_id == video_id))
      clip = &c;
  if (!clip)
    throw FormatError("assemble: no clip with index " +
                      std::to_string(clip_index) +
                      (video_id ? " in video " + std::to_string(video_id) : ""));
  InferenceConfig infer_cfg;
  infer_cfg.confidence_thresh = cfg.confidence_thresh;
  infer_cfg.nms_thresh = cfg.nms_thresh;
  infer_cfg.top_k = cfg.top_k;
  const std::vector<ClipDetection> dets = run_clip(*clip, infer_cfg, container);
  json out;
  out["video_id"] = clip->video_id;
  out["clip_index"] = clip->clip_index;
  out["frame_start"] = clip->frame_start;
  out["frame_end"] = clip->frame_end;
  json det_list = json::array();
  for (const ClipDetection& det : dets) {
    json frames = json::array();
    for (const BinaryMask& m : det.mask.frames) frames.push_back(rle_json(rle_encode(m)));
    det_list.push_back({{"category", det.category},
                        {"score", det.score},
                        {"anchor", det.anchor},
                        {"masks", std::move(frames)}});
  }
  out["detections"] = std::move(det_list);
  emit(out, out_path);
  return 0;
}

}  // namespace

int cli_dispatch(const std::vector<std::string>& args) {
  CLI::App app{"clip-in clip-out video instance segmentation engine"};
  app.require_subcommand(1);

  SynthParams synth_params;
  std::string synth_out;
  CLI::App* synth = app.add_subcommand(
      "synth", "generate a synthetic benchmark with ideal network output");
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--videos", synth_params.videos, "video count");
  synth->add_option("--frames", synth_params.frames, "frames per video");
  synth->add_option("--shapes", synth_params.shapes, "instances per video");
  synth->add_option("--width", synth_params.image_w, "image width");
  synth->add_option("--height", synth_params.image_h, "image height");
  synth->add_option("--max-speed", synth_params.max_speed,
                    "max speed in pixels per frame");
  synth->add_option("--seed", synth_params.seed, "random seed");
  synth->add_option("--clip-len", synth_params.clip_len, "clip length");
  synth->add_option("--overlap", synth_params.clip_overlap, "clip overlap");

  std::string infer_netout, infer_config, infer_out, infer_dump;
  int infer_threads = 1;
  CLI::App* infer =
      app.add_subcommand("infer", "run detection and tracking on a container");
  infer->add_option("--netout", infer_netout, "network output container")
      ->required();
  infer->add_option("--config", infer_config, "engine config")->required();
  infer->add_option("--out", infer_out, "results file")->required();
  infer->add_option("--dump-track", infer_dump,
                    "write per-clip association decisions (JSON lines)");
  infer->add_option("--threads", infer_threads, "worker count");

  std::string loss_netout, loss_gt, loss_config, loss_out;
  CLI::App* loss =
      app.add_subcommand("loss", "evaluate training losses for a container");
  loss->add_option("--netout", loss_netout, "network output container")
      ->required();
  loss->add_option("--gt", loss_gt, "ground-truth annotations")->required();
  loss->add_option("--config", loss_config, "engine config")->required();
  loss->add_option("--out", loss_out, "write the report here instead of stdout");

  std::string eval_results, eval_gt, eval_out;
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "score results against ground truth");
  eval_cmd->add_option("--results", eval_results, "results file")->required();
  eval_cmd->add_option("--gt", eval_gt, "ground-truth annotations")->required();
  eval_cmd->add_option("--out", eval_out,
                       "write the report here instead of stdout");

  std::string coh_gt, coh_out;
  int coh_delta_max = 4;
  CLI::App* coherence = app.add_subcommand(
      "coherence", "temporal consistency statistics of ground truth");
  coherence->add_option("--gt", coh_gt, "ground-truth annotations")->required();
  coherence->add_option("--delta-max", coh_delta_max, "largest frame gap");
  coherence->add_option("--out", coh_out,
                        "write the report here instead of stdout");

  std::string asm_netout, asm_config, asm_out;
  int asm_clip = 0, asm_video = 0;
  CLI::App* assemble = app.add_subcommand(
      "assemble", "assemble instance masks for one clip of a container");
  assemble->add_option("--netout", asm_netout, "network output container")
      ->required();
  assemble->add_option("--config", asm_config, "engine config")->required();
  assemble->add_option("--out", asm_out, "write the masks here instead of stdout");
  assemble->add_option("--clip", asm_clip, "clip index");
  assemble->add_option("--video", asm_video, "video id (0 = any)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (synth->parsed()) return run_synth(synth_params, synth_out);
    if (infer->parsed())
      return run_infer(infer_netout, infer_config, infer_out, infer_dump,
                       infer_threads);
    if (loss->parsed()) return run_loss(loss_netout, loss_gt, loss_config, loss_out);
    if (eval_cmd->parsed()) return run_eval(eval_results, eval_gt, eval_out);
    if (coherence->parsed())
      return run_coherence(coh_gt, coh_delta_max, coh_out);
    if (assemble->parsed())
      return run_assemble(asm_netout, asm_config, asm_clip, asm_video, asm_out);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 1;
}

}  // namespace cico
