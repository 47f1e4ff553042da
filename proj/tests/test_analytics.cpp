#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

#include "cico/analytics.hpp"
#include "cico/errors.hpp"

using namespace cico;

namespace {

BinaryMask rect_mask(int h, int w, int x0, int y0, int x1, int y1) {
  BinaryMask m(h, w, 0);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) m.at(y, x) = 1;
  return m;
}

// One instance whose per-frame rectangle is given in COCO [x, y, w, h] form;
// frames without an entry stay null.
Annotation track_annotation(int id, int video_id, int category, int video_len,
                            int img_h, int img_w,
                            const std::map<int, std::array<double, 4>>& frames) {
  Annotation ann;
  ann.id = id;
  ann.video_id = video_id;
  ann.category_id = category;
  ann.segmentations.resize(video_len);
  ann.bboxes.resize(video_len);
  for (const auto& [f, b] : frames) {
    ann.bboxes[f] = b;
    ann.segmentations[f] = rle_encode(
        rect_mask(img_h, img_w, int(b[0]), int(b[1]), int(b[0] + b[2]),
                  int(b[1] + b[3])));
  }
  return ann;
}

AnnotationSet base_set(int video_len, int img_h = 64, int img_w = 64) {
  AnnotationSet set;
  set.videos.push_back(VideoInfo{1, img_w, img_h, video_len});
  set.categories.push_back(CategoryInfo{1, "thing"});
  return set;
}

}  // namespace

TEST_CASE("a static instance is perfectly coherent at every gap") {
  AnnotationSet set = base_set(6);
  std::map<int, std::array<double, 4>> frames;
  for (int f = 0; f < 6; ++f) frames[f] = {10, 10, 20, 20};
  set.annotations.push_back(track_annotation(1, 1, 1, 6, 64, 64, frames));

  const CoherenceReport report = coherence_stats(set, 4);
  REQUIRE(report.per_delta.size() == 4);
  for (const DeltaCoherence& dc : report.per_delta) {
    CHECK(dc.biou_samples > 0);
    CHECK(dc.miou_samples == dc.biou_samples);
    CHECK(dc.frac_biou_ge_075 == 1.0);
    CHECK(dc.frac_miou_ge_075 == 1.0);
    // Every observed value is exactly 1 and lands in the closing bin.
    CHECK(dc.biou_hist[19] == dc.biou_samples);
    CHECK(dc.miou_hist[19] == dc.miou_samples);
  }
}

TEST_CASE("a translating instance matches exhaustive enumeration") {
  // 20x20 square moving one pixel per frame over 12 frames.
  const int len = 12;
  AnnotationSet set = base_set(len);
  std::map<int, std::array<double, 4>> frames;
  for (int f = 0; f < len; ++f) frames[f] = {double(f), 10, 20, 20};
  set.annotations.push_back(track_annotation(1, 1, 1, len, 64, 64, frames));

  const CoherenceReport report = coherence_stats(set, 4);
  REQUIRE(report.per_delta.size() == 4);
  for (int delta = 1; delta <= 4; ++delta) {
    // Enumerate the expected sweep directly. At gap delta every defined value
    // equals the overlap ratio of two squares offset by delta pixels.
    const double inter = (20.0 - delta) * 20.0;
    const double v = inter / (800.0 - inter);
    long samples = 0, hits = 0;
    std::array<long, 20> hist{};
    for (int t = 0; t < len; ++t) {
      if (t - delta < 0 && t + delta >= len) continue;
      ++samples;
      ++hist[std::min(19, int(std::floor(v / 0.05)))];
      if (v >= 0.75) ++hits;
    }

    const DeltaCoherence& dc = report.per_delta[delta - 1];
    CHECK(dc.delta == delta);
    CHECK(dc.biou_samples == samples);
    CHECK(dc.miou_samples == samples);
    CHECK(dc.biou_hist == hist);
    CHECK(dc.miou_hist == hist);
    CHECK(dc.frac_biou_ge_075 ==
          doctest::Approx(double(hits) / samples).epsilon(1e-12));
    CHECK(dc.frac_miou_ge_075 ==
          doctest::Approx(double(hits) / samples).epsilon(1e-12));
  }
  // Sanity on the values themselves: gaps 1 and 2 clear 0.75, gaps 3 and 4
  // fall below it.
  CHECK(report.per_delta[0].frac_biou_ge_075 == 1.0);
  CHECK(report.per_delta[1].frac_biou_ge_075 == 1.0);
  CHECK(report.per_delta[2].frac_biou_ge_075 == 0.0);
  CHECK(report.per_delta[3].frac_biou_ge_075 == 0.0);
}

TEST_CASE("frames with no reachable neighbour are skipped, not zeroed") {
  AnnotationSet set = base_set(5);
  set.annotations.push_back(track_annotation(
      1, 1, 1, 5, 64, 64,
      {{0, {0, 0, 10, 10}}, {1, {2, 0, 10, 10}}, {3, {5, 0, 10, 10}}}));

  const CoherenceReport report = coherence_stats(set, 2);
  // Gap 1: frames 0 and 1 see each other; frame 3 is isolated.
  CHECK(report.per_delta[0].biou_samples == 2);
  // Gap 2: frames 1 and 3 see each other; frame 0 has no partner.
  CHECK(report.per_delta[1].biou_samples == 2);

  // Both gap-1 values equal iou of the two-pixel shift: 80/120.
  const double v1 = 80.0 / 120.0;
  CHECK(report.per_delta[0].biou_hist[int(std::floor(v1 / 0.05))] == 2);
  CHECK(report.per_delta[0].frac_biou_ge_075 == 0.0);
}

TEST_CASE("coherence input validation") {
  AnnotationSet empty = base_set(4);
  CHECK_THROWS_AS(coherence_stats(empty, 2), FormatError);
  AnnotationSet set = base_set(4);
  set.annotations.push_back(
      track_annotation(1, 1, 1, 4, 64, 64, {{0, {0, 0, 4, 4}}}));
  CHECK_THROWS_AS(coherence_stats(set, 0), FormatError);
}

namespace {

ResultEntry result_of(int video, int category, double score,
                      const std::vector<std::optional<BinaryMask>>& masks) {
  ResultEntry r;
  r.video_id = video;
  r.category_id = category;
  r.score = score;
  for (const auto& m : masks)
    r.segmentations.push_back(m ? std::optional<Rle>(rle_encode(*m))
                                : std::nullopt);
  return r;
}

}  // namespace

TEST_CASE("perfect predictions score 1 everywhere except the top-1 recall cap") {
  AnnotationSet set = base_set(2, 8, 8);
  set.annotations.push_back(
      track_annotation(1, 1, 1, 2, 8, 8, {{0, {0, 0, 3, 3}}, {1, {1, 0, 3, 3}}}));
  set.annotations.push_back(
      track_annotation(2, 1, 1, 2, 8, 8, {{0, {4, 4, 3, 3}}, {1, {4, 4, 3, 3}}}));

  ResultsFile results;
  results.push_back(result_of(1, 1, 0.9,
                              {rect_mask(8, 8, 0, 0, 3, 3),
                               rect_mask(8, 8, 1, 0, 4, 3)}));
  results.push_back(result_of(1, 1, 0.8,
                              {rect_mask(8, 8, 4, 4, 7, 7),
                               rect_mask(8, 8, 4, 4, 7, 7)}));

  const EvalReport report = evaluate(results, set);
  CHECK(report.ap == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(report.ap50 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(report.ap75 == doctest::Approx(1.0).epsilon(1e-12));
  // Top-1 per video only reaches half the ground truth.
  CHECK(report.ar1 == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(report.ar10 == doctest::Approx(1.0).epsilon(1e-12));
  REQUIRE(report.per_category.size() == 1);
  CHECK(report.per_category[0].category_id == 1);
  CHECK(report.per_category[0].ap == doctest::Approx(1.0));
}

TEST_CASE("no predictions means zero precision and recall") {
  AnnotationSet set = base_set(1, 8, 8);
  set.annotations.push_back(
      track_annotation(1, 1, 1, 1, 8, 8, {{0, {0, 0, 3, 3}}}));
  const EvalReport report = evaluate({}, set);
  CHECK(report.ap == 0.0);
  CHECK(report.ap50 == 0.0);
  CHECK(report.ar1 == 0.0);
  REQUIRE(report.per_category.size() == 1);
}

TEST_CASE("a 0.6-overlap prediction against two tracks: frozen curve values") {
  // Single-frame video; one prediction overlapping the first of two ground
  // truths with spatio-temporal IoU exactly 3/5.
  AnnotationSet set = base_set(1, 4, 4);
  set.annotations.push_back(
      track_annotation(1, 1, 1, 1, 4, 4, {{0, {0, 0, 2, 2}}}));
  set.annotations.push_back(
      track_annotation(2, 1, 1, 1, 4, 4, {{0, {3, 3, 1, 1}}}));

  BinaryMask pred(4, 4, 0);
  pred.at(0, 0) = pred.at(0, 1) = pred.at(1, 0) = 1;  // 3 of gt 1's 4 pixels
  pred.at(2, 2) = 1;                                  // 1 stray pixel
  const ResultsFile results = {result_of(1, 1, 0.9, {pred})};

  const EvalReport report = evaluate(results, set);
  // Matched at thresholds 0.50, 0.55, 0.60; missed above. With the match the
  // precision envelope is 1 up to recall 1/2, so 51 of the 101 recall points
  // contribute.
  CHECK(report.ap50 == doctest::Approx(51.0 / 101.0).epsilon(1e-12));
  CHECK(report.ap75 == 0.0);
  CHECK(report.ap == doctest::Approx(3.0 * (51.0 / 101.0) / 10.0).epsilon(1e-12));
  CHECK(report.ar1 == doctest::Approx(3.0 * 0.5 / 10.0).epsilon(1e-12));
  CHECK(report.ar10 == report.ar1);
}

TEST_CASE("false positives beyond full recall do not lower precision") {
  AnnotationSet set = base_set(1, 8, 8);
  set.annotations.push_back(
      track_annotation(1, 1, 1, 1, 8, 8, {{0, {0, 0, 4, 4}}}));
  const BinaryMask m = rect_mask(8, 8, 0, 0, 4, 4);
  const ResultsFile results = {result_of(1, 1, 0.9, {m}),
                               result_of(1, 1, 0.8, {m})};
  const EvalReport report = evaluate(results, set);
  CHECK(report.ap50 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(report.ap == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("greedy matching picks the highest-overlap unmatched track") {
  // One prediction overlaps both tracks; it must match the closer one, and a
  // second prediction then takes the other.
  AnnotationSet set = base_set(1, 8, 8);
  set.annotations.push_back(
      track_annotation(1, 1, 1, 1, 8, 8, {{0, {0, 0, 4, 4}}}));
  set.annotations.push_back(
      track_annotation(2, 1, 1, 1, 8, 8, {{0, {0, 4, 4, 4}}}));

  const ResultsFile results = {
      result_of(1, 1, 0.9, {rect_mask(8, 8, 0, 1, 4, 5)}),  // closer to gt 1
      result_of(1, 1, 0.8, {rect_mask(8, 8, 0, 4, 4, 8)}),  // exactly gt 2
  };
  const EvalReport report = evaluate(results, set);
  // Pred 1 vs gt 1: inter 12, union 20 -> 0.6; it takes gt 1 at tau 0.5.
  // Pred 2 then matches gt 2 exactly.
  CHECK(report.ap50 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(report.ar10 == doctest::Approx(3.0 / 10.0 + 7.0 * 0.5 / 10.0));
}

TEST_CASE("categories without ground truth stay out of the averages") {
  AnnotationSet set = base_set(1, 8, 8);
  set.categories.push_back(CategoryInfo{2, "other"});
  set.annotations.push_back(
      track_annotation(1, 1, 1, 1, 8, 8, {{0, {0, 0, 4, 4}}}));
  const ResultsFile results = {
      result_of(1, 1, 0.9, {rect_mask(8, 8, 0, 0, 4, 4)}),
      result_of(1, 2, 0.9, {rect_mask(8, 8, 4, 4, 8, 8)}),  // no gt to hit
  };
  const EvalReport report = evaluate(results, set);
  CHECK(report.ap == doctest::Approx(1.0).epsilon(1e-12));
  REQUIRE(report.per_category.size() == 1);
  CHECK(report.per_category[0].category_id == 1);
}

TEST_CASE("an annotation set with no instances evaluates to zero") {
  const AnnotationSet set = base_set(1, 8, 8);
  const EvalReport report = evaluate({}, set);
  CHECK(report.ap == 0.0);
  CHECK(report.per_category.empty());
}

TEST_CASE("evaluation validates predictions against the catalogue") {
  AnnotationSet set = base_set(1, 8, 8);
  set.annotations.push_back(
      track_annotation(1, 1, 1, 1, 8, 8, {{0, {0, 0, 4, 4}}}));
  const BinaryMask m = rect_mask(8, 8, 0, 0, 4, 4);

  CHECK_THROWS_AS(evaluate({result_of(9, 1, 0.9, {m})}, set), FormatError);
  CHECK_THROWS_AS(evaluate({result_of(1, 9, 0.9, {m})}, set), FormatError);
  CHECK_THROWS_AS(evaluate({result_of(1, 1, 0.9, {m, m})}, set), FormatError);
  CHECK_THROWS_AS(
      evaluate({result_of(1, 1, 0.9, {rect_mask(4, 4, 0, 0, 2, 2)})}, set),
      FormatError);
}
