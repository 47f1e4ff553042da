#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "cico/heads.hpp"
#include "oracles.hpp"

using namespace cico;

namespace {

void randomize(ConvLayerSpec& layer, std::mt19937_64& rng, float span = 1.0f) {
  std::uniform_real_distribution<float> dist(-span, span);
  for (float& v : layer.weights) v = dist(rng);
  for (float& v : layer.bias) v = dist(rng);
}

FeatureCube random_cube(std::mt19937_64& rng, int t, int h, int w, int c,
                        float span = 2.0f) {
  FeatureCube cube(t, h, w, c);
  std::uniform_real_distribution<float> dist(-span, span);
  for (float& v : cube.data) v = dist(rng);
  return cube;
}

FeatureCube random_cube(std::mt19937_64&& rng, int t, int h, int w, int c,
                        float span = 2.0f) {
  return random_cube(rng, t, h, w, c, span);
}

ConvLayerSpec random_layer(std::mt19937_64& rng) {
  const bool three_d = rng() % 2 == 0;
  const int kt = three_d ? 1 + static_cast<int>(rng() % 3) : 1;
  const int kh = 1 + 2 * static_cast<int>(rng() % 2);
  const int kw = 1 + 2 * static_cast<int>(rng() % 2);
  ConvLayerSpec layer = make_conv(
      three_d ? ConvKind::conv3d : ConvKind::conv2d, kt, kh, kw,
      1 + static_cast<int>(rng() % 4), 1 + static_cast<int>(rng() % 4),
      three_d && rng() % 2 == 0 ? kt / 2 : 0, rng() % 2 ? kh / 2 : 0,
      rng() % 2 ? kw / 2 : 0, rng() % 2 == 0);
  randomize(layer, rng);
  return layer;
}

double cube_max_diff(const FeatureCube& a, const FeatureCube& b) {
  REQUIRE(a.same_shape(b));
  double worst = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i)
    worst = std::max(worst, std::abs(static_cast<double>(a.data[i]) -
                                     static_cast<double>(b.data[i])));
  return worst;
}

}  // namespace

TEST_CASE("convolution agrees with a direct-loop reference") {
  std::mt19937_64 rng(20240821);
  for (int trial = 0; trial < 25; ++trial) {
    const ConvLayerSpec layer = random_layer(rng);
    const int t = layer.kt + static_cast<int>(rng() % 3);
    const int h = layer.kh + static_cast<int>(rng() % 5);
    const int w = layer.kw + static_cast<int>(rng() % 5);
    const FeatureCube in = random_cube(rng, t, h, w, layer.in_ch);
    CHECK(cube_max_diff(conv_forward(in, layer), oracle::brute_conv(in, layer)) <=
          1e-5);
  }
}

TEST_CASE("a 1x1x1 identity kernel reproduces the input exactly") {
  ConvLayerSpec layer = make_conv(ConvKind::conv3d, 1, 1, 1, 3, 3, 0, 0, 0,
                                  false);
  for (int oc = 0; oc < 3; ++oc) layer.weights[oc * 3 + oc] = 1.0f;
  const FeatureCube in = random_cube(std::mt19937_64(1), 2, 5, 6, 3);
  const FeatureCube out = conv_forward(in, layer);
  REQUIRE(out.same_shape(in));
  for (size_t i = 0; i < in.data.size(); ++i) CHECK(out.data[i] == in.data[i]);
}

TEST_CASE("zero weights yield the bias everywhere, clamped by relu") {
  ConvLayerSpec layer = make_conv(ConvKind::conv3d, 3, 3, 3, 2, 2, 1, 1, 1,
                                  true);
  layer.bias = {1.5f, -2.0f};
  const FeatureCube in = random_cube(std::mt19937_64(2), 3, 4, 4, 2);
  const FeatureCube out = conv_forward(in, layer);
  for (int t = 0; t < out.t; ++t)
    for (int y = 0; y < out.h; ++y)
      for (int x = 0; x < out.w; ++x) {
        CHECK(out.at(t, y, x, 0) == 1.5f);
        CHECK(out.at(t, y, x, 1) == 0.0f);
      }
}

TEST_CASE("temporal padding replicates edges: constant frames stay constant") {
  std::mt19937_64 rng(3);
  ConvLayerSpec layer = make_conv(ConvKind::conv3d, 3, 3, 3, 2, 3, 1, 1, 1,
                                  false);
  randomize(layer, rng);
  FeatureCube in = random_cube(rng, 1, 6, 6, 2);
  FeatureCube tiled(4, 6, 6, 2);
  for (int t = 0; t < 4; ++t)
    std::copy(in.data.begin(), in.data.end(),
              tiled.data.begin() + t * in.data.size());
  const FeatureCube out = conv_forward(tiled, layer);
  REQUIRE(out.t == 4);
  const size_t frame = out.data.size() / 4;
  for (int t = 1; t < 4; ++t)
    for (size_t i = 0; i < frame; ++i)
      CHECK(out.data[t * frame + i] == doctest::Approx(out.data[i]).epsilon(1e-6));
}

TEST_CASE("convolution is linear when relu is off") {
  std::mt19937_64 rng(4);
  ConvLayerSpec layer = make_conv(ConvKind::conv3d, 2, 3, 3, 2, 2, 1, 1, 1,
                                  false);
  randomize(layer, rng);
  layer.bias.assign(layer.bias.size(), 0.0f);
  const FeatureCube a = random_cube(rng, 3, 5, 5, 2);
  const FeatureCube b = random_cube(rng, 3, 5, 5, 2);
  FeatureCube sum = a;
  for (size_t i = 0; i < sum.data.size(); ++i) sum.data[i] += b.data[i];
  const FeatureCube fa = conv_forward(a, layer);
  const FeatureCube fb = conv_forward(b, layer);
  const FeatureCube fsum = conv_forward(sum, layer);
  for (size_t i = 0; i < fsum.data.size(); ++i)
    CHECK(fsum.data[i] == doctest::Approx(fa.data[i] + fb.data[i]).epsilon(1e-4));
}

TEST_CASE("2d layers equal running each frame through the kernel alone") {
  std::mt19937_64 rng(5);
  ConvLayerSpec layer = make_conv(ConvKind::conv2d, 1, 3, 3, 3, 2, 0, 1, 1,
                                  true);
  randomize(layer, rng);
  const FeatureCube in = random_cube(rng, 4, 6, 7, 3);
  const FeatureCube whole = conv_forward(in, layer);
  for (int t = 0; t < 4; ++t) {
    FeatureCube frame(1, in.h, in.w, in.c);
    std::copy(in.data.begin() + t * frame.data.size(),
              in.data.begin() + (t + 1) * frame.data.size(),
              frame.data.begin());
    const FeatureCube one = conv_forward(frame, layer);
    for (size_t i = 0; i < one.data.size(); ++i)
      CHECK(whole.data[t * one.data.size() + i] == one.data[i]);
  }
}

TEST_CASE("layer validation rejects shape mismatches") {
  const FeatureCube in = random_cube(std::mt19937_64(6), 2, 4, 4, 3);
  ConvLayerSpec wrong_ch = make_conv(ConvKind::conv3d, 1, 3, 3, 2, 2, 0, 1, 1,
                                     false);
  CHECK_THROWS_AS(conv_forward(in, wrong_ch), std::invalid_argument);
  ConvLayerSpec bad_2d = make_conv(ConvKind::conv2d, 2, 3, 3, 3, 2, 0, 1, 1,
                                   false);
  CHECK_THROWS_AS(conv_forward(in, bad_2d), std::invalid_argument);
}

TEST_CASE("deconvolution doubles the spatial size and places taps") {
  DeconvLayerSpec layer = make_deconv(1, 1, false);
  // Kernel [[1,2],[3,4]]: each input cell paints its 2x2 output block.
  layer.weights = {1, 2, 3, 4};
  FeatureCube in(2, 2, 3, 1);
  for (size_t i = 0; i < in.data.size(); ++i) in.data[i] = float(i + 1);
  const FeatureCube out = deconv_upsample(in, layer);
  REQUIRE(out.t == 2);
  REQUIRE(out.h == 4);
  REQUIRE(out.w == 6);
  for (int t = 0; t < 2; ++t)
    for (int y = 0; y < 2; ++y)
      for (int x = 0; x < 3; ++x) {
        const float v = in.at(t, y, x, 0);
        CHECK(out.at(t, 2 * y, 2 * x, 0) == v * 1);
        CHECK(out.at(t, 2 * y, 2 * x + 1, 0) == v * 2);
        CHECK(out.at(t, 2 * y + 1, 2 * x, 0) == v * 3);
        CHECK(out.at(t, 2 * y + 1, 2 * x + 1, 0) == v * 4);
      }
}

TEST_CASE("anchor generation: centres, areas and aspect ratios") {
  AnchorConfig cfg;
  cfg.scales = {24.0};
  cfg.ratios = {1.0};
  cfg.strides = {8};
  const std::vector<Box> single = generate_anchors(cfg, 0, 1, 1);
  REQUIRE(single.size() == 1);
  CHECK(single[0].x1 == doctest::Approx(4.0 - 12.0));
  CHECK(single[0].y1 == doctest::Approx(-8.0));
  CHECK(single[0].x2 == doctest::Approx(16.0));
  CHECK(single[0].y2 == doctest::Approx(16.0));

  cfg.ratios = {0.5, 1.0, 2.0};
  const std::vector<Box> trio = generate_anchors(cfg, 0, 1, 1);
  REQUIRE(trio.size() == 3);
  for (size_t i = 0; i < trio.size(); ++i) {
    CHECK(trio[i].area() == doctest::Approx(576.0));
    CHECK(trio[i].width() / trio[i].height() ==
          doctest::Approx(cfg.ratios[i]));
    CHECK(trio[i].cx() == doctest::Approx(4.0));
    CHECK(trio[i].cy() == doctest::Approx(4.0));
  }

  // Row-major cell order: all anchors of cell (0,0), then (0,1), ...
  const std::vector<Box> grid = generate_anchors(cfg, 0, 2, 3);
  REQUIRE(grid.size() == 18);
  CHECK(grid[3].cx() == doctest::Approx(12.0));  // cell (0,1), first ratio
  CHECK(grid[3].cy() == doctest::Approx(4.0));
  CHECK(grid[9].cx() == doctest::Approx(4.0));   // cell (1,0)
  CHECK(grid[9].cy() == doctest::Approx(12.0));
}

TEST_CASE("box decode: zero regression returns the anchor") {
  const Box anchor{10, 20, 50, 60};
  const std::vector<Box> out = decode_boxes(anchor, {0, 0, 0, 0});
  REQUIRE(out.size() == 1);
  CHECK(out[0].x1 == doctest::Approx(10.0));
  CHECK(out[0].y1 == doctest::Approx(20.0));
  CHECK(out[0].x2 == doctest::Approx(50.0));
  CHECK(out[0].y2 == doctest::Approx(60.0));
}

TEST_CASE("box decode: centre offsets and log-size deltas apply variances") {
  const Box anchor{0, 0, 40, 20};
  const float grow = static_cast<float>(std::log(2.0) / 0.2);
  std::vector<Box> out = decode_boxes(anchor, {0, 0, grow, grow});
  CHECK(out[0].width() == doctest::Approx(80.0));
  CHECK(out[0].height() == doctest::Approx(40.0));
  CHECK(out[0].cx() == doctest::Approx(20.0));
  CHECK(out[0].cy() == doctest::Approx(10.0));

  out = decode_boxes(anchor, {1, 0, 0, 0});
  CHECK(out[0].cx() == doctest::Approx(20.0 + 0.1 * 40.0));
  CHECK(out[0].cy() == doctest::Approx(10.0));
}

TEST_CASE("encode then decode is the identity over a clip") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> d(1.0, 100.0);
  for (int trial = 0; trial < 50; ++trial) {
    const double ax = d(rng), ay = d(rng);
    const Box a{ax, ay, ax + d(rng), ay + d(rng)};
    std::vector<Box> boxes;
    for (int t = 0; t < 3; ++t)
      boxes.push_back(Box{d(rng), d(rng), 0, 0});
    for (Box& b : boxes) {
      b.x2 = b.x1 + d(rng);
      b.y2 = b.y1 + d(rng);
    }
    const std::vector<float> enc = encode_boxes(a, boxes);
    REQUIRE(enc.size() == 12);
    const std::vector<Box> dec = decode_boxes(a, enc);
    REQUIRE(dec.size() == 3);
    for (int t = 0; t < 3; ++t) {
      CHECK(dec[t].x1 == doctest::Approx(boxes[t].x1).epsilon(1e-3));
      CHECK(dec[t].y1 == doctest::Approx(boxes[t].y1).epsilon(1e-3));
      CHECK(dec[t].x2 == doctest::Approx(boxes[t].x2).epsilon(1e-3));
      CHECK(dec[t].y2 == doctest::Approx(boxes[t].y2).epsilon(1e-3));
    }
  }
}

TEST_CASE("prediction head emits one record per cell and anchor slot") {
  CphConfig cfg;
  cfg.clip_len = 3;
  cfg.num_classes = 2;
  cfg.embedding_dim = 4;
  cfg.mask_params = 6;
  cfg.anchors_per_cell = 3;
  cfg.tower_depth = 2;
  CphWeights weights = make_cph_weights(cfg, 8);
  std::mt19937_64 rng(8);
  for (ConvLayerSpec* l : {&weights.box_pred, &weights.mask_pred,
                           &weights.track_pred, &weights.cls_pred})
    randomize(*l, rng, 0.2f);
  for (auto* tower : {&weights.box_tower, &weights.track_tower,
                      &weights.cls_tower})
    for (ConvLayerSpec& l : *tower) randomize(l, rng, 0.2f);

  const FeatureCube feat = random_cube(rng, 3, 8, 8, 8, 1.0f);
  const RawClipPredictions out = cph_forward(feat, cfg, weights);
  CHECK(out.count == 8 * 8 * 3);
  CHECK(out.class_logits.size() == size_t(out.count) * 3);
  CHECK(out.embeddings.size() == size_t(out.count) * 4);
  CHECK(out.box_regression.size() == size_t(out.count) * 12);
  CHECK(out.mask_coeffs.size() == size_t(out.count) * 6);
}

TEST_CASE("zero prediction weights give identical logits for every class") {
  CphConfig cfg;
  cfg.clip_len = 3;
  cfg.num_classes = 3;
  cfg.embedding_dim = 2;
  cfg.mask_params = 4;
  cfg.anchors_per_cell = 2;
  cfg.tower_depth = 1;
  const CphWeights weights = make_cph_weights(cfg, 4);
  const FeatureCube feat = random_cube(std::mt19937_64(9), 3, 4, 4, 4);
  const RawClipPredictions out = cph_forward(feat, cfg, weights);
  for (float v : out.class_logits) CHECK(v == 0.0f);
  for (float v : out.box_regression) CHECK(v == 0.0f);
}

TEST_CASE("classification mean-pools per-frame logits over the clip") {
  CphConfig cfg;
  cfg.clip_len = 3;
  cfg.num_classes = 1;
  cfg.embedding_dim = 2;
  cfg.mask_params = 2;
  cfg.anchors_per_cell = 1;
  cfg.tower_depth = 0;  // predictions read the raw features
  CphWeights weights = make_cph_weights(cfg, 2);
  // cls_pred is 1x3x3 with padding 1; tap the centre of input channel 0 for
  // logit column 1 so it reports the per-cell temporal mean of that channel.
  const int kh = weights.cls_pred.kh, kw = weights.cls_pred.kw;
  REQUIRE(weights.cls_pred.kt == 1);
  const size_t centre = (size_t(1) * 2 + 0) * kh * kw + (kh / 2) * kw + kw / 2;
  weights.cls_pred.weights[centre] = 1.0f;

  const FeatureCube feat = random_cube(std::mt19937_64(10), 3, 4, 4, 2);
  const RawClipPredictions out = cph_forward(feat, cfg, weights);
  REQUIRE(out.count == 16);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      double mean = 0.0;
      for (int t = 0; t < 3; ++t) mean += feat.at(t, y, x, 0);
      mean /= 3.0;
      CHECK(out.class_logits[(y * 4 + x) * 2 + 1] ==
            doctest::Approx(mean).epsilon(1e-6));
      CHECK(out.class_logits[(y * 4 + x) * 2 + 0] == 0.0f);
    }
}

TEST_CASE("box branch collapses time with its final full-depth kernel") {
  CphConfig cfg;
  cfg.clip_len = 2;
  cfg.num_classes = 1;
  cfg.embedding_dim = 2;
  cfg.mask_params = 2;
  cfg.anchors_per_cell = 1;
  cfg.tower_depth = 0;
  CphWeights weights = make_cph_weights(cfg, 1);
  REQUIRE(weights.box_pred.kt == 2);
  // Output 0 taps the centre of frame 0 only, output 1 frame 1 only.
  const int kh = weights.box_pred.kh, kw = weights.box_pred.kw;
  const size_t khw = size_t(kh) * kw, mid = (kh / 2) * kw + kw / 2;
  weights.box_pred.weights[(0 * 2 + 0) * khw + mid] = 1.0f;  // oc 0, dt 0
  weights.box_pred.weights[(1 * 2 + 1) * khw + mid] = 1.0f;  // oc 1, dt 1

  const FeatureCube feat = random_cube(std::mt19937_64(11), 2, 3, 3, 1);
  const RawClipPredictions out = cph_forward(feat, cfg, weights);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x) {
      const size_t base = size_t(y * 3 + x) * 8;
      CHECK(out.box_regression[base + 0] ==
            doctest::Approx(feat.at(0, y, x, 0)).epsilon(1e-6));
      CHECK(out.box_regression[base + 1] ==
            doctest::Approx(feat.at(1, y, x, 0)).epsilon(1e-6));
    }
}

TEST_CASE("mask head doubles resolution and projects to prototype channels") {
  CmhWeights weights = make_cmh_weights(6, 8);
  std::mt19937_64 rng(12);
  for (ConvLayerSpec* l : {&weights.conv1, &weights.conv2, &weights.conv3,
                           &weights.conv4, &weights.proj})
    randomize(*l, rng, 0.3f);
  std::uniform_real_distribution<float> d(-0.3f, 0.3f);
  for (float& v : weights.deconv.weights) v = d(rng);
  for (float& v : weights.deconv.bias) v = d(rng);

  const FeatureCube fused = random_cube(rng, 3, 8, 10, 6, 1.0f);
  const FeatureCube protos = cmh_forward(fused, weights);
  CHECK(protos.t == 3);
  CHECK(protos.h == 16);
  CHECK(protos.w == 20);
  CHECK(protos.c == 8);
}

TEST_CASE("mask head with zero weights emits zeros: projection has no relu") {
  const CmhWeights weights = make_cmh_weights(4, 3);
  const FeatureCube fused = random_cube(std::mt19937_64(13), 2, 4, 4, 4);
  const FeatureCube protos = cmh_forward(fused, weights);
  for (float v : protos.data) CHECK(v == 0.0f);
}

TEST_CASE("softmax rows normalise and preserve order") {
  std::vector<float> logits = {0, 0, 0, 1, 2, 3};
  softmax_rows(logits, 3);
  for (int i = 0; i < 3; ++i)
    CHECK(logits[i] == doctest::Approx(1.0 / 3.0));
  double sum = 0.0;
  for (int i = 3; i < 6; ++i) sum += logits[i];
  CHECK(sum == doctest::Approx(1.0));
  CHECK(logits[3] < logits[4]);
  CHECK(logits[4] < logits[5]);
}
