#include "cico/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cico {

namespace {

inline float sigmoidf(double x) {
  return static_cast<float>(1.0 / (1.0 + std::exp(-x)));
}

}  // namespace

RelCoordMap relative_coords(int t_frames, int hp, int wp, double cx, double cy) {
  if (t_frames <= 0 || hp <= 0 || wp <= 0)
    throw std::invalid_argument("relative_coords: dims must be positive");
  const double scale = static_cast<double>(std::max(hp, wp));
  RelCoordMap map(t_frames, hp, wp, 2);
  for (int y = 0; y < hp; ++y) {
    for (int x = 0; x < wp; ++x) {
      const float dx = static_cast<float>((x - cx) / scale);
      const float dy = static_cast<float>((y - cy) / scale);
      for (int t = 0; t < t_frames; ++t) {
        map.at(t, y, x, 0) = dx;
        map.at(t, y, x, 1) = dy;
      }
    }
  }
  return map;
}

FloatMaskClip assemble_yolact(const PrototypeCube& protos,
                              const MaskParamsYolact& params, const Box& cbox) {
  if (protos.t <= 0 || protos.h <= 0 || protos.w <= 0 || protos.c <= 0)
    throw std::invalid_argument("assemble_yolact: empty prototype cube");
  if (static_cast<int>(params.coeffs.size()) != protos.c)
    throw std::invalid_argument(
        "assemble_yolact: coefficient count does not match prototype channels");
  const Box proto_box{cbox.x1 / kPrototypeStride, cbox.y1 / kPrototypeStride,
                      cbox.x2 / kPrototypeStride, cbox.y2 / kPrototypeStride};
  FloatMaskClip out;
  out.frames.reserve(protos.t);
  for (int t = 0; t < protos.t; ++t) {
    FloatMask frame(protos.h, protos.w, 0.0f);
    for (int y = 0; y < protos.h; ++y) {
      for (int x = 0; x < protos.w; ++x) {
        double acc = 0.0;
        for (int ch = 0; ch < protos.c; ++ch)
          acc += static_cast<double>(protos.at(t, y, x, ch)) * params.coeffs[ch];
        frame.at(y, x) = sigmoidf(acc);
      }
    }
    out.frames.push_back(crop(frame, proto_box));
  }
  return out;
}

FloatMaskClip assemble_condinst(const PrototypeCube& protos,
                                const MaskParamsCondInst& params,
                                const Box& cbox) {
  if (protos.t <= 0 || protos.h <= 0 || protos.w <= 0)
    throw std::invalid_argument("assemble_condinst: empty prototype cube");
  if (protos.c != kCondInstProtoChannels)
    throw std::invalid_argument(
        "assemble_condinst: prototype cube must have 8 channels");
  if (static_cast<int>(params.values.size()) != kCondInstParamCount)
    throw std::invalid_argument("assemble_condinst: expected 169 parameters, got " +
                                std::to_string(params.values.size()));
  constexpr int kIn = kCondInstProtoChannels + kCondInstCoordChannels;
  constexpr int kHidden = kCondInstHidden;
  const float* w1 = params.values.data();              // 8 x 10
  const float* b1 = w1 + kHidden * kIn;                // 8
  const float* w2 = b1 + kHidden;                      // 8 x 8
  const float* b2 = w2 + kHidden * kHidden;            // 8
  const float* w3 = b2 + kHidden;                      // 1 x 8
  const float* b3 = w3 + kHidden;                      // 1

  const double ccx = cbox.cx() / kPrototypeStride;
  const double ccy = cbox.cy() / kPrototypeStride;
  const double scale = static_cast<double>(std::max(protos.h, protos.w));

  FloatMaskClip out;
  out.frames.reserve(protos.t);
  for (int t = 0; t < protos.t; ++t) {
    FloatMask frame(protos.h, protos.w, 0.0f);
    for (int y = 0; y < protos.h; ++y) {
      for (int x = 0; x < protos.w; ++x) {
        double in[kIn];
        for (int ch = 0; ch < kCondInstProtoChannels; ++ch)
          in[ch] = protos.at(t, y, x, ch);
        in[8] = (x - ccx) / scale;
        in[9] = (y - ccy) / scale;
        double h1[kHidden];
        for (int o = 0; o < kHidden; ++o) {
          double acc = b1[o];
          for (int i = 0; i < kIn; ++i) acc += w1[o * kIn + i] * in[i];
          h1[o] = acc > 0.0 ? acc : 0.0;
        }
        double h2[kHidden];
        for (int o = 0; o < kHidden; ++o) {
          double acc = b2[o];
          for (int i = 0; i < kHidden; ++i) acc += w2[o * kHidden + i] * h1[i];
          h2[o] = acc > 0.0 ? acc : 0.0;
        }
        double acc = b3[0];
        for (int i = 0; i < kHidden; ++i) acc += w3[i] * h2[i];
        frame.at(y, x) = sigmoidf(acc);
      }
    }
    out.frames.push_back(std::move(frame));
  }
  return out;
}

BinaryMaskClip finalize_mask(const FloatMaskClip& clip, int out_h, int out_w) {
  BinaryMaskClip out;
  out.frames.reserve(clip.frames.size());
  for (const FloatMask& frame : clip.frames)
    out.frames.push_back(threshold_mask(bilinear_resize(frame, out_h, out_w)));
  return out;
}

}  // namespace cico
