#pragma once

#include <vector>

#include "cico/geometry.hpp"
#include "cico/mask.hpp"
#include "cico/tensor.hpp"

namespace cico {

// Which mask reconstruction the network was trained for.
enum class HeadVariant { yolact, condinst };

// Prototype cube [T, Hp, Wp, k] sitting at 1/4 of input resolution.
using PrototypeCube = Tensor4;

inline constexpr int kPrototypeStride = 4;

// Linear-combination variant: one coefficient per prototype channel, no bias.
struct MaskParamsYolact {
  std::vector<float> coeffs;
};

// Dynamic-filter variant: a flat block of 169 values feeding a three-layer
// 1x1x1 network over 8 prototype channels plus 2 coordinate channels.
// Layout: conv1 weights 8x10, conv1 bias 8, conv2 weights 8x8, conv2 bias 8,
// conv3 weights 1x8, conv3 bias 1. Weights are output-major: w[o*in + i].
struct MaskParamsCondInst {
  std::vector<float> values;
};

inline constexpr int kCondInstProtoChannels = 8;
inline constexpr int kCondInstCoordChannels = 2;
inline constexpr int kCondInstHidden = 8;
inline constexpr int kCondInstParamCount = 169;

// Coordinate map [T, Hp, Wp, 2] holding ((x - cx)/S, (y - cy)/S) per cell,
// with S = max(Hp, Wp) and (cx, cy) on the prototype grid. Identical for
// every frame of the clip.
using RelCoordMap = Tensor4;

RelCoordMap relative_coords(int t_frames, int hp, int wp, double cx, double cy);

// Sigmoid of the per-cell linear combination of prototype channels, then
// cropped to the circumscribed box. The box is given at input resolution and
// divided by the prototype stride internally.
FloatMaskClip assemble_yolact(const PrototypeCube& protos,
                              const MaskParamsYolact& params, const Box& cbox);

// Three 1x1x1 dynamic layers (relu, relu, sigmoid) over prototypes
// concatenated with relative coordinates about the box centre. No crop.
FloatMaskClip assemble_condinst(const PrototypeCube& protos,
                                const MaskParamsCondInst& params,
                                const Box& cbox);

// Bilinear upsample each frame to the output size and binarise at 0.5.
BinaryMaskClip finalize_mask(const FloatMaskClip& clip, int out_h, int out_w);

}  // namespace cico
