#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace cico {

// Dense row-major rank-4 tensor laid out as [t][h][w][c].
// Time-major so a single frame is one contiguous slab.
struct Tensor4 {
  int t = 0;
  int h = 0;
  int w = 0;
  int c = 0;
  std::vector<float> data;

  Tensor4() = default;
  Tensor4(int t_, int h_, int w_, int c_, float fill = 0.0f)
      : t(t_), h(h_), w(w_), c(c_) {
    if (t_ < 0 || h_ < 0 || w_ < 0 || c_ < 0)
      throw std::invalid_argument("Tensor4: negative dimension");
    data.assign(static_cast<size_t>(t_) * h_ * w_ * c_, fill);
  }

  size_t size() const { return data.size(); }

  size_t index(int it, int iy, int ix, int ic) const {
    return ((static_cast<size_t>(it) * h + iy) * w + ix) * c + ic;
  }

  float at(int it, int iy, int ix, int ic) const {
    return data[index(it, iy, ix, ic)];
  }
  float& at(int it, int iy, int ix, int ic) {
    return data[index(it, iy, ix, ic)];
  }

  bool same_shape(const Tensor4& o) const {
    return t == o.t && h == o.h && w == o.w && c == o.c;
  }
};

}  // namespace cico
