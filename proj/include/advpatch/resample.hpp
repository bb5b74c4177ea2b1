#pragma once

#include <vector>

#include "advpatch/image.hpp"

namespace advpatch {

/// Sparse 1-D interpolation weights mapping `in_size` samples onto `out_size`.
///
/// Triangle (bilinear) filter whose support widens with the downscale factor,
/// so shrinking averages over every source sample instead of skipping most of
/// them. Weights per output sample sum to one.
class ResampleAxis {
 public:
  struct Tap {
    int src;
    double weight;
  };

  ResampleAxis(int in_size, int out_size);

  int in_size() const noexcept { return in_size_; }
  int out_size() const noexcept { return out_size_; }
  const std::vector<Tap>& taps(int out) const { return taps_[out]; }

 private:
  int in_size_;
  int out_size_;
  std::vector<std::vector<Tap>> taps_;
};

/// Resizes every channel of `src` to (out_h, out_w).
Grid resize(const Grid& src, int out_h, int out_w);

/// Adjoint of resize: maps a gradient on the resized grid back onto a grid of
/// shape (in_h, in_w).
Grid resize_backward(const Grid& grad_out, int in_h, int in_w);

}  // namespace advpatch
