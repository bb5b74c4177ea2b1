#pragma once

#include <cstdint>

#include "advpatch/image.hpp"

namespace advpatch {

/// One draw of the augmentation family used for the similarity loss and for
/// robustness of the rendered patch.
struct TransformParams {
  double rotation = 0.0;  // degrees
  bool flip_h = false;
  double crop_fraction = 0.0;
  double scale = 1.0;
  double brightness_shift = 0.0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;  // drives the additive noise field

  static TransformParams identity() { return {}; }
  bool is_identity() const noexcept;
  friend bool operator==(const TransformParams&, const TransformParams&) = default;
};

/// Closed sampling ranges. Defaults are the widest allowed values.
struct TransformRanges {
  double max_rotation = 20.0;
  double max_crop = 0.1;
  double min_scale = 0.8;
  double max_scale = 1.2;
  double max_brightness = 0.1;
  double max_noise_sigma = 0.02;
  bool allow_flip = true;

  void validate() const;
  static TransformRanges none();
};

/// Deterministic in `seed`: each parameter uniform on its range, flip with
/// probability one half.
TransformParams sample_transform(std::uint64_t seed, const TransformRanges& ranges = {});

/// Rotation, horizontal flip, center crop resized back, extent scaling (all
/// one bilinear resampling about the grid center, zero padded), then additive
/// brightness and seeded Gaussian noise, then clamp to [0,1].
Grid apply_transform(const Grid& input, const TransformParams& t);

/// Gradient with respect to `input` of a scalar whose gradient with respect
/// to apply_transform(input, t) is `grad_out`. Clamped outputs pass no
/// gradient.
Grid apply_transform_backward(const Grid& input, const TransformParams& t, const Grid& grad_out);

}  // namespace advpatch
