#pragma once

#include <random>

#include "advpatch/image.hpp"

namespace advpatch {

/// Person-blob geometry: an elliptical body under a disk head, with a slight
/// lean and an optional gap between the legs. All lengths are fractions of
/// the bounding box so one shape renders at any size.
struct SilhouetteShape {
  double head_radius = 0.12;      // of height
  double head_offset = 0.0;       // horizontal, of width
  double body_half_width = 0.42;  // of width
  double neck = 1.9;              // body top, in head radii
  double lean = 0.0;              // horizontal shear at the feet, of width
  double leg_gap = 0.05;          // half-width of the gap, of width
  double leg_start = 0.68;        // gap begins at this fraction of height

  static SilhouetteShape sample(std::mt19937_64& rng);
};

/// Anti-aliased coverage in [0,1] of the silhouette in an (h, w) box, single
/// channel. Coverage is the fraction of supersampled points inside the shape.
Grid render_silhouette(const SilhouetteShape& shape, int height, int width, int supersample = 4);

}  // namespace advpatch
