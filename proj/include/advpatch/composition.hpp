#pragma once

#include <span>
#include <vector>

#include "advpatch/image.hpp"

namespace advpatch {

/// Where a patch sits on each person box: a square of side
/// scale * sqrt(w * h), centered horizontally, vertically centered at
/// y + vertical_anchor * h.
struct PlacementSpec {
  double scale = 0.3;
  double vertical_anchor = 0.35;

  void validate() const;
};

struct PatchPlacement {
  PixelRect target;   // full square the patch is resampled into (may leave the image)
  PixelRect visible;  // target clipped to the image
};

/// Patch mask M over an image plus the rectangles the patch is rendered into.
/// The mask has shape (height, width, 1); the default builder writes a hard
/// {0,1} mask whose support is the union of the visible rectangles.
struct MaskLayout {
  Grid mask;
  std::vector<PatchPlacement> placements;

  int height() const noexcept { return mask.height(); }
  int width() const noexcept { return mask.width(); }
  bool empty() const noexcept { return placements.empty(); }
  std::vector<PixelRect> visible_rects() const;
};

/// Placement rule over every box labelled "person". Boxes of other classes
/// are ignored; no person boxes yields an all-zero mask.
MaskLayout build_person_mask(int height, int width, std::span<const BoundingBox> boxes,
                             const PlacementSpec& placement = {});

/// Renders the patch into every placement, producing an image-sized canvas.
/// Pixels covered by several placements take the last one.
Grid render_patch(const Patch& patch, const MaskLayout& layout);

/// (1 - M) * image + M * render_patch(patch), clamped to [0,1].
Image compose(const Image& image, const Patch& patch, const MaskLayout& layout);

/// Gradient of a scalar with respect to the patch, given its gradient with
/// respect to compose()'s output. The map is affine in the patch, so this is
/// exact wherever the final clamp is inactive.
Grid compose_backward(const Grid& grad_out, const MaskLayout& layout, int patch_side);

}  // namespace advpatch
