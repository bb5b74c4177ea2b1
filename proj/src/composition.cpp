#include "advpatch/composition.hpp"

#include <algorithm>
#include <cmath>

#include "advpatch/errors.hpp"
#include "advpatch/resample.hpp"

namespace advpatch {

void PlacementSpec::validate() const {
  if (!(scale > 0.0 && scale <= 1.0)) throw InvalidArgument("placement.scale must be in (0,1]");
  if (!(vertical_anchor >= 0.0 && vertical_anchor <= 1.0)) {
    throw InvalidArgument("placement.vertical_anchor must be in [0,1]");
  }
}

std::vector<PixelRect> MaskLayout::visible_rects() const {
  std::vector<PixelRect> out;
  out.reserve(placements.size());
  for (const auto& p : placements) out.push_back(p.visible);
  return out;
}

MaskLayout build_person_mask(int height, int width, std::span<const BoundingBox> boxes,
                             const PlacementSpec& placement) {
  placement.validate();
  if (height < 1 || width < 1) throw InvalidArgument("build_person_mask: empty image");
  MaskLayout layout{Grid(height, width, 1), {}};
  const PixelRect frame{0, 0, width, height};
  for (const auto& box : boxes) {
    if (box.class_label != "person" || box.w <= 0 || box.h <= 0) continue;
    const int side = std::max(1, static_cast<int>(std::lround(placement.scale * std::sqrt(box.w * box.h))));
    const double cx = box.x + box.w / 2.0;
    const double cy = box.y + placement.vertical_anchor * box.h;
    const PixelRect target{static_cast<int>(std::lround(cx - side / 2.0)),
                           static_cast<int>(std::lround(cy - side / 2.0)), side, side};
    const PixelRect visible = target.intersection(frame);
    if (visible.empty()) continue;
    layout.placements.push_back({target, visible});
    for (int y = visible.y; y < visible.y + visible.h; ++y) {
      for (int x = visible.x; x < visible.x + visible.w; ++x) layout.mask.at(y, x) = 1.0;
    }
  }
  return layout;
}

namespace {

void check_layout(const Grid& image, const MaskLayout& layout) {
  if (layout.mask.height() != image.height() || layout.mask.width() != image.width() ||
      layout.mask.channels() != 1) {
    throw InvalidArgument("compose: mask and image dimensions differ");
  }
}

}  // namespace

Grid render_patch(const Patch& patch, const MaskLayout& layout) {
  Grid canvas(layout.height(), layout.width(), kRgb);
  for (const auto& p : layout.placements) {
    const Grid scaled = resize(patch.grid(), p.target.h, p.target.w);
    for (int y = p.visible.y; y < p.visible.y + p.visible.h; ++y) {
      for (int x = p.visible.x; x < p.visible.x + p.visible.w; ++x) {
        for (int c = 0; c < kRgb; ++c) canvas.at(y, x, c) = scaled.at(y - p.target.y, x - p.target.x, c);
      }
    }
  }
  return canvas;
}

Image compose(const Image& image, const Patch& patch, const MaskLayout& layout) {
  check_layout(image, layout);
  if (image.channels() != kRgb) throw InvalidArgument("compose: image must have 3 channels");
  Image out = image;
  if (layout.empty()) return out;
  const Grid canvas = render_patch(patch, layout);
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      const double m = layout.mask.at(y, x);
      if (m == 0.0) continue;
      for (int c = 0; c < kRgb; ++c) {
        const double v = (1.0 - m) * image.at(y, x, c) + m * canvas.at(y, x, c);
        out.at(y, x, c) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return out;
}

Grid compose_backward(const Grid& grad_out, const MaskLayout& layout, int patch_side) {
  check_layout(grad_out, layout);
  Grid grad(patch_side, patch_side, kRgb);
  if (layout.empty()) return grad;

  // Last writer wins in render_patch, so only it receives gradient.
  std::vector<int> owner(static_cast<std::size_t>(layout.height()) * layout.width(), -1);
  for (int k = 0; k < static_cast<int>(layout.placements.size()); ++k) {
    const auto& v = layout.placements[k].visible;
    for (int y = v.y; y < v.y + v.h; ++y) {
      for (int x = v.x; x < v.x + v.w; ++x) owner[static_cast<std::size_t>(y) * layout.width() + x] = k;
    }
  }

  for (int k = 0; k < static_cast<int>(layout.placements.size()); ++k) {
    const auto& p = layout.placements[k];
    Grid local(p.target.h, p.target.w, kRgb);
    bool any = false;
    for (int y = p.visible.y; y < p.visible.y + p.visible.h; ++y) {
      for (int x = p.visible.x; x < p.visible.x + p.visible.w; ++x) {
        if (owner[static_cast<std::size_t>(y) * layout.width() + x] != k) continue;
        const double m = layout.mask.at(y, x);
        for (int c = 0; c < kRgb; ++c) local.at(y - p.target.y, x - p.target.x, c) = m * grad_out.at(y, x, c);
        any = true;
      }
    }
    if (!any) continue;
    const Grid back = resize_backward(local, patch_side, patch_side);
    auto dst = grad.values();
    const auto src = back.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }
  return grad;
}

}  // namespace advpatch
