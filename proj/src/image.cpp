#include "advpatch/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "advpatch/errors.hpp"

namespace advpatch {

Grid::Grid(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
  if (height < 0 || width < 0 || channels < 0) {
    throw InvalidArgument("Grid: negative dimension");
  }
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

void Grid::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Grid::clamp(double lo, double hi) {
  for (double& v : data_) v = std::clamp(v, lo, hi);
}

void Grid::quantize_to_float() {
  for (double& v : data_) v = static_cast<double>(static_cast<float>(v));
}

void require_image(const Grid& image, const char* what) {
  if (image.height() < 1 || image.width() < 1 || image.channels() != kRgb) {
    throw InvalidArgument(std::string(what) + ": expected a non-empty 3-channel grid");
  }
  for (double v : image.values()) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw InvalidArgument(std::string(what) + ": value outside [0,1]");
    }
  }
}

Patch::Patch(int side, double fill) : values_(side, side, kRgb, std::clamp(fill, 0.0, 1.0)) {
  if (side < 1) throw InvalidArgument("Patch: side must be >= 1");
}

Patch::Patch(Grid values) : values_(std::move(values)) {
  if (values_.height() < 1 || values_.height() != values_.width() || values_.channels() != kRgb) {
    throw InvalidArgument("Patch: expected a square 3-channel grid");
  }
  values_.clamp(0.0, 1.0);
}

bool clip_box(BoundingBox& box, int width, int height) {
  const double x0 = std::clamp(box.x, 0.0, static_cast<double>(width));
  const double y0 = std::clamp(box.y, 0.0, static_cast<double>(height));
  const double x1 = std::clamp(box.x + box.w, 0.0, static_cast<double>(width));
  const double y1 = std::clamp(box.y + box.h, 0.0, static_cast<double>(height));
  box.x = x0;
  box.y = y0;
  box.w = x1 - x0;
  box.h = y1 - y0;
  return box.w > 0 && box.h > 0;
}

PixelRect PixelRect::intersection(const PixelRect& o) const noexcept {
  const int x0 = std::max(x, o.x);
  const int y0 = std::max(y, o.y);
  const int x1 = std::min(x + w, o.x + o.w);
  const int y1 = std::min(y + h, o.y + o.h);
  if (x1 <= x0 || y1 <= y0) return {x0, y0, 0, 0};
  return {x0, y0, x1 - x0, y1 - y0};
}

Grid to_gray(const Grid& image) {
  Grid gray(image.height(), image.width(), 1);
  const int c = image.channels();
  const auto src = image.values();
  auto dst = gray.values();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    double s = 0.0;
    for (int k = 0; k < c; ++k) s += src[i * c + k];
    dst[i] = s / c;
  }
  return gray;
}

}  // namespace advpatch
