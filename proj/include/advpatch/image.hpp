#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace advpatch {

/// Dense row-major (height, width, channels) grid of doubles, channel-last.
///
/// Used for images, gradients and masks alike. Images keep their values in
/// [0,1]; gradient grids carry arbitrary reals.
class Grid {
 public:
  Grid() = default;
  Grid(int height, int width, int channels, double fill = 0.0);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t index(int y, int x, int c = 0) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }
  double& at(int y, int x, int c = 0) noexcept { return data_[index(y, x, c)]; }
  double at(int y, int x, int c = 0) const noexcept { return data_[index(y, x, c)]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  bool same_shape(const Grid& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  void fill(double v);
  void clamp(double lo = 0.0, double hi = 1.0);
  // Rounds every value through float32; used where state must survive a
  // 32-bit serialization unchanged.
  void quantize_to_float();

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

using Image = Grid;
using Gradient = Grid;

inline constexpr int kRgb = 3;

inline Image make_image(int height, int width, double fill = 0.0) {
  return Image(height, width, kRgb, fill);
}

/// Throws InvalidArgument unless the grid is a non-empty 3-channel image with
/// every value in [0,1].
void require_image(const Grid& image, const char* what = "image");

/// Square RGB patch with values in [0,1].
class Patch {
 public:
  Patch() = default;
  explicit Patch(int side, double fill = 0.5);
  // Adopts `values`; throws unless square and 3-channel. Values are clamped.
  explicit Patch(Grid values);

  int side() const noexcept { return values_.height(); }
  const Grid& grid() const noexcept { return values_; }
  Grid& grid() noexcept { return values_; }

  void clamp() { values_.clamp(0.0, 1.0); }

  friend bool operator==(const Patch&, const Patch&) = default;

 private:
  Grid values_;
};

/// Axis-aligned box in pixel units. (x, y) is the top-left corner.
struct BoundingBox {
  double x = 0;
  double y = 0;
  double w = 0;
  double h = 0;
  std::string class_label = "person";

  double area() const noexcept { return w * h; }
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Clips `box` to [0,width) x [0,height). Returns false when nothing remains.
bool clip_box(BoundingBox& box, int width, int height);

/// Integer half-open pixel rectangle [x, x+w) x [y, y+h).
struct PixelRect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  bool empty() const noexcept { return w <= 0 || h <= 0; }
  long area() const noexcept { return empty() ? 0 : static_cast<long>(w) * h; }
  bool contains(int px, int py) const noexcept {
    return px >= x && px < x + w && py >= y && py < y + h;
  }
  bool intersects(const PixelRect& o) const noexcept {
    return !empty() && !o.empty() && x < o.x + o.w && o.x < x + w && y < o.y + o.h && o.y < y + h;
  }
  PixelRect intersection(const PixelRect& o) const noexcept;
  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

/// Channel mean, one value per pixel.
Grid to_gray(const Grid& image);

}  // namespace advpatch
