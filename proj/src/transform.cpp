#include "advpatch/transform.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "advpatch/errors.hpp"

namespace advpatch {

bool TransformParams::is_identity() const noexcept {
  return rotation == 0.0 && !flip_h && crop_fraction == 0.0 && scale == 1.0 &&
         brightness_shift == 0.0 && noise_sigma == 0.0;
}

void TransformRanges::validate() const {
  if (!(max_rotation >= 0.0 && max_rotation <= 20.0)) throw InvalidArgument("rotation range must lie in [0,20]");
  if (!(max_crop >= 0.0 && max_crop <= 0.1)) throw InvalidArgument("crop range must lie in [0,0.1]");
  if (!(min_scale >= 0.8 && min_scale <= max_scale && max_scale <= 1.2)) {
    throw InvalidArgument("scale range must lie in [0.8,1.2]");
  }
  if (!(max_brightness >= 0.0 && max_brightness <= 0.1)) throw InvalidArgument("brightness range must lie in [0,0.1]");
  if (!(max_noise_sigma >= 0.0 && max_noise_sigma <= 0.02)) throw InvalidArgument("noise range must lie in [0,0.02]");
}

TransformRanges TransformRanges::none() { return {0.0, 0.0, 1.0, 1.0, 0.0, 0.0, false}; }

TransformParams sample_transform(std::uint64_t seed, const TransformRanges& r) {
  r.validate();
  std::mt19937_64 rng(seed);
  auto uniform = [&rng](double lo, double hi) {
    return lo == hi ? lo : std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  TransformParams t;
  t.rotation = uniform(-r.max_rotation, r.max_rotation);
  t.flip_h = r.allow_flip && std::bernoulli_distribution(0.5)(rng);
  t.crop_fraction = uniform(0.0, r.max_crop);
  t.scale = uniform(r.min_scale, r.max_scale);
  t.brightness_shift = uniform(-r.max_brightness, r.max_brightness);
  t.noise_sigma = uniform(0.0, r.max_noise_sigma);
  t.seed = rng();
  return t;
}

namespace {

struct Bilinear {
  int x0, y0;
  double fx, fy;
};

// Source location of output pixel (y, x) under the geometric part of t.
Bilinear source_of(int y, int x, int h, int w, const TransformParams& t, double cos_t, double sin_t) {
  const double cx = w / 2.0;
  const double cy = h / 2.0;
  const double k = (1.0 - t.crop_fraction) / t.scale;
  double ux = (x + 0.5 - cx) * k;
  const double uy = (y + 0.5 - cy) * k;
  if (t.flip_h) ux = -ux;
  // Inverse rotation: output is the input rotated by +rotation.
  const double sx = cos_t * ux + sin_t * uy + cx - 0.5;
  const double sy = -sin_t * ux + cos_t * uy + cy - 0.5;
  const double fx0 = std::floor(sx);
  const double fy0 = std::floor(sy);
  return {static_cast<int>(fx0), static_cast<int>(fy0), sx - fx0, sy - fy0};
}

template <typename Visit>
void for_each_tap(const Bilinear& b, int h, int w, Visit&& visit) {
  const double wx[2] = {1.0 - b.fx, b.fx};
  const double wy[2] = {1.0 - b.fy, b.fy};
  for (int dy = 0; dy < 2; ++dy) {
    const int yy = b.y0 + dy;
    if (yy < 0 || yy >= h || wy[dy] == 0.0) continue;
    for (int dx = 0; dx < 2; ++dx) {
      const int xx = b.x0 + dx;
      if (xx < 0 || xx >= w || wx[dx] == 0.0) continue;
      visit(yy, xx, wy[dy] * wx[dx]);
    }
  }
}

// Everything up to (not including) the final clamp.
Grid forward_unclamped(const Grid& in, const TransformParams& t) {
  const int h = in.height(), w = in.width(), c = in.channels();
  Grid out(h, w, c);
  const double theta = t.rotation * std::numbers::pi / 180.0;
  const double cos_t = std::cos(theta), sin_t = std::sin(theta);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Bilinear b = source_of(y, x, h, w, t, cos_t, sin_t);
      for_each_tap(b, h, w, [&](int yy, int xx, double wt) {
        for (int k = 0; k < c; ++k) out.at(y, x, k) += wt * in.at(yy, xx, k);
      });
    }
  }
  if (t.brightness_shift != 0.0) {
    for (double& v : out.values()) v += t.brightness_shift;
  }
  if (t.noise_sigma > 0.0) {
    std::mt19937_64 rng(t.seed);
    std::normal_distribution<double> noise(0.0, t.noise_sigma);
    for (double& v : out.values()) v += noise(rng);
  }
  return out;
}

}  // namespace

Grid apply_transform(const Grid& input, const TransformParams& t) {
  if (t.is_identity()) {
    Grid out = input;
    out.clamp(0.0, 1.0);
    return out;
  }
  Grid out = forward_unclamped(input, t);
  out.clamp(0.0, 1.0);
  return out;
}

Grid apply_transform_backward(const Grid& input, const TransformParams& t, const Grid& grad_out) {
  if (!grad_out.same_shape(input)) throw InvalidArgument("apply_transform_backward: shape mismatch");
  const Grid pre = forward_unclamped(input, t);
  const int h = input.height(), w = input.width(), c = input.channels();
  Grid grad(h, w, c);
  const double theta = t.rotation * std::numbers::pi / 180.0;
  const double cos_t = std::cos(theta), sin_t = std::sin(theta);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const Bilinear b = source_of(y, x, h, w, t, cos_t, sin_t);
      for_each_tap(b, h, w, [&](int yy, int xx, double wt) {
        for (int k = 0; k < c; ++k) {
          const double v = pre.at(y, x, k);
          if (v < 0.0 || v > 1.0) continue;
          grad.at(yy, xx, k) += wt * grad_out.at(y, x, k);
        }
      });
    }
  }
  return grad;
}

}  // namespace advpatch
