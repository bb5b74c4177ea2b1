#include "advpatch/silhouette.hpp"

#include <cmath>

#include "advpatch/errors.hpp"

namespace advpatch {

SilhouetteShape SilhouetteShape::sample(std::mt19937_64& rng) {
  auto u = [&rng](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  SilhouetteShape s;
  s.head_radius = 0.12 * u(0.8, 1.2);
  s.head_offset = u(-0.12, 0.12);
  s.body_half_width = 0.5 * u(0.65, 1.0);
  s.neck = 2.0 * u(0.85, 1.0);
  s.lean = u(-0.15, 0.15);
  s.leg_gap = u(0.0, 0.12);
  s.leg_start = u(0.6, 0.75);
  return s;
}

Grid render_silhouette(const SilhouetteShape& s, int height, int width, int supersample) {
  if (height < 1 || width < 1 || supersample < 1) throw InvalidArgument("render_silhouette: bad size");
  Grid out(height, width, 1);
  const double h = height, w = width;
  const double r = s.head_radius * h;
  const double hx = w / 2.0 + s.head_offset * w;
  const double hy = r * 1.02;
  const double bw = s.body_half_width * w;
  const double top = s.neck * r;
  const double by = (h - top) / 2.0;
  const double bcy = h - by;
  const double gap = s.leg_gap * w;
  const double leg_y = s.leg_start * h;
  const double inv = 1.0 / (supersample * supersample);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      int inside = 0;
      for (int sy = 0; sy < supersample; ++sy) {
        const double py = y + (sy + 0.5) / supersample;
        const double bcx = w / 2.0 + s.lean * w * (py - bcy) / h;
        for (int sx = 0; sx < supersample; ++sx) {
          const double px = x + (sx + 0.5) / supersample;
          const bool head = (px - hx) * (px - hx) + (py - hy) * (py - hy) <= r * r;
          const double ex = (px - bcx) / bw, ey = (py - bcy) / by;
          const bool body = ex * ex + ey * ey <= 1.0;
          const bool legs = py > leg_y && std::abs(px - bcx) < gap;
          if ((head || body) && !legs) ++inside;
        }
      }
      out.at(y, x) = inside * inv;
    }
  }
  return out;
}

}  // namespace advpatch
