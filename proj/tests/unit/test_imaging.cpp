#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "advpatch/composition.hpp"
#include "advpatch/errors.hpp"
#include "advpatch/png_io.hpp"
#include "advpatch/resample.hpp"
#include "advpatch/transform.hpp"
#include "doctest.h"

using namespace advpatch;

namespace {

Grid random_grid(int h, int w, int c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Grid g(h, w, c);
  for (double& v : g.values()) v = u(rng);
  return g;
}

// Full-frame placement so patch pixels land 1:1 on the image.
MaskLayout full_frame(int side, double m) {
  MaskLayout l;
  l.mask = Grid(side, side, 1, m);
  l.placements.push_back({{0, 0, side, side}, {0, 0, side, side}});
  return l;
}

}  // namespace

TEST_CASE("placement rule on the worked box") {
  const BoundingBox box{10, 10, 40, 80, "person"};
  const auto layout = build_person_mask(100, 100, std::span(&box, 1), {0.3, 0.35});
  REQUIRE(layout.placements.size() == 1);
  const PixelRect r = layout.placements[0].target;
  CHECK(r.w == 17);
  CHECK(r.h == 17);
  // centred on (30, 38)
  CHECK(std::abs(r.x + r.w / 2.0 - 30.0) <= 0.5);
  CHECK(std::abs(r.y + r.h / 2.0 - 38.0) <= 0.5);
  double area = 0;
  for (double v : layout.mask.values()) area += v;
  CHECK(area == 17 * 17);
}

TEST_CASE("no person boxes gives an empty layout and identity compose") {
  const BoundingBox car{5, 5, 20, 20, "car"};
  const auto layout = build_person_mask(32, 32, std::span(&car, 1));
  CHECK(layout.empty());
  for (double v : layout.mask.values()) CHECK(v == 0.0);
  std::mt19937_64 rng(1);
  const Image img = random_grid(32, 32, 3, rng);
  CHECK(compose(img, Patch(8, 0.9), layout) == img);
}

TEST_CASE("edge boxes are clipped to the image") {
  const BoundingBox box{-10, -30, 40, 80, "person"};
  const auto layout = build_person_mask(50, 50, std::span(&box, 1));
  const PixelRect v = layout.placements.at(0).visible;
  CHECK(v.x >= 0);
  CHECK(v.y >= 0);
  CHECK(v.x + v.w <= 50);
  CHECK(v.y + v.h <= 50);
}

TEST_CASE("mask zero and mask one") {
  std::mt19937_64 rng(3);
  const Image img = random_grid(12, 12, 3, rng);
  const Patch p(random_grid(12, 12, 3, rng));
  CHECK(compose(img, p, full_frame(12, 0.0)) == img);
  CHECK(compose(img, p, full_frame(12, 1.0)) == p.grid());
}

TEST_CASE("compose is affine in the patch") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Image img = random_grid(10, 10, 3, rng);
    MaskLayout l = full_frame(10, 0.0);
    for (double& m : l.mask.values()) m = u(rng);
    const Patch p1(random_grid(10, 10, 3, rng)), p2(random_grid(10, 10, 3, rng));
    const double a = u(rng);
    Grid mix = p1.grid();
    for (std::size_t i = 0; i < mix.size(); ++i) mix.values()[i] = a * p1.grid().values()[i] + (1 - a) * p2.grid().values()[i];
    const Image lhs = compose(img, Patch(mix), l);
    const Image c1 = compose(img, p1, l), c2 = compose(img, p2, l);
    for (std::size_t i = 0; i < lhs.size(); ++i) {
      CHECK(lhs.values()[i] == doctest::Approx(a * c1.values()[i] + (1 - a) * c2.values()[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("compose gradient matches finite differences") {
  std::mt19937_64 rng(5);
  const Image img = random_grid(20, 20, 3, rng);
  const BoundingBox box{2, 1, 16, 18, "person"};
  const auto layout = build_person_mask(20, 20, std::span(&box, 1), {0.5, 0.5});
  const Patch p(random_grid(8, 8, 3, rng));
  const Grid w = random_grid(20, 20, 3, rng);  // scalar = <w, compose>
  auto f = [&](const Patch& q) {
    const Image out = compose(img, q, layout);
    double s = 0;
    for (std::size_t i = 0; i < out.size(); ++i) s += w.values()[i] * out.values()[i];
    return s;
  };
  const Grid g = compose_backward(w, layout, 8);
  for (std::size_t i = 0; i < g.size(); ++i) {
    Patch a = p, b = p;
    a.grid().values()[i] += 1e-4;
    b.grid().values()[i] -= 1e-4;
    const double fd = (f(a) - f(b)) / 2e-4;
    CHECK(std::abs(fd - g.values()[i]) / std::max({std::abs(fd), std::abs(g.values()[i]), 1e-6}) < 1e-3);
  }
}

TEST_CASE("transform sampling") {
  const TransformRanges r;
  CHECK(sample_transform(42, r) == sample_transform(42, r));
  double mean_rot = 0;
  int flips = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const TransformParams t = sample_transform(static_cast<std::uint64_t>(i), r);
    mean_rot += t.rotation / n;
    flips += t.flip_h;
    CHECK(std::abs(t.rotation) <= r.max_rotation);
    CHECK(t.crop_fraction >= 0.0);
    CHECK(t.crop_fraction <= r.max_crop);
    CHECK(t.scale >= r.min_scale);
    CHECK(t.scale <= r.max_scale);
    CHECK(std::abs(t.brightness_shift) <= r.max_brightness);
    CHECK(t.noise_sigma >= 0.0);
    CHECK(t.noise_sigma <= r.max_noise_sigma);
  }
  CHECK(std::abs(mean_rot) < 1.0);
  CHECK(std::abs(flips / double(n) - 0.5) < 0.02);
}

TEST_CASE("identity and flip transforms") {
  std::mt19937_64 rng(6);
  const Grid x = random_grid(15, 11, 3, rng);
  const TransformParams id;
  CHECK(id.is_identity());
  CHECK(apply_transform(x, id) == x);
  TransformParams flip;
  flip.flip_h = true;
  CHECK(apply_transform(apply_transform(x, flip), flip) == x);
}

TEST_CASE("rotating a centred disk leaves it unchanged") {
  // Disk with a flat interior and a linear rim; bilinear sampling of a
  // piecewise linear radial profile is exact away from the rim.
  const int n = 64;
  Grid disk(n, n, 1);
  const double c = (n - 1) / 2.0;
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double r = std::hypot(y - c, x - c);
      disk.at(y, x) = std::clamp((20.0 - r) / 8.0, 0.0, 1.0) * 0.8;
    }
  }
  TransformParams t;
  t.rotation = 20.0;
  const Grid rot = apply_transform(disk, t);
  double mad = 0;
  for (std::size_t i = 0; i < rot.size(); ++i) mad += std::abs(rot.values()[i] - disk.values()[i]) / rot.size();
  // a slowly varying rim keeps the bilinear error second order
  CHECK(mad < 1e-3);
  // the flat core and the zero background are reproduced exactly
  CHECK(rot.at(32, 32) == doctest::Approx(disk.at(32, 32)).epsilon(1e-12));
  CHECK(rot.at(2, 2) == 0.0);
}

TEST_CASE("transform gradient matches finite differences") {
  std::mt19937_64 rng(7);
  const Grid x = random_grid(8, 8, 3, rng);
  TransformParams t;
  t.rotation = 13.0;
  t.flip_h = true;
  t.crop_fraction = 0.05;
  t.scale = 1.1;
  t.brightness_shift = 0.02;
  const Grid w = random_grid(8, 8, 3, rng);
  auto f = [&](const Grid& in) {
    const Grid out = apply_transform(in, t);
    double s = 0;
    for (std::size_t i = 0; i < out.size(); ++i) s += w.values()[i] * out.values()[i];
    return s;
  };
  const Grid g = apply_transform_backward(x, t, w);
  int bad = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    Grid a = x, b = x;
    a.values()[i] += 1e-4;
    b.values()[i] -= 1e-4;
    const double fd = (f(a) - f(b)) / 2e-4;
    bad += std::abs(fd - g.values()[i]) / std::max({std::abs(fd), std::abs(g.values()[i]), 1e-6}) >= 1e-3;
  }
  CHECK(bad <= static_cast<int>(x.size()) / 20);
}

TEST_CASE("resize to the same size is the identity") {
  std::mt19937_64 rng(8);
  const Grid x = random_grid(9, 7, 3, rng);
  CHECK(resize(x, 9, 7) == x);
}

TEST_CASE("png round trip is exact on byte values") {
  Image img = make_image(5, 4);
  int k = 0;
  for (double& v : img.values()) v = (k++ * 37 % 256) / 255.0;
  const auto path = std::filesystem::temp_directory_path() / "advpatch_unit_rt.png";
  write_png(path, img);
  CHECK(read_png(path) == img);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(read_png(path), ParseError);
}
