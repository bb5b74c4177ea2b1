#include "advpatch/scenes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "advpatch/errors.hpp"
#include "advpatch/png_io.hpp"
#include "advpatch/resample.hpp"
#include "advpatch/silhouette.hpp"
#include "advpatch/toy_detector.hpp"
#include "json.hpp"

namespace advpatch {

using nlohmann::json;

void SyntheticSceneSpec::validate() const {
  if (texture_cell < 1) throw InvalidArgument("scene spec: texture_cell must be >= 1");
  if (count < 1) throw InvalidArgument("scene spec: count must be >= 1");
  if (height < kTemplateHeight + 8 || width < kTemplateWidth + 8) {
    throw InvalidArgument("scene spec: image too small for a person");
  }
  if (min_persons < 0 || max_persons < min_persons) throw InvalidArgument("scene spec: bad persons range");
  if (!(clutter_density >= 0.0) || !(texture >= 0.0)) throw InvalidArgument("scene spec: negative clutter or texture");
  if (!(min_contrast > 0.0 && max_contrast >= min_contrast && max_contrast <= 0.45)) {
    throw InvalidArgument("scene spec: contrast range must satisfy 0 < min <= max <= 0.45");
  }
  if (!(min_background >= max_contrast && max_background >= min_background && max_background <= 1.0)) {
    throw InvalidArgument("scene spec: background range must satisfy max_contrast <= min <= max <= 1");
  }
}

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

// Low-frequency noise: a coarse Gaussian grid upsampled bilinearly.
Grid smooth_noise(std::mt19937_64& rng, int h, int w, int cell) {
  Grid coarse(h / cell + 2, w / cell + 2, kRgb);
  std::normal_distribution<double> n(0.0, 1.0);
  for (double& v : coarse.values()) v = n(rng);
  return resize(coarse, h, w);
}

void paint(Image& img, const Grid& coverage, int y0, int x0, const std::array<double, 3>& color) {
  for (int y = 0; y < coverage.height(); ++y) {
    for (int x = 0; x < coverage.width(); ++x) {
      const int iy = y0 + y, ix = x0 + x;
      if (iy < 0 || ix < 0 || iy >= img.height() || ix >= img.width()) continue;
      const double a = coverage.at(y, x);
      for (int c = 0; c < kRgb; ++c) img.at(iy, ix, c) = (1.0 - a) * img.at(iy, ix, c) + a * color[c];
    }
  }
}

Grid ellipse_coverage(int h, int w) {
  Grid g(h, w, 1);
  const int ss = 4;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int inside = 0;
      for (int sy = 0; sy < ss; ++sy) {
        for (int sx = 0; sx < ss; ++sx) {
          const double ex = (x + (sx + 0.5) / ss) / w * 2.0 - 1.0;
          const double ey = (y + (sy + 0.5) / ss) / h * 2.0 - 1.0;
          if (ex * ex + ey * ey <= 1.0) ++inside;
        }
      }
      g.at(y, x) = inside / double(ss * ss);
    }
  }
  return g;
}

LabeledImage one_scene(const SyntheticSceneSpec& spec, std::mt19937_64& rng) {
  const int H = spec.height, W = spec.width;
  LabeledImage out;
  out.image = make_image(H, W);
  std::array<double, 3> base{};
  for (double& b : base) b = uniform(rng, spec.min_background, spec.max_background);
  const Grid noise = smooth_noise(rng, H, W, spec.texture_cell);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      for (int c = 0; c < kRgb; ++c) out.image.at(y, x, c) = base[c] + spec.texture * noise.at(y, x, c);
    }
  }

  const double expected = spec.clutter_density * (double(H) * W) / (128.0 * 128.0);
  const int blobs = expected > 0.0 ? std::poisson_distribution<int>(expected)(rng) : 0;
  for (int i = 0; i < blobs; ++i) {
    const int bh = uniform_int(rng, 6, 16), bw = uniform_int(rng, 6, 16);
    const int y0 = uniform_int(rng, 0, H - bh), x0 = uniform_int(rng, 0, W - bw);
    std::array<double, 3> col{};
    for (double& c : col) c = uniform(rng, 0.3, 0.95);
    paint(out.image, ellipse_coverage(bh, bw), y0, x0, col);
  }

  const int persons = uniform_int(rng, spec.min_persons, spec.max_persons);
  for (int p = 0; p < persons; ++p) {
    const double s = uniform(rng, 0.9, 1.1);
    const int h = static_cast<int>(std::lround(kTemplateHeight * s));
    const int w = static_cast<int>(std::lround(kTemplateWidth * s));
    // Rejection sampling for a position clear of earlier persons.
    bool placed = false;
    int x0 = 0, y0 = 0;
    for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
      x0 = uniform_int(rng, 0, W - w);
      y0 = uniform_int(rng, 0, H - h);
      placed = std::none_of(out.boxes.begin(), out.boxes.end(), [&](const BoundingBox& b) {
        return x0 < b.x + b.w + 2 && b.x < x0 + w + 2 && y0 < b.y + b.h + 2 && b.y < y0 + h + 2;
      });
    }
    if (!placed) break;
    const SilhouetteShape shape = SilhouetteShape::sample(rng);
    const double contrast = uniform(rng, spec.min_contrast, spec.max_contrast);
    std::array<double, 3> col{};
    for (int c = 0; c < kRgb; ++c) col[c] = base[c] - contrast + uniform(rng, -0.03, 0.03);
    paint(out.image, render_silhouette(shape, h, w), y0, x0, col);
    out.boxes.push_back({double(x0), double(y0), double(w), double(h), "person"});
  }
  out.image.clamp();
  // Store exactly what a PNG round trip would give back.
  for (double& v : out.image.values()) v = std::lround(v * 255.0) / 255.0;
  return out;
}

}  // namespace

std::vector<LabeledImage> generate_scenes(const SyntheticSceneSpec& spec) {
  spec.validate();
  std::vector<LabeledImage> out;
  out.reserve(spec.count);
  for (int i = 0; i < spec.count; ++i) {
    // Per-scene stream so scene i does not depend on how earlier scenes drew.
    std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                      static_cast<std::uint32_t>(i)};
    std::mt19937_64 rng(seq);
    out.push_back(one_scene(spec, rng));
  }
  return out;
}

Image make_reference_image(int side, std::uint64_t seed) {
  if (side < 1) throw InvalidArgument("reference image: side must be >= 1");
  std::mt19937_64 rng(seed);
  const double petals = std::uniform_int_distribution<int>(11, 16)(rng);
  const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double disk = uniform(rng, 0.18, 0.24);
  Image img = make_image(side, side);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const double u = (x + 0.5) / side * 2.0 - 1.0, v = (y + 0.5) / side * 2.0 - 1.0;
      const double r = std::hypot(u, v), th = std::atan2(v, u);
      const double petal_edge = 0.55 + 0.3 * std::pow(std::abs(std::cos(0.5 * petals * th + phase)), 1.5);
      // Soft edges keep the picture smooth at any resolution.
      const double in_disk = 1.0 / (1.0 + std::exp((r - disk) * 40.0));
      const double in_petal = 1.0 / (1.0 + std::exp((r - petal_edge) * 25.0));
      const std::array<double, 3> sky{0.35 + 0.15 * v, 0.55 + 0.1 * v, 0.85};
      const std::array<double, 3> petal{0.98, 0.78 - 0.25 * r, 0.1};
      const double seeds = 0.5 + 0.5 * std::cos(60.0 * r) * std::cos(8.0 * th);
      const std::array<double, 3> centre{0.35 + 0.1 * seeds, 0.2 + 0.05 * seeds, 0.05};
      for (int c = 0; c < kRgb; ++c) {
        const double outer = in_petal * petal[c] + (1.0 - in_petal) * sky[c];
        img.at(y, x, c) = in_disk * centre[c] + (1.0 - in_disk) * outer;
      }
    }
  }
  img.clamp();
  return img;
}

std::filesystem::path DatasetManifest::resolve(const ManifestEntry& e) const {
  const std::filesystem::path p(e.file);
  return p.is_absolute() ? p : root / p;
}

std::vector<LabeledImage> DatasetManifest::load_images() const {
  std::vector<LabeledImage> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back({read_png(resolve(e)), e.boxes});
  return out;
}

namespace {

int line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

// Line of the i-th top-level array element, found by scanning for '{' at
// bracket depth one outside strings.
int line_of_record(const std::string& text, std::size_t index) {
  int depth = 0, line = 1;
  std::size_t seen = 0;
  bool in_string = false, escape = false;
  for (char ch : text) {
    if (ch == '\n') ++line;
    if (in_string) {
      if (escape) escape = false;
      else if (ch == '\\') escape = true;
      else if (ch == '"') in_string = false;
      continue;
    }
    if (ch == '"') in_string = true;
    else if (ch == '[' || ch == '{') {
      if (ch == '{' && depth == 1 && seen++ == index) return line;
      ++depth;
    } else if (ch == ']' || ch == '}') {
      --depth;
    }
  }
  return line;
}

}  // namespace

DatasetManifest load_dataset(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw ParseError("cannot open manifest: " + manifest_path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const std::string where = manifest_path.string();

  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(where + ":" + std::to_string(line_of_offset(text, e.byte)) + ": " + e.what());
  }
  if (!doc.is_array()) throw ParseError(where + ":1: manifest must be a JSON array of records");

  DatasetManifest m;
  m.root = manifest_path.parent_path();
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const json& rec = doc[i];
    auto fail = [&](const std::string& msg) -> ParseError {
      return ParseError(where + ":" + std::to_string(line_of_record(text, i)) + ": record " + std::to_string(i) +
                        ": " + msg);
    };
    if (!rec.is_object() || !rec.contains("file") || !rec["file"].is_string()) {
      throw fail("expected an object with a string 'file'");
    }
    for (const auto& [k, v] : rec.items()) {
      if (k != "file" && k != "boxes") throw fail("unknown key '" + k + "'");
    }
    ManifestEntry e;
    e.file = rec["file"].get<std::string>();
    if (rec.contains("boxes")) {
      if (!rec["boxes"].is_array()) throw fail("'boxes' must be an array");
      for (const json& b : rec["boxes"]) {
        if (!b.is_object()) throw fail("box must be an object");
        BoundingBox box;
        try {
          box.x = b.at("x").get<double>();
          box.y = b.at("y").get<double>();
          box.w = b.at("w").get<double>();
          box.h = b.at("h").get<double>();
          box.class_label = b.value("class", std::string("person"));
        } catch (const json::exception& ex) {
          throw fail(std::string("bad box: ") + ex.what());
        }
        for (const auto& [k, v] : b.items()) {
          if (k != "x" && k != "y" && k != "w" && k != "h" && k != "class") throw fail("unknown box key '" + k + "'");
        }
        if (!(std::isfinite(box.x) && std::isfinite(box.y) && box.w > 0.0 && box.h > 0.0)) {
          throw fail("box needs finite position and positive width and height");
        }
        e.boxes.push_back(box);
      }
    }
    Image img;
    try {
      img = read_png(m.resolve(e));
    } catch (const ParseError& ex) {
      throw fail(ex.what());
    }
    std::vector<BoundingBox> kept;
    for (BoundingBox b : e.boxes) {
      const BoundingBox before = b;
      if (!clip_box(b, img.width(), img.height())) throw fail("box lies outside its image");
      if (!(b == before)) ++m.clipped_boxes;
      kept.push_back(b);
    }
    e.boxes = std::move(kept);
    m.entries.push_back(std::move(e));
  }
  if (m.clipped_boxes > 0) {
    std::fprintf(stderr, "warning: %s: %d box(es) clipped to image bounds\n", where.c_str(), m.clipped_boxes);
  }
  return m;
}

void save_dataset(const DatasetManifest& manifest, const std::filesystem::path& manifest_path) {
  json doc = json::array();
  for (const auto& e : manifest.entries) {
    json boxes = json::array();
    for (const auto& b : e.boxes) {
      boxes.push_back({{"x", b.x}, {"y", b.y}, {"w", b.w}, {"h", b.h}, {"class", b.class_label}});
    }
    doc.push_back({{"file", e.file}, {"boxes", boxes}});
  }
  std::ofstream out(manifest_path, std::ios::binary);
  if (!out) throw ParseError("cannot write manifest: " + manifest_path.string());
  out << doc.dump(2) << '\n';
}

DatasetManifest write_scenes(const std::vector<LabeledImage>& scenes, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  DatasetManifest m;
  m.root = dir;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "scene_%03zu.png", i);
    write_png(dir / name, scenes[i].image);
    m.entries.push_back({name, scenes[i].boxes});
  }
  save_dataset(m, dir / "manifest.json");
  return m;
}

}  // namespace advpatch
