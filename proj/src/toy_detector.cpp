#include "advpatch/toy_detector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "advpatch/errors.hpp"
#include "advpatch/silhouette.hpp"

namespace advpatch {

namespace {

constexpr double kVarianceFloor = 1e-6;

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double correlation(double num, double s1, double s2, double n) {
  const double var = std::max(s2 - s1 * s1 / n, 0.0);
  return num / std::sqrt(var + kVarianceFloor);
}

// Summed-area table with a zero border: sat(y, x) = sum of src over [0,y) x [0,x).
struct Integral {
  int h = 0, w = 0;
  std::vector<double> sum, sq;

  explicit Integral(const Grid& g) : h(g.height()), w(g.width()) {
    sum.assign(static_cast<std::size_t>(h + 1) * (w + 1), 0.0);
    sq.assign(sum.size(), 0.0);
    for (int y = 0; y < h; ++y) {
      double rs = 0.0, rq = 0.0;
      for (int x = 0; x < w; ++x) {
        const double v = g.at(y, x);
        rs += v;
        rq += v * v;
        sum[idx(y + 1, x + 1)] = sum[idx(y, x + 1)] + rs;
        sq[idx(y + 1, x + 1)] = sq[idx(y, x + 1)] + rq;
      }
    }
  }
  std::size_t idx(int y, int x) const { return static_cast<std::size_t>(y) * (w + 1) + x; }
  double box(const std::vector<double>& t, int y, int x, int bh, int bw) const {
    return t[idx(y + bh, x + bw)] - t[idx(y, x + bw)] - t[idx(y + bh, x)] + t[idx(y, x)];
  }
};

double window_dot(const Grid& tmpl, const Grid& gray, int y, int x) {
  const int th = tmpl.height(), tw = tmpl.width();
  const double* t = tmpl.values().data();
  double acc = 0.0;
  for (int i = 0; i < th; ++i) {
    const double* g = &gray.values()[gray.index(y + i, x)];
    const double* tr = t + static_cast<std::size_t>(i) * tw;
    double row = 0.0;
    for (int j = 0; j < tw; ++j) row += tr[j] * g[j];
    acc += row;
  }
  return acc;
}

struct ToyContext final : ScoringContext {
  struct Window {
    int k, y, x;
    double n0, s1, s2;
  };
  int height = 0, width = 0;
  Grid base_gray;
  std::vector<std::vector<std::pair<int, int>>> row_spans;  // dirty [x0, x1) per row
  std::vector<int> dirty_pixels;
  double static_corr = -std::numeric_limits<double>::infinity();
  int static_k = -1, static_y = 0, static_x = 0;
  std::vector<Window> windows;
};

}  // namespace

ToyTemplateDetector::ToyTemplateDetector(std::string name, std::vector<Grid> templates, double gain,
                                         double bias, std::uint64_t seed, std::array<double, 3> channel_weights)
    : name_(std::move(name)),
      templates_(std::move(templates)),
      gain_(gain),
      bias_(bias),
      seed_(seed),
      channel_weights_(channel_weights) {
  double sum = 0.0;
  for (const double w : channel_weights_) {
    if (!(w >= 0.0)) throw InvalidArgument("ToyTemplateDetector: channel weights must be non-negative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InvalidArgument("ToyTemplateDetector: channel weights must sum to 1");
  if (templates_.empty()) throw InvalidArgument("ToyTemplateDetector: no templates");
  for (const auto& t : templates_) {
    if (t.channels() != 1 || t.empty()) throw InvalidArgument("ToyTemplateDetector: templates must be 1-channel");
  }
}

double ToyTemplateDetector::objectness(double corr) const noexcept { return logistic(gain_ * corr + bias_); }

Grid ToyTemplateDetector::correlation_map(const Grid& gray, int k) const {
  const Grid& t = templates_.at(k);
  const int th = t.height(), tw = t.width();
  const int oh = gray.height() - th + 1, ow = gray.width() - tw + 1;
  if (oh < 1 || ow < 1) return {};
  const Integral sat(gray);
  const double n = static_cast<double>(th) * tw;
  Grid out(oh, ow, 1);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      out.at(y, x) = correlation(window_dot(t, gray, y, x), sat.box(sat.sum, y, x, th, tw),
                                 sat.box(sat.sq, y, x, th, tw), n);
    }
  }
  return out;
}

ToyTemplateDetector::Anchor ToyTemplateDetector::best_anchor(const Grid& gray) const {
  Anchor best;
  best.corr = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < static_cast<int>(templates_.size()); ++k) {
    const Grid map = correlation_map(gray, k);
    for (int y = 0; y < map.height(); ++y) {
      for (int x = 0; x < map.width(); ++x) {
        if (map.at(y, x) > best.corr) best = {k, y, x, map.at(y, x)};
      }
    }
  }
  return best;
}

double ToyTemplateDetector::window_corr(const Grid& gray, const Anchor& a, Grid* grad, double scale) const {
  const Grid& t = templates_[a.k];
  const int th = t.height(), tw = t.width();
  const double n = static_cast<double>(th) * tw;
  double num = 0.0, s1 = 0.0, s2 = 0.0;
  for (int i = 0; i < th; ++i) {
    for (int j = 0; j < tw; ++j) {
      const double g = gray.at(a.y + i, a.x + j);
      num += t.at(i, j) * g;
      s1 += g;
      s2 += g * g;
    }
  }
  const double var = std::max(s2 - s1 * s1 / n, 0.0);
  const double d = std::sqrt(var + kVarianceFloor);
  const double corr = num / d;
  if (grad != nullptr) {
    const double mean = s1 / n;
    const double d3 = d * d * d;
    // d corr / d gray = T / D - num * (g - mean) / D^3 (zero when var is clamped)
    const bool active = s2 - s1 * s1 / n > 0.0;
    for (int i = 0; i < th; ++i) {
      for (int j = 0; j < tw; ++j) {
        const double g = gray.at(a.y + i, a.x + j);
        double dg = t.at(i, j) / d;
        if (active) dg -= num * (g - mean) / d3;
        for (int c = 0; c < kRgb; ++c) grad->at(a.y + i, a.x + j, c) += scale * dg * channel_weights_[c];
      }
    }
  }
  return corr;
}

double ToyTemplateDetector::finish(const Grid& gray, const Anchor& a, Grid* grad, int height, int width) const {
  if (grad != nullptr) *grad = Grid(height, width, kRgb);
  if (a.k < 0) return 0.0;
  if (grad == nullptr) return objectness(a.corr);
  // Recompute the winning window directly so value and gradient agree exactly.
  const double corr = window_corr(gray, a, nullptr, 0.0);
  const double conf = objectness(corr);
  window_corr(gray, a, grad, gain_ * conf * (1.0 - conf));
  return conf;
}

double ToyTemplateDetector::do_person_confidence(const Image& image, Grid* grad) const {
  const Grid gray = luminance(image);
  return finish(gray, best_anchor(gray), grad, image.height(), image.width());
}

DetectionSet ToyTemplateDetector::do_detect(const Image& image) const {
  const Grid gray = luminance(image);
  DetectionSet out;
  const int th = templates_.front().height(), tw = templates_.front().width();
  std::vector<Grid> maps;
  for (int k = 0; k < static_cast<int>(templates_.size()); ++k) maps.push_back(correlation_map(gray, k));
  if (maps.front().empty()) return out;
  const int oh = maps.front().height(), ow = maps.front().width();

  Grid best(oh, ow, 1, -std::numeric_limits<double>::infinity());
  for (const auto& m : maps) {
    for (std::size_t i = 0; i < m.size(); ++i) best.values()[i] = std::max(best.values()[i], m.values()[i]);
  }

  std::vector<Detection> candidates;
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      const double v = best.at(y, x);
      if (v <= kCandidateFloor) continue;
      bool peak = true;
      for (int dy = -1; dy <= 1 && peak; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int yy = y + dy, xx = x + dx;
          if ((dy == 0 && dx == 0) || yy < 0 || xx < 0 || yy >= oh || xx >= ow) continue;
          const double u = best.at(yy, xx);
          // Plateaus keep only their first point in raster order.
          const bool earlier = dy < 0 || (dy == 0 && dx < 0);
          if (u > v || (earlier && u == v)) {
            peak = false;
            break;
          }
        }
      }
      if (!peak) continue;
      Detection d;
      d.box = {static_cast<double>(x), static_cast<double>(y), static_cast<double>(tw), static_cast<double>(th),
               kPersonLabel};
      d.objectness = objectness(v);
      d.class_scores[kPersonLabel] = 1.0;
      candidates.push_back(std::move(d));
    }
  }
  out.detections = non_max_suppression(std::move(candidates), kNmsIou);
  return out;
}

std::unique_ptr<ScoringContext> ToyTemplateDetector::do_prepare(const Image& base,
                                                                std::span<const PixelRect> dirty) const {
  auto ctx = std::make_unique<ToyContext>();
  ctx->height = base.height();
  ctx->width = base.width();
  ctx->base_gray = luminance(base);
  const PixelRect frame{0, 0, base.width(), base.height()};

  std::vector<std::uint8_t> mask(static_cast<std::size_t>(ctx->height) * ctx->width, 0);
  for (const auto& r : dirty) {
    const PixelRect v = r.intersection(frame);
    for (int y = v.y; y < v.y + v.h; ++y) {
      for (int x = v.x; x < v.x + v.w; ++x) mask[static_cast<std::size_t>(y) * ctx->width + x] = 1;
    }
  }
  ctx->row_spans.resize(ctx->height);
  for (int y = 0; y < ctx->height; ++y) {
    int x = 0;
    while (x < ctx->width) {
      if (!mask[static_cast<std::size_t>(y) * ctx->width + x]) {
        ++x;
        continue;
      }
      const int start = x;
      while (x < ctx->width && mask[static_cast<std::size_t>(y) * ctx->width + x]) {
        ctx->dirty_pixels.push_back(y * ctx->width + x);
        ++x;
      }
      ctx->row_spans[y].emplace_back(start, x);
    }
  }

  const Integral sat(ctx->base_gray);
  for (int k = 0; k < static_cast<int>(templates_.size()); ++k) {
    const Grid& t = templates_[k];
    const int th = t.height(), tw = t.width();
    const int oh = ctx->height - th + 1, ow = ctx->width - tw + 1;
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        const PixelRect window{x, y, tw, th};
        const bool touched = std::any_of(dirty.begin(), dirty.end(),
                                         [&](const PixelRect& r) { return window.intersects(r.intersection(frame)); });
        const double num = window_dot(t, ctx->base_gray, y, x);
        const double s1 = sat.box(sat.sum, y, x, th, tw);
        const double s2 = sat.box(sat.sq, y, x, th, tw);
        if (touched) {
          ctx->windows.push_back({k, y, x, num, s1, s2});
        } else {
          const double c = correlation(num, s1, s2, static_cast<double>(th) * tw);
          if (c > ctx->static_corr) {
            ctx->static_corr = c;
            ctx->static_k = k;
            ctx->static_y = y;
            ctx->static_x = x;
          }
        }
      }
    }
  }
  return ctx;
}

double ToyTemplateDetector::do_person_confidence(const Image& image, const ScoringContext& context,
                                                 Grid* grad) const {
  const auto* ctx = dynamic_cast<const ToyContext*>(&context);
  if (ctx == nullptr) return do_person_confidence(image, grad);
  if (image.height() != ctx->height || image.width() != ctx->width) {
    throw InvalidArgument("person_confidence: image does not match the prepared context");
  }

  const std::size_t npix = static_cast<std::size_t>(ctx->height) * ctx->width;
  std::vector<double> dg(npix, 0.0), dg2(npix, 0.0);
  for (const int p : ctx->dirty_pixels) {
    const auto v = image.values().subspan(static_cast<std::size_t>(p) * kRgb, kRgb);
    const double g = channel_weights_[0] * v[0] + channel_weights_[1] * v[1] + channel_weights_[2] * v[2];
    const double g0 = ctx->base_gray.values()[p];
    dg[p] = g - g0;
    dg2[p] = g * g - g0 * g0;
  }

  Anchor best{ctx->static_k, ctx->static_y, ctx->static_x, ctx->static_corr};
  for (const auto& w : ctx->windows) {
    const Grid& t = templates_[w.k];
    const int th = t.height(), tw = t.width();
    double num = w.n0, s1 = w.s1, s2 = w.s2;
    for (int i = 0; i < th; ++i) {
      const int y = w.y + i;
      for (const auto& [a, b] : ctx->row_spans[y]) {
        const int x0 = std::max(a, w.x), x1 = std::min(b, w.x + tw);
        const double* tr = &t.values()[t.index(i, 0)] - w.x;
        const std::size_t row = static_cast<std::size_t>(y) * ctx->width;
        for (int x = x0; x < x1; ++x) {
          num += tr[x] * dg[row + x];
          s1 += dg[row + x];
          s2 += dg2[row + x];
        }
      }
    }
    const double c = correlation(num, s1, s2, static_cast<double>(th) * tw);
    if (c > best.corr) best = {w.k, w.y, w.x, c};
  }

  if (grad == nullptr) {
    if (best.k < 0) return 0.0;
    return objectness(best.corr);
  }
  return finish(luminance(image), best, grad, image.height(), image.width());
}

Grid ToyTemplateDetector::luminance(const Image& image) const {
  require_image(image);
  Grid g(image.height(), image.width(), 1);
  const auto src = image.values();
  auto dst = g.values();
  for (std::size_t p = 0; p < dst.size(); ++p) {
    dst[p] = channel_weights_[0] * src[3 * p] + channel_weights_[1] * src[3 * p + 1] + channel_weights_[2] * src[3 * p + 2];
  }
  return g;
}

std::shared_ptr<ToyTemplateDetector> make_toy_detector(std::uint64_t seed, int n_templates, std::string name) {
  if (n_templates < 1) throw InvalidArgument("make_toy_detector: n_templates must be >= 1");
  std::mt19937_64 rng(seed);
  std::vector<Grid> templates;
  templates.reserve(n_templates);
  for (int i = 0; i < n_templates; ++i) {
    const SilhouetteShape shape = SilhouetteShape::sample(rng);
    Grid t = render_silhouette(shape, kTemplateHeight, kTemplateWidth);
    // Persons are darker than their surroundings: background +, body -.
    double mean = 0.0;
    for (double& v : t.values()) {
      v = 1.0 - v;
      mean += v;
    }
    mean /= static_cast<double>(t.size());
    double norm = 0.0;
    for (double& v : t.values()) {
      v -= mean;
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double& v : t.values()) v /= norm;
    templates.push_back(std::move(t));
  }
  // Flat Dirichlet colour sensitivity: each detector sees its own mix of
  // the channels, as differently trained networks weigh colour differently.
  std::array<double, 3> weights{};
  std::exponential_distribution<double> expo(1.0);
  double total = 0.0;
  for (double& w : weights) total += (w = expo(rng));
  for (double& w : weights) w /= total;
  if (name.empty()) name = "toy-" + std::to_string(seed);
  return std::make_shared<ToyTemplateDetector>(std::move(name), std::move(templates), 8.0, -4.0, seed, weights);
}

}  // namespace advpatch
