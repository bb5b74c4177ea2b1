#include "advpatch/losses.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>

#include "advpatch/errors.hpp"
#include "advpatch/resample.hpp"

namespace advpatch {

void LossWeights::validate() const {
  for (const double w : {alpha, beta, lambda_css}) {
    if (!std::isfinite(w) || w < 0.0) throw InvalidArgument("loss weights must be finite and >= 0");
  }
}

void PrintableColorSet::validate() const {
  if (colors.empty()) throw InvalidArgument("printable color set is empty");
  for (const auto& c : colors) {
    for (const double v : c) {
      if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("printable color component outside [0,1]");
    }
  }
}

PrintableColorSet PrintableColorSet::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open printable colors file: " + path.string());
  PrintableColorSet set;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    Rgb c{};
    std::string extra;
    if (!(fields >> c[0] >> c[1] >> c[2]) || (fields >> extra)) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected 'r g b'");
    }
    for (const double v : c) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw ParseError(path.string() + ":" + std::to_string(lineno) + ": component outside [0,1]");
      }
    }
    set.colors.push_back(c);
  }
  if (set.colors.empty()) throw ParseError(path.string() + ": no colors");
  return set;
}

void PrintableColorSet::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write printable colors file: " + path.string());
  out << std::setprecision(17);
  for (const auto& c : colors) out << c[0] << ' ' << c[1] << ' ' << c[2] << '\n';
}

PrintableColorSet PrintableColorSet::default_palette() {
  PrintableColorSet set;
  for (const double r : {0.1, 0.5, 0.9}) {
    for (const double g : {0.1, 0.5, 0.9}) {
      for (const double b : {0.1, 0.5, 0.9}) set.colors.push_back({r, g, b});
    }
  }
  return set;
}

SpecifiedImage SpecifiedImage::from_image(const Image& image, int side) {
  require_image(image, "specified image");
  Grid g = resize(image, side, side);
  g.clamp(0.0, 1.0);
  return {std::move(g)};
}

double obj_loss(const EnsembleSpec& ensemble, std::span<const Image> patched_batch) {
  ensemble.validate();
  if (patched_batch.empty()) throw InvalidArgument("obj_loss: empty batch");
  double sum = 0.0;
  for (const auto& img : patched_batch) sum += ensemble_confidence(ensemble, img);
  return sum / static_cast<double>(patched_batch.size());
}

namespace {

double element_scale(const Grid& g, const LossOptions& o) {
  return o.normalize ? 1.0 / static_cast<double>(g.size()) : 1.0;
}

double pixel_scale(const Grid& g, const LossOptions& o) {
  return o.normalize ? 1.0 / (static_cast<double>(g.height()) * g.width()) : 1.0;
}

void check_css(const Grid& patch, const Grid& specified, std::span<const TransformParams> transforms) {
  if (!patch.same_shape(specified)) throw InvalidArgument("css_loss: specified image does not match patch");
  if (transforms.empty()) throw InvalidArgument("css_loss: no transforms");
}

}  // namespace

double css_loss(const Grid& patch, const Grid& specified, std::span<const TransformParams> transforms,
                const LossOptions& options) {
  check_css(patch, specified, transforms);
  double total = 0.0;
  for (const auto& t : transforms) {
    const Grid tp = apply_transform(patch, t);
    const Grid ts = apply_transform(specified, t);
    double sq = 0.0;
    for (std::size_t i = 0; i < tp.size(); ++i) {
      const double d = tp.values()[i] - ts.values()[i];
      sq += d * d;
    }
    total += sq;
  }
  return total * element_scale(patch, options) / static_cast<double>(transforms.size());
}

Grid css_gradient(const Grid& patch, const Grid& specified, std::span<const TransformParams> transforms,
                  const LossOptions& options) {
  check_css(patch, specified, transforms);
  Grid grad(patch.height(), patch.width(), patch.channels());
  const double k = 2.0 * element_scale(patch, options) / static_cast<double>(transforms.size());
  for (const auto& t : transforms) {
    const Grid tp = apply_transform(patch, t);
    const Grid ts = apply_transform(specified, t);
    Grid diff(tp.height(), tp.width(), tp.channels());
    for (std::size_t i = 0; i < tp.size(); ++i) diff.values()[i] = k * (tp.values()[i] - ts.values()[i]);
    const Grid back = apply_transform_backward(patch, t, diff);
    for (std::size_t i = 0; i < grad.size(); ++i) grad.values()[i] += back.values()[i];
  }
  return grad;
}

double tv_loss(const Grid& p, const LossOptions& options) {
  double sum = 0.0;
  for (int y = 0; y < p.height(); ++y) {
    for (int x = 0; x < p.width(); ++x) {
      for (int c = 0; c < p.channels(); ++c) {
        if (x + 1 < p.width()) sum += std::abs(p.at(y, x, c) - p.at(y, x + 1, c));
        if (y + 1 < p.height()) sum += std::abs(p.at(y, x, c) - p.at(y + 1, x, c));
      }
    }
  }
  return sum * element_scale(p, options);
}

Grid tv_gradient(const Grid& p, const LossOptions& options) {
  Grid g(p.height(), p.width(), p.channels());
  const double k = element_scale(p, options);
  auto sign = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };
  for (int y = 0; y < p.height(); ++y) {
    for (int x = 0; x < p.width(); ++x) {
      for (int c = 0; c < p.channels(); ++c) {
        if (x + 1 < p.width()) {
          const double s = k * sign(p.at(y, x, c) - p.at(y, x + 1, c));
          g.at(y, x, c) += s;
          g.at(y, x + 1, c) -= s;
        }
        if (y + 1 < p.height()) {
          const double s = k * sign(p.at(y, x, c) - p.at(y + 1, x, c));
          g.at(y, x, c) += s;
          g.at(y + 1, x, c) -= s;
        }
      }
    }
  }
  return g;
}

namespace {

// Distance to the nearest printable color and that color's index.
std::pair<double, std::size_t> nearest_color(const Grid& p, int y, int x, const PrintableColorSet& set) {
  double best = std::numeric_limits<double>::infinity();
  std::size_t arg = 0;
  for (std::size_t i = 0; i < set.colors.size(); ++i) {
    double d2 = 0.0;
    for (int c = 0; c < kRgb; ++c) {
      const double d = p.at(y, x, c) - set.colors[i][c];
      d2 += d * d;
    }
    if (d2 < best) {
      best = d2;
      arg = i;
    }
  }
  return {std::sqrt(best), arg};
}

void check_nps(const Grid& p, const PrintableColorSet& set) {
  set.validate();
  if (p.channels() != kRgb) throw InvalidArgument("nps_loss: patch must be RGB");
}

}  // namespace

double nps_loss(const Grid& p, const PrintableColorSet& set, const LossOptions& options) {
  check_nps(p, set);
  double sum = 0.0;
  for (int y = 0; y < p.height(); ++y) {
    for (int x = 0; x < p.width(); ++x) sum += nearest_color(p, y, x, set).first;
  }
  return sum * pixel_scale(p, options);
}

Grid nps_gradient(const Grid& p, const PrintableColorSet& set, const LossOptions& options) {
  check_nps(p, set);
  Grid g(p.height(), p.width(), kRgb);
  const double k = pixel_scale(p, options);
  for (int y = 0; y < p.height(); ++y) {
    for (int x = 0; x < p.width(); ++x) {
      const auto [dist, arg] = nearest_color(p, y, x, set);
      if (dist == 0.0) continue;
      for (int c = 0; c < kRgb; ++c) g.at(y, x, c) = k * (p.at(y, x, c) - set.colors[arg][c]) / dist;
    }
  }
  return g;
}

LossBreakdown total_loss(const LossWeights& weights, double obj, double css, double tv, double nps) {
  weights.validate();
  const std::pair<const char*, double> parts[] = {{"obj", obj}, {"css", css}, {"tv", tv}, {"nps", nps}};
  for (const auto& [label, v] : parts) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite loss component: ") + label);
  }
  LossBreakdown b{obj, css, tv, nps, 0.0};
  b.total = weights.alpha * nps + weights.beta * tv + weights.lambda_css * css + obj;
  return b;
}

void prepare_scene(Scene& scene, const EnsembleSpec& ensemble) {
  ensemble.validate();
  scene.contexts.clear();
  const auto rects = scene.layout.visible_rects();
  for (const auto& m : ensemble.members) scene.contexts.push_back(m->prepare(scene.image, rects));
}

namespace {

void check_inputs(const Patch& patch, std::span<const Scene> scenes, const EnsembleSpec& ensemble,
                  const SpecifiedImage& specified, std::span<const TransformParams> transforms) {
  ensemble.validate();
  if (scenes.empty()) throw InvalidArgument("loss: empty scene batch");
  if (transforms.empty()) throw InvalidArgument("loss: no transforms");
  if (!specified.values.same_shape(patch.grid())) throw InvalidArgument("loss: specified image does not match patch");
  for (const auto& s : scenes) {
    if (!s.contexts.empty() && s.contexts.size() != ensemble.size()) {
      throw InvalidArgument("loss: scene contexts do not match the ensemble");
    }
  }
}

// Shared by loss_value and loss_gradient; `grad` null skips backpropagation.
LossBreakdown evaluate(const LossWeights& weights, const Patch& patch, std::span<const Scene> scenes,
                       const EnsembleSpec& ensemble, const SpecifiedImage& specified,
                       std::span<const TransformParams> transforms, const PrintableColorSet& colors,
                       const LossOptions& options, Grid* grad) {
  check_inputs(patch, scenes, ensemble, specified, transforms);
  if (grad != nullptr) {
    for (const auto& m : ensemble.members) {
      if (!m->capabilities().differentiable) {
        throw ContractViolation(m->name() + ": loss gradient needs differentiable detectors");
      }
    }
    *grad = Grid(patch.side(), patch.side(), kRgb);
  }

  const int side = patch.side();
  const double inv_batch = 1.0 / static_cast<double>(scenes.size());
  double obj = 0.0;
  std::vector<double> conf(ensemble.size());
  std::vector<Grid> member_grads(ensemble.size());
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const Scene& scene = scenes[i];
    const TransformParams& t = transforms[i % transforms.size()];
    const Patch shown(apply_transform(patch.grid(), t));
    const Image patched = compose(scene.image, shown, scene.layout);
    for (std::size_t m = 0; m < ensemble.size(); ++m) {
      const ScoringContext* ctx = scene.contexts.empty() ? nullptr : scene.contexts[m].get();
      conf[m] = ensemble.members[m]->person_confidence(patched, ctx, grad ? &member_grads[m] : nullptr);
    }
    obj += combine(ensemble.mode, conf) * inv_batch;
    if (grad == nullptr || scene.layout.empty()) continue;

    const auto w = combine_weights(ensemble.mode, conf);
    Grid image_grad(patched.height(), patched.width(), kRgb);
    for (std::size_t m = 0; m < ensemble.size(); ++m) {
      if (w[m] == 0.0) continue;
      const double k = w[m] * inv_batch;
      const auto src = member_grads[m].values();
      auto dst = image_grad.values();
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += k * src[j];
    }
    const Grid shown_grad = compose_backward(image_grad, scene.layout, side);
    const Grid patch_grad = apply_transform_backward(patch.grid(), t, shown_grad);
    for (std::size_t j = 0; j < grad->size(); ++j) grad->values()[j] += patch_grad.values()[j];
  }

  const double css = css_loss(patch.grid(), specified.values, transforms, options);
  const double tv = tv_loss(patch.grid(), options);
  const double nps = nps_loss(patch.grid(), colors, options);
  const LossBreakdown b = total_loss(weights, obj, css, tv, nps);

  if (grad != nullptr) {
    const Grid gc = css_gradient(patch.grid(), specified.values, transforms, options);
    const Grid gt = tv_gradient(patch.grid(), options);
    const Grid gn = nps_gradient(patch.grid(), colors, options);
    auto g = grad->values();
    for (std::size_t j = 0; j < g.size(); ++j) {
      g[j] += weights.lambda_css * gc.values()[j] + weights.beta * gt.values()[j] + weights.alpha * gn.values()[j];
      if (!std::isfinite(g[j])) throw NumericError("non-finite loss gradient");
    }
  }
  return b;
}

}  // namespace

LossEvaluation loss_gradient(const LossWeights& weights, const Patch& patch, std::span<const Scene> scenes,
                             const EnsembleSpec& ensemble, const SpecifiedImage& specified,
                             std::span<const TransformParams> transforms, const PrintableColorSet& colors,
                             const LossOptions& options) {
  LossEvaluation out;
  out.breakdown = evaluate(weights, patch, scenes, ensemble, specified, transforms, colors, options, &out.gradient);
  return out;
}

LossBreakdown loss_value(const LossWeights& weights, const Patch& patch, std::span<const Scene> scenes,
                         const EnsembleSpec& ensemble, const SpecifiedImage& specified,
                         std::span<const TransformParams> transforms, const PrintableColorSet& colors,
                         const LossOptions& options) {
  return evaluate(weights, patch, scenes, ensemble, specified, transforms, colors, options, nullptr);
}

}  // namespace advpatch
