#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "advpatch/composition.hpp"
#include "advpatch/ensemble.hpp"
#include "advpatch/image.hpp"
#include "advpatch/transform.hpp"

namespace advpatch {

/// Weights of the aggregate objective
///   total = alpha * nps + beta * tv + lambda_css * css + obj.
struct LossWeights {
  double alpha = 0.01;
  double beta = 2.5;
  double lambda_css = 2.5;

  void validate() const;
};

using Rgb = std::array<double, 3>;

/// Colors a printer or display can reproduce.
struct PrintableColorSet {
  std::vector<Rgb> colors;

  void validate() const;
  /// Text file, one "r g b" triple per line with values in [0,1]. Blank lines
  /// and lines starting with '#' are skipped.
  static PrintableColorSet load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  /// A 3x3x3 lattice over {0.1, 0.5, 0.9}^3.
  static PrintableColorSet default_palette();
};

/// Reference image resampled to the patch's dimensions.
struct SpecifiedImage {
  Grid values;

  static SpecifiedImage from_image(const Image& image, int side);
};

struct LossBreakdown {
  double obj = 0.0;
  double css = 0.0;
  double tv = 0.0;
  double nps = 0.0;
  double total = 0.0;
};

/// Element-count normalization of the css/tv/nps terms. With it off the
/// terms are raw sums.
struct LossOptions {
  bool normalize = true;
};

// Ensemble person confidence per image, combined by the ensemble mode,
// averaged over the batch. In [0,1].
double obj_loss(const EnsembleSpec& ensemble, std::span<const Image> patched_batch);

double css_loss(const Grid& patch, const Grid& specified, std::span<const TransformParams> transforms,
                const LossOptions& options = {});
Grid css_gradient(const Grid& patch, const Grid& specified, std::span<const TransformParams> transforms,
                  const LossOptions& options = {});

double tv_loss(const Grid& patch, const LossOptions& options = {});
// Subgradient with sign(0) = 0.
Grid tv_gradient(const Grid& patch, const LossOptions& options = {});

double nps_loss(const Grid& patch, const PrintableColorSet& colors, const LossOptions& options = {});
Grid nps_gradient(const Grid& patch, const PrintableColorSet& colors, const LossOptions& options = {});

/// Combines the four terms. Throws NumericError naming the first non-finite
/// component.
LossBreakdown total_loss(const LossWeights& weights, double obj, double css, double tv, double nps);

/// A training image with its patch layout and, optionally, per-member
/// scoring contexts that let detectors re-score only the patched regions.
struct Scene {
  Image image;
  MaskLayout layout;
  std::vector<std::shared_ptr<const ScoringContext>> contexts;  // one per ensemble member, or empty
};

/// Builds the scoring contexts of `scene` for every ensemble member.
void prepare_scene(Scene& scene, const EnsembleSpec& ensemble);

struct LossEvaluation {
  LossBreakdown breakdown;
  Grid gradient;  // d total / d patch, patch-shaped
};

/// Total loss and its exact gradient with respect to the patch.
///
/// Scene i sees the patch through transforms[i % T] before composition; the
/// similarity term averages over all of `transforms`. Members must be
/// differentiable.
LossEvaluation loss_gradient(const LossWeights& weights, const Patch& patch, std::span<const Scene> scenes,
                             const EnsembleSpec& ensemble, const SpecifiedImage& specified,
                             std::span<const TransformParams> transforms, const PrintableColorSet& colors,
                             const LossOptions& options = {});

/// Same quantity without the gradient, for evaluation and finite differences.
LossBreakdown loss_value(const LossWeights& weights, const Patch& patch, std::span<const Scene> scenes,
                         const EnsembleSpec& ensemble, const SpecifiedImage& specified,
                         std::span<const TransformParams> transforms, const PrintableColorSet& colors,
                         const LossOptions& options = {});

}  // namespace advpatch
