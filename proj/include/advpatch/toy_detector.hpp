#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "advpatch/detector.hpp"

namespace advpatch {

inline constexpr int kTemplateHeight = 48;
inline constexpr int kTemplateWidth = 20;

/// Deterministic, differentiable person detector built from silhouette
/// templates.
///
/// Every template slides over the grey-level image, a fixed convex mix of
/// the colour channels (channel mean by default); the normalized
/// cross-correlation at each fully contained window is the anchor response,
/// and objectness = logistic(gain * corr + bias). The class score for
/// "person" is always 1. Templates are stored zero-mean with unit norm, so
/// the correlation is the cosine between the template and the mean-removed
/// window.
class ToyTemplateDetector final : public DetectorAdapter {
 public:
  ToyTemplateDetector(std::string name, std::vector<Grid> templates, double gain, double bias,
                      std::uint64_t seed, std::array<double, 3> channel_weights = {1.0 / 3, 1.0 / 3, 1.0 / 3});

  const std::string& name() const noexcept override { return name_; }
  DetectorCapabilities capabilities() const noexcept override { return {true}; }

  const std::vector<Grid>& templates() const noexcept { return templates_; }
  double gain() const noexcept { return gain_; }
  double bias() const noexcept { return bias_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const std::array<double, 3>& channel_weights() const noexcept { return channel_weights_; }
  /// Single-channel grey image seen by the templates.
  Grid luminance(const Image& image) const;

  double objectness(double corr) const noexcept;

  /// Correlation of template `k` at every valid window of a single-channel
  /// grid; shape (H - th + 1, W - tw + 1, 1), empty when the template does
  /// not fit.
  Grid correlation_map(const Grid& gray, int k) const;

  /// Candidates kept before suppression must exceed this correlation.
  static constexpr double kCandidateFloor = 0.0;
  static constexpr double kNmsIou = 0.5;

 protected:
  DetectionSet do_detect(const Image& image) const override;
  double do_person_confidence(const Image& image, Grid* grad) const override;
  std::unique_ptr<ScoringContext> do_prepare(const Image& base, std::span<const PixelRect> dirty) const override;
  double do_person_confidence(const Image& image, const ScoringContext& ctx, Grid* grad) const override;

 private:
  struct Anchor {
    int k = -1;
    int y = 0;
    int x = 0;
    double corr = 0.0;
  };
  Anchor best_anchor(const Grid& gray) const;
  // Exact correlation of one window, optionally accumulating the gradient of
  // `scale * corr` with respect to the RGB image.
  double window_corr(const Grid& gray, const Anchor& a, Grid* grad, double scale) const;
  double finish(const Grid& gray, const Anchor& a, Grid* grad, int height, int width) const;

  std::string name_;
  std::vector<Grid> templates_;
  double gain_;
  double bias_;
  std::uint64_t seed_;
  std::array<double, 3> channel_weights_;
};

/// Seeded silhouette templates (zero mean, unit norm), gain 8, bias -4, and
/// seeded channel weights drawn from a flat Dirichlet.
/// An empty name becomes "toy-<seed>".
std::shared_ptr<ToyTemplateDetector> make_toy_detector(std::uint64_t seed, int n_templates,
                                                       std::string name = {});

}  // namespace advpatch
