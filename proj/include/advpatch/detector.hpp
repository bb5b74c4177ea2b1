#pragma once

#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "advpatch/image.hpp"

namespace advpatch {

inline constexpr const char* kPersonLabel = "person";

struct Detection {
  BoundingBox box;
  double objectness = 0.0;
  std::map<std::string, double> class_scores;

  double class_score(const std::string& label) const;
  // objectness x person class score; the canonical ranking key.
  double person_score() const { return objectness * class_score(kPersonLabel); }
};

struct DetectionSet {
  std::vector<Detection> detections;
  std::string source_detector;

  // Orders detections by descending person_score(); stable for ties.
  void sort_canonical();
};

struct DetectorCapabilities {
  bool differentiable = false;
};

/// Adapter-private state for scoring images that differ from a fixed base
/// image only inside a few rectangles.
class ScoringContext {
 public:
  virtual ~ScoringContext() = default;
};

/// A person detector. Implementations are immutable after construction and
/// every method is safe to call concurrently.
///
/// The public entry points wrap adapter failures into DetectorError carrying
/// the adapter name; typed library errors pass through unchanged.
class DetectorAdapter {
 public:
  virtual ~DetectorAdapter() = default;

  virtual const std::string& name() const noexcept = 0;
  virtual DetectorCapabilities capabilities() const noexcept = 0;

  DetectionSet detect(const Image& image) const;

  /// Max over anchors of objectness x person score, in [0,1]; 0 without anchors.
  double person_confidence(const Image& image) const;

  /// As person_confidence, also writing d(confidence)/d(image) into `grad`
  /// (reshaped to the image). Throws ContractViolation for adapters that are
  /// not differentiable.
  double person_confidence(const Image& image, Grid& grad) const;

  /// Precomputes whatever lets later calls score images equal to `base`
  /// outside `dirty` faster. May return nullptr, in which case the
  /// context-taking overload falls back to full evaluation.
  std::unique_ptr<ScoringContext> prepare(const Image& base, std::span<const PixelRect> dirty) const;

  /// Scores `image`, which must equal the prepared base outside the dirty
  /// rectangles. `grad` may be null.
  double person_confidence(const Image& image, const ScoringContext* context, Grid* grad) const;

 protected:
  virtual DetectionSet do_detect(const Image& image) const = 0;
  virtual double do_person_confidence(const Image& image, Grid* grad) const = 0;
  virtual std::unique_ptr<ScoringContext> do_prepare(const Image&, std::span<const PixelRect>) const {
    return nullptr;
  }
  virtual double do_person_confidence(const Image& image, const ScoringContext&, Grid* grad) const {
    return do_person_confidence(image, grad);
  }
};

using DetectorPtr = std::shared_ptr<const DetectorAdapter>;

/// Greedy non-maximum suppression over `dets` (any order): keeps the highest
/// person_score detection, drops others overlapping it at IoU > threshold,
/// repeats. Result is in canonical order.
std::vector<Detection> non_max_suppression(std::vector<Detection> dets, double iou_threshold);

double box_iou(const BoundingBox& a, const BoundingBox& b);

}  // namespace advpatch
