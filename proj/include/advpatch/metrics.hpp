#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "advpatch/composition.hpp"
#include "advpatch/detector.hpp"
#include "advpatch/image.hpp"
#include "advpatch/losses.hpp"
#include "advpatch/scenes.hpp"

namespace advpatch {

struct MatchConfig {
  double iou_threshold = 0.5;
  std::string person_label = "person";

  void validate() const;
};

double iou(const BoundingBox& a, const BoundingBox& b);

struct PRPoint {
  double recall = 0.0;
  double precision = 0.0;
};

struct PRCurve {
  std::vector<PRPoint> points;  // one per ranked detection
  int tp = 0;
  int fp = 0;
  int fn = 0;
};

/// Ranks every detection of every image by descending person score
/// (objectness times the person class score; ties keep image, then list
/// order) and matches greedily: each detection takes the ground-truth person
/// of its image with the highest IoU, a true positive when that IoU reaches
/// the threshold and the box is still unclaimed. UndefinedMetric when there
/// is no ground-truth person.
PRCurve pr_curve(std::span<const DetectionSet> detections, std::span<const std::vector<BoundingBox>> ground_truth,
                 const MatchConfig& match = {});

/// All-point interpolated AP over the monotone precision envelope. With the
/// single person class this is also the mAP.
double average_precision(std::span<const DetectionSet> detections,
                         std::span<const std::vector<BoundingBox>> ground_truth, const MatchConfig& match = {});

struct NaturalnessInputs {
  Grid patch;
  Grid specified;
  Grid grey;    // all 0.5
  Grid random;  // seeded uniform noise
  double ns_weight = 0.5;

  /// Builds the grey and seeded random baselines for `patch`.
  static NaturalnessInputs make(Grid patch, Grid specified, std::uint64_t random_seed, double ns_weight = 0.5);
};

double cosine_similarity(const Grid& a, const Grid& b);
double euclidean_distance(const Grid& a, const Grid& b);

/// For each baseline b in {grey, random}
///   score_b = w * (CS - CS_b) / (1 - CS_b) + (1 - w) * (ED_b - ED) / ED_b
/// with CS, ED the cosine similarity and distance of the patch to the
/// specified image and CS_b, ED_b those of the baseline. The score is
/// 100 * clamp(min_b score_b, 0, 1): 100 at the specified image, 0 at either
/// baseline.
double naturalness_score(const NaturalnessInputs& in);

struct TransferabilityInputs {
  std::vector<double> patched;  // mAP per held-out detector with the patch
  std::vector<double> grey;     // same detectors, grey patch
  std::vector<double> random;   // same detectors, random patch
};

/// (100 / 2N) * sum_i sum_b max(0, (base_b_i - patched_i) / base_b_i).
double transferability_score(const TransferabilityInputs& in);

/// Fraction of images where some ground-truth person, matched in the benign
/// detections by a detection scoring at least `threshold`, has no such match
/// among the patched detections. InvalidArgument on an empty or mismatched
/// test set.
double attack_success_rate(std::span<const DetectionSet> benign, std::span<const DetectionSet> patched,
                           std::span<const std::vector<BoundingBox>> ground_truth, double threshold,
                           const MatchConfig& match = {});

struct MetricsReport {
  std::map<std::string, double> map_per_detector;  // with the evaluated patch
  // variant ("patch", "grey", "random") -> detector -> mAP
  std::map<std::string, std::map<std::string, double>> map_table;
  std::optional<double> naturalness;
  std::optional<double> transferability;
  std::optional<double> attack_success;
  std::optional<LossBreakdown> loss;
  std::uint64_t config_digest = 0;
  std::string started;
  std::string finished;

  /// Canonical JSON with sorted keys.
  std::string to_json() const;
  static MetricsReport from_json(const std::string& text);
  /// One row per patch variant, one column per detector.
  std::string to_csv() const;

  friend bool operator==(const MetricsReport& a, const MetricsReport& b);
};

struct EvalOptions {
  PlacementSpec placement;
  double threshold = 0.5;  // detection score counted by the success rate
  MatchConfig match;
  double ns_weight = 0.5;
  std::uint64_t random_seed = 7;
};

/// Scores `patch` on `data` against each detector: mAP with the patch, the
/// grey patch and the seeded random patch (which is also the random
/// naturalness baseline), naturalness against `specified`, transferability
/// over all detectors, and the success rate averaged over detectors.
/// Transferability is left empty when a baseline mAP is zero.
MetricsReport evaluate_patch(const Patch& patch, std::span<const LabeledImage> data,
                             std::span<const DetectorPtr> detectors, const Grid& specified,
                             const EvalOptions& options = {});

}  // namespace advpatch
