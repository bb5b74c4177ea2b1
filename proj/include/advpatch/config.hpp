#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "advpatch/detector.hpp"
#include "advpatch/ensemble.hpp"
#include "advpatch/optimizer.hpp"
#include "advpatch/scenes.hpp"

namespace advpatch {

struct DetectorConfig {
  std::string type = "toy";
  std::uint64_t seed = 0;
  int templates = 3;
};

struct EvalConfig {
  std::vector<std::string> detectors;  // empty: the ensemble members
  double threshold = 0.5;
  double iou_threshold = 0.5;
  double ns_weight = 0.5;
  std::uint64_t random_seed = 7;  // random-noise baseline
};

/// Full configuration of a run. Relative paths resolve against the config
/// file's directory.
///
///   {"weights": {...}, "train": {...}, "patch": {"side": 48},
///    "placement": {...}, "transforms": {...},
///    "detectors": {"name": {"type": "toy", "seed": 11, "templates": 3}},
///    "ensemble": {"mode": "average", "members": ["name", ...]},
///    "eval": {...}, "specified_image": "ref.png",
///    "printable_colors": "colors.txt", "dataset": "scenes/manifest.json",
///    "output_dir": "out"}
///
/// Unknown keys anywhere are rejected.
struct RunConfig {
  TrainConfig train;
  int checkpoint_every = 50;
  std::map<std::string, DetectorConfig> detectors;
  std::vector<std::string> ensemble_members;
  EvalConfig eval;
  std::string specified_image;
  std::string printable_colors;  // empty: built-in palette
  std::string dataset;
  std::string output_dir;
  std::filesystem::path base_dir;

  /// InvalidArgument on schema or value errors, ParseError on bad JSON.
  static RunConfig parse(const std::string& text, const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& path);

  /// Canonical (key-sorted, defaults filled) JSON.
  std::string canonical_json() const;
  /// FNV-1a 64 of canonical_json().
  std::uint64_t digest() const;

  std::filesystem::path resolve(const std::string& p) const;
  DetectorPtr build_detector(const std::string& name) const;
  EnsembleSpec build_ensemble() const;
  std::vector<DetectorPtr> eval_detectors() const;
};

std::uint64_t fnv1a64(const std::string& bytes);

/// Scene-generation spec as JSON: the SyntheticSceneSpec fields plus
/// optional "reference_seed" and "reference_side".
struct SceneSpecFile {
  SyntheticSceneSpec scenes;
  std::uint64_t reference_seed = 0;
  int reference_side = 96;

  static SceneSpecFile parse(const std::string& text);
};

}  // namespace advpatch
