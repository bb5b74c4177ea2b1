#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "advpatch/image.hpp"

namespace advpatch {

/// One annotated image held in memory.
struct LabeledImage {
  Image image;
  std::vector<BoundingBox> boxes;
};

/// Desk-scale stand-in for a pedestrian dataset: dark person silhouettes on
/// smooth textured backgrounds, plus round distractor blobs.
struct SyntheticSceneSpec {
  int count = 32;
  int height = 128;
  int width = 128;
  int min_persons = 1;
  int max_persons = 2;
  double clutter_density = 1.0;  // mean distractor blobs per 128x128 area
  double texture = 0.04;         // background noise amplitude
  int texture_cell = 3;          // pixels per background noise cell
  // Persons are darker than the local background base by this much.
  double min_contrast = 0.1;
  double max_contrast = 0.2;
  // Per-channel background base level.
  double min_background = 0.35;
  double max_background = 0.65;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Deterministic in spec.seed. Boxes are exact silhouette boxes, class
/// "person", never overlapping one another.
std::vector<LabeledImage> generate_scenes(const SyntheticSceneSpec& spec);

/// Smooth sunflower-like reference picture used as the default specified
/// image; deterministic in `seed`.
Image make_reference_image(int side, std::uint64_t seed);

struct ManifestEntry {
  std::string file;  // relative to the manifest's directory unless absolute
  std::vector<BoundingBox> boxes;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/// JSON array of {"file": ..., "boxes": [{"x","y","w","h","class"}]}.
struct DatasetManifest {
  std::filesystem::path root;
  std::vector<ManifestEntry> entries;
  int clipped_boxes = 0;  // boxes clipped to their image while loading

  std::filesystem::path resolve(const ManifestEntry& e) const;
  /// Decodes every entry in order.
  std::vector<LabeledImage> load_images() const;
};

/// Parses and validates a manifest. Images are decoded to check that they
/// exist and to clip boxes to their bounds. ParseError messages carry the
/// file, line and record index.
DatasetManifest load_dataset(const std::filesystem::path& manifest_path);
void save_dataset(const DatasetManifest& manifest, const std::filesystem::path& manifest_path);

/// Writes scene_NNN.png files and manifest.json into `dir`.
DatasetManifest write_scenes(const std::vector<LabeledImage>& scenes, const std::filesystem::path& dir);

}  // namespace advpatch
