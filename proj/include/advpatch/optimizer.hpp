#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "advpatch/composition.hpp"
#include "advpatch/ensemble.hpp"
#include "advpatch/losses.hpp"
#include "advpatch/scenes.hpp"
#include "advpatch/transform.hpp"

namespace advpatch {

struct TrainConfig {
  double lr = 0.03;
  double gamma = 0.01;  // lr_new = gamma * lr_old on a plateau
  int e_max = 1000;
  int plateau_patience = 10;
  double plateau_eps = 1e-4;
  int batch_size = 16;
  int transforms_per_step = 4;
  std::uint64_t seed = 0;
  EnsembleMode ensemble_mode = EnsembleMode::Average;
  LossWeights weights;
  double init_mean = 0.5;
  double init_std = 0.1;
  int patch_side = 48;
  PlacementSpec placement;
  TransformRanges transforms;
  LossOptions loss_options;

  void validate() const;
};

/// `loss` is the end-of-epoch objective on the whole training set under a
/// fixed transform draw, so consecutive epochs are comparable; train_total is
/// the mean of the step losses seen during the epoch.
struct EpochRecord {
  std::int64_t epoch = 0;
  LossBreakdown loss;
  double train_total = 0.0;
  double lr = 0.0;  // in effect during the epoch

  friend bool operator==(const EpochRecord& a, const EpochRecord& b) {
    return a.epoch == b.epoch && a.lr == b.lr && a.train_total == b.train_total && a.loss.obj == b.loss.obj &&
           a.loss.css == b.loss.css && a.loss.tv == b.loss.tv && a.loss.nps == b.loss.nps &&
           a.loss.total == b.loss.total;
  }
};

struct TrainState {
  Patch patch;
  Patch best_patch;
  std::int64_t epoch = 0;  // completed epochs
  double lr_current = 0.0;
  double last_total = 0.0;  // most recent epoch's mean total loss
  double best_total = 0.0;
  int epochs_since_improvement = 0;
  int decays = 0;
  Grid adam_m;
  Grid adam_v;
  std::int64_t adam_step = 0;
  std::mt19937_64 rng;
  std::vector<EpochRecord> history;

  friend bool operator==(const TrainState&, const TrainState&) = default;
};

/// Gaussian(mean, std) values, seeded, clamped to [0,1] and rounded through
/// float32 so checkpoints hold them exactly.
Patch init_patch(int side, double mean, double std, std::uint64_t seed);

/// Fresh state for `config`: initial patch, lr, infinite best loss.
TrainState initial_state(const TrainConfig& config);

/// Training image with its mask and per-member scoring contexts.
std::vector<Scene> prepare_scenes(std::span<const LabeledImage> data, const EnsembleSpec& ensemble,
                                  const PlacementSpec& placement);

/// One Adam update (beta1 0.9, beta2 0.999, eps 1e-8) of state.patch on the
/// batch, with config.transforms_per_step transforms drawn from state.rng.
/// The patch is clamped to [0,1]; patch and moments are rounded through
/// float32. Returns the loss before the update. NumericError leaves `state`
/// untouched.
LossBreakdown step(TrainState& state, std::span<const Scene> batch, const EnsembleSpec& ensemble,
                   const SpecifiedImage& specified, const PrintableColorSet& colors, const TrainConfig& config);

/// End-of-epoch bookkeeping for `current_total`: a gain over best_total of
/// at least plateau_eps resets the counter; otherwise the counter grows and
/// after plateau_patience such epochs lr_current is multiplied by gamma and
/// the counter resets. best_total always tracks the minimum. Returns true
/// when a decay fired.
bool plateau_schedule(TrainState& state, double current_total, const TrainConfig& config);

struct Checkpoint {
  TrainState state;
  std::uint64_t config_digest = 0;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

/// Binary layout: "MVP1"; uint32 H, W, C; float32 patch; int64 epoch;
/// float64 last total; float32 Adam m and v. A trailer follows with the
/// remaining state, the digest, the loss history and the RNG state. All
/// little-endian.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct RunOptions {
  std::filesystem::path checkpoint_path;  // empty: no periodic checkpoints
  int checkpoint_every = 50;
  std::uint64_t config_digest = 0;
  std::optional<TrainState> resume;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  Patch patch;  // lowest epoch total seen, or the initial patch
  std::vector<EpochRecord> history;
  TrainState state;
  bool converged = false;
};

/// Epochs of shuffled mini-batches until e_max or convergence (an epoch's
/// total changes by less than plateau_eps once two decays have fired).
/// Plateau detection and the returned patch use the end-of-epoch objective.
/// On NumericError the last good state is checkpointed (when a path is set)
/// before the error propagates.
TrainResult run(std::span<const LabeledImage> dataset, const EnsembleSpec& ensemble, const SpecifiedImage& specified,
                const PrintableColorSet& colors, const TrainConfig& config, const RunOptions& options = {});

}  // namespace advpatch
