#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "advpatch/ensemble.hpp"
#include "advpatch/metrics.hpp"
#include "advpatch/scenes.hpp"

namespace advpatch {

enum class LossKind { Squared, Absolute, Logistic };

std::string_view to_string(LossKind kind);

/// A loss convex in the model output f: (f - y)^2, |f - y|, or
/// log(1 + exp(-y f)).
struct LossModel {
  LossKind kind = LossKind::Squared;
  double target = 0.0;

  double operator()(double output) const;
};

struct JensenResult {
  double ensemble_loss = 0.0;         // loss of the mean output
  double mean_individual_loss = 0.0;  // mean of the per-output losses
};

JensenResult jensen_check(const LossModel& loss, std::span<const double> outputs);

/// M Gaussian outputs with variance sigma^2 and pairwise correlation rho.
struct CorrelatedEnsembleSampler {
  int members = 5;
  double sigma = 1.0;
  double rho = 0.0;
  std::uint64_t seed = 0;

  /// The covariance is positive semidefinite iff rho in [-1/(M-1), 1].
  void validate() const;
};

struct VarianceResult {
  double empirical = 0.0;
  double standard_error = 0.0;  // of the empirical variance
  double bienayme = 0.0;        // sigma^2/M + ((M-1)/M) rho sigma^2
  double two_rho = 0.0;         // (sigma^2/M)(1 + 2 rho)
};

/// Variance of the member mean over n_samples draws (n_samples >= 10^4).
/// Draws come in fixed blocks, each seeded from (seed, block index).
VarianceResult ensemble_variance_mc(const CorrelatedEnsembleSampler& sampler, long n_samples);

struct GeneralizationBoundParams {
  long members = 1;
  long samples = 1;
  double gamma_conf = 0.05;

  void validate() const;
};

/// t = sqrt((ln M + ln(1/gamma)) / (2N)).
double generalization_bound(const GeneralizationBoundParams& p);

struct GeneralizationGap {
  double expected = 0.0;   // held-out error
  double empirical = 0.0;  // training error
  double gap = 0.0;        // expected - empirical
};

/// Per-person misdetection rate: a ground-truth person counts as detected
/// when the ensemble-combined score of the members' best IoU-matched
/// detections reaches `threshold`.
double misdetection_rate(const EnsembleSpec& ensemble, std::span<const LabeledImage> scenes, double threshold = 0.5,
                         const MatchConfig& match = {});

/// Training and held-out misdetection rates of `ensemble` (a single
/// detector is a one-member ensemble). InvalidArgument on an empty split.
GeneralizationGap generalization_gap(const EnsembleSpec& ensemble, std::span<const LabeledImage> train,
                                     std::span<const LabeledImage> test, double threshold = 0.5,
                                     const MatchConfig& match = {});

}  // namespace advpatch
