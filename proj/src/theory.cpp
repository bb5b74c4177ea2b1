#include "advpatch/theory.hpp"

#include <cmath>
#include <numeric>
#include <random>

#include "advpatch/errors.hpp"

namespace advpatch {

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::Squared:
      return "squared";
    case LossKind::Absolute:
      return "absolute";
    case LossKind::Logistic:
      return "logistic";
  }
  return "?";
}

double LossModel::operator()(double f) const {
  switch (kind) {
    case LossKind::Squared:
      return (f - target) * (f - target);
    case LossKind::Absolute:
      return std::abs(f - target);
    case LossKind::Logistic: {
      // log(1 + e^z) without overflow.
      const double z = -target * f;
      return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    }
  }
  return 0.0;
}

JensenResult jensen_check(const LossModel& loss, std::span<const double> outputs) {
  if (outputs.empty()) throw InvalidArgument("jensen_check: no outputs");
  const double n = static_cast<double>(outputs.size());
  const double mean = std::accumulate(outputs.begin(), outputs.end(), 0.0) / n;
  double individual = 0.0;
  for (const double f : outputs) individual += loss(f);
  return {loss(mean), individual / n};
}

void CorrelatedEnsembleSampler::validate() const {
  if (members < 2) throw InvalidArgument("sampler: need at least 2 members");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InvalidArgument("sampler: sigma must be > 0");
  const double lo = -1.0 / (members - 1);
  if (!(rho >= lo && rho <= 1.0)) throw InvalidArgument("sampler: rho outside [-1/(M-1), 1], covariance not PSD");
}

VarianceResult ensemble_variance_mc(const CorrelatedEnsembleSampler& s, long n_samples) {
  s.validate();
  if (n_samples < 10000) throw InvalidArgument("ensemble_variance_mc: need at least 10^4 samples");
  const int M = s.members;
  // X = sigma * (a Z + c (sum Z) 1) has unit-diagonal correlation rho for
  // a = sqrt(1 - rho), c = (sqrt(1 - rho + M rho) - a) / M.
  const double a = std::sqrt(1.0 - s.rho);
  const double c = (std::sqrt(std::max(0.0, 1.0 - s.rho + M * s.rho)) - a) / M;
  constexpr long kBlock = 4096;
  std::vector<double> z(M);
  double mean = 0.0, m2 = 0.0;
  long count = 0;
  for (long block = 0; block * kBlock < n_samples; ++block) {
    std::seed_seq seq{static_cast<std::uint32_t>(s.seed), static_cast<std::uint32_t>(s.seed >> 32),
                      static_cast<std::uint32_t>(block)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);
    const long end = std::min(n_samples, (block + 1) * kBlock);
    for (long i = block * kBlock; i < end; ++i) {
      double total = 0.0;
      for (double& v : z) total += (v = normal(rng));
      double avg = 0.0;
      for (const double v : z) avg += s.sigma * (a * v + c * total);
      avg /= M;
      // Welford update.
      ++count;
      const double d = avg - mean;
      mean += d / count;
      m2 += d * (avg - mean);
    }
  }
  VarianceResult r;
  r.empirical = m2 / static_cast<double>(count - 1);
  r.standard_error = r.empirical * std::sqrt(2.0 / static_cast<double>(count - 1));
  const double var = s.sigma * s.sigma;
  r.bienayme = var / M + (static_cast<double>(M - 1) / M) * s.rho * var;
  r.two_rho = var / M * (1.0 + 2.0 * s.rho);
  return r;
}

void GeneralizationBoundParams::validate() const {
  if (members < 1 || samples < 1) throw InvalidArgument("bound: M and N must be >= 1");
  if (!(gamma_conf > 0.0 && gamma_conf < 1.0)) throw InvalidArgument("bound: gamma must lie in (0,1)");
}

double generalization_bound(const GeneralizationBoundParams& p) {
  p.validate();
  return std::sqrt((std::log(static_cast<double>(p.members)) + std::log(1.0 / p.gamma_conf)) /
                   (2.0 * static_cast<double>(p.samples)));
}

double misdetection_rate(const EnsembleSpec& ensemble, std::span<const LabeledImage> scenes, double threshold,
                         const MatchConfig& match) {
  ensemble.validate();
  match.validate();
  long persons = 0, missed = 0;
  std::vector<double> scores(ensemble.size());
  for (const auto& scene : scenes) {
    std::vector<DetectionSet> dets;
    for (const auto& m : ensemble.members) dets.push_back(m->detect(scene.image));
    for (const auto& gt : scene.boxes) {
      if (gt.class_label != match.person_label) continue;
      ++persons;
      for (std::size_t k = 0; k < dets.size(); ++k) {
        double best = 0.0;
        for (const auto& d : dets[k].detections) {
          if (iou(d.box, gt) >= match.iou_threshold) best = std::max(best, d.person_score());
        }
        scores[k] = best;
      }
      if (combine(ensemble.mode, scores) < threshold) ++missed;
    }
  }
  if (persons == 0) throw InvalidArgument("misdetection_rate: no ground-truth persons");
  return static_cast<double>(missed) / static_cast<double>(persons);
}

GeneralizationGap generalization_gap(const EnsembleSpec& ensemble, std::span<const LabeledImage> train,
                                     std::span<const LabeledImage> test, double threshold, const MatchConfig& match) {
  if (train.empty() || test.empty()) throw InvalidArgument("generalization_gap: empty split");
  GeneralizationGap g;
  g.empirical = misdetection_rate(ensemble, train, threshold, match);
  g.expected = misdetection_rate(ensemble, test, threshold, match);
  g.gap = g.expected - g.empirical;
  return g;
}

}  // namespace advpatch
