#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "advpatch/detector.hpp"

namespace advpatch {

enum class EnsembleMode { Average, Max };

std::string_view to_string(EnsembleMode mode);
EnsembleMode parse_ensemble_mode(std::string_view text);

/// Ordered, non-empty list of detectors and how their person confidences are
/// combined: uniform mean or maximum.
struct EnsembleSpec {
  std::vector<DetectorPtr> members;
  EnsembleMode mode = EnsembleMode::Average;

  std::size_t size() const noexcept { return members.size(); }
  void validate() const;
};

/// Mean or max of `values`; InvalidArgument when empty.
double combine(EnsembleMode mode, std::span<const double> values);

/// d combine / d values. Max routes everything to the first maximal entry.
std::vector<double> combine_weights(EnsembleMode mode, std::span<const double> values);

double ensemble_confidence(const EnsembleSpec& ensemble, const Image& image);

/// Per-member confidences in member order.
std::vector<double> member_confidences(const EnsembleSpec& ensemble, const Image& image);

}  // namespace advpatch
