#include "advpatch/ensemble.hpp"

#include <algorithm>
#include <numeric>

#include "advpatch/errors.hpp"

namespace advpatch {

std::string_view to_string(EnsembleMode mode) { return mode == EnsembleMode::Average ? "average" : "max"; }

EnsembleMode parse_ensemble_mode(std::string_view text) {
  if (text == "average") return EnsembleMode::Average;
  if (text == "max") return EnsembleMode::Max;
  throw InvalidArgument("unknown ensemble mode '" + std::string(text) + "' (expected average|max)");
}

void EnsembleSpec::validate() const {
  if (members.empty()) throw InvalidArgument("ensemble has no members");
  for (const auto& m : members) {
    if (!m) throw InvalidArgument("ensemble member is null");
  }
}

double combine(EnsembleMode mode, std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("combine: no values");
  if (mode == EnsembleMode::Max) return *std::max_element(values.begin(), values.end());
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

std::vector<double> combine_weights(EnsembleMode mode, std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("combine_weights: no values");
  std::vector<double> w(values.size(), 0.0);
  if (mode == EnsembleMode::Max) {
    w[static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin())] = 1.0;
  } else {
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(values.size()));
  }
  return w;
}

std::vector<double> member_confidences(const EnsembleSpec& ensemble, const Image& image) {
  ensemble.validate();
  std::vector<double> out;
  out.reserve(ensemble.size());
  for (const auto& m : ensemble.members) out.push_back(m->person_confidence(image));
  return out;
}

double ensemble_confidence(const EnsembleSpec& ensemble, const Image& image) {
  const auto values = member_confidences(ensemble, image);
  return combine(ensemble.mode, values);
}

}  // namespace advpatch
