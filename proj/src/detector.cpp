#include "advpatch/detector.hpp"

#include <algorithm>
#include <exception>

#include "advpatch/errors.hpp"

namespace advpatch {

double Detection::class_score(const std::string& label) const {
  const auto it = class_scores.find(label);
  return it == class_scores.end() ? 0.0 : it->second;
}

void DetectionSet::sort_canonical() {
  std::stable_sort(detections.begin(), detections.end(),
                   [](const Detection& a, const Detection& b) { return a.person_score() > b.person_score(); });
}

namespace {

// Library errors keep their type; anything else becomes a DetectorError.
template <typename Fn>
auto guarded(const DetectorAdapter& d, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const InvalidArgument&) {
    throw;
  } catch (const ContractViolation&) {
    throw;
  } catch (const NumericError&) {
    throw;
  } catch (const DetectorError&) {
    throw;
  } catch (const std::exception& e) {
    throw DetectorError(d.name(), e.what());
  }
}

void require_differentiable(const DetectorAdapter& d) {
  if (!d.capabilities().differentiable) {
    throw ContractViolation(d.name() + ": gradient requested from a non-differentiable detector");
  }
}

}  // namespace

DetectionSet DetectorAdapter::detect(const Image& image) const {
  return guarded(*this, [&] {
    DetectionSet out = do_detect(image);
    out.source_detector = name();
    out.sort_canonical();
    return out;
  });
}

double DetectorAdapter::person_confidence(const Image& image) const {
  return guarded(*this, [&] { return do_person_confidence(image, nullptr); });
}

double DetectorAdapter::person_confidence(const Image& image, Grid& grad) const {
  require_differentiable(*this);
  return guarded(*this, [&] { return do_person_confidence(image, &grad); });
}

std::unique_ptr<ScoringContext> DetectorAdapter::prepare(const Image& base, std::span<const PixelRect> dirty) const {
  return guarded(*this, [&] { return do_prepare(base, dirty); });
}

double DetectorAdapter::person_confidence(const Image& image, const ScoringContext* context, Grid* grad) const {
  if (grad != nullptr) require_differentiable(*this);
  return guarded(*this, [&] {
    return context != nullptr ? do_person_confidence(image, *context, grad) : do_person_confidence(image, grad);
  });
}

double box_iou(const BoundingBox& a, const BoundingBox& b) {
  const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

std::vector<Detection> non_max_suppression(std::vector<Detection> dets, double iou_threshold) {
  std::stable_sort(dets.begin(), dets.end(),
                   [](const Detection& a, const Detection& b) { return a.person_score() > b.person_score(); });
  std::vector<Detection> kept;
  std::vector<bool> dropped(dets.size(), false);
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (dropped[i]) continue;
    kept.push_back(dets[i]);
    for (std::size_t j = i + 1; j < dets.size(); ++j) {
      if (!dropped[j] && box_iou(dets[i].box, dets[j].box) > iou_threshold) dropped[j] = true;
    }
  }
  return kept;
}

}  // namespace advpatch
