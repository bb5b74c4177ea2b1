#include "advpatch/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "advpatch/errors.hpp"
#include "json.hpp"

namespace advpatch {

using nlohmann::json;

void MatchConfig::validate() const {
  if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) throw InvalidArgument("match: iou_threshold must lie in (0,1)");
}

double iou(const BoundingBox& a, const BoundingBox& b) { return box_iou(a, b); }

namespace {

struct Ranked {
  double score;
  std::size_t image;
  const Detection* det;
};

std::vector<std::vector<BoundingBox>> person_boxes(std::span<const std::vector<BoundingBox>> gt,
                                                   const std::string& label) {
  std::vector<std::vector<BoundingBox>> out(gt.size());
  for (std::size_t i = 0; i < gt.size(); ++i) {
    for (const auto& b : gt[i]) {
      if (b.class_label == label) out[i].push_back(b);
    }
  }
  return out;
}

// Index of the highest-IoU box, or -1 when none overlaps.
int best_match(const BoundingBox& box, const std::vector<BoundingBox>& gt, double* best_iou) {
  int arg = -1;
  double best = 0.0;
  for (std::size_t j = 0; j < gt.size(); ++j) {
    const double o = iou(box, gt[j]);
    if (o > best) {
      best = o;
      arg = static_cast<int>(j);
    }
  }
  *best_iou = best;
  return arg;
}

}  // namespace

PRCurve pr_curve(std::span<const DetectionSet> detections, std::span<const std::vector<BoundingBox>> ground_truth,
                 const MatchConfig& match) {
  match.validate();
  if (detections.size() != ground_truth.size()) {
    throw InvalidArgument("pr_curve: detections and ground truth cover different image counts");
  }
  const auto gt = person_boxes(ground_truth, match.person_label);
  std::size_t n_gt = 0;
  for (const auto& g : gt) n_gt += g.size();
  if (n_gt == 0) throw UndefinedMetric("average precision: no ground-truth persons");

  std::vector<Ranked> ranked;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    for (const auto& d : detections[i].detections) {
      ranked.push_back({d.objectness * d.class_score(match.person_label), i, &d});
    }
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) { return a.score > b.score; });

  std::vector<std::vector<bool>> claimed(gt.size());
  for (std::size_t i = 0; i < gt.size(); ++i) claimed[i].assign(gt[i].size(), false);

  PRCurve curve;
  for (const auto& r : ranked) {
    double o = 0.0;
    const int j = best_match(r.det->box, gt[r.image], &o);
    if (j >= 0 && o >= match.iou_threshold && !claimed[r.image][j]) {
      claimed[r.image][j] = true;
      ++curve.tp;
    } else {
      ++curve.fp;
    }
    curve.points.push_back({static_cast<double>(curve.tp) / n_gt, static_cast<double>(curve.tp) / (curve.tp + curve.fp)});
  }
  curve.fn = static_cast<int>(n_gt) - curve.tp;
  return curve;
}

double average_precision(std::span<const DetectionSet> detections,
                         std::span<const std::vector<BoundingBox>> ground_truth, const MatchConfig& match) {
  const PRCurve c = pr_curve(detections, ground_truth, match);
  // Envelope from the right, then sum precision over recall increments.
  std::vector<double> env(c.points.size());
  double running = 0.0;
  for (std::size_t i = c.points.size(); i-- > 0;) {
    running = std::max(running, c.points[i].precision);
    env[i] = running;
  }
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    ap += (c.points[i].recall - prev_recall) * env[i];
    prev_recall = c.points[i].recall;
  }
  return ap;
}

NaturalnessInputs NaturalnessInputs::make(Grid patch, Grid specified, std::uint64_t random_seed, double ns_weight) {
  NaturalnessInputs in;
  in.grey = Grid(patch.height(), patch.width(), patch.channels(), 0.5);
  in.random = Grid(patch.height(), patch.width(), patch.channels());
  std::mt19937_64 rng(random_seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& v : in.random.values()) v = u(rng);
  in.patch = std::move(patch);
  in.specified = std::move(specified);
  in.ns_weight = ns_weight;
  return in;
}

double cosine_similarity(const Grid& a, const Grid& b) {
  if (!a.same_shape(b)) throw InvalidArgument("cosine_similarity: shape mismatch");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a.values()[i] * b.values()[i];
    aa += a.values()[i] * a.values()[i];
    bb += b.values()[i] * b.values()[i];
  }
  if (aa == 0.0 || bb == 0.0) throw UndefinedMetric("cosine similarity of a zero-norm image");
  return std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0);
}

double euclidean_distance(const Grid& a, const Grid& b) {
  if (!a.same_shape(b)) throw InvalidArgument("euclidean_distance: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.values()[i] - b.values()[i];
    s += d * d;
  }
  return std::sqrt(s);
}

double naturalness_score(const NaturalnessInputs& in) {
  const Grid& s = in.specified;
  if (!in.patch.same_shape(s) || !in.grey.same_shape(s) || !in.random.same_shape(s)) {
    throw InvalidArgument("naturalness_score: all images must share dimensions");
  }
  if (!(in.ns_weight >= 0.0 && in.ns_weight <= 1.0)) throw InvalidArgument("naturalness_score: weight outside [0,1]");
  const double cs = cosine_similarity(in.patch, s);
  const double ed = euclidean_distance(in.patch, s);
  double worst = std::numeric_limits<double>::infinity();
  for (const Grid* b : {&in.grey, &in.random}) {
    const double cs_b = cosine_similarity(*b, s);
    const double ed_b = euclidean_distance(*b, s);
    if (cs_b >= 1.0 || ed_b == 0.0) throw UndefinedMetric("naturalness_score: a baseline coincides with the specified image");
    const double term = in.ns_weight * (cs - cs_b) / (1.0 - cs_b) + (1.0 - in.ns_weight) * (ed_b - ed) / ed_b;
    worst = std::min(worst, term);
  }
  return 100.0 * std::clamp(worst, 0.0, 1.0);
}

double transferability_score(const TransferabilityInputs& in) {
  const std::size_t n = in.patched.size();
  if (n == 0 || in.grey.size() != n || in.random.size() != n) {
    throw InvalidArgument("transferability_score: need matching, non-empty mAP lists");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (const double base : {in.grey[i], in.random[i]}) {
      if (!(base > 0.0)) throw UndefinedMetric("transferability_score: baseline mAP is zero");
      sum += std::max(0.0, (base - in.patched[i]) / base);
    }
  }
  return 100.0 * sum / (2.0 * static_cast<double>(n));
}

namespace {

// Ground-truth persons of one image that a detection at or above
// `threshold` matches.
std::vector<bool> matched_persons(const DetectionSet& dets, const std::vector<BoundingBox>& gt, double threshold,
                                  const MatchConfig& match) {
  std::vector<bool> hit(gt.size(), false);
  for (const auto& d : dets.detections) {
    if (d.person_score() < threshold) continue;
    for (std::size_t j = 0; j < gt.size(); ++j) {
      if (iou(d.box, gt[j]) >= match.iou_threshold) hit[j] = true;
    }
  }
  return hit;
}

}  // namespace

double attack_success_rate(std::span<const DetectionSet> benign, std::span<const DetectionSet> patched,
                           std::span<const std::vector<BoundingBox>> ground_truth, double threshold,
                           const MatchConfig& match) {
  match.validate();
  if (benign.empty()) throw InvalidArgument("attack_success_rate: empty test set");
  if (patched.size() != benign.size() || ground_truth.size() != benign.size()) {
    throw InvalidArgument("attack_success_rate: benign, patched and ground truth must pair up");
  }
  const auto gt = person_boxes(ground_truth, match.person_label);
  int successes = 0;
  for (std::size_t i = 0; i < benign.size(); ++i) {
    const auto before = matched_persons(benign[i], gt[i], threshold, match);
    const auto after = matched_persons(patched[i], gt[i], threshold, match);
    for (std::size_t j = 0; j < before.size(); ++j) {
      if (before[j] && !after[j]) {
        ++successes;
        break;
      }
    }
  }
  return static_cast<double>(successes) / static_cast<double>(benign.size());
}

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> read_optional(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

std::string MetricsReport::to_json() const {
  json j;
  j["map_per_detector"] = map_per_detector;
  j["map_table"] = map_table;
  j["naturalness"] = optional_number(naturalness);
  j["transferability"] = optional_number(transferability);
  j["attack_success"] = optional_number(attack_success);
  if (loss) {
    j["loss"] = {{"obj", loss->obj}, {"css", loss->css}, {"tv", loss->tv}, {"nps", loss->nps}, {"total", loss->total}};
  } else {
    j["loss"] = nullptr;
  }
  j["config_digest"] = hex64(config_digest);
  j["timestamps"] = {{"started", started}, {"finished", finished}};
  return j.dump(2) + "\n";
}

MetricsReport MetricsReport::from_json(const std::string& text) {
  MetricsReport r;
  try {
    const json j = json::parse(text);
    r.map_per_detector = j.at("map_per_detector").get<std::map<std::string, double>>();
    r.map_table = j.at("map_table").get<std::map<std::string, std::map<std::string, double>>>();
    r.naturalness = read_optional(j, "naturalness");
    r.transferability = read_optional(j, "transferability");
    r.attack_success = read_optional(j, "attack_success");
    if (j.contains("loss") && !j.at("loss").is_null()) {
      const json& l = j.at("loss");
      r.loss = LossBreakdown{l.at("obj").get<double>(), l.at("css").get<double>(), l.at("tv").get<double>(),
                             l.at("nps").get<double>(), l.at("total").get<double>()};
    }
    r.config_digest = std::stoull(j.at("config_digest").get<std::string>(), nullptr, 16);
    r.started = j.at("timestamps").at("started").get<std::string>();
    r.finished = j.at("timestamps").at("finished").get<std::string>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("metrics report: ") + e.what());
  } catch (const std::logic_error& e) {
    throw ParseError(std::string("metrics report: bad config digest: ") + e.what());
  }
  return r;
}

std::string MetricsReport::to_csv() const {
  std::set<std::string> detectors;
  for (const auto& [variant, row] : map_table) {
    for (const auto& [name, v] : row) detectors.insert(name);
  }
  std::ostringstream out;
  out.precision(17);
  out << "variant";
  for (const auto& d : detectors) out << ',' << d;
  out << '\n';
  for (const auto& [variant, row] : map_table) {
    out << variant;
    for (const auto& d : detectors) {
      out << ',';
      const auto it = row.find(d);
      if (it != row.end()) out << it->second;
    }
    out << '\n';
  }
  return out.str();
}

bool operator==(const MetricsReport& a, const MetricsReport& b) {
  auto same_loss = [](const std::optional<LossBreakdown>& x, const std::optional<LossBreakdown>& y) {
    if (x.has_value() != y.has_value()) return false;
    if (!x) return true;
    return x->obj == y->obj && x->css == y->css && x->tv == y->tv && x->nps == y->nps && x->total == y->total;
  };
  return a.map_per_detector == b.map_per_detector && a.map_table == b.map_table && a.naturalness == b.naturalness &&
         a.transferability == b.transferability && a.attack_success == b.attack_success && same_loss(a.loss, b.loss) &&
         a.config_digest == b.config_digest && a.started == b.started && a.finished == b.finished;
}

}  // namespace advpatch

namespace advpatch {

MetricsReport evaluate_patch(const Patch& patch, std::span<const LabeledImage> data,
                             std::span<const DetectorPtr> detectors, const Grid& specified,
                             const EvalOptions& options) {
  if (data.empty()) throw InvalidArgument("evaluate_patch: empty dataset");
  if (detectors.empty()) throw InvalidArgument("evaluate_patch: no detectors");
  const NaturalnessInputs ns = NaturalnessInputs::make(patch.grid(), specified, options.random_seed, options.ns_weight);
  const std::pair<const char*, Patch> variants[] = {
      {"patch", patch}, {"grey", Patch(ns.grey)}, {"random", Patch(ns.random)}};

  std::vector<std::vector<BoundingBox>> gt;
  std::vector<MaskLayout> layouts;
  for (const auto& d : data) {
    gt.push_back(d.boxes);
    layouts.push_back(build_person_mask(d.image.height(), d.image.width(), d.boxes, options.placement));
  }

  MetricsReport r;
  TransferabilityInputs ts;
  double asr_sum = 0.0;
  for (const auto& det : detectors) {
    std::vector<DetectionSet> benign;
    for (const auto& d : data) benign.push_back(det->detect(d.image));
    for (const auto& [name, p] : variants) {
      std::vector<DetectionSet> dets;
      for (std::size_t i = 0; i < data.size(); ++i) dets.push_back(det->detect(compose(data[i].image, p, layouts[i])));
      const double ap = average_precision(dets, gt, options.match);
      r.map_table[name][det->name()] = ap;
      if (std::string_view(name) == "patch") {
        r.map_per_detector[det->name()] = ap;
        ts.patched.push_back(ap);
        asr_sum += attack_success_rate(benign, dets, gt, options.threshold, options.match);
      } else if (std::string_view(name) == "grey") {
        ts.grey.push_back(ap);
      } else {
        ts.random.push_back(ap);
      }
    }
  }
  r.naturalness = naturalness_score(ns);
  try {
    r.transferability = transferability_score(ts);
  } catch (const UndefinedMetric&) {
    r.transferability.reset();
  }
  r.attack_success = asr_sum / static_cast<double>(detectors.size());
  return r;
}

}  // namespace advpatch
