// Acceptance checks, one PASS/FAIL line per criterion. Tolerances are fixed
// here; run with criterion numbers as arguments to select a subset.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "advpatch/commands.hpp"
#include "advpatch/composition.hpp"
#include "advpatch/errors.hpp"
#include "advpatch/losses.hpp"
#include "advpatch/metrics.hpp"
#include "advpatch/optimizer.hpp"
#include "advpatch/theory.hpp"
#include "advpatch/toy_detector.hpp"

using namespace advpatch;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances.
constexpr double kAffineTol = 1e-12;      // compose affinity, double rounding only
constexpr double kFdStep = 1e-4;          // central differences
constexpr double kFdRel = 1e-3;           // per-coordinate relative error
constexpr double kFdShare = 0.95;         // share of coordinates within kFdRel
constexpr double kFdWorst = 1e-2;         // worst coordinate
constexpr double kApTol = 1e-9;           // AP vs brute force
constexpr double kJensenTol = 1e-12;      // relative slack on the inequality
constexpr double kVarianceRel = 0.03;     // Monte Carlo vs Bienaymé
constexpr double kBoundTol = 1e-4;        // t(5, 614, 0.05)
constexpr double kConfidenceRatio = 0.5;  // final / initial ensemble confidence
constexpr double kMinAsr = 0.8;
constexpr int kTransferSeeds = 5;
constexpr int kTransferWins = 4;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0, double e = 0, double g = 0) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, a, b, c, d, e, g);
  return buf;
}

Grid random_grid(int h, int w, int c, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Grid g(h, w, c);
  for (double& v : g.values()) v = u(rng);
  return g;
}

EnsembleSpec ensemble_of(std::initializer_list<std::uint64_t> seeds, EnsembleMode mode = EnsembleMode::Average) {
  EnsembleSpec e;
  e.mode = mode;
  for (auto s : seeds) e.members.push_back(make_toy_detector(s, 3));
  return e;
}

double mean_confidence(const EnsembleSpec& e, std::span<const LabeledImage> data, const Patch& p,
                       const PlacementSpec& placement) {
  double sum = 0;
  for (const auto& li : data) {
    const auto layout = build_person_mask(li.image.height(), li.image.width(), li.boxes, placement);
    sum += ensemble_confidence(e, compose(li.image, p, layout));
  }
  return sum / static_cast<double>(data.size());
}

// ---------------------------------------------------------------- 1
Outcome composition_identities() {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int zero_ok = 0, one_ok = 0, affine_ok = 0;
  double worst = 0;
  for (int t = 0; t < 100; ++t) {
    const int side = 4 + t % 9;
    const Image img = random_grid(side, side, 3, rng);
    const Patch p1(random_grid(side, side, 3, rng)), p2(random_grid(side, side, 3, rng));
    MaskLayout l;
    l.placements.push_back({{0, 0, side, side}, {0, 0, side, side}});
    l.mask = Grid(side, side, 1, 0.0);
    zero_ok += compose(img, p1, l) == img;
    l.mask.fill(1.0);
    one_ok += compose(img, p1, l) == p1.grid();
    for (double& m : l.mask.values()) m = u(rng);
    const double a = u(rng);
    Grid mix(side, side, 3);
    for (std::size_t i = 0; i < mix.size(); ++i) {
      mix.values()[i] = a * p1.grid().values()[i] + (1 - a) * p2.grid().values()[i];
    }
    const Image lhs = compose(img, Patch(mix), l), c1 = compose(img, p1, l), c2 = compose(img, p2, l);
    double err = 0;
    for (std::size_t i = 0; i < lhs.size(); ++i) {
      err = std::max(err, std::abs(lhs.values()[i] - (a * c1.values()[i] + (1 - a) * c2.values()[i])));
    }
    worst = std::max(worst, err);
    affine_ok += err <= kAffineTol;
  }
  return {zero_ok == 100 && one_ok == 100 && affine_ok == 100,
          fmt("mask0 %g/100 exact, mask1 %g/100 exact, affine %g/100 (max err %.1e)", zero_ok, one_ok, affine_ok,
              worst)};
}

// ---------------------------------------------------------------- 2
struct FdStats {
  int coords = 0;
  int within = 0;
  double worst = 0;
};

template <class F>
void fd_compare(const Grid& x, const Grid& analytic, F f, FdStats& s) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    Grid a = x, b = x;
    a.values()[i] += kFdStep;
    b.values()[i] -= kFdStep;
    const double fd = (f(a) - f(b)) / (2 * kFdStep);
    const double an = analytic.values()[i];
    const double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6});
    ++s.coords;
    s.within += rel < kFdRel;
    s.worst = std::max(s.worst, rel);
  }
}

Outcome gradient_correctness() {
  std::mt19937_64 rng(202);
  SyntheticSceneSpec sp;
  sp.count = 2;
  sp.seed = 17;
  const auto data = generate_scenes(sp);
  const EnsembleSpec e = ensemble_of({11, 22, 33});
  PlacementSpec placement;
  const auto scenes = prepare_scenes(data, e, placement);
  const PrintableColorSet colors = PrintableColorSet::default_palette();
  std::map<std::string, FdStats> stats;
  for (int trial = 0; trial < 2; ++trial) {
    std::vector<TransformParams> ts;
    for (int k = 0; k < 4; ++k) ts.push_back(sample_transform(rng()));
    const SpecifiedImage spec{random_grid(8, 8, 3, rng)};
    const Grid x = random_grid(8, 8, 3, rng, 0.05, 0.95);
    const LossWeights none{0, 0, 0}, all;
    fd_compare(x, loss_gradient(none, Patch(x), scenes, e, spec, ts, colors).gradient,
               [&](const Grid& g) { return loss_value(none, Patch(g), scenes, e, spec, ts, colors).obj; },
               stats["obj"]);
    fd_compare(x, css_gradient(x, spec.values, ts), [&](const Grid& g) { return css_loss(g, spec.values, ts); },
               stats["css"]);
    fd_compare(x, tv_gradient(x), [&](const Grid& g) { return tv_loss(g); }, stats["tv"]);
    fd_compare(x, nps_gradient(x, colors), [&](const Grid& g) { return nps_loss(g, colors); }, stats["nps"]);
    fd_compare(x, loss_gradient(all, Patch(x), scenes, e, spec, ts, colors).gradient,
               [&](const Grid& g) { return loss_value(all, Patch(g), scenes, e, spec, ts, colors).total; },
               stats["total"]);
  }
  bool pass = true;
  std::string detail;
  for (const auto& [name, s] : stats) {
    const double share = static_cast<double>(s.within) / s.coords;
    pass = pass && share >= kFdShare && s.worst < kFdWorst;
    detail += name + fmt(" %.1f%% within, worst %.1e; ", 100 * share, s.worst);
  }
  return {pass, detail};
}

// ---------------------------------------------------------------- 3
// Brute force: for every cut-off k, rematch the top-k detections from
// scratch and read precision/recall; AP is the area under the upper
// envelope of the (recall, precision) points.
double brute_force_ap(const std::vector<DetectionSet>& dets, const std::vector<std::vector<BoundingBox>>& gt,
                      double thr) {
  struct Ranked {
    double score;
    std::size_t image, index;
  };
  std::vector<Ranked> all;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    for (std::size_t j = 0; j < dets[i].detections.size(); ++j) all.push_back({dets[i].detections[j].person_score(), i, j});
  }
  std::stable_sort(all.begin(), all.end(), [](const Ranked& a, const Ranked& b) { return a.score > b.score; });
  std::size_t npos = 0;
  for (const auto& g : gt) npos += g.size();
  auto overlap = [](const BoundingBox& a, const BoundingBox& b) {
    const double iw = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
    const double ih = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
    const double inter = iw * ih;
    return inter / (a.w * a.h + b.w * b.h - inter);
  };
  std::vector<double> rec, prec;
  for (std::size_t k = 1; k <= all.size(); ++k) {
    std::set<std::pair<std::size_t, std::size_t>> claimed;
    std::size_t tp = 0;
    for (std::size_t r = 0; r < k; ++r) {
      const auto& d = dets[all[r].image].detections[all[r].index].box;
      const auto& boxes = gt[all[r].image];
      double best = -1;
      std::size_t arg = 0;
      for (std::size_t g = 0; g < boxes.size(); ++g) {
        const double o = overlap(d, boxes[g]);
        if (o > best) best = o, arg = g;
      }
      if (best >= thr && !claimed.count({all[r].image, arg})) {
        claimed.insert({all[r].image, arg});
        ++tp;
      }
    }
    rec.push_back(static_cast<double>(tp) / npos);
    prec.push_back(static_cast<double>(tp) / k);
  }
  double ap = 0, prev = 0;
  for (std::size_t k = 0; k < rec.size(); ++k) {
    double env = 0;
    for (std::size_t j = k; j < rec.size(); ++j) env = std::max(env, prec[j]);
    ap += (rec[k] - prev) * env;
    prev = rec[k];
  }
  return ap;
}

Outcome map_oracle() {
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> pos(0.0, 20.0), size(5.0, 15.0), score(0.0, 1.0);
  int agree = 0;
  double worst = 0;
  for (int t = 0; t < 200; ++t) {
    const int images = 1 + static_cast<int>(rng() % 5);
    std::vector<std::vector<BoundingBox>> gt(images);
    std::vector<DetectionSet> dets(images);
    for (auto& g : gt) {
      const int n = static_cast<int>(rng() % 3) + (&g == &gt[0]);  // at least one positive
      for (int k = 0; k < n; ++k) g.push_back({pos(rng), pos(rng), size(rng), size(rng), "person"});
    }
    const int total = static_cast<int>(rng() % 7);
    for (int k = 0; k < total; ++k) {
      const int i = static_cast<int>(rng() % images);
      BoundingBox b{pos(rng), pos(rng), size(rng), size(rng), "person"};
      // half the time, sit near a ground-truth box so matches happen
      if (!gt[i].empty() && rng() % 2) {
        b = gt[i][rng() % gt[i].size()];
        b.x += pos(rng) / 10 - 1;
        b.y += pos(rng) / 10 - 1;
      }
      // coarse scores force ties
      const double s = t % 4 == 0 ? std::round(score(rng) * 3) / 3 : score(rng);
      dets[i].detections.push_back(Detection{b, s, {{"person", 1.0}}});
    }
    const double err = std::abs(average_precision(dets, gt) - brute_force_ap(dets, gt, 0.5));
    worst = std::max(worst, err);
    agree += err <= kApTol;
  }
  bool undefined_raised = false;
  try {
    average_precision(std::vector<DetectionSet>(1), std::vector<std::vector<BoundingBox>>(1));
  } catch (const UndefinedMetric&) {
    undefined_raised = true;
  }
  return {agree == 200 && undefined_raised,
          fmt("%g/200 instances equal (max |diff| %.1e); no positives raises undefined-metric", agree, worst)};
}

// ---------------------------------------------------------------- 4
Outcome jensen() {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> out(-2.0, 2.0), tgt(-1.0, 1.0);
  int violations = 0, iff_errors = 0, tight = 0;
  for (int t = 0; t < 1000; ++t) {
    const LossKind kind = static_cast<LossKind>(t % 3);
    const LossModel loss{kind, tgt(rng)};
    std::vector<double> f(2 + rng() % 7);
    if (t % 10 == 9) {
      std::fill(f.begin(), f.end(), out(rng));
    } else {
      for (double& v : f) v = out(rng);
    }
    const JensenResult r = jensen_check(loss, f);
    // independent recomputation of both sides
    const double mean = std::accumulate(f.begin(), f.end(), 0.0) / f.size();
    double indiv = 0;
    for (double v : f) indiv += loss(v) / f.size();
    const double tol = kJensenTol * std::max(1.0, indiv);
    if (std::abs(r.ensemble_loss - loss(mean)) > tol || std::abs(r.mean_individual_loss - indiv) > tol) ++iff_errors;
    if (r.ensemble_loss > r.mean_individual_loss + tol) ++violations;
    const bool equal = std::abs(r.ensemble_loss - r.mean_individual_loss) <= tol;
    bool expect = std::all_of(f.begin(), f.end(), [&](double v) { return v == f[0]; });
    if (kind == LossKind::Absolute) {
      // not strictly convex: tight whenever no output lies across the target
      expect = std::all_of(f.begin(), f.end(), [&](double v) { return v >= loss.target; }) ||
               std::all_of(f.begin(), f.end(), [&](double v) { return v <= loss.target; });
    }
    tight += equal;
    iff_errors += equal != expect;
  }
  return {violations == 0 && iff_errors == 0,
          fmt("1000 trials: %g violations, %g equality mismatches, %g tight", violations, iff_errors, tight)};
}

// ---------------------------------------------------------------- 5
Outcome variance() {
  bool pass = true;
  std::string detail;
  const double expected[] = {0.200, 0.440, 0.920};
  int k = 0;
  for (const double rho : {0.0, 0.3, 0.9}) {
    const VarianceResult v = ensemble_variance_mc({5, 1.0, rho, 505}, 100000);
    const bool ok = std::abs(v.empirical - expected[k]) <= kVarianceRel * expected[k] &&
                    std::abs(v.bienayme - expected[k]) < 1e-12;
    pass = pass && ok;
    detail += fmt("rho %.1f: %.4f vs %.3f (two-rho form %.3f); ", rho, v.empirical, expected[k], v.two_rho);
    ++k;
  }
  return {pass, detail};
}

// ---------------------------------------------------------------- 6
Outcome bound() {
  const double t = generalization_bound({5, 614, 0.05});
  return {std::abs(t - 0.0612) <= kBoundTol, fmt("t(5, 614, 0.05) = %.7f", t)};
}

// ---------------------------------------------------------------- 7, 9
struct DeskRun {
  Patch patch;
  double final_obj = 0;  // obj term of the kept patch, under the run's own mode
  double seconds = 0;
};

struct Desk {
  std::vector<LabeledImage> train, test;
  SpecifiedImage spec;
  PrintableColorSet colors = PrintableColorSet::default_palette();
  std::map<std::string, DeskRun> runs;

  Desk() {
    SyntheticSceneSpec sp;
    sp.count = 32;
    sp.seed = 1;
    train = generate_scenes(sp);
    sp.seed = 2;
    test = generate_scenes(sp);
    spec = SpecifiedImage::from_image(make_reference_image(96, 0), 48);
  }

  TrainConfig config(EnsembleMode mode, double lambda) const {
    TrainConfig c;
    c.e_max = 200;
    c.seed = 5;
    c.ensemble_mode = mode;
    c.weights.lambda_css = lambda;
    return c;
  }

  const DeskRun& get(EnsembleMode mode, double lambda) {
    const std::string key = std::string(to_string(mode)) + fmt("/%g", lambda);
    auto it = runs.find(key);
    if (it != runs.end()) return it->second;
    const auto t0 = std::chrono::steady_clock::now();
    const TrainResult r = run(train, ensemble_of({11, 22, 33}, mode), spec, colors, config(mode, lambda));
    DeskRun d{r.patch, INFINITY, 0};
    double best = INFINITY;
    for (const auto& rec : r.history) {
      if (rec.loss.total < best) best = rec.loss.total, d.final_obj = rec.loss.obj;
    }
    d.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::fprintf(stderr, "  [desk run %s: %.1fs]\n", key.c_str(), d.seconds);
    return runs.emplace(key, d).first->second;
  }
};

Desk& desk() {
  static Desk d;
  return d;
}

Outcome end_to_end() {
  Desk& d = desk();
  const TrainConfig c = d.config(EnsembleMode::Average, 2.5);
  const EnsembleSpec avg = ensemble_of({11, 22, 33});
  const Patch initial = init_patch(c.patch_side, c.init_mean, c.init_std, c.seed);
  const DeskRun& a = d.get(EnsembleMode::Average, 2.5);
  const DeskRun& m = d.get(EnsembleMode::Max, 2.5);
  const double before = mean_confidence(avg, d.train, initial, c.placement);
  const double after = mean_confidence(avg, d.train, a.patch, c.placement);
  EvalOptions o;
  const MetricsReport held = evaluate_patch(a.patch, d.test, avg.members, d.spec.values, o);
  const double asr = *held.attack_success;
  const double cross = mean_confidence(avg, d.train, m.patch, c.placement);
  const bool pass = after <= kConfidenceRatio * before && asr >= kMinAsr && a.final_obj < m.final_obj;
  return {pass, fmt("confidence %.3f -> %.3f (%.0f%%); held-out ASR %.3f; final obj average %.4f < max %.4f", before,
                    after, 100 * after / before, asr, a.final_obj, m.final_obj) +
                    fmt(" (max-mode patch under the average objective: %.4f)", cross)};
}

Outcome naturalness_tradeoff() {
  Desk& d = desk();
  double ns[3], obj[3];
  const double lambdas[] = {0.0, 1.0, 2.5};
  for (int i = 0; i < 3; ++i) {
    const DeskRun& r = d.get(EnsembleMode::Average, lambdas[i]);
    ns[i] = naturalness_score(NaturalnessInputs::make(r.patch.grid(), d.spec.values, 7));
    obj[i] = r.final_obj;
  }
  const auto at_s = NaturalnessInputs::make(d.spec.values, d.spec.values, 7);
  const double ns_s = naturalness_score(at_s);
  const double ns_grey = naturalness_score(NaturalnessInputs::make(at_s.grey, d.spec.values, 7));
  const bool pass = ns[0] < ns[1] && ns[1] < ns[2] && obj[0] <= obj[1] && obj[1] <= obj[2] && ns_s == 100.0 &&
                    ns_grey == 0.0;
  return {pass, fmt("NS %.2f < %.2f < %.2f; obj %.4f <= %.4f <= %.4f", ns[0], ns[1], ns[2], obj[0], obj[1], obj[2]) +
                    fmt("; NS(s) = %g, NS(grey) = %g", ns_s, ns_grey)};
}

// ---------------------------------------------------------------- 8
Outcome transferability() {
  int beat_grey = 0, beat_random = 0, beat_single = 0;
  std::string detail;
  const auto spec = SpecifiedImage::from_image(make_reference_image(96, 0), 48);
  const auto colors = PrintableColorSet::default_palette();
  for (int k = 0; k < kTransferSeeds; ++k) {
    SyntheticSceneSpec sp;
    sp.seed = 1000 + k;
    const auto train = generate_scenes(sp);
    sp.seed = 2000 + k;
    const auto test = generate_scenes(sp);
    const std::uint64_t base = 100 * k;
    const EnsembleSpec ens = ensemble_of({base + 1, base + 2, base + 3});
    EnsembleSpec single;
    single.members.push_back(ens.members[0]);
    const std::vector<DetectorPtr> held = {make_toy_detector(base + 4, 3), make_toy_detector(base + 5, 3)};
    TrainConfig c;
    c.e_max = 200;
    c.seed = k;
    const Patch pe = run(train, ens, spec, colors, c).patch;
    const Patch ps = run(train, single, spec, colors, c).patch;
    EvalOptions o;
    auto ts = [&](const Patch& p) { return evaluate_patch(p, test, held, spec.values, o).transferability.value_or(-1); };
    const double te = ts(pe), tsingle = ts(ps), tgrey = ts(Patch(48, 0.5));
    const double trandom = ts(Patch(NaturalnessInputs::make(pe.grid(), spec.values, o.random_seed).random));
    beat_grey += te > tgrey;
    beat_random += te > trandom;
    beat_single += te > tsingle;
    detail += fmt("seed %g: %.1f vs grey %.1f, random %.1f, single %.1f; ", k, te, tgrey, trandom, tsingle);
    std::fprintf(stderr, "  [transfer seed %d done]\n", k);
  }
  const bool pass = beat_grey >= kTransferWins && beat_random >= kTransferWins && beat_single >= kTransferWins;
  return {pass, fmt("wins over grey %g/5, random %g/5, single %g/5 -- ", beat_grey, beat_random, beat_single) + detail};
}

// ---------------------------------------------------------------- 10
Outcome scheduler() {
  TrainConfig c;
  c.lr = 0.1;
  TrainState flat = initial_state(c);
  int decays = 0;
  double lr_before = flat.lr_current, lr_after = 0;
  for (int i = 0; i < c.plateau_patience + 1; ++i) {
    lr_before = flat.lr_current;
    if (plateau_schedule(flat, 0.75, c)) {
      ++decays;
      lr_after = flat.lr_current;
    }
  }
  TrainState falling = initial_state(c);
  int falling_decays = 0;
  for (int i = 0; i < 500; ++i) falling_decays += plateau_schedule(falling, 5.0 - 0.001 * i, c);
  const bool pass = decays == 1 && lr_after == 0.01 * lr_before && falling_decays == 0;
  return {pass, fmt("flat trace of %g epochs: %g decay, lr %g -> %g; decreasing trace: %g decays",
                    c.plateau_patience + 1, decays, lr_before, lr_after, falling_decays)};
}

// ---------------------------------------------------------------- 11
std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "advpatch_acceptance_det";
  fs::remove_all(root);
  fs::create_directories(root);
  std::ostringstream log;
  {
    std::ofstream spec(root / "scenes.json");
    spec << R"({"count": 32, "seed": 1})";
  }
  if (cmd_make_scenes(root / "scenes.json", root / "scenes", log) != kExitOk) return {false, "make-scenes failed"};
  {
    std::ofstream cfg(root / "config.json");
    cfg << R"({
      "train": {"e_max": 200, "seed": 5},
      "detectors": {"a": {"seed": 11}, "b": {"seed": 22}, "c": {"seed": 33}},
      "ensemble": {"mode": "average", "members": ["a", "b", "c"]},
      "specified_image": "scenes/reference.png",
      "printable_colors": "scenes/printable_colors.txt",
      "dataset": "scenes/manifest.json"
    })";
  }
  const int e1 = cmd_generate(root / "config.json", root / "run1", log);
  const int e2 = cmd_generate(root / "config.json", root / "run2", log);
  if (e1 != kExitOk || e2 != kExitOk) return {false, "generate failed: " + log.str()};
  const std::string p1 = slurp(root / "run1/patch.png"), p2 = slurp(root / "run2/patch.png");
  const std::string c1 = slurp(root / "run1/checkpoint.bin"), c2 = slurp(root / "run2/checkpoint.bin");
  const bool pass = !p1.empty() && !c1.empty() && p1 == p2 && c1 == c2;
  fs::remove_all(root);
  return {pass, "patch.png " + std::to_string(p1.size()) + " bytes " + (p1 == p2 ? "identical" : "DIFFERENT") +
                    ", checkpoint.bin " + std::to_string(c1.size()) + " bytes " +
                    (c1 == c2 ? "identical" : "DIFFERENT")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"composition identities", composition_identities},
      {"gradient correctness", gradient_correctness},
      {"mAP oracle equivalence", map_oracle},
      {"Jensen dominance", jensen},
      {"ensemble variance", variance},
      {"generalization bound", bound},
      {"end-to-end attack", end_to_end},
      {"transferability ordering", transferability},
      {"naturalness tradeoff", naturalness_tradeoff},
      {"plateau scheduler", scheduler},
      {"determinism", determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s  criterion %2d  %-26s %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                o.detail.c_str(), s);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
