#include <cmath>
#include <filesystem>
#include <fstream>

#include "advpatch/errors.hpp"
#include "advpatch/optimizer.hpp"
#include "advpatch/toy_detector.hpp"
#include "doctest.h"

using namespace advpatch;

namespace {

EnsembleSpec toy_ensemble() {
  EnsembleSpec e;
  for (int s : {11, 22, 33}) e.members.push_back(make_toy_detector(s, 3));
  return e;
}

double mean_confidence(const EnsembleSpec& e, const std::vector<LabeledImage>& data, const Patch& p,
                       const PlacementSpec& placement) {
  double sum = 0;
  for (const auto& li : data) {
    const auto layout = build_person_mask(li.image.height(), li.image.width(), li.boxes, placement);
    sum += ensemble_confidence(e, compose(li.image, p, layout));
  }
  return sum / static_cast<double>(data.size());
}

}  // namespace

TEST_CASE("init patch") {
  const Patch flat = init_patch(16, 0.4, 0.0, 3);
  for (double v : flat.grid().values()) CHECK(v == doctest::Approx(0.4).epsilon(1e-7));
  CHECK(init_patch(16, 0.5, 0.1, 9) == init_patch(16, 0.5, 0.1, 9));
  const Patch p = init_patch(64, 0.5, 0.1, 1);
  double mean = 0;
  for (double v : p.grid().values()) {
    mean += v / static_cast<double>(p.grid().size());
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK(std::abs(mean - 0.5) < 0.01);
}

TEST_CASE("plateau schedule") {
  TrainConfig c;
  c.lr = 0.1;
  c.plateau_patience = 10;
  SUBCASE("flat trace decays once") {
    TrainState s = initial_state(c);
    int decays = 0;
    for (int i = 0; i < c.plateau_patience + 1; ++i) decays += plateau_schedule(s, 1.0, c);
    CHECK(decays == 1);
    CHECK(s.decays == 1);
    CHECK(s.lr_current == doctest::Approx(0.001).epsilon(1e-12));
    CHECK(s.epochs_since_improvement == 0);
  }
  SUBCASE("improving trace never decays") {
    TrainState s = initial_state(c);
    for (int i = 0; i < 100; ++i) CHECK_FALSE(plateau_schedule(s, 10.0 - 0.01 * i, c));
    CHECK(s.lr_current == 0.1);
  }
  SUBCASE("lr follows gamma^k") {
    TrainState s = initial_state(c);
    for (int i = 0; i < 35; ++i) plateau_schedule(s, 2.0, c);
    CHECK(s.decays == 3);
    CHECK(s.lr_current == doctest::Approx(0.1 * std::pow(0.01, 3)));
  }
}

TEST_CASE("config validation") {
  TrainConfig c;
  c.gamma = 1.0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = {};
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = {};
  c.lr = 0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("steps lower the ensemble confidence") {
  SyntheticSceneSpec sp;
  sp.count = 16;
  sp.seed = 1;
  const auto data = generate_scenes(sp);
  const EnsembleSpec e = toy_ensemble();
  TrainConfig c;
  c.seed = 5;
  const auto spec = SpecifiedImage::from_image(make_reference_image(64, 0), c.patch_side);
  const auto colors = PrintableColorSet::default_palette();
  const auto scenes = prepare_scenes(data, e, c.placement);
  TrainState s = initial_state(c);
  const double before = mean_confidence(e, data, s.patch, c.placement);
  const TrainState start = s;
  for (int i = 0; i < 50; ++i) {
    step(s, scenes, e, spec, colors, c);
    for (double v : s.patch.grid().values()) REQUIRE((v >= 0.0 && v <= 1.0));
  }
  const double after = mean_confidence(e, data, s.patch, c.placement);
  CHECK(after <= 0.75 * before);

  // same state, same batch: same patch
  TrainState again = start;
  for (int i = 0; i < 50; ++i) step(again, scenes, e, spec, colors, c);
  CHECK(again.patch == s.patch);
}

TEST_CASE("zero gradient leaves the patch alone") {
  SyntheticSceneSpec sp;
  sp.count = 2;
  const auto data = generate_scenes(sp);
  EnsembleSpec e;
  e.members.push_back(make_toy_detector(1, 1));
  TrainConfig c;
  c.weights = {0, 0, 0};
  c.patch_side = 8;
  // no person boxes: the patch never reaches a detector
  auto far = data;
  for (auto& li : far) li.boxes.clear();
  TrainState s = initial_state(c);
  const Patch before = s.patch;
  const auto scenes = prepare_scenes(far, e, c.placement);
  step(s, scenes, e, SpecifiedImage{Grid(8, 8, 3, 0.5)}, PrintableColorSet::default_palette(), c);
  CHECK(s.patch == before);
}

TEST_CASE("checkpoint round trip") {
  SyntheticSceneSpec sp;
  sp.count = 4;
  const auto data = generate_scenes(sp);
  const EnsembleSpec e = toy_ensemble();
  TrainConfig c;
  c.e_max = 3;
  c.batch_size = 2;
  c.patch_side = 16;
  const auto spec = SpecifiedImage::from_image(make_reference_image(32, 0), 16);
  const auto colors = PrintableColorSet::default_palette();
  const TrainResult r = run(data, e, spec, colors, c);
  const auto path = std::filesystem::temp_directory_path() / "advpatch_unit.ckpt";
  const Checkpoint ck{r.state, 0x0123456789abcdefULL};
  save_checkpoint(ck, path);
  CHECK(load_checkpoint(path) == ck);

  // resuming from the checkpoint reproduces the uninterrupted run
  TrainConfig longer = c;
  longer.e_max = 5;
  RunOptions o;
  o.resume = load_checkpoint(path).state;
  const TrainResult resumed = run(data, e, spec, colors, longer, o);
  const TrainResult straight = run(data, e, spec, colors, longer);
  CHECK(resumed.state == straight.state);
  CHECK(resumed.patch == straight.patch);

  {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    out << 'x';
  }
  CHECK_THROWS_AS(load_checkpoint(path), ParseError);
  {
    std::ofstream out(path, std::ios::binary);
    out << "MVP0";
  }
  CHECK_THROWS_AS(load_checkpoint(path), ParseError);
  std::filesystem::remove(path);
}

TEST_CASE("run edge cases and invariants") {
  SyntheticSceneSpec sp;
  sp.count = 4;
  const auto data = generate_scenes(sp);
  const EnsembleSpec e = toy_ensemble();
  TrainConfig c;
  c.patch_side = 16;
  c.batch_size = 2;
  const auto spec = SpecifiedImage::from_image(make_reference_image(32, 0), 16);
  const auto colors = PrintableColorSet::default_palette();

  c.e_max = 0;
  CHECK(run(data, e, spec, colors, c).patch == init_patch(16, c.init_mean, c.init_std, c.seed));

  c.e_max = 6;
  const TrainResult a = run(data, e, spec, colors, c), b = run(data, e, spec, colors, c);
  CHECK(a.patch == b.patch);
  REQUIRE(a.history.size() == 6);
  double best = INFINITY;
  for (const auto& rec : a.history) {
    CHECK(rec.loss.total == doctest::Approx(rec.loss.obj + 0.01 * rec.loss.nps + 2.5 * rec.loss.tv +
                                            2.5 * rec.loss.css).epsilon(1e-12));
    best = std::min(best, rec.loss.total);
  }
  CHECK(a.state.best_total <= best);
  CHECK(a.state.lr_current == doctest::Approx(c.lr * std::pow(c.gamma, a.state.decays)));

  CHECK_THROWS_AS(run(std::span<const LabeledImage>{}, e, spec, colors, c), InvalidArgument);
}
