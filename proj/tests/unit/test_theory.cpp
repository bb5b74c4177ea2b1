#include <cmath>
#include <random>

#include "advpatch/errors.hpp"
#include "advpatch/theory.hpp"
#include "advpatch/toy_detector.hpp"
#include "doctest.h"

using namespace advpatch;

TEST_CASE("jensen examples") {
  const double out[] = {0.0, 2.0};
  const JensenResult r = jensen_check({LossKind::Squared, 1.0}, out);
  CHECK(r.ensemble_loss == 0.0);
  CHECK(r.mean_individual_loss == 1.0);

  const double same[] = {0.3, 0.3, 0.3};
  for (LossKind k : {LossKind::Squared, LossKind::Absolute, LossKind::Logistic}) {
    const JensenResult e = jensen_check({k, 0.7}, same);
    CHECK(e.ensemble_loss == doctest::Approx(e.mean_individual_loss).epsilon(1e-15));
  }
  CHECK_THROWS_AS(jensen_check({}, std::span<const double>{}), InvalidArgument);
}

TEST_CASE("jensen holds on random inputs") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int t = 0; t < 300; ++t) {
    std::vector<double> out(2 + t % 5);
    for (double& v : out) v = u(rng);
    for (LossKind k : {LossKind::Squared, LossKind::Absolute, LossKind::Logistic}) {
      const JensenResult r = jensen_check({k, u(rng)}, out);
      CHECK(r.ensemble_loss <= r.mean_individual_loss + 1e-12);
    }
  }
}

TEST_CASE("variance of the ensemble mean") {
  const VarianceResult v0 = ensemble_variance_mc({5, 1.0, 0.0, 1}, 100000);
  CHECK(v0.bienayme == doctest::Approx(0.2));
  CHECK(v0.two_rho == doctest::Approx(0.2));
  CHECK(std::abs(v0.empirical - 0.2) < 0.03 * 0.2);

  const VarianceResult v3 = ensemble_variance_mc({5, 1.0, 0.3, 2}, 100000);
  CHECK(v3.bienayme == doctest::Approx(0.44));
  CHECK(v3.two_rho == doctest::Approx(0.32));
  CHECK(std::abs(v3.empirical - 0.44) < 0.03 * 0.44);
  CHECK(std::abs(v3.empirical - v3.bienayme) < 3 * v3.standard_error);

  const VarianceResult v1 = ensemble_variance_mc({7, 2.0, 1.0, 3}, 10000);
  CHECK(v1.bienayme == doctest::Approx(4.0));
  CHECK(std::abs(v1.empirical - 4.0) < 0.1);

  CHECK_THROWS_AS(ensemble_variance_mc({5, 1.0, -0.5, 0}, 10000), InvalidArgument);
  CHECK_THROWS_AS(ensemble_variance_mc({5, 1.0, 0.3, 0}, 100), InvalidArgument);
  CHECK_NOTHROW(ensemble_variance_mc({5, 1.0, -0.25, 0}, 10000));
}

TEST_CASE("generalization bound") {
  CHECK(generalization_bound({5, 614, 0.05}) == doctest::Approx(0.0612384).epsilon(1e-5));
  CHECK(generalization_bound({1, 100, 1.0 - 1e-12}) < 1e-6);
  CHECK(generalization_bound({5, 1000, 0.05}) < generalization_bound({5, 614, 0.05}));
  CHECK(generalization_bound({8, 614, 0.05}) > generalization_bound({5, 614, 0.05}));
  // depends on M and gamma only through ln(M / gamma)
  CHECK(generalization_bound({10, 50, 0.1}) == doctest::Approx(generalization_bound({1, 50, 0.01})).epsilon(1e-12));
  CHECK_THROWS_AS(generalization_bound({0, 10, 0.05}), InvalidArgument);
  CHECK_THROWS_AS(generalization_bound({1, 10, 1.5}), InvalidArgument);
}

TEST_CASE("generalization gap") {
  SyntheticSceneSpec sp;
  sp.count = 6;
  sp.seed = 4;
  const auto train = generate_scenes(sp);
  EnsembleSpec e;
  e.members.push_back(make_toy_detector(7, 3));
  const GeneralizationGap same = generalization_gap(e, train, train);
  CHECK(same.gap == 0.0);
  CHECK(same.expected == same.empirical);

  // bias -inf in effect: a detector that never fires
  auto blind = std::make_shared<ToyTemplateDetector>("blind", make_toy_detector(7, 1)->templates(), 8.0, -1e6, 0);
  EnsembleSpec never;
  never.members.push_back(blind);
  sp.seed = 5;
  const auto test = generate_scenes(sp);
  const GeneralizationGap g = generalization_gap(never, train, test);
  CHECK(g.empirical == 1.0);
  CHECK(g.expected == 1.0);
  CHECK(g.gap == 0.0);

  CHECK_THROWS_AS(generalization_gap(e, train, std::span<const LabeledImage>{}), InvalidArgument);
}
