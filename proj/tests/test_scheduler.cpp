#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "dms/errors.hpp"
#include "dms/scheduler.hpp"

using namespace dms;

TEST_CASE("confidence_score") {
  const std::vector<double> one_hot{1, 0, 0};
  const std::vector<double> uniform{1.0 / 3, 1.0 / 3, 1.0 / 3};
  const std::vector<double> p{0.8, 0.2};
  CHECK(confidence_score(one_hot) == 1.0);
  CHECK(confidence_score(uniform) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(confidence_score(p) == doctest::Approx(0.27807).epsilon(1e-5));

  const std::vector<double> off{0.6, 0.6};
  const std::vector<double> single{1.0};
  CHECK_THROWS_AS(confidence_score(off), ContractError);
  CHECK_THROWS_AS(confidence_score(single), ContractError);
}

TEST_CASE("uncertainty_score") {
  CHECK(uncertainty_score(Matrix(5, 3, 1.0 / 3)) == 0.0);
  CHECK(uncertainty_score(Matrix::from_rows({{0.7, 0.3}})) == 0.0);
  CHECK(uncertainty_score(Matrix::from_rows({{1, 0}, {0, 1}})) == doctest::Approx(0.25));
  CHECK_THROWS_AS(uncertainty_score(Matrix(0, 2)), ContractError);
}

TEST_CASE("alignment_score") {
  const std::vector<double> f{1, 2, 3};
  const std::vector<double> g{2, 4, 6};
  const std::vector<double> e1{1, 0};
  const std::vector<double> e2{0, 1};
  const std::vector<double> d{1, 1};
  const std::vector<double> zero{0, 0};
  const std::vector<std::span<const double>> par{g};
  CHECK(alignment_score(f, par) == doctest::Approx(1.0));
  const std::vector<std::span<const double>> orth{e2};
  CHECK(alignment_score(e1, orth) == 0.0);
  const std::vector<std::span<const double>> diag{d};
  CHECK(alignment_score(e1, diag) == doctest::Approx(0.70711).epsilon(1e-5));
  const std::vector<std::span<const double>> zeros{zero};
  CHECK(alignment_score(e1, zeros) == 0.0);
  const std::vector<std::span<const double>> from_zero{e1};
  CHECK(alignment_score(zero, from_zero) == 0.0);

  SUBCASE("mean of the others") {
    const std::vector<std::span<const double>> two{e1, e2};
    CHECK(alignment_score(d, two) == doctest::Approx(1.0));
  }
  SUBCASE("dimension mismatch") {
    const std::vector<std::span<const double>> bad{f};
    CHECK_THROWS_AS(alignment_score(e1, bad), ShapeError);
  }
}

TEST_CASE("fuse_weights") {
  const std::vector<ModalityScore> a{{0.9, 0.1, 0.5}, {0.2, 0.0, -0.3}, {0.5, 0.2, 0.1}};
  const auto zeros = fuse_weights(a, SchedulerConfig{0, 0, 0, 1});
  for (double w : zeros) CHECK(w == doctest::Approx(1.0 / 3));

  const std::vector<ModalityScore> same(4, ModalityScore{0.4, 0.05, 0.2});
  for (double w : fuse_weights(same, SchedulerConfig{})) CHECK(w == doctest::Approx(0.25));

  const std::vector<ModalityScore> two{{1.0, 0.0, 1.0}, {0.0, 0.25, 0.5}};
  const auto w = fuse_weights(two, SchedulerConfig{1, 1, 1, 8});
  CHECK(w[0] == doctest::Approx(0.85195).epsilon(1e-5));
  CHECK(w[1] == doctest::Approx(0.14805).epsilon(1e-5));
}

TEST_CASE("fuse_weights properties") {
  RngStream rng(31, "fuse-prop");
  auto random_scores = [&](std::size_t m) {
    std::vector<ModalityScore> s(m);
    for (auto& x : s) x = {rng.uniform(), rng.uniform(0, 0.25), rng.uniform(-1, 1)};
    return s;
  };
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t m = 2 + rng.below(4);
    const SchedulerConfig cfg{rng.uniform(0.1, 3), rng.uniform(0.1, 3), rng.uniform(0.1, 3), 1};
    auto s = random_scores(m);
    const auto w = fuse_weights(s, cfg);
    double total = 0.0;
    for (double v : w) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
      total += v;
    }
    CHECK(std::abs(total - 1.0) < 1e-9);

    // monotone in each factor for modality 0
    auto bumped = s;
    bumped[0].confidence = std::min(1.0, s[0].confidence + 0.05);
    if (bumped[0].confidence > s[0].confidence) CHECK(fuse_weights(bumped, cfg)[0] > w[0]);
    bumped = s;
    bumped[0].alignment = std::min(1.0, s[0].alignment + 0.05);
    if (bumped[0].alignment > s[0].alignment) CHECK(fuse_weights(bumped, cfg)[0] > w[0]);
    bumped = s;
    bumped[0].uncertainty = std::min(0.25, s[0].uncertainty + 0.05);
    if (bumped[0].uncertainty > s[0].uncertainty) CHECK(fuse_weights(bumped, cfg)[0] < w[0]);
  }
}

TEST_CASE("fuse_weights is invariant to a common shift of the quality scores") {
  // adding δ/α to every confidence shifts every q_m by δ
  const std::vector<ModalityScore> s{{0.2, 0.1, 0.3}, {0.5, 0.05, -0.2}, {0.1, 0.2, 0.9}};
  auto shifted = s;
  for (auto& x : shifted) x.confidence += 0.4;
  const SchedulerConfig cfg{2.0, 1.0, 0.5, 1};
  const auto a = fuse_weights(s, cfg);
  const auto b = fuse_weights(shifted, cfg);
  for (std::size_t m = 0; m < a.size(); ++m) CHECK(std::abs(a[m] - b[m]) < 1e-12);
}

TEST_CASE("schedule") {
  const EncoderConfig ec{5, 8, 4, 3, 0.3};
  const EncoderParams p = init_params(0, ec, RngStream(1, "enc"));
  EncoderParams twin = p;
  twin.modality = 1;
  RngStream data(2, "x");
  Matrix x(6, 5);
  for (double& v : x.data()) v = data.normal();
  const std::vector<std::size_t> ids{0, 1, 2, 3, 4, 5};
  const RngStream mc(3, "mc");

  SUBCASE("identical modalities share weight equally") {
    const std::vector<EncoderParams> encs{p, twin};
    const std::vector<Matrix> inputs{x, x};
    const ScheduleResult r = schedule(encs, inputs, ids, SchedulerConfig{}, mc);
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(std::abs(r.weights(i, 0) - 0.5) < 1e-9);
      CHECK(std::abs(r.weights(i, 1) - 0.5) < 1e-9);
    }
  }

  const EncoderParams other = init_params(1, EncoderConfig{3, 8, 4, 3, 0.3}, RngStream(4, "enc"));
  Matrix x2(6, 3);
  for (double& v : x2.data()) v = data.normal();
  const std::vector<EncoderParams> encs{p, other};
  const std::vector<Matrix> inputs{x, x2};

  SUBCASE("uncertainty is irrelevant when beta is zero") {
    const SchedulerConfig one{1, 0, 1, 1};
    const SchedulerConfig eight{1, 0, 1, 8};
    CHECK(schedule(encs, inputs, ids, one, mc).weights ==
          schedule(encs, inputs, ids, eight, mc).weights);
  }

  SUBCASE("deterministic with a fixed seed, scores in range") {
    const ScheduleResult a = schedule(encs, inputs, ids, SchedulerConfig{}, mc);
    const ScheduleResult b = schedule(encs, inputs, ids, SchedulerConfig{}, mc);
    CHECK(a.weights == b.weights);
    for (std::size_t i = 0; i < 6; ++i) {
      double total = 0.0;
      for (std::size_t m = 0; m < 2; ++m) {
        const ModalityScore& s = a.scores.at(i, m);
        CHECK(s.confidence >= 0.0);
        CHECK(s.confidence <= 1.0);
        CHECK(s.uncertainty >= 0.0);
        CHECK(s.uncertainty <= 0.25);
        CHECK(s.alignment >= -1.0);
        CHECK(s.alignment <= 1.0);
        CHECK(a.weights(i, m) > 0.0);
        total += a.weights(i, m);
      }
      CHECK(std::abs(total - 1.0) < 1e-9);
    }
  }

  SUBCASE("errors") {
    const std::vector<EncoderParams> lone{p};
    const std::vector<Matrix> lone_in{x};
    CHECK_THROWS_AS(schedule(lone, lone_in, ids, SchedulerConfig{}, mc), ContractError);
    const std::vector<Matrix> swapped{x2, x};
    CHECK_THROWS_AS(schedule(encs, swapped, ids, SchedulerConfig{}, mc), ShapeError);
    CHECK_THROWS_AS(schedule(encs, inputs, ids, SchedulerConfig{1, 1, 1, 0}, mc), ParameterError);
    CHECK_THROWS_AS(schedule(encs, inputs, ids, SchedulerConfig{-1, 1, 1, 2}, mc), ParameterError);
  }
}
