#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numeric>

#include "dms/errors.hpp"
#include "dms/trainer.hpp"

using namespace dms;

namespace {

const Dataset& small_data() {
  static const Dataset d = [] {
    DatasetConfig c;
    c.n_samples = 150;
    return generate_dataset(c);
  }();
  return d;
}

TrainConfig quick(FusionMode mode = FusionMode::DMS) {
  TrainConfig c;
  c.epochs = 3;
  c.batch_size = 16;
  c.scheduler.t_passes = 4;
  c.model.hidden = 16;
  c.model.embed_dim = 8;
  c.mode = mode;
  return c;
}

}  // namespace

TEST_CASE("zero learning rate leaves parameters untouched") {
  TrainConfig c = quick();
  c.learning_rate = 0.0;
  const TrainState s = train(small_data().train, 3, c);
  const TrainState init = init_state(c.model, std::vector<std::size_t>{20, 12}, 3, c.mode, c.seed);
  CHECK(s.encoders == init.encoders);
  CHECK(s.head == init.head);
  CHECK(s.epoch == 3);
  CHECK(s.history.size() == 3);
}

TEST_CASE("training is deterministic and reduces the task loss") {
  TrainConfig c = quick();
  c.epochs = 5;
  std::vector<double> steps;
  const TrainState a = train(small_data().train, 3, c,
                             [&](std::size_t, const LossBreakdown& l) { steps.push_back(l.total); });
  const TrainState b = train(small_data().train, 3, c);
  CHECK(a == b);
  CHECK(steps.size() == 5 * 8);  // 120 samples in batches of 16
  CHECK(a.history.back().task < a.history.front().task);
  for (const auto& h : a.history) CHECK(std::abs(h.total - h.task - c.lambda * h.mwcl) < 1e-9);
}

TEST_CASE("invalid training configs") {
  TrainConfig c = quick();
  c.batch_size = 0;
  CHECK_THROWS_AS(train(small_data().train, 3, c), ParameterError);
  c = quick();
  c.lambda = -1.0;
  CHECK_THROWS_AS(train(small_data().train, 3, c), ParameterError);
  c = quick();
  c.learning_rate = -0.1;
  CHECK_THROWS_AS(train(small_data().train, 3, c), ParameterError);
}

TEST_CASE("divergence is reported") {
  TrainConfig c = quick();
  c.learning_rate = 1e12;
  CHECK_THROWS_AS(train(small_data().train, 3, c), TrainingDiverged);
}

TEST_CASE("evaluate") {
  const TrainConfig c = quick();
  const TrainState s = train(small_data().train, 3, c);
  const RngStream rng(3, "eval");

  SUBCASE("clean evaluation") {
    const EvalReport r = evaluate(s, small_data().test, std::nullopt, c, rng);
    CHECK(r.samples == 30);
    CHECK(r.accuracy == r.clean_accuracy);
    CHECK(r.degradation == 0.0);
    CHECK(r.predictions.size() == 30);
    CHECK(r.weights.rows() == 30);
    double total = 0.0;
    for (double w : r.mean_weights) total += w;
    CHECK(std::abs(total - 1.0) < 1e-9);
    CHECK(evaluate(s, small_data().test, std::nullopt, c, rng).weights == r.weights);
  }

  SUBCASE("zero-severity corruption is harmless") {
    const EvalReport r =
        evaluate(s, small_data().test, CorruptionSpec{0, CorruptionKind::Gaussian, 0.0}, c, rng);
    CHECK(r.degradation == 0.0);
  }

  SUBCASE("dropping a modality is accepted") {
    const EvalReport r =
        evaluate(s, small_data().test, CorruptionSpec{1, CorruptionKind::Drop, 0.0}, c, rng);
    CHECK(r.accuracy >= 0.0);
    CHECK(r.accuracy <= 1.0);
  }
}

TEST_CASE("static mode uses uniform weights") {
  const TrainConfig c = quick(FusionMode::StaticUniform);
  const TrainState s = train(small_data().train, 3, c);
  const EvalReport r = evaluate(s, small_data().test, std::nullopt, c, RngStream(1, "e"));
  const std::vector<ModalityScore> zero(2);
  const auto w = fuse_weights(zero, SchedulerConfig{0, 0, 0, 1});
  for (std::size_t i = 0; i < r.weights.rows(); ++i)
    for (std::size_t m = 0; m < 2; ++m) CHECK(std::abs(r.weights(i, m) - w[m]) <= 1e-12);
  CHECK(parse_fusion_mode("static") == FusionMode::StaticUniform);
  CHECK(to_string(FusionMode::DMS) == "dms");
}

TEST_CASE("robustness_sweep") {
  const TrainState dms = train(small_data().train, 3, quick());
  const TrainState stat = train(small_data().train, 3, quick(FusionMode::StaticUniform));
  const RngStream rng(4, "sweep");

  SUBCASE("empty grid") {
    const SweepTable t = robustness_sweep(dms, stat, small_data().test, {}, quick(), rng);
    // only the two clean baselines
    CHECK(t.rows.size() == 2);
    CHECK(t.deltas.empty());
  }

  SUBCASE("one row per model and grid point") {
    const std::vector<CorruptionSpec> grid{{0, CorruptionKind::Gaussian, 1.0},
                                           {0, CorruptionKind::Mask, 0.5}};
    const SweepTable t = robustness_sweep(dms, stat, small_data().test, grid, quick(), rng);
    CHECK(t.rows.size() == 2 + 2 * grid.size());
    REQUIRE(t.deltas.size() == 2);
    for (const auto& d : t.deltas)
      CHECK(d.delta == doctest::Approx(d.dms_degradation - d.static_degradation));
  }

  SUBCASE("models trained on different data are rejected") {
    DatasetConfig other;
    other.n_samples = 150;
    other.seed = 99;
    TrainConfig c = quick(FusionMode::StaticUniform);
    c.epochs = 1;
    const TrainState foreign = train(generate_dataset(other).train, 3, c);
    CHECK_THROWS_AS(robustness_sweep(dms, foreign, small_data().test, {}, quick(), rng),
                    ContractError);
  }
}

TEST_CASE("ablation_run has one row per variant") {
  TrainConfig c = quick();
  c.epochs = 1;
  const AblationTable t = ablation_run(c, small_data(), 3, {0, CorruptionKind::Gaussian, 2.0},
                                       RngStream(5, "abl"));
  REQUIRE(t.rows.size() == 4);
  CHECK(t.rows[0].variant == "full");
  CHECK(t.rows[1].scheduler.alpha == 0.0);
  CHECK(t.rows[2].scheduler.beta == 0.0);
  CHECK(t.rows[3].scheduler.gamma == 0.0);
}

namespace {

struct DefaultRun {
  Dataset data = generate_dataset(DatasetConfig{});
  TrainConfig cfg;
  TrainState state = train(data.train, 3, cfg);
};

const DefaultRun& default_run() {
  static const DefaultRun run;
  return run;
}

Batch first_rows(const Batch& b, std::size_t n) {
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  return b.select(rows);
}

}  // namespace

TEST_CASE("default training: loss falls for five epochs and the clean task is solved") {
  const DefaultRun& r = default_run();
  REQUIRE(r.state.history.size() == 30);
  for (std::size_t e = 1; e < 5; ++e) CHECK(r.state.history[e].task < r.state.history[e - 1].task);
  const EvalReport rep = evaluate(r.state, r.data.test, std::nullopt, r.cfg, RngStream(1, "clean"));
  CHECK(rep.accuracy > 0.9);
  CHECK(rep.accuracy >= nearest_centroid_accuracy(r.data.train, r.data.test, 3) - 0.05);
}

TEST_CASE("Gaussian noise on a modality lowers its mean weight") {
  const DefaultRun& r = default_run();
  const Batch batch = first_rows(r.data.test, 100);
  const RngStream rng(2, "noisy");
  const double clean = evaluate(r.state, batch, std::nullopt, r.cfg, rng).mean_weights[0];
  const double noisy =
      evaluate(r.state, batch, CorruptionSpec{0, CorruptionKind::Gaussian, 2.0}, r.cfg, rng).mean_weights[0];
  CHECK(noisy < clean);
}

TEST_CASE("a dropped modality receives less than uniform weight after default training") {
  const DefaultRun& r = default_run();
  const Batch batch = first_rows(r.data.test, 100);
  for (std::size_t m = 0; m < 2; ++m) {
    CAPTURE(m);
    const EvalReport rep =
        evaluate(r.state, batch, CorruptionSpec{m, CorruptionKind::Drop, 0.0}, r.cfg, RngStream(6, "drop"));
    CHECK(rep.mean_weights[m] < 0.5);
  }
}

TEST_CASE("DMS degrades less than static fusion under mild Gaussian noise in most seeds") {
  const std::vector<CorruptionSpec> grid{{0, CorruptionKind::Gaussian, 0.5},
                                         {0, CorruptionKind::Gaussian, 1.0},
                                         {0, CorruptionKind::Gaussian, 2.0}};
  int wins = 0;
  for (std::uint64_t seed = 7; seed < 12; ++seed) {
    DatasetConfig dc;
    dc.seed = seed;
    const Dataset d = generate_dataset(dc);
    TrainConfig c;
    c.seed = seed;
    const TrainState dms = train(d.train, 3, c);
    c.mode = FusionMode::StaticUniform;
    const TrainState stat = train(d.train, 3, c);
    const SweepTable t = robustness_sweep(dms, stat, d.test, grid, c, RngStream(seed, "sweep"));
    const double a = t.mean_degradation("dms", CorruptionKind::Gaussian);
    const double b = t.mean_degradation("static", CorruptionKind::Gaussian);
    MESSAGE("seed " << seed << ": dms " << a << "% static " << b << "%");
    wins += a > b;
  }
  CHECK(wins >= 4);
}
