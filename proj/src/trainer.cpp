#include "dms/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dms/errors.hpp"

namespace dms {

std::string to_string(FusionMode mode) {
  return mode == FusionMode::DMS ? "dms" : "static";
}

FusionMode parse_fusion_mode(std::string_view name) {
  if (name == "dms") return FusionMode::DMS;
  if (name == "static") return FusionMode::StaticUniform;
  throw ParameterError("unknown fusion mode '" + std::string(name) + "' (expected dms|static)");
}

void ModelConfig::validate() const {
  if (hidden < 1 || embed_dim < 1) throw ParameterError("model.hidden and model.embed_dim must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw ParameterError("model.dropout must lie in [0, 1)");
  }
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ParameterError("train.epochs must be >= 1");
  if (batch_size < 1) throw ParameterError("train.batch_size must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ParameterError("train.learning_rate must be finite and >= 0");
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ParameterError("train.lambda must be finite and >= 0");
  }
  scheduler.validate();
  model.validate();
  if (train_corruption) train_corruption->validate();
}

TrainState init_state(const ModelConfig& model, std::span<const std::size_t> dims,
                      std::size_t classes, FusionMode mode, std::uint64_t seed) {
  model.validate();
  TrainState state;
  state.mode = mode;
  RngStream init(seed, "init");
  for (std::size_t m = 0; m < dims.size(); ++m) {
    EncoderConfig ec{dims[m], model.hidden, model.embed_dim, classes, model.dropout};
    state.encoders.push_back(init_params(m, ec, init.derive(m)));
  }
  state.head = init_fusion_head(model.embed_dim, classes, init.derive(dims.size()));
  return state;
}

Matrix uniform_weights(std::size_t samples, std::size_t modalities) {
  return Matrix(samples, modalities, 1.0 / static_cast<double>(modalities));
}

LossGraph build_loss(std::span<const EncoderBinding> encoders, const FusionHeadBinding& head,
                     const Batch& batch, const Matrix& weights, double lambda) {
  if (encoders.size() != batch.num_modalities()) {
    throw ShapeError("model has " + std::to_string(encoders.size()) + " encoders, batch has " +
                     std::to_string(batch.num_modalities()) + " modalities");
  }
  Tape& tape = *head.w.tape();
  LossGraph g;
  for (std::size_t m = 0; m < encoders.size(); ++m) {
    Var x = tape.constant(batch.modalities[m]);
    g.embeddings.push_back(encode(encoders[m], x, ForwardMode::Deterministic, nullptr));
  }
  g.h = fuse_representations(g.embeddings, weights);
  g.task = task_loss(head, g.h, batch.labels);
  g.mwcl = mwcl_loss(g.h, g.embeddings, weights);
  g.total = total_loss(g.task, g.mwcl, lambda);
  return g;
}

namespace {

void sgd(Matrix& param, const Matrix& grad, double lr) {
  auto p = param.data();
  auto g = grad.data();
  for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
}

struct Forward {
  ScheduleResult schedule;
  Matrix h;
  Matrix logits;
  LossBreakdown loss;
};

// Inference pass: scores are always computed (for reporting); StaticUniform ignores them.
Forward forward(const TrainState& state, const Batch& batch, const TrainConfig& cfg,
                const RngStream& mc) {
  Forward f;
  f.schedule = schedule(state.encoders, batch.modalities, batch.ids, cfg.scheduler, mc);
  if (state.mode == FusionMode::StaticUniform) {
    f.schedule.weights = uniform_weights(batch.size(), batch.num_modalities());
  }
  f.h = fuse_representations(f.schedule.embeddings, f.schedule.weights);
  Tape tape;
  FusionHeadBinding head = bind(tape, state.head, false);
  f.logits = fused_logits(head, tape.constant(f.h)).value();
  const double task = task_loss(state.head, f.h, batch.labels);
  const double mwcl = mwcl_loss(f.h, f.schedule.embeddings, f.schedule.weights);
  f.loss = total_loss(task, mwcl, cfg.lambda);
  return f;
}

}  // namespace

namespace {

bool parameters_finite(const TrainState& state) {
  for (const EncoderParams& p : state.encoders) {
    for (const Matrix* m : {&p.w1, &p.b1, &p.w2, &p.b2, &p.head_w, &p.head_b}) {
      if (!m->all_finite()) return false;
    }
  }
  return state.head.w.all_finite() && state.head.b.all_finite();
}

bool forward_finite(const TrainState& state, const Batch& batch) {
  for (std::size_t m = 0; m < state.encoders.size(); ++m) {
    const Matrix emb = encode(state.encoders[m], batch.modalities[m], ForwardMode::Deterministic);
    if (!emb.all_finite() || !classify(state.encoders[m], emb).all_finite()) return false;
  }
  return true;
}

}  // namespace

TrainState train_epoch(TrainState state, const Batch& data, const TrainConfig& cfg,
                       const RngStream& rng, const StepLogger& log) {
  cfg.validate();
  if (data.size() == 0) throw ContractError("training on an empty batch");
  if (data.num_modalities() != state.encoders.size()) {
    throw ShapeError("training data has " + std::to_string(data.num_modalities()) +
                     " modalities, model has " + std::to_string(state.encoders.size()));
  }
  const RngStream epoch_rng = rng.derive(state.epoch);
  Batch source = cfg.train_corruption
                     ? apply_corruption(data, *cfg.train_corruption, epoch_rng.derive(2))
                     : data;

  std::vector<std::size_t> order(source.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  RngStream shuffle = epoch_rng.derive(0);
  shuffle.shuffle(order.begin(), order.end());
  const RngStream mc = epoch_rng.derive(1);

  const std::size_t steps_per_epoch = (order.size() + cfg.batch_size - 1) / cfg.batch_size;
  LossBreakdown epoch_loss{0.0, 0.0, 0.0, cfg.lambda};
  for (std::size_t step = 0; step < steps_per_epoch; ++step) {
    const std::size_t begin = step * cfg.batch_size;
    const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
    const Batch batch =
        source.select(std::span<const std::size_t>(order).subspan(begin, end - begin));

    Tape tape;
    std::vector<EncoderBinding> enc;
    for (const EncoderParams& p : state.encoders) enc.push_back(bind(tape, p, true));
    FusionHeadBinding head = bind(tape, state.head, true);

    // weights come from a tape-free pass, so no gradient reaches the scheduler
    Matrix weights;
    if (state.mode == FusionMode::DMS) {
      try {
        weights = schedule(state.encoders, batch.modalities, batch.ids, cfg.scheduler, mc).weights;
      } catch (const ContractError&) {
        // overflowing activations surface as invalid probabilities inside the scheduler
        if (forward_finite(state, batch)) throw;
        throw TrainingDiverged("non-finite activations at epoch " + std::to_string(state.epoch) +
                               ", step " + std::to_string(state.epoch * steps_per_epoch + step));
      }
    } else {
      weights = uniform_weights(batch.size(), batch.num_modalities());
    }
    LossGraph g = build_loss(enc, head, batch, weights, cfg.lambda);

    Var objective = g.total;
    for (std::size_t m = 0; m < enc.size(); ++m) {
      Var detached = tape.constant(g.embeddings[m].value());
      objective = ad::add(objective, ad::softmax_cross_entropy(head_logits(enc[m], detached),
                                                               batch.labels));
    }

    const LossBreakdown loss =
        total_loss(g.task.value()(0, 0), g.mwcl.value()(0, 0), cfg.lambda);
    const std::size_t global_step = state.epoch * steps_per_epoch + step;
    if (!std::isfinite(loss.total) || !std::isfinite(objective.value()(0, 0))) {
      throw TrainingDiverged("non-finite loss at epoch " + std::to_string(state.epoch) +
                             ", step " + std::to_string(global_step));
    }
    tape.backward(objective);

    for (std::size_t m = 0; m < enc.size(); ++m) {
      EncoderParams& p = state.encoders[m];
      sgd(p.w1, tape.grad(enc[m].w1), cfg.learning_rate);
      sgd(p.b1, tape.grad(enc[m].b1), cfg.learning_rate);
      sgd(p.w2, tape.grad(enc[m].w2), cfg.learning_rate);
      sgd(p.b2, tape.grad(enc[m].b2), cfg.learning_rate);
      sgd(p.head_w, tape.grad(enc[m].head_w), cfg.learning_rate);
      sgd(p.head_b, tape.grad(enc[m].head_b), cfg.learning_rate);
    }
    sgd(state.head.w, tape.grad(head.w), cfg.learning_rate);
    sgd(state.head.b, tape.grad(head.b), cfg.learning_rate);
    if (!parameters_finite(state)) {
      throw TrainingDiverged("non-finite parameters after epoch " + std::to_string(state.epoch) +
                             ", step " + std::to_string(global_step));
    }

    if (log) log(global_step, loss);
    const double share = static_cast<double>(batch.size()) / static_cast<double>(source.size());
    epoch_loss.task += share * loss.task;
    epoch_loss.mwcl += share * loss.mwcl;
  }
  epoch_loss.total = epoch_loss.task + epoch_loss.lambda * epoch_loss.mwcl;
  state.history.push_back(epoch_loss);
  ++state.epoch;
  return state;
}

TrainState train(const Batch& data, std::size_t classes, const TrainConfig& cfg,
                 const StepLogger& log) {
  cfg.validate();
  std::vector<std::size_t> dims;
  for (const Matrix& x : data.modalities) dims.push_back(x.cols());
  TrainState state = init_state(cfg.model, dims, classes, cfg.mode, cfg.seed);
  state.data_hash = data.content_hash();
  const RngStream rng(cfg.seed, "train");
  for (std::size_t e = 0; e < cfg.epochs; ++e) state = train_epoch(std::move(state), data, cfg, rng, log);
  return state;
}

namespace {

EvalReport summarize(const Forward& f, const Batch& batch) {
  EvalReport r;
  r.samples = batch.size();
  const std::size_t modalities = batch.num_modalities();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    auto row = f.logits.row(i);
    const auto pred = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    r.predictions.push_back(pred);
    if (pred == batch.labels[i]) ++correct;
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(batch.size());
  r.mean_weights.assign(modalities, 0.0);
  r.mean_scores.assign(modalities, ModalityScore{});
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (std::size_t m = 0; m < modalities; ++m) {
      r.mean_weights[m] += inv_n * f.schedule.weights(i, m);
      const ModalityScore& s = f.schedule.scores.at(i, m);
      r.mean_scores[m].confidence += inv_n * s.confidence;
      r.mean_scores[m].uncertainty += inv_n * s.uncertainty;
      r.mean_scores[m].alignment += inv_n * s.alignment;
    }
  }
  r.loss = f.loss;
  r.weights = f.schedule.weights;
  r.scores = f.schedule.scores;
  return r;
}

}  // namespace

EvalReport evaluate(const TrainState& state, const Batch& data,
                    const std::optional<CorruptionSpec>& spec, const TrainConfig& cfg,
                    const RngStream& rng) {
  if (data.size() == 0) throw ContractError("evaluation on an empty batch");
  const RngStream mc = rng.derive(0);
  EvalReport clean = summarize(forward(state, data, cfg, mc), data);
  clean.clean_accuracy = clean.accuracy;
  if (!spec) return clean;

  const Batch corrupted = apply_corruption(data, *spec, rng.derive(1));
  EvalReport r = summarize(forward(state, corrupted, cfg, mc), corrupted);
  r.clean_accuracy = clean.accuracy;
  r.corruption = spec;
  r.degradation =
      clean.accuracy > 0.0 ? 100.0 * (r.accuracy - clean.accuracy) / clean.accuracy : 0.0;
  return r;
}

double SweepTable::mean_degradation(const std::string& model, CorruptionKind kind) const {
  double total = 0.0;
  std::size_t count = 0;
  for (const SweepRow& row : rows) {
    if (row.model != model || !row.report.corruption || row.report.corruption->kind != kind) {
      continue;
    }
    total += row.report.degradation;
    ++count;
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

SweepTable robustness_sweep(const TrainState& dms, const TrainState& static_uniform,
                            const Batch& data, std::span<const CorruptionSpec> grid,
                            const TrainConfig& cfg, const RngStream& rng) {
  if (dms.data_hash != static_uniform.data_hash) {
    throw ContractError("robustness sweep: models were trained on different data");
  }
  SweepTable table;
  const std::pair<const char*, const TrainState*> models[] = {{"dms", &dms},
                                                              {"static", &static_uniform}};
  for (const auto& [name, state] : models) {
    table.rows.push_back({name, evaluate(*state, data, std::nullopt, cfg, rng)});
  }
  for (const CorruptionSpec& spec : grid) {
    EvalReport a = evaluate(dms, data, spec, cfg, rng);
    EvalReport b = evaluate(static_uniform, data, spec, cfg, rng);
    table.deltas.push_back({spec, a.degradation, b.degradation, a.degradation - b.degradation});
    table.rows.push_back({"dms", std::move(a)});
    table.rows.push_back({"static", std::move(b)});
  }
  return table;
}

AblationTable ablation_run(const TrainConfig& base, const Dataset& data, std::size_t classes,
                           const CorruptionSpec& corruption, const RngStream& rng) {
  struct Variant {
    const char* name;
    double SchedulerConfig::*zeroed;
  };
  const Variant variants[] = {{"full", nullptr},
                              {"no_confidence", &SchedulerConfig::alpha},
                              {"no_uncertainty", &SchedulerConfig::beta},
                              {"no_alignment", &SchedulerConfig::gamma}};
  AblationTable table;
  table.corruption = corruption;
  for (const Variant& v : variants) {
    TrainConfig cfg = base;
    cfg.mode = FusionMode::DMS;
    if (v.zeroed != nullptr) cfg.scheduler.*(v.zeroed) = 0.0;
    TrainState state = train(data.train, classes, cfg);
    table.rows.push_back({v.name, cfg.scheduler, evaluate(state, data.test, corruption, cfg, rng)});
  }
  return table;
}

}  // namespace dms
