#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dms/data.hpp"
#include "dms/encoders.hpp"
#include "dms/fusion.hpp"
#include "dms/scheduler.hpp"

namespace dms {

enum class FusionMode { DMS, StaticUniform };

std::string to_string(FusionMode mode);
FusionMode parse_fusion_mode(std::string_view name);

struct ModelConfig {
  std::size_t hidden = 32;
  std::size_t embed_dim = 16;
  double dropout = 0.2;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double learning_rate = 0.05;
  double lambda = 0.1;
  SchedulerConfig scheduler;
  ModelConfig model;
  std::uint64_t seed = 7;
  FusionMode mode = FusionMode::DMS;
  /// Off by default: corruption normally hits evaluation only.
  std::optional<CorruptionSpec> train_corruption;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct TrainState {
  std::vector<EncoderParams> encoders;
  FusionHeadParams head;
  FusionMode mode = FusionMode::DMS;
  std::size_t epoch = 0;
  std::vector<LossBreakdown> history;  // one entry per completed epoch
  std::uint64_t data_hash = 0;         // hash of the training batch

  friend bool operator==(const TrainState&, const TrainState&) = default;
};

TrainState init_state(const ModelConfig& model, std::span<const std::size_t> dims,
                      std::size_t classes, FusionMode mode, std::uint64_t seed);

/// Uniform 1/M weights for every sample.
Matrix uniform_weights(std::size_t samples, std::size_t modalities);

/// Tape nodes of one forward pass through encoders, fusion and both losses.
struct LossGraph {
  std::vector<Var> embeddings;
  Var h;
  Var task;
  Var mwcl;
  Var total;
};

/// Builds the objective for fixed fusion weights (the scheduler output is a constant).
LossGraph build_loss(std::span<const EncoderBinding> encoders, const FusionHeadBinding& head,
                     const Batch& batch, const Matrix& weights, double lambda);

/// Per-minibatch callback: global step index and the step's losses.
using StepLogger = std::function<void(std::size_t step, const LossBreakdown& loss)>;

/// One pass over `data` in shuffled minibatches of SGD.
///
/// Each step schedules weights from a deterministic encoder pass (uniform
/// weights in StaticUniform mode), minimizes task + λ·mwcl w.r.t. encoders and
/// the fusion head, and fits each modality's own head by cross-entropy on the
/// detached embeddings.
TrainState train_epoch(TrainState state, const Batch& data, const TrainConfig& cfg,
                       const RngStream& rng, const StepLogger& log = {});

/// init_state followed by cfg.epochs calls to train_epoch.
TrainState train(const Batch& data, std::size_t classes, const TrainConfig& cfg,
                 const StepLogger& log = {});

struct EvalReport {
  std::size_t samples = 0;
  double accuracy = 0.0;        // fraction
  double clean_accuracy = 0.0;  // fraction, same model without corruption
  double degradation = 0.0;     // percent, 100·(acc − clean)/clean
  std::vector<double> mean_weights;
  std::vector<ModalityScore> mean_scores;
  LossBreakdown loss;
  std::optional<CorruptionSpec> corruption;
  // per-sample detail for weight dumps
  Matrix weights;
  ModalityScores scores;
  std::vector<int> predictions;
};

/// Evaluates clean and, if `spec` is given, corrupted accuracy. Corruption
/// noise comes from rng.derive(1) and does not depend on the spec's severity.
EvalReport evaluate(const TrainState& state, const Batch& data,
                    const std::optional<CorruptionSpec>& spec, const TrainConfig& cfg,
                    const RngStream& rng);

struct SweepRow {
  std::string model;  // "dms" or "static"
  EvalReport report;
};

struct PairedDelta {
  CorruptionSpec spec;
  double dms_degradation = 0.0;
  double static_degradation = 0.0;
  double delta = 0.0;  // dms − static; positive means DMS lost less accuracy
};

struct SweepTable {
  std::vector<SweepRow> rows;
  std::vector<PairedDelta> deltas;

  /// Mean degradation over the grid points of one corruption kind.
  [[nodiscard]] double mean_degradation(const std::string& model, CorruptionKind kind) const;
};

SweepTable robustness_sweep(const TrainState& dms, const TrainState& static_uniform,
                            const Batch& data, std::span<const CorruptionSpec> grid,
                            const TrainConfig& cfg, const RngStream& rng);

struct AblationRow {
  std::string variant;
  SchedulerConfig scheduler;
  EvalReport report;
};

struct AblationTable {
  CorruptionSpec corruption;
  std::vector<AblationRow> rows;  // full, no_confidence, no_uncertainty, no_alignment
};

/// Trains and evaluates full DMS plus the three single-factor removals.
AblationTable ablation_run(const TrainConfig& base, const Dataset& data, std::size_t classes,
                           const CorruptionSpec& corruption, const RngStream& rng);

}  // namespace dms
