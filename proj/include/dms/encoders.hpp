#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "dms/matrix.hpp"
#include "dms/rng.hpp"
#include "dms/tape.hpp"

namespace dms {

struct EncoderConfig {
  std::size_t input_dim = 1;
  std::size_t hidden = 32;
  std::size_t embed_dim = 16;
  std::size_t classes = 3;
  double dropout = 0.2;

  void validate() const;
};

/// One-hidden-layer MLP input → hidden → embedding, plus a linear head
/// embedding → classes whose softmax is the modality's own prediction.
struct EncoderParams {
  std::size_t modality = 0;
  double dropout = 0.0;
  Matrix w1, b1;  // input × hidden, 1 × hidden
  Matrix w2, b2;  // hidden × embed, 1 × embed
  Matrix head_w, head_b;  // embed × classes, 1 × classes

  [[nodiscard]] std::size_t input_dim() const { return w1.rows(); }
  [[nodiscard]] std::size_t hidden() const { return w1.cols(); }
  [[nodiscard]] std::size_t embed_dim() const { return w2.cols(); }
  [[nodiscard]] std::size_t classes() const { return head_w.cols(); }

  friend bool operator==(const EncoderParams&, const EncoderParams&) = default;
};

enum class ForwardMode { Deterministic, Stochastic };

/// Weights uniform in ±1/sqrt(fan_in), biases zero.
EncoderParams init_params(std::size_t modality, const EncoderConfig& cfg, const RngStream& rng);

/// Dropout stream source for a Stochastic pass. Row r of the batch draws its
/// mask from base.derive(row_ids[r]) (or base.derive(r) when row_ids is empty),
/// so a sample's mask does not depend on how the batch was assembled.
struct DropoutStreams {
  RngStream base;
  std::span<const std::size_t> row_ids = {};

  [[nodiscard]] RngStream for_row(std::size_t r) const {
    return base.derive(row_ids.empty() ? r : row_ids[r]);
  }
};

/// Encoder parameters registered on a tape.
struct EncoderBinding {
  const EncoderParams* params = nullptr;
  Var w1, b1, w2, b2, head_w, head_b;
};

/// Registers the encoder weights as leaves (`trainable`) or constants.
EncoderBinding bind(Tape& tape, const EncoderParams& params, bool trainable = true);

/// relu(x·W1 + b1) [dropout] · W2 + b2; dropout only in Stochastic mode.
Var encode(const EncoderBinding& enc, Var x, ForwardMode mode, const DropoutStreams* streams);
/// Head logits for embeddings (no softmax).
Var head_logits(const EncoderBinding& enc, Var embedding);
Var classify(const EncoderBinding& enc, Var embedding);

Matrix encode(const EncoderParams& params, const Matrix& x, ForwardMode mode,
              const DropoutStreams* streams = nullptr);
Matrix classify(const EncoderParams& params, const Matrix& embedding);

}  // namespace dms
