#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dms/matrix.hpp"
#include "dms/rng.hpp"
#include "dms/tape.hpp"

namespace dms {

/// Linear task head over the fused representation.
struct FusionHeadParams {
  Matrix w;  // embed × classes
  Matrix b;  // 1 × classes

  friend bool operator==(const FusionHeadParams&, const FusionHeadParams&) = default;
};

FusionHeadParams init_fusion_head(std::size_t embed_dim, std::size_t classes,
                                  const RngStream& rng);

struct FusionHeadBinding {
  Var w, b;
};

FusionHeadBinding bind(Tape& tape, const FusionHeadParams& head, bool trainable = true);

struct LossBreakdown {
  double task = 0.0;
  double mwcl = 0.0;
  double total = 0.0;
  double lambda = 0.0;

  friend bool operator==(const LossBreakdown&, const LossBreakdown&) = default;
};

/// h_i = Σ_m weights(i, m) · f^(m)_i. Weights are constants (no gradient).
Var fuse_representations(std::span<const Var> embeddings, const Matrix& weights);
Matrix fuse_representations(std::span<const Matrix> embeddings, const Matrix& weights);

Var fused_logits(const FusionHeadBinding& head, Var h);

/// Mean cross-entropy of the head's softmax against `labels` (0-based).
Var task_loss(const FusionHeadBinding& head, Var h, std::span<const int> labels);
double task_loss(const FusionHeadParams& head, const Matrix& h, std::span<const int> labels);

/// Mean over the batch of Σ_m ω_m ‖h − f^(m)‖².
Var mwcl_loss(Var h, std::span<const Var> embeddings, const Matrix& weights);
double mwcl_loss(const Matrix& h, std::span<const Matrix> embeddings, const Matrix& weights);

/// task + λ·mwcl on the tape.
Var total_loss(Var task, Var mwcl, double lambda);
LossBreakdown total_loss(double task, double mwcl, double lambda);

}  // namespace dms
