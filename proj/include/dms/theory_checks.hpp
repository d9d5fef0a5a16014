#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dms/matrix.hpp"
#include "dms/rng.hpp"

namespace dms {

struct BoundCheckResult {
  std::size_t trials = 0;
  std::size_t violations = 0;  // trials with observed > bound + tolerance
  double max_slack = 0.0;      // min over trials of (bound − observed)
  double tolerance = 0.0;
};

/// Result of the weighted-variance decomposition check. Besides the identity
/// that holds, records how far the variant with a minus sign on ‖h − f̄‖² misses.
struct DecompositionCheckResult {
  BoundCheckResult at_mean;       // Σω‖f̄ − f‖² = Σω‖f − f̄‖²
  BoundCheckResult off_mean;      // Σω‖h − f‖² = Σω‖f − f̄‖² + ‖h − f̄‖²
  double minus_form_max_residual = 0.0;  // |Σω‖h − f‖² − (Σω‖f − f̄‖² − ‖h − f̄‖²)|, max over trials
};

/// Inclusive range of modality counts drawn uniformly per trial.
struct ModalityRange {
  std::size_t min = 2;
  std::size_t max = 2;
};

/// ‖Σ(ω − ω*)f‖₂ and δ·Σ‖f‖₂ with δ = max|ω − ω*| for one instance.
/// `embeddings` is M × d; `weights` and `oracle` have length M.
struct BoundTerms {
  double lhs = 0.0;
  double rhs = 0.0;
};
BoundTerms fusion_bound_terms(const Matrix& embeddings, std::span<const double> weights,
                              std::span<const double> oracle);

/// Σ_m ω_m ‖h − f^(m)‖² for a fused point `h` (length d).
double weighted_spread(const Matrix& embeddings, std::span<const double> weights,
                       std::span<const double> h);

BoundCheckResult check_fusion_approximation_bound(std::size_t trials, ModalityRange m,
                                                  std::size_t d, const RngStream& rng,
                                                  double tolerance = 1e-9);

DecompositionCheckResult check_mwcl_decomposition(std::size_t trials, ModalityRange m,
                                                  std::size_t d, const RngStream& rng,
                                                  double tolerance = 1e-9);

}  // namespace dms
