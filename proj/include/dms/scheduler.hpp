#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dms/encoders.hpp"
#include "dms/matrix.hpp"
#include "dms/rng.hpp"

namespace dms {

struct SchedulerConfig {
  double alpha = 1.0;  // confidence gain
  double beta = 1.0;   // uncertainty penalty
  double gamma = 1.0;  // alignment gain
  std::size_t t_passes = 8;

  void validate() const;
  friend bool operator==(const SchedulerConfig&, const SchedulerConfig&) = default;
};

struct ModalityScore {
  double confidence = 0.0;   // [0, 1]
  double uncertainty = 0.0;  // [0, 0.25]
  double alignment = 0.0;    // [-1, 1]
};

/// Scores for n samples × M modalities.
class ModalityScores {
 public:
  ModalityScores() = default;
  ModalityScores(std::size_t samples, std::size_t modalities)
      : samples_(samples), modalities_(modalities), scores_(samples * modalities) {}

  [[nodiscard]] std::size_t samples() const noexcept { return samples_; }
  [[nodiscard]] std::size_t modalities() const noexcept { return modalities_; }
  ModalityScore& at(std::size_t i, std::size_t m) { return scores_[i * modalities_ + m]; }
  [[nodiscard]] const ModalityScore& at(std::size_t i, std::size_t m) const {
    return scores_[i * modalities_ + m];
  }
  [[nodiscard]] std::span<const ModalityScore> sample(std::size_t i) const {
    return {scores_.data() + i * modalities_, modalities_};
  }

 private:
  std::size_t samples_ = 0;
  std::size_t modalities_ = 0;
  std::vector<ModalityScore> scores_;
};

/// c = 1 − H(p)/ln K, natural-log entropy with 0·ln 0 = 0.
double confidence_score(std::span<const double> p);

/// Mean over classes of the population variance across passes (rows of a T × K matrix).
double uncertainty_score(const Matrix& passes);

/// Cosine between `f` and the mean of `others`; 0 when either norm is below 1e-12.
double alignment_score(std::span<const double> f,
                       std::span<const std::span<const double>> others);

/// Softmax over q_m = α·c_m − β·u_m + γ·s_m.
std::vector<double> fuse_weights(std::span<const ModalityScore> scores,
                                 const SchedulerConfig& cfg);

struct ScheduleResult {
  std::vector<Matrix> embeddings;     // per modality, n × d
  std::vector<Matrix> probabilities;  // per modality, n × K
  ModalityScores scores;
  Matrix weights;  // n × M, rows on the simplex
};

/// Scores modalities whose deterministic embeddings are already known.
///
/// MC pass t for sample `ids[r]` uses dropout stream mc.derive(t).derive(ids[r]).
ScheduleResult score_and_weigh(std::span<const EncoderParams> encoders,
                               std::span<const Matrix> inputs, std::vector<Matrix> embeddings,
                               std::span<const std::size_t> ids, const SchedulerConfig& cfg,
                               const RngStream& mc);

/// Deterministic encode of every modality followed by score_and_weigh.
ScheduleResult schedule(std::span<const EncoderParams> encoders, std::span<const Matrix> inputs,
                        std::span<const std::size_t> ids, const SchedulerConfig& cfg,
                        const RngStream& mc);

}  // namespace dms
