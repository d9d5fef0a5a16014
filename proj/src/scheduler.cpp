#include "dms/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dms/errors.hpp"

namespace dms {

namespace {

constexpr double kSimplexTolerance = 1e-6;
constexpr double kZeroNorm = 1e-12;

}  // namespace

void SchedulerConfig::validate() const {
  auto check = [](double v, const char* name) {
    if (!std::isfinite(v) || v < 0.0) {
      throw ParameterError(std::string("scheduler.") + name + " must be finite and >= 0, got " +
                           std::to_string(v));
    }
  };
  check(alpha, "alpha");
  check(beta, "beta");
  check(gamma, "gamma");
  if (t_passes < 1) throw ParameterError("scheduler.t_passes must be >= 1");
}

double confidence_score(std::span<const double> p) {
  const std::size_t k = p.size();
  if (k < 2) throw ContractError("confidence needs at least two classes");
  double total = 0.0;
  double entropy = 0.0;
  for (double v : p) {
    if (!(v >= -kSimplexTolerance && v <= 1.0 + kSimplexTolerance)) {
      throw ContractError("probability entry " + std::to_string(v) + " outside [0, 1]");
    }
    total += v;
    if (v > 0.0) entropy -= v * std::log(v);
  }
  if (std::abs(total - 1.0) > kSimplexTolerance) {
    throw ContractError("probability row sums to " + std::to_string(total));
  }
  const double c = 1.0 - entropy / std::log(static_cast<double>(k));
  return std::clamp(c, 0.0, 1.0);
}

double uncertainty_score(const Matrix& passes) {
  const std::size_t t = passes.rows();
  const std::size_t k = passes.cols();
  if (t == 0) throw ContractError("uncertainty needs at least one pass");
  if (k == 0) throw ContractError("uncertainty needs at least one class");
  double acc = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < t; ++r) mean += passes(r, c);
    mean /= static_cast<double>(t);
    double var = 0.0;
    for (std::size_t r = 0; r < t; ++r) {
      const double dev = passes(r, c) - mean;
      var += dev * dev;
    }
    acc += var / static_cast<double>(t);
  }
  return acc / static_cast<double>(k);
}

double alignment_score(std::span<const double> f,
                       std::span<const std::span<const double>> others) {
  if (others.empty()) throw ContractError("alignment needs at least one other modality");
  std::vector<double> mean(f.size(), 0.0);
  for (auto o : others) {
    if (o.size() != f.size()) {
      throw ShapeError("alignment dimension mismatch: " + std::to_string(f.size()) + " vs " +
                       std::to_string(o.size()));
    }
    for (std::size_t j = 0; j < f.size(); ++j) mean[j] += o[j];
  }
  for (double& v : mean) v /= static_cast<double>(others.size());
  const double nf = norm2(f);
  const double nm = norm2(mean);
  if (nf < kZeroNorm || nm < kZeroNorm) return 0.0;
  return std::clamp(dot(f, mean) / (nf * nm), -1.0, 1.0);
}

std::vector<double> fuse_weights(std::span<const ModalityScore> scores,
                                 const SchedulerConfig& cfg) {
  Matrix q(1, scores.size());
  for (std::size_t m = 0; m < scores.size(); ++m) {
    const ModalityScore& s = scores[m];
    q(0, m) = cfg.alpha * s.confidence - cfg.beta * s.uncertainty + cfg.gamma * s.alignment;
  }
  Matrix w = softmax_rows(q);
  return {w.data().begin(), w.data().end()};
}

ScheduleResult score_and_weigh(std::span<const EncoderParams> encoders,
                               std::span<const Matrix> inputs, std::vector<Matrix> embeddings,
                               std::span<const std::size_t> ids, const SchedulerConfig& cfg,
                               const RngStream& mc) {
  const std::size_t modalities = encoders.size();
  if (modalities < 2) throw ContractError("scheduling needs at least two modalities");
  if (inputs.size() != modalities || embeddings.size() != modalities) {
    throw ShapeError("schedule: " + std::to_string(encoders.size()) + " encoders, " +
                     std::to_string(inputs.size()) + " inputs, " +
                     std::to_string(embeddings.size()) + " embeddings");
  }
  const std::size_t n = inputs[0].rows();
  if (n == 0) throw ContractError("schedule on an empty batch");
  if (!ids.empty() && ids.size() != n) throw ShapeError("schedule: sample id count mismatch");
  cfg.validate();

  ScheduleResult out;
  out.scores = ModalityScores(n, modalities);
  out.weights = Matrix(n, modalities);

  for (std::size_t m = 0; m < modalities; ++m) {
    if (inputs[m].rows() != n || embeddings[m].rows() != n) {
      throw ShapeError("schedule: modality " + std::to_string(m) + " has a different batch size");
    }
    out.probabilities.push_back(classify(encoders[m], embeddings[m]));

    std::vector<Matrix> passes;
    passes.reserve(cfg.t_passes);
    for (std::size_t t = 0; t < cfg.t_passes; ++t) {
      DropoutStreams streams{mc.derive(t), ids};
      Matrix emb = encode(encoders[m], inputs[m], ForwardMode::Stochastic, &streams);
      passes.push_back(classify(encoders[m], emb));
    }
    const std::size_t k = encoders[m].classes();
    Matrix per_sample(cfg.t_passes, k);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t t = 0; t < cfg.t_passes; ++t) {
        std::copy_n(passes[t].row(i).begin(), k, per_sample.row(t).begin());
      }
      ModalityScore& s = out.scores.at(i, m);
      s.confidence = confidence_score(out.probabilities[m].row(i));
      s.uncertainty = uncertainty_score(per_sample);
    }
  }

  std::vector<std::span<const double>> others;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t m = 0; m < modalities; ++m) {
      others.clear();
      for (std::size_t j = 0; j < modalities; ++j)
        if (j != m) others.push_back(embeddings[j].row(i));
      out.scores.at(i, m).alignment = alignment_score(embeddings[m].row(i), others);
    }
    std::vector<double> w = fuse_weights(out.scores.sample(i), cfg);
    std::copy(w.begin(), w.end(), out.weights.row(i).begin());
  }
  out.embeddings = std::move(embeddings);
  return out;
}

ScheduleResult schedule(std::span<const EncoderParams> encoders, std::span<const Matrix> inputs,
                        std::span<const std::size_t> ids, const SchedulerConfig& cfg,
                        const RngStream& mc) {
  if (inputs.size() != encoders.size()) {
    throw ShapeError("schedule: " + std::to_string(encoders.size()) + " encoders but " +
                     std::to_string(inputs.size()) + " inputs");
  }
  std::vector<Matrix> embeddings;
  embeddings.reserve(encoders.size());
  for (std::size_t m = 0; m < encoders.size(); ++m) {
    embeddings.push_back(encode(encoders[m], inputs[m], ForwardMode::Deterministic));
  }
  return score_and_weigh(encoders, inputs, std::move(embeddings), ids, cfg, mc);
}

}  // namespace dms
