#include "dms/theory_checks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dms/errors.hpp"
#include "dms/fusion.hpp"

namespace dms {

namespace {

void validate(std::size_t trials, ModalityRange m, std::size_t d) {
  if (trials < 1) throw ParameterError("trials must be >= 1");
  if (m.min < 2 || m.max < m.min) throw ParameterError("modality range must satisfy 2 <= min <= max");
  if (d < 1) throw ParameterError("embedding dimension must be >= 1");
}

// Dirichlet(1, ..., 1) sample: normalized exponential draws.
std::vector<double> random_simplex(std::size_t m, RngStream& rng) {
  std::vector<double> w(m);
  double total = 0.0;
  for (double& v : w) {
    v = -std::log(1.0 - rng.uniform());
    total += v;
  }
  for (double& v : w) v /= total;
  return w;
}

Matrix random_embeddings(std::size_t m, std::size_t d, RngStream& rng) {
  Matrix f(m, d);
  for (double& v : f.data()) v = rng.normal();
  return f;
}

std::vector<double> weighted_mean(const Matrix& f, std::span<const double> w) {
  std::vector<double> out(f.cols(), 0.0);
  for (std::size_t m = 0; m < f.rows(); ++m)
    for (std::size_t j = 0; j < f.cols(); ++j) out[j] += w[m] * f(m, j);
  return out;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return s;
}

std::size_t draw_modalities(ModalityRange m, RngStream& rng) {
  return m.min + static_cast<std::size_t>(rng.below(m.max - m.min + 1));
}

void record(BoundCheckResult& r, double bound, double observed) {
  const double slack = bound - observed;
  r.max_slack = std::min(r.max_slack, slack);
  if (observed > bound + r.tolerance) ++r.violations;
}

void record_identity(BoundCheckResult& r, double lhs, double rhs) {
  const double gap = std::abs(lhs - rhs);
  // identity checks report slack as tolerance minus the residual
  r.max_slack = std::min(r.max_slack, r.tolerance - gap);
  if (gap > r.tolerance) ++r.violations;
}

}  // namespace

BoundTerms fusion_bound_terms(const Matrix& embeddings, std::span<const double> weights,
                              std::span<const double> oracle) {
  if (weights.size() != embeddings.rows() || oracle.size() != embeddings.rows()) {
    throw ShapeError("bound check: weight lengths do not match " + embeddings.shape_string());
  }
  const std::vector<double> h = weighted_mean(embeddings, weights);
  const std::vector<double> h_star = weighted_mean(embeddings, oracle);
  double delta = 0.0;
  double norm_sum = 0.0;
  for (std::size_t m = 0; m < embeddings.rows(); ++m) {
    delta = std::max(delta, std::abs(weights[m] - oracle[m]));
    norm_sum += norm2(embeddings.row(m));
  }
  return {std::sqrt(squared_distance(h, h_star)), delta * norm_sum};
}

double weighted_spread(const Matrix& embeddings, std::span<const double> weights,
                       std::span<const double> h) {
  if (weights.size() != embeddings.rows() || h.size() != embeddings.cols()) {
    throw ShapeError("weighted spread: shapes do not match " + embeddings.shape_string());
  }
  double s = 0.0;
  for (std::size_t m = 0; m < embeddings.rows(); ++m) {
    s += weights[m] * squared_distance(h, embeddings.row(m));
  }
  return s;
}

BoundCheckResult check_fusion_approximation_bound(std::size_t trials, ModalityRange m,
                                                  std::size_t d, const RngStream& rng,
                                                  double tolerance) {
  validate(trials, m, d);
  BoundCheckResult r;
  r.trials = trials;
  r.tolerance = tolerance;
  r.max_slack = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < trials; ++t) {
    RngStream stream = rng.derive(t);
    const std::size_t modalities = draw_modalities(m, stream);
    const Matrix f = random_embeddings(modalities, d, stream);
    const std::vector<double> w = random_simplex(modalities, stream);
    const std::vector<double> w_star = random_simplex(modalities, stream);
    const BoundTerms terms = fusion_bound_terms(f, w, w_star);
    record(r, terms.rhs, terms.lhs);
  }
  return r;
}

DecompositionCheckResult check_mwcl_decomposition(std::size_t trials, ModalityRange m,
                                                  std::size_t d, const RngStream& rng,
                                                  double tolerance) {
  validate(trials, m, d);
  DecompositionCheckResult r;
  for (BoundCheckResult* part : {&r.at_mean, &r.off_mean}) {
    part->trials = trials;
    part->tolerance = tolerance;
    part->max_slack = std::numeric_limits<double>::infinity();
  }
  for (std::size_t t = 0; t < trials; ++t) {
    RngStream stream = rng.derive(t);
    const std::size_t modalities = draw_modalities(m, stream);
    const Matrix f = random_embeddings(modalities, d, stream);
    const std::vector<double> w = random_simplex(modalities, stream);
    const std::vector<double> mean = weighted_mean(f, w);
    // second-moment route: Σω‖f‖² − ‖f̄‖²
    double variance = -dot(mean, mean);
    for (std::size_t k = 0; k < modalities; ++k) variance += w[k] * dot(f.row(k), f.row(k));

    // h from the fusion module, loss from the training objective's MWCL
    std::vector<Matrix> rows;
    for (std::size_t k = 0; k < modalities; ++k) {
      rows.emplace_back(1, d, std::vector<double>(f.row(k).begin(), f.row(k).end()));
    }
    const Matrix weights(1, modalities, w);
    const Matrix fused = fuse_representations(rows, weights);
    record_identity(r.at_mean, mwcl_loss(fused, rows, weights), variance);

    std::vector<double> h(d);
    for (double& v : h) v = stream.normal();
    const double spread = weighted_spread(f, w, h);
    const double offset = squared_distance(h, mean);
    record_identity(r.off_mean, spread, variance + offset);
    r.minus_form_max_residual =
        std::max(r.minus_form_max_residual, std::abs(spread - (variance - offset)));
  }
  return r;
}

}  // namespace dms
