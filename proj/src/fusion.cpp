#include "dms/fusion.hpp"

#include <cmath>
#include <string>

#include "dms/errors.hpp"

namespace dms {

namespace {

void check_fusion_shapes(std::span<const Matrix* const> embeddings, const Matrix& weights) {
  if (embeddings.empty()) throw ShapeError("fusion needs at least one modality");
  const std::size_t n = embeddings[0]->rows();
  const std::size_t d = embeddings[0]->cols();
  if (weights.rows() != n || weights.cols() != embeddings.size()) {
    throw ShapeError("fusion weights " + weights.shape_string() + " do not match " +
                     std::to_string(n) + " samples x " + std::to_string(embeddings.size()) +
                     " modalities");
  }
  for (const Matrix* e : embeddings) {
    if (e->rows() != n || e->cols() != d) {
      throw ShapeError("fusion embedding " + e->shape_string() + " differs from " +
                       embeddings[0]->shape_string());
    }
  }
}

std::vector<const Matrix*> values_of(std::span<const Var> vars) {
  std::vector<const Matrix*> out;
  for (Var v : vars) out.push_back(&v.value());
  return out;
}

Matrix weight_column(const Matrix& weights, std::size_t m) {
  Matrix col(weights.rows(), 1);
  for (std::size_t i = 0; i < weights.rows(); ++i) col(i, 0) = weights(i, m);
  return col;
}

}  // namespace

FusionHeadParams init_fusion_head(std::size_t embed_dim, std::size_t classes,
                                  const RngStream& rng) {
  if (embed_dim < 1 || classes < 1) throw ParameterError("fusion head sizes must be >= 1");
  RngStream stream = rng;
  const double bound = 1.0 / std::sqrt(static_cast<double>(embed_dim));
  FusionHeadParams head{Matrix(embed_dim, classes), Matrix(1, classes)};
  for (double& v : head.w.data()) v = stream.uniform(-bound, bound);
  return head;
}

FusionHeadBinding bind(Tape& tape, const FusionHeadParams& head, bool trainable) {
  if (trainable) return {tape.leaf(head.w), tape.leaf(head.b)};
  return {tape.constant(head.w), tape.constant(head.b)};
}

Var fuse_representations(std::span<const Var> embeddings, const Matrix& weights) {
  check_fusion_shapes(values_of(embeddings), weights);
  Var h = ad::scale_rows(embeddings[0], weight_column(weights, 0));
  for (std::size_t m = 1; m < embeddings.size(); ++m) {
    h = ad::add(h, ad::scale_rows(embeddings[m], weight_column(weights, m)));
  }
  return h;
}

Matrix fuse_representations(std::span<const Matrix> embeddings, const Matrix& weights) {
  Tape tape;
  std::vector<Var> vars;
  for (const Matrix& e : embeddings) vars.push_back(tape.constant(e));
  return fuse_representations(vars, weights).value();
}

Var fused_logits(const FusionHeadBinding& head, Var h) {
  if (h.cols() != head.w.rows()) {
    throw ShapeError("fusion head expects width " + std::to_string(head.w.rows()) + ", got " +
                     h.value().shape_string());
  }
  return ad::add_row(ad::matmul(h, head.w), head.b);
}

Var task_loss(const FusionHeadBinding& head, Var h, std::span<const int> labels) {
  return ad::softmax_cross_entropy(fused_logits(head, h), labels);
}

double task_loss(const FusionHeadParams& head, const Matrix& h, std::span<const int> labels) {
  Tape tape;
  return task_loss(bind(tape, head, false), tape.constant(h), labels).value()(0, 0);
}

Var mwcl_loss(Var h, std::span<const Var> embeddings, const Matrix& weights) {
  check_fusion_shapes(values_of(embeddings), weights);
  if (!h.value().same_shape(embeddings[0].value())) {
    throw ShapeError("mwcl: fused " + h.value().shape_string() + " vs embedding " +
                     embeddings[0].value().shape_string());
  }
  Var acc;
  for (std::size_t m = 0; m < embeddings.size(); ++m) {
    Var diff = ad::sub(h, embeddings[m]);
    Var term = ad::scale_rows(ad::mul(diff, diff), weight_column(weights, m));
    acc = m == 0 ? term : ad::add(acc, term);
  }
  return ad::scale(ad::sum(acc), 1.0 / static_cast<double>(h.rows()));
}

double mwcl_loss(const Matrix& h, std::span<const Matrix> embeddings, const Matrix& weights) {
  Tape tape;
  std::vector<Var> vars;
  for (const Matrix& e : embeddings) vars.push_back(tape.constant(e));
  return mwcl_loss(tape.constant(h), vars, weights).value()(0, 0);
}

Var total_loss(Var task, Var mwcl, double lambda) {
  if (!(lambda >= 0.0)) throw ParameterError("lambda must be >= 0");
  return ad::add(task, ad::scale(mwcl, lambda));
}

LossBreakdown total_loss(double task, double mwcl, double lambda) {
  if (!(lambda >= 0.0)) {
    throw ParameterError("lambda must be >= 0, got " + std::to_string(lambda));
  }
  return {task, mwcl, task + lambda * mwcl, lambda};
}

}  // namespace dms
