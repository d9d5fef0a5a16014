#include "dms/tape.hpp"

#include <algorithm>
#include <cmath>

#include "dms/errors.hpp"

namespace dms {

namespace {

constexpr double kProbabilityFloor = 1e-12;

Tape& common_tape(Var a, Var b) {
  if (a.tape() == nullptr || a.tape() != b.tape()) {
    throw ContractError("operands recorded on different tapes");
  }
  return *a.tape();
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + " shape mismatch: " + a.shape_string() + " vs " +
                     b.shape_string());
  }
}

}  // namespace

const Matrix& Var::value() const {
  if (tape_ == nullptr) throw ContractError("use of an unbound Var");
  return tape_->value(*this);
}

Var Tape::leaf(Matrix value) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, Backward backward) {
  Node n;
  n.value = std::move(value);
  for (Var in : inputs) {
    if (in.tape() != this) throw ContractError("input recorded on a different tape");
    n.inputs.push_back(in.id());
    n.needs_grad = n.needs_grad || nodes_[in.id()].needs_grad;
  }
  if (n.needs_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

const Tape::Node& Tape::node(Var v) const {
  if (v.tape() != this || v.id() >= nodes_.size()) {
    throw ContractError("Var does not belong to this tape");
  }
  return nodes_[v.id()];
}

const Matrix& Tape::value(Var v) const { return node(v).value; }

bool Tape::needs_grad(Var v) const { return node(v).needs_grad; }

const Matrix& Tape::grad(Var v) const {
  const Node& n = node(v);
  if (n.grad.empty() && !n.value.empty()) {
    // unreached node
    n.grad = Matrix(n.value.rows(), n.value.cols());
  }
  return n.grad;
}

void Tape::backward(Var loss) {
  const Node& root = node(loss);
  if (root.value.rows() != 1 || root.value.cols() != 1) {
    throw ContractError("backward requires a scalar loss, got " + root.value.shape_string());
  }
  for (Node& n : nodes_) n.grad = Matrix();
  nodes_[loss.id()].grad = Matrix(1, 1, 1.0);

  std::vector<Matrix*> slots;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.empty()) continue;
    slots.clear();
    for (std::size_t in : n.inputs) {
      Node& src = nodes_[in];
      if (!src.needs_grad) {
        slots.push_back(nullptr);
        continue;
      }
      if (src.grad.empty()) src.grad = Matrix(src.value.rows(), src.value.cols());
      slots.push_back(&src.grad);
    }
    n.backward(n.value, n.grad, slots);
  }
}

namespace ad {

Var matmul(Var a, Var b) {
  Tape& t = common_tape(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  return t.record(dms::matmul(av, bv), {a, b},
                  [&av, &bv](const Matrix&, const Matrix& g, std::span<Matrix* const> in) {
                    if (in[0]) *in[0] += dms::matmul(g, transpose(bv));
                    if (in[1]) *in[1] += dms::matmul(transpose(av), g);
                  });
}

Var add(Var a, Var b) {
  Tape& t = common_tape(a, b);
  require_same_shape(a.value(), b.value(), "add");
  Matrix out = a.value();
  out += b.value();
  return t.record(std::move(out), {a, b}, [](const Matrix&, const Matrix& g, std::span<Matrix* const> in) {
    if (in[0]) *in[0] += g;
    if (in[1]) *in[1] += g;
  });
}

Var sub(Var a, Var b) {
  Tape& t = common_tape(a, b);
  require_same_shape(a.value(), b.value(), "sub");
  Matrix out = a.value();
  auto od = out.data();
  auto bd = b.value().data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] -= bd[i];
  return t.record(std::move(out), {a, b}, [](const Matrix&, const Matrix& g, std::span<Matrix* const> in) {
    if (in[0]) *in[0] += g;
    if (in[1]) {
      auto d = in[1]->data();
      auto gd = g.data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= gd[i];
    }
  });
}

Var mul(Var a, Var b) {
  Tape& t = common_tape(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  require_same_shape(av, bv, "mul");
  Matrix out = av;
  auto od = out.data();
  auto bd = bv.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] *= bd[i];
  return t.record(std::move(out), {a, b},
                  [&av, &bv](const Matrix&, const Matrix& g, std::span<Matrix* const> in) {
                    auto gd = g.data();
                    if (in[0]) {
                      auto d = in[0]->data();
                      auto src = bv.data();
                      for (std::size_t i = 0; i < d.size(); ++i) d[i] += gd[i] * src[i];
                    }
                    if (in[1]) {
                      auto d = in[1]->data();
                      auto src = av.data();
                      for (std::size_t i = 0; i < d.size(); ++i) d[i] += gd[i] * src[i];
                    }
                  });
}

Var add_row(Var a, Var bias) {
  Tape& t = common_tape(a, bias);
  const Matrix& av = a.value();
  const Matrix& bv = bias.value();
  if (bv.rows() != 1 || bv.cols() != av.cols()) {
    throw ShapeError("add_row expects a 1x" + std::to_string(av.cols()) + " bias, got " +
                     bv.shape_string());
  }
  Matrix out = av;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += bv(0, j);
  }
  return t.record(std::move(out), {a, bias}, [](const Matrix&, const Matrix& g, std::span<Matrix* const> in) {
    if (in[0]) *in[0] += g;
    if (in[1]) {
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) (*in[1])(0, j) += g(i, j);
    }
  });
}

Var relu(Var a) {
  const Matrix& av = a.value();
  return a.tape()->record(dms::relu(av), {a}, [&av](const Matrix&, const Matrix& g, std::span<Matrix* const> in) {
    auto d = in[0]->data();
    auto gd = g.data();
    auto x = av.data();
    for (std::size_t i = 0; i < d.size(); ++i)
      if (x[i] > 0.0) d[i] += gd[i];
  });
}

Var softmax_rows(Var a) {
  return a.tape()->record(dms::softmax_rows(a.value()), {a},
                          [](const Matrix& y, const Matrix& g, std::span<Matrix* const> in) {
                            for (std::size_t i = 0; i < g.rows(); ++i) {
                              auto yr = y.row(i);
                              auto gr = g.row(i);
                              const double inner = dot(yr, gr);
                              auto dr = in[0]->row(i);
                              for (std::size_t j = 0; j < yr.size(); ++j)
                                dr[j] += yr[j] * (gr[j] - inner);
                            }
                          });
}

Var mask(Var a, const Matrix& m) {
  require_same_shape(a.value(), m, "mask");
  Matrix out = a.value();
  auto od = out.data();
  auto md = m.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] *= md[i];
  return a.tape()->record(std::move(out), {a},
                          [m](const Matrix&, const Matrix& g, std::span<Matrix* const> in) {
                            auto d = in[0]->data();
                            auto gd = g.data();
                            auto mdata = m.data();
                            for (std::size_t i = 0; i < d.size(); ++i) d[i] += gd[i] * mdata[i];
                          });
}

Var scale_rows(Var a, const Matrix& scale) {
  const Matrix& av = a.value();
  if (scale.rows() != av.rows() || scale.cols() != 1) {
    throw ShapeError("scale_rows expects a " + std::to_string(av.rows()) + "x1 scale, got " +
                     scale.shape_string());
  }
  Matrix out = av;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (double& v : out.row(i)) v *= scale(i, 0);
  return a.tape()->record(std::move(out), {a},
                          [scale](const Matrix&, const Matrix& g, std::span<Matrix* const> in) {
                            for (std::size_t i = 0; i < g.rows(); ++i) {
                              auto dr = in[0]->row(i);
                              auto gr = g.row(i);
                              for (std::size_t j = 0; j < gr.size(); ++j)
                                dr[j] += gr[j] * scale(i, 0);
                            }
                          });
}

Var scale(Var a, double s) {
  Matrix out = a.value();
  out *= s;
  return a.tape()->record(std::move(out), {a},
                          [s](const Matrix&, const Matrix& g, std::span<Matrix* const> in) {
                            auto d = in[0]->data();
                            auto gd = g.data();
                            for (std::size_t i = 0; i < d.size(); ++i) d[i] += s * gd[i];
                          });
}

Var sum(Var a) {
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  return a.tape()->record(Matrix(1, 1, total), {a},
                          [](const Matrix&, const Matrix& g, std::span<Matrix* const> in) {
                            const double g0 = g(0, 0);
                            for (double& d : in[0]->data()) d += g0;
                          });
}

Var softmax_cross_entropy(Var logits, std::span<const int> labels) {
  const Matrix& z = logits.value();
  if (labels.size() != z.rows()) {
    throw ShapeError("cross entropy: " + std::to_string(labels.size()) + " labels for " +
                     z.shape_string() + " logits");
  }
  if (z.rows() == 0) throw ContractError("cross entropy over an empty batch");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= z.cols()) {
      throw ContractError("label " + std::to_string(y) + " outside [0, " +
                          std::to_string(z.cols()) + ")");
    }
  }
  Matrix p = dms::softmax_rows(z);
  const double n = static_cast<double>(z.rows());
  double loss = 0.0;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    loss -= std::log(std::max(p(i, static_cast<std::size_t>(labels[i])), kProbabilityFloor));
  }
  std::vector<int> ys(labels.begin(), labels.end());
  return logits.tape()->record(
      Matrix(1, 1, loss / n), {logits},
      [p = std::move(p), ys = std::move(ys), n](const Matrix&, const Matrix& g,
                                                std::span<Matrix* const> in) {
        const double g0 = g(0, 0) / n;
        for (std::size_t i = 0; i < p.rows(); ++i) {
          const auto y = static_cast<std::size_t>(ys[i]);
          // the floor clamps the loss flat, so its gradient vanishes there
          if (p(i, y) < kProbabilityFloor) continue;
          auto dr = in[0]->row(i);
          for (std::size_t j = 0; j < dr.size(); ++j) {
            dr[j] += g0 * (p(i, j) - (j == y ? 1.0 : 0.0));
          }
        }
      });
}

}  // namespace ad

}  // namespace dms
