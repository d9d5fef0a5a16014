#include "dms/encoders.hpp"

#include <cmath>
#include <string>

#include "dms/errors.hpp"

namespace dms {

void EncoderConfig::validate() const {
  if (input_dim < 1 || hidden < 1 || embed_dim < 1 || classes < 1) {
    throw ParameterError("encoder layer sizes must all be >= 1");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw ParameterError("encoder dropout must lie in [0, 1), got " + std::to_string(dropout));
  }
}

namespace {

Matrix uniform_weights(std::size_t fan_in, std::size_t fan_out, RngStream& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Matrix w(fan_in, fan_out);
  for (double& v : w.data()) v = rng.uniform(-bound, bound);
  return w;
}

}  // namespace

EncoderParams init_params(std::size_t modality, const EncoderConfig& cfg, const RngStream& rng) {
  cfg.validate();
  RngStream stream = rng;
  EncoderParams p;
  p.modality = modality;
  p.dropout = cfg.dropout;
  p.w1 = uniform_weights(cfg.input_dim, cfg.hidden, stream);
  p.b1 = Matrix(1, cfg.hidden);
  p.w2 = uniform_weights(cfg.hidden, cfg.embed_dim, stream);
  p.b2 = Matrix(1, cfg.embed_dim);
  p.head_w = uniform_weights(cfg.embed_dim, cfg.classes, stream);
  p.head_b = Matrix(1, cfg.classes);
  return p;
}

EncoderBinding bind(Tape& tape, const EncoderParams& params, bool trainable) {
  auto reg = [&](const Matrix& m) { return trainable ? tape.leaf(m) : tape.constant(m); };
  EncoderBinding b;
  b.params = &params;
  b.w1 = reg(params.w1);
  b.b1 = reg(params.b1);
  b.w2 = reg(params.w2);
  b.b2 = reg(params.b2);
  b.head_w = reg(params.head_w);
  b.head_b = reg(params.head_b);
  return b;
}

Var encode(const EncoderBinding& enc, Var x, ForwardMode mode, const DropoutStreams* streams) {
  const EncoderParams& p = *enc.params;
  if (x.cols() != p.input_dim()) {
    throw ShapeError("modality " + std::to_string(p.modality) + " encoder expects width " +
                     std::to_string(p.input_dim()) + ", got " + x.value().shape_string());
  }
  Var hidden = ad::relu(ad::add_row(ad::matmul(x, enc.w1), enc.b1));
  if (mode == ForwardMode::Stochastic && p.dropout > 0.0) {
    if (streams == nullptr) throw ContractError("stochastic encode requires dropout streams");
    Matrix m(hidden.rows(), hidden.cols());
    for (std::size_t r = 0; r < m.rows(); ++r) {
      Matrix row = dropout_mask(1, m.cols(), p.dropout, streams->for_row(r));
      std::copy(row.data().begin(), row.data().end(), m.row(r).begin());
    }
    hidden = ad::mask(hidden, m);
  }
  return ad::add_row(ad::matmul(hidden, enc.w2), enc.b2);
}

Var head_logits(const EncoderBinding& enc, Var embedding) {
  const EncoderParams& p = *enc.params;
  if (embedding.cols() != p.embed_dim()) {
    throw ShapeError("modality " + std::to_string(p.modality) + " head expects width " +
                     std::to_string(p.embed_dim()) + ", got " +
                     embedding.value().shape_string());
  }
  return ad::add_row(ad::matmul(embedding, enc.head_w), enc.head_b);
}

Var classify(const EncoderBinding& enc, Var embedding) {
  return ad::softmax_rows(head_logits(enc, embedding));
}

Matrix encode(const EncoderParams& params, const Matrix& x, ForwardMode mode,
              const DropoutStreams* streams) {
  Tape tape;
  EncoderBinding enc = bind(tape, params, false);
  return encode(enc, tape.constant(x), mode, streams).value();
}

Matrix classify(const EncoderParams& params, const Matrix& embedding) {
  Tape tape;
  EncoderBinding enc = bind(tape, params, false);
  return classify(enc, tape.constant(embedding)).value();
}

}  // namespace dms
