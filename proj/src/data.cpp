#include "dms/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "dms/errors.hpp"

namespace dms {

void DatasetConfig::validate() const {
  if (n_classes < 2) throw ParameterError("data.n_classes must be >= 2");
  if (dims.size() < 2) throw ParameterError("data.dims must list at least two modalities");
  for (std::size_t d : dims)
    if (d < 1) throw ParameterError("data.dims entries must be >= 1");
  if (noise_sigma.size() != dims.size()) {
    throw ParameterError("data.noise_sigma must have one entry per modality");
  }
  for (double s : noise_sigma)
    if (!(s >= 0.0) || !std::isfinite(s)) throw ParameterError("data.noise_sigma must be >= 0");
  if (!(prototype_scale > 0.0) || !std::isfinite(prototype_scale)) {
    throw ParameterError("data.prototype_scale must be > 0");
  }
  if (n_samples < 5) throw ParameterError("data.n_samples must be >= 5 for an 80/20 split");
}

void CorruptionSpec::validate() const {
  if (!(severity >= 0.0) || !std::isfinite(severity)) {
    throw ParameterError("corruption severity must be finite and >= 0");
  }
  if (kind == CorruptionKind::Mask && severity > 1.0) {
    throw ParameterError("mask fraction must lie in [0, 1]");
  }
}

std::string to_string(CorruptionKind kind) {
  switch (kind) {
    case CorruptionKind::Gaussian: return "gaussian";
    case CorruptionKind::Mask: return "mask";
    case CorruptionKind::Drop: return "drop";
  }
  return "unknown";
}

CorruptionKind parse_corruption_kind(std::string_view name) {
  if (name == "gaussian") return CorruptionKind::Gaussian;
  if (name == "mask") return CorruptionKind::Mask;
  if (name == "drop") return CorruptionKind::Drop;
  throw ParameterError("unknown corruption kind '" + std::string(name) + "'");
}

std::string to_string(ModalityState::Kind kind) {
  switch (kind) {
    case ModalityState::Kind::Clean: return "clean";
    case ModalityState::Kind::Gaussian: return "gaussian";
    case ModalityState::Kind::Masked: return "masked";
    case ModalityState::Kind::Dropped: return "dropped";
  }
  return "unknown";
}

Batch Batch::select(std::span<const std::size_t> rows) const {
  Batch out;
  out.state = state;
  for (const Matrix& x : modalities) {
    Matrix sub(rows.size(), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::copy_n(x.row(rows[i]).begin(), x.cols(), sub.row(i).begin());
    }
    out.modalities.push_back(std::move(sub));
  }
  for (std::size_t r : rows) {
    out.labels.push_back(labels[r]);
    out.ids.push_back(ids[r]);
  }
  return out;
}

std::uint64_t Batch::content_hash() const {
  auto bytes = [](const auto* p, std::size_t n) {
    return std::string_view(reinterpret_cast<const char*>(p), n);
  };
  std::uint64_t h = fnv1a64(bytes(labels.data(), labels.size() * sizeof(int)));
  h = fnv1a64(bytes(ids.data(), ids.size() * sizeof(std::size_t)), h);
  for (const Matrix& x : modalities) {
    h = fnv1a64(bytes(x.data().data(), x.size() * sizeof(double)), h);
  }
  return h;
}

Dataset generate_dataset(const DatasetConfig& cfg) {
  cfg.validate();
  const std::size_t modalities = cfg.dims.size();

  // prototypes[m] is classes × dims[m]
  std::vector<Matrix> prototypes;
  RngStream proto_rng(cfg.seed, "prototype");
  for (std::size_t m = 0; m < modalities; ++m) {
    RngStream stream = proto_rng.derive(m);
    Matrix p(cfg.n_classes, cfg.dims[m]);
    for (double& v : p.data()) v = cfg.prototype_scale * stream.normal();
    prototypes.push_back(std::move(p));
  }

  std::vector<int> labels(cfg.n_samples);
  for (std::size_t i = 0; i < cfg.n_samples; ++i) {
    labels[i] = static_cast<int>(i % cfg.n_classes);
  }
  RngStream order_rng(cfg.seed, "order");
  order_rng.shuffle(labels.begin(), labels.end());

  Batch all;
  all.labels = labels;
  all.ids.resize(cfg.n_samples);
  std::iota(all.ids.begin(), all.ids.end(), std::size_t{0});
  all.state.assign(modalities, ModalityState{});
  RngStream noise_rng(cfg.seed, "noise");
  for (std::size_t m = 0; m < modalities; ++m) {
    Matrix x(cfg.n_samples, cfg.dims[m]);
    for (std::size_t i = 0; i < cfg.n_samples; ++i) {
      RngStream stream = noise_rng.derive(m).derive(i);
      auto proto = prototypes[m].row(static_cast<std::size_t>(labels[i]));
      auto row = x.row(i);
      for (std::size_t j = 0; j < row.size(); ++j) {
        row[j] = proto[j] + cfg.noise_sigma[m] * stream.normal();
      }
    }
    all.modalities.push_back(std::move(x));
  }

  const std::size_t n_train = cfg.n_samples * 4 / 5;
  std::vector<std::size_t> train_rows(n_train);
  std::vector<std::size_t> test_rows(cfg.n_samples - n_train);
  std::iota(train_rows.begin(), train_rows.end(), std::size_t{0});
  std::iota(test_rows.begin(), test_rows.end(), n_train);
  return {all.select(train_rows), all.select(test_rows)};
}

namespace {

void check_modality(const Batch& batch, std::size_t m) {
  if (m >= batch.num_modalities()) {
    throw ParameterError("modality index " + std::to_string(m) + " out of range (batch has " +
                         std::to_string(batch.num_modalities()) + ")");
  }
}

}  // namespace

Batch corrupt_gaussian(const Batch& batch, std::size_t m, double sigma, const RngStream& rng) {
  check_modality(batch, m);
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ParameterError("sigma must be >= 0");
  Batch out = batch;
  Matrix& x = out.modalities[m];
  for (std::size_t i = 0; i < x.rows(); ++i) {
    // the per-sample stream ignores sigma, so severities share one noise direction
    RngStream stream = rng.derive(out.ids[i]);
    for (double& v : x.row(i)) v += sigma * stream.normal();
  }
  out.state[m] = {ModalityState::Kind::Gaussian, sigma};
  return out;
}

Batch corrupt_mask(const Batch& batch, std::size_t m, double fraction, const RngStream& rng) {
  check_modality(batch, m);
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw ParameterError("mask fraction must lie in [0, 1], got " + std::to_string(fraction));
  }
  Batch out = batch;
  Matrix& x = out.modalities[m];
  const std::size_t dim = x.cols();
  // guard against fraction·dim landing a hair above an integer
  const auto count = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(dim) - 1e-9));
  std::vector<std::size_t> coords(dim);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    RngStream stream = rng.derive(out.ids[i]);
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    // partial Fisher-Yates: the first `count` slots are a uniform subset
    for (std::size_t j = 0; j < count; ++j) {
      std::swap(coords[j], coords[j + stream.below(dim - j)]);
      x(i, coords[j]) = 0.0;
    }
  }
  out.state[m] = {ModalityState::Kind::Masked, fraction};
  return out;
}

Batch corrupt_drop(const Batch& batch, std::size_t m) {
  check_modality(batch, m);
  Batch out = batch;
  Matrix& x = out.modalities[m];
  x = Matrix(x.rows(), x.cols());
  out.state[m] = {ModalityState::Kind::Dropped, 1.0};
  return out;
}

Batch apply_corruption(const Batch& batch, const CorruptionSpec& spec, const RngStream& rng) {
  spec.validate();
  switch (spec.kind) {
    case CorruptionKind::Gaussian: return corrupt_gaussian(batch, spec.modality, spec.severity, rng);
    case CorruptionKind::Mask: return corrupt_mask(batch, spec.modality, spec.severity, rng);
    case CorruptionKind::Drop: return corrupt_drop(batch, spec.modality);
  }
  throw ParameterError("unknown corruption kind");
}

void write_csv(std::ostream& out, const Batch& batch) {
  out << "id,label";
  for (std::size_t m = 0; m < batch.num_modalities(); ++m) {
    for (std::size_t j = 0; j < batch.modalities[m].cols(); ++j) out << ",m" << m << '_' << j;
  }
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out << batch.ids[i] << ',' << batch.labels[i];
    for (const Matrix& x : batch.modalities) {
      for (double v : x.row(i)) {
        // shortest round-trip representation
        auto res = std::to_chars(buf, buf + sizeof(buf), v);
        out << ',' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
      }
    }
    out << '\n';
  }
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

template <typename T>
T parse_field(std::string_view field, std::size_t line_no) {
  T value{};
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw ParameterError("csv line " + std::to_string(line_no) + ": cannot parse '" +
                         std::string(field) + "'");
  }
  return value;
}

}  // namespace

Batch read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParameterError("csv: missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_commas(line);
  if (header.size() < 3 || header[0] != "id" || header[1] != "label") {
    throw ParameterError("csv: header must start with id,label");
  }
  std::vector<std::size_t> dims;
  for (std::size_t c = 2; c < header.size(); ++c) {
    std::string_view name = header[c];
    const std::size_t us = name.find('_');
    if (name.size() < 4 || name[0] != 'm' || us == std::string_view::npos) {
      throw ParameterError("csv: bad column name '" + std::string(name) + "'");
    }
    const auto m = parse_field<std::size_t>(name.substr(1, us - 1), 1);
    const auto j = parse_field<std::size_t>(name.substr(us + 1), 1);
    if (m == dims.size() && j == 0) {
      dims.push_back(1);
    } else if (m + 1 == dims.size() && j == dims.back()) {
      ++dims.back();
    } else {
      throw ParameterError("csv: column '" + std::string(name) + "' out of order");
    }
  }

  std::vector<std::vector<double>> columns(dims.size());
  Batch batch;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_commas(line);
    if (fields.size() != header.size()) {
      throw ParameterError("csv line " + std::to_string(line_no) + ": expected " +
                           std::to_string(header.size()) + " fields, got " +
                           std::to_string(fields.size()));
    }
    batch.ids.push_back(parse_field<std::size_t>(fields[0], line_no));
    batch.labels.push_back(parse_field<int>(fields[1], line_no));
    std::size_t c = 2;
    for (std::size_t m = 0; m < dims.size(); ++m) {
      for (std::size_t j = 0; j < dims[m]; ++j) {
        columns[m].push_back(parse_field<double>(fields[c++], line_no));
      }
    }
  }
  for (std::size_t m = 0; m < dims.size(); ++m) {
    batch.modalities.emplace_back(batch.labels.size(), dims[m], std::move(columns[m]));
  }
  batch.state.assign(dims.size(), ModalityState{});
  return batch;
}

double nearest_centroid_accuracy(const Batch& train, const Batch& test, std::size_t classes) {
  auto features = [](const Batch& b, std::size_t i) {
    std::vector<double> f;
    for (const Matrix& x : b.modalities) f.insert(f.end(), x.row(i).begin(), x.row(i).end());
    return f;
  };
  std::vector<std::vector<double>> centroids(classes);
  std::vector<std::size_t> counts(classes, 0);
  for (std::size_t i = 0; i < train.size(); ++i) {
    auto f = features(train, i);
    auto& c = centroids[static_cast<std::size_t>(train.labels[i])];
    if (c.empty()) c.assign(f.size(), 0.0);
    for (std::size_t j = 0; j < f.size(); ++j) c[j] += f[j];
    ++counts[static_cast<std::size_t>(train.labels[i])];
  }
  for (std::size_t k = 0; k < classes; ++k)
    for (double& v : centroids[k]) v /= static_cast<double>(std::max<std::size_t>(counts[k], 1));

  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    auto f = features(test, i);
    double best = std::numeric_limits<double>::infinity();
    int best_k = -1;
    for (std::size_t k = 0; k < classes; ++k) {
      if (centroids[k].empty()) continue;
      double d = 0.0;
      for (std::size_t j = 0; j < f.size(); ++j) d += (f[j] - centroids[k][j]) * (f[j] - centroids[k][j]);
      if (d < best) {
        best = d;
        best_k = static_cast<int>(k);
      }
    }
    if (best_k == test.labels[i]) ++correct;
  }
  return test.size() == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(test.size());
}

}  // namespace dms
