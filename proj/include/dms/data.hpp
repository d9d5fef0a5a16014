#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dms/matrix.hpp"
#include "dms/rng.hpp"

namespace dms {

struct DatasetConfig {
  std::size_t n_samples = 600;
  std::size_t n_classes = 3;
  std::vector<std::size_t> dims{20, 12};
  double prototype_scale = 2.0;
  std::vector<double> noise_sigma{0.3, 0.3};
  std::uint64_t seed = 7;

  void validate() const;
  friend bool operator==(const DatasetConfig&, const DatasetConfig&) = default;
};

enum class CorruptionKind { Gaussian, Mask, Drop };

/// Per-modality state carried by a batch; `severity` is sigma or mask fraction.
struct ModalityState {
  enum class Kind { Clean, Gaussian, Masked, Dropped };
  Kind kind = Kind::Clean;
  double severity = 0.0;

  friend bool operator==(const ModalityState&, const ModalityState&) = default;
};

struct CorruptionSpec {
  std::size_t modality = 0;
  CorruptionKind kind = CorruptionKind::Gaussian;
  double severity = 0.0;

  void validate() const;
  friend bool operator==(const CorruptionSpec&, const CorruptionSpec&) = default;
};

std::string to_string(CorruptionKind kind);
CorruptionKind parse_corruption_kind(std::string_view name);
std::string to_string(ModalityState::Kind kind);

/// Aligned samples: row i of every modality matrix belongs to labels[i].
/// A dropped modality stays present as zeros with its state recorded.
struct Batch {
  std::vector<Matrix> modalities;
  std::vector<int> labels;        // 0-based class index
  std::vector<std::size_t> ids;   // dataset-wide sample identity
  std::vector<ModalityState> state;

  [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }
  [[nodiscard]] std::size_t num_modalities() const noexcept { return modalities.size(); }
  [[nodiscard]] Batch select(std::span<const std::size_t> rows) const;
  /// FNV-1a over labels, ids and the raw bytes of every modality.
  [[nodiscard]] std::uint64_t content_hash() const;

  friend bool operator==(const Batch&, const Batch&) = default;
};

struct Dataset {
  Batch train;
  Batch test;
};

/// One prototype per (class, modality); samples are prototype plus Gaussian
/// noise. Labels are balanced, shuffled, then split 80/20.
Dataset generate_dataset(const DatasetConfig& cfg);

Batch corrupt_gaussian(const Batch& batch, std::size_t m, double sigma, const RngStream& rng);
/// Zeroes ⌈fraction·dim⌉ uniformly chosen coordinates of modality m in every sample.
Batch corrupt_mask(const Batch& batch, std::size_t m, double fraction, const RngStream& rng);
Batch corrupt_drop(const Batch& batch, std::size_t m);
Batch apply_corruption(const Batch& batch, const CorruptionSpec& spec, const RngStream& rng);

/// CSV with header `id,label,m0_0,...,m1_0,...`; modality widths are read back from the header.
void write_csv(std::ostream& out, const Batch& batch);
Batch read_csv(std::istream& in);

/// Accuracy of assigning each test sample to the nearest class centroid of the
/// training set, over all modalities concatenated.
double nearest_centroid_accuracy(const Batch& train, const Batch& test, std::size_t classes);

}  // namespace dms
