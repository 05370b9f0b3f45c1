// Copyright 2026 The AugCal Lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "augcal/numerics.hpp"

namespace augcal {

enum class DomainTag { source, target };
enum class DataKind { image, tabular };

std::string to_string(DomainTag tag);
std::string to_string(DataKind kind);

/// Features plus integer labels. Image features are [N, H, W, C] in [0, 1];
/// tabular features are [N, d].
struct LabeledDataset {
  TensorXd features;
  std::vector<std::uint32_t> labels;
  int num_classes = 0;
  DomainTag domain = DomainTag::source;
  DataKind kind = DataKind::image;
  nlohmann::json generator_config = nlohmann::json::object();

  Index size() const { return features.rank() == 0 ? 0 : features.dim(0); }
  Index feature_dim() const { return features.row_stride(); }

  /// Throws DataError when an invariant is broken.
  void validate() const;
};

/// Label-free view of a dataset. Training on the target domain only ever
/// receives one of these.
struct UnlabeledDataset {
  TensorXd features;
  int num_classes = 0;
  DataKind kind = DataKind::image;

  Index size() const { return features.rank() == 0 ? 0 : features.dim(0); }
  Index feature_dim() const { return features.row_stride(); }
};

UnlabeledDataset strip_labels(const LabeledDataset& ds);

// ---------------------------------------------------------------------------
// Gaussian mixtures with isotropic components; the densities behind the
// tabular shift benchmark.

struct GaussianComponent {
  double weight = 1.0;
  Vector<double> mean;
  double stddev = 1.0;
};

class GaussianMixture {
 public:
  GaussianMixture() = default;
  explicit GaussianMixture(std::vector<GaussianComponent> components);

  Index dim() const { return dim_; }
  const std::vector<GaussianComponent>& components() const { return components_; }

  double log_density(const Eigen::Ref<const Vector<double>>& x) const;
  double density(const Eigen::Ref<const Vector<double>>& x) const {
    return std::exp(log_density(x));
  }
  Vector<double> sample(Rng& rng) const;
  /// Same mixture with every mean moved by `offset`.
  GaussianMixture translated(const Vector<double>& offset) const;

  nlohmann::json to_json() const;

 private:
  std::vector<GaussianComponent> components_;
  Index dim_ = 0;
};

/// Source and target input densities under covariate shift.
struct DensityPair {
  GaussianMixture source;
  GaussianMixture target;

  double log_density_source(const Eigen::Ref<const Vector<double>>& x) const {
    return source.log_density(x);
  }
  double log_density_target(const Eigen::Ref<const Vector<double>>& x) const {
    return target.log_density(x);
  }
  /// Importance weight P_T(x) / P_S(x).
  double importance_weight(const Eigen::Ref<const Vector<double>>& x) const {
    return std::exp(target.log_density(x) - source.log_density(x));
  }
};

// ---------------------------------------------------------------------------
// Generators

struct SpectralShiftConfig {
  Index n_per_domain = 500;
  Index image_size = 16;
  Index channels = 1;
  int num_classes = 4;
  std::uint64_t seed = 0;
  /// Grating frequency in cycles per image width.
  double base_frequency = 5.0;
  double amplitude = 0.2;
  /// Standard deviation of the per-sample orientation jitter (radians).
  double orientation_jitter = 0.12;
  double noise_std = 0.05;
  // target-domain corruption
  double highfreq_scale = 0.5;
  /// Radius (as a fraction of H) above which target amplitudes are rescaled.
  double highfreq_radius = 0.25;
  double brightness_offset = 0.1;
  double contrast_scale = 0.9;

  void validate() const;
  nlohmann::json to_json() const;
  static SpectralShiftConfig from_json(const nlohmann::json& j);
};

struct GaussianShiftConfig {
  Index n_per_domain = 2000;
  int dim = 2;
  int num_classes = 2;
  double mean_shift = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static GaussianShiftConfig from_json(const nlohmann::json& j);
};

struct DomainPair {
  LabeledDataset source;
  LabeledDataset target;
};

struct GaussianShift {
  LabeledDataset source;
  LabeledDataset target;
  DensityPair densities;
};

/// Oriented-grating images; the target domain has attenuated high
/// frequencies plus a photometric offset.
DomainPair generate_spectral_shift(const SpectralShiftConfig& config);

/// Clean [H, W] grating with the given orientation and phase, no noise.
RowMatrixXd render_grating(Index size, double frequency, double amplitude, double orientation,
                           double phase);

/// Source-to-target corruption applied to one [H, W] channel (before clipping).
RowMatrixXd apply_target_shift(const RowMatrixXd& channel, const SpectralShiftConfig& config);

/// Two-class Gaussian mixtures; target means translated by delta along the
/// last axis. Labels follow the shared Bayes rule y = [x_0 > 0].
GaussianShift generate_gaussian_shift(const GaussianShiftConfig& config);

DensityPair gaussian_shift_densities(const GaussianShiftConfig& config);

/// Label rule shared by both domains of the tabular benchmark.
std::uint32_t gaussian_shift_label(const Eigen::Ref<const Vector<double>>& x);

// ---------------------------------------------------------------------------
// On-disk format: manifest.json, features.bin (f64 LE), labels.bin (u32 LE)

void save_dataset(const LabeledDataset& ds, const std::filesystem::path& dir,
                  const std::string& name = "dataset");
LabeledDataset load_dataset(const std::filesystem::path& dir);

/// Row-major little-endian f64 blob, no header.
void write_f64_blob(const std::filesystem::path& file, const Vector<double>& values);
Vector<double> read_f64_blob(const std::filesystem::path& file, Index expected_count);

/// Gathers rows of a dataset (leading axis) into a new one.
LabeledDataset select_rows(const LabeledDataset& ds, std::span<const Index> rows);

}  // namespace augcal
