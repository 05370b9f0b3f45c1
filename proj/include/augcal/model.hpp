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

#include <filesystem>
#include <vector>

#include "augcal/numerics.hpp"

namespace augcal {

/// Affine layer: y = x * weight + bias, weight is [fan_in, fan_out].
struct DenseLayer {
  RowMatrixXd weight;
  Eigen::RowVectorXd bias;
};

/// Multilayer perceptron with ReLU on hidden layers and raw logits out.
/// Gradients share the same structure, so this type doubles as a gradient.
struct MlpParams {
  std::vector<Index> sizes;
  std::vector<DenseLayer> layers;
  /// Fixed input standardization (x - input_mean) / input_std, not trained.
  double input_mean = 0.0;
  double input_std = 1.0;

  static MlpParams zeros(std::vector<Index> sizes);
  /// He-uniform weights (limit sqrt(6 / fan_in)), zero biases.
  static MlpParams he_uniform(std::vector<Index> sizes, Rng& rng);

  Index input_dim() const { return sizes.front(); }
  Index num_classes() const { return sizes.back(); }
  Index num_parameters() const;
  bool all_finite() const;

  /// Parameters in layer order, each weight row-major then its bias. The
  /// input standardization is not included.
  Vector<double> flatten() const;
  void assign(const Vector<double>& flat);

  MlpParams& operator+=(const MlpParams& other);
  MlpParams& operator*=(double s);
};

using MlpGradients = MlpParams;

/// Per-layer inputs and pre-activations kept for the backward pass.
struct ForwardCache {
  std::vector<RowMatrixXd> inputs;
  std::vector<RowMatrixXd> preactivations;
};

RowMatrixXd forward(const MlpParams& params, const Eigen::Ref<const RowMatrixXd>& x,
                    ForwardCache* cache = nullptr);

/// Post-ReLU activations of every hidden layer.
std::vector<RowMatrixXd> hidden_activations(const MlpParams& params,
                                            const Eigen::Ref<const RowMatrixXd>& x);

MlpGradients backward(const MlpParams& params, const ForwardCache& cache,
                      const RowMatrixXd& grad_logits);

// ---------------------------------------------------------------------------
// Checkpoints: manifest.json + weights.bin (f64 LE, flatten() order)

struct CheckpointInfo {
  std::uint64_t seed = 0;
  std::int64_t step = 0;
};

void save_checkpoint(const MlpParams& params, const CheckpointInfo& info,
                     const std::filesystem::path& dir);
MlpParams load_checkpoint(const std::filesystem::path& dir, CheckpointInfo* info = nullptr);

// ---------------------------------------------------------------------------
// Temperature scaling

struct Temperature {
  double value = 1.0;
  /// Set when the tuning logits carry no information about T (constant rows).
  bool degenerate = false;
};

/// Mean NLL of softmax(logits / T).
double tempered_nll(const RowMatrixXd& logits, std::span<const std::uint32_t> labels, double t);

/// Golden-section search for the NLL-minimizing T in [lo, hi] to |dT| < tol.
Temperature fit_temperature(const RowMatrixXd& logits, std::span<const std::uint32_t> labels,
                            double lo = 0.05, double hi = 10.0, double tol = 1e-4);

RowMatrixXd apply_temperature(const RowMatrixXd& logits, double t);

}  // namespace augcal
