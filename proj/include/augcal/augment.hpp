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

#include <array>
#include <string>

#include <json.hpp>

#include "augcal/numerics.hpp"

namespace augcal {

/// Amplitude-spectrum perturbation strengths.
struct PastaConfig {
  double alpha = 3.0;
  double beta = 0.25;
  double k = 2.0;

  nlohmann::json to_json() const { return {{"alpha", alpha}, {"beta", beta}, {"k", k}}; }
  static PastaConfig from_json(const nlohmann::json& j);
};

enum class PhotometricOp {
  auto_contrast,
  equalize,
  contrast,
  brightness,
  sharpness,
  posterize,
  solarize,
  solarize_add,
};

inline constexpr std::array<PhotometricOp, 8> kPhotometricVocabulary = {
    PhotometricOp::auto_contrast, PhotometricOp::equalize,  PhotometricOp::contrast,
    PhotometricOp::brightness,    PhotometricOp::sharpness, PhotometricOp::posterize,
    PhotometricOp::solarize,      PhotometricOp::solarize_add,
};

std::string to_string(PhotometricOp op);

struct RandAugConfig {
  int magnitude = 30;
  int num_ops = 8;

  nlohmann::json to_json() const { return {{"magnitude", magnitude}, {"num_ops", num_ops}}; }
  static RandAugConfig from_json(const nlohmann::json& j);
};

enum class AugChoice { none, pasta, randaugment };

std::string to_string(AugChoice choice);
AugChoice parse_aug_choice(const std::string& s);

struct AugmentConfig {
  PastaConfig pasta;
  RandAugConfig randaugment;
};

// ---------------------------------------------------------------------------
// PASTA

/// Perturbation strength on the centered (post-fftshift) frequency grid.
/// Entry (i, j) corresponds to the offset (i - H/2, j - W/2) from DC.
RowMatrixXd pasta_sigma(Index height, Index width, const PastaConfig& cfg);

/// Intermediates recorded while augmenting one channel.
struct PastaTrace {
  ComplexMatrixXd input_spectrum;
  ComplexMatrixXd perturbed_spectrum;
  /// Unclipped inverse transform, before the real part is taken.
  ComplexMatrixXd inverse;
};

/// One [H, W] channel; output is clipped to [0, 1].
RowMatrixXd pasta_channel(const RowMatrixXd& channel, const PastaConfig& cfg, Rng& rng,
                          PastaTrace* trace = nullptr);

/// Image tensor [H, W, C]; channels perturbed independently.
TensorXd pasta(const TensorXd& image, const PastaConfig& cfg, Rng& rng);

// ---------------------------------------------------------------------------
// Photometric ops (images are [H, W, C] in [0, 1])

/// Applies one op at magnitude m in [0, 30]. Ops with a signed factor draw
/// the sign from `rng`.
TensorXd apply_photometric(const TensorXd& image, PhotometricOp op, int magnitude, Rng& rng);

TensorXd randaugment(const TensorXd& image, const RandAugConfig& cfg, Rng& rng);

// ---------------------------------------------------------------------------

/// Augments every image of a [B, H, W, C] batch; image b draws from
/// rng.substream(b), so a batch equals the per-image map.
TensorXd augment_batch(const TensorXd& batch, AugChoice choice, const AugmentConfig& cfg,
                       const Rng& rng);

/// [H, W] slice of channel c of an [H, W, C] tensor (or of row `index` of a
/// [B, H, W, C] tensor).
RowMatrixXd extract_channel(const TensorXd& image, Index c);
void assign_channel(TensorXd& image, Index c, const RowMatrixXd& values);

}  // namespace augcal
