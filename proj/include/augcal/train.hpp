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
#include <vector>

#include <json.hpp>

#include "augcal/augment.hpp"
#include "augcal/data.hpp"
#include "augcal/losses.hpp"
#include "augcal/model.hpp"

namespace augcal {

struct ObjectiveOutput {
  double total = 0.0;
  double ce = 0.0;
  double uda = 0.0;
  double cal = 0.0;
  /// Self-training quality estimate q; 0 for other UDA losses.
  double quality = 0.0;
  MlpGradients grads;
  /// The augmented source batch every source term saw.
  TensorXd augmented_source;
};

/// One evaluation of ce(Aug(xs)) + lambda_uda * uda(xt) + lambda_cal * cal(Aug(xs)).
/// The source batch is augmented once with `rng`; target inputs are used as
/// given. `teacher` supplies pseudo-labels for self-training and may be null,
/// in which case the self-training term is zero.
ObjectiveOutput augcal_objective(const MlpParams& model, const TensorXd& source_batch,
                                 Labels source_labels, const TensorXd& target_batch,
                                 const ObjectiveConfig& objective, AugChoice aug_choice,
                                 const AugmentConfig& aug_config, const Rng& rng,
                                 const MlpParams* teacher = nullptr);

struct TrainConfig {
  std::vector<Index> hidden_sizes{64};
  std::int64_t steps = 2000;
  Index batch_size = 64;
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  /// Fraction of the source set held out for monitoring and temperature fitting.
  double val_fraction = 0.2;
  std::int64_t eval_every = 100;
  ObjectiveConfig objective;
  AugChoice aug_choice = AugChoice::none;
  AugmentConfig augment;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct HistoryEntry {
  std::int64_t step = 0;
  double total = 0.0;
  double ce = 0.0;
  double uda = 0.0;
  double cal = 0.0;
  double quality = 0.0;
  double val_accuracy = 0.0;
  double val_ece = 0.0;
};

struct TrainResult {
  MlpParams params;
  std::vector<HistoryEntry> history;
  /// Fitted on the held-out source split after the last step.
  Temperature temperature;
  std::vector<Index> val_rows;
};

/// Trains from scratch and returns the last-step parameters. The target set
/// is unlabeled by type. Throws NumericError if the loss stops being finite.
TrainResult train(const LabeledDataset& source, const UnlabeledDataset& target,
                  const TrainConfig& cfg);

void write_history_csv(const std::vector<HistoryEntry>& history, const std::filesystem::path& file);

}  // namespace augcal
