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
#include <span>
#include <string>

#include <json.hpp>

#include "augcal/numerics.hpp"

namespace augcal {

/// Loss value with its exact gradient w.r.t. the [B, K] logits.
struct LossOutput {
  double value = 0.0;
  RowMatrixXd grad_logits;
};

enum class CalChoice { none, dca, mdca, mbls };
enum class UdaChoice { none, entmin, selftrain };

std::string to_string(CalChoice c);
std::string to_string(UdaChoice c);
CalChoice parse_cal_choice(const std::string& s);
UdaChoice parse_uda_choice(const std::string& s);

struct ObjectiveConfig {
  double lambda_uda = 0.01;
  double lambda_cal = 1.0;
  CalChoice cal_choice = CalChoice::dca;
  UdaChoice uda_choice = UdaChoice::entmin;
  double mbls_margin = 10.0;
  double selftrain_threshold = 0.9;
  double ema_alpha = 0.999;
  /// Steps before the self-training term is switched on.
  int selftrain_warmup = 100;

  void validate() const;
  nlohmann::json to_json() const;
  static ObjectiveConfig from_json(const nlohmann::json& j);
};

using Labels = std::span<const std::uint32_t>;

/// Mean negative log-likelihood; gradient (softmax - onehot) / B.
LossOutput cross_entropy(const RowMatrixXd& logits, Labels labels);

/// |mean correctness - mean confidence| over the batch. Correctness and the
/// argmax are constants for the gradient, which flows through the
/// confidence only; the subgradient at a tie is 0.
LossOutput dca(const RowMatrixXd& logits, Labels labels);

/// Class-wise variant: (1/K) sum_k |mean_i p_ik - freq_k|.
LossOutput mdca(const RowMatrixXd& logits, Labels labels);

/// Margin hinge (1/B) sum_i sum_k max(0, max_j l_ij - l_ik - margin). Only
/// the penalty; the accompanying cross-entropy is added separately.
LossOutput mbls(const RowMatrixXd& logits, double margin);

/// Mean per-sample entropy normalized by log K.
LossOutput entmin(const RowMatrixXd& logits);

struct SelfTrainOutput {
  LossOutput loss;
  /// Fraction of the batch whose teacher confidence reaches the threshold.
  double quality = 0.0;
};

/// q * CE(student, argmax teacher). No gradient reaches the teacher.
SelfTrainOutput selftrain(const RowMatrixXd& student_logits, const RowMatrixXd& teacher_probs,
                          double threshold);

/// Calibration term for the configured choice (zero output for none).
LossOutput calibration_loss(CalChoice choice, const RowMatrixXd& logits, Labels labels,
                            double mbls_margin);

/// Pulls a gradient w.r.t. probabilities back through a row-wise softmax.
RowMatrixXd softmax_backward(const RowMatrixXd& probs, const RowMatrixXd& grad_probs);

}  // namespace augcal
