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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "augcal/data.hpp"
#include "augcal/model.hpp"
#include "augcal/numerics.hpp"

namespace augcal {

inline constexpr int kDefaultBins = 15;

struct PredictionRecord {
  std::int64_t id = 0;
  std::uint32_t true_label = 0;
  std::uint32_t pred_label = 0;
  double confidence = 0.0;
  /// Full probability vector; empty when unknown.
  Eigen::RowVectorXd probs;

  bool correct() const { return true_label == pred_label; }
};

using Records = std::span<const PredictionRecord>;

/// Records from a [N, K] probability matrix; ids are row indices.
std::vector<PredictionRecord> make_records(const RowMatrixXd& probs,
                                           std::span<const std::uint32_t> labels);

/// Equal-width confidence bins on [0, 1]; bin j holds [j/B, (j+1)/B) and a
/// confidence of exactly 1 falls in the last bin.
struct BinStats {
  int num_bins = kDefaultBins;
  std::vector<std::int64_t> count;
  std::vector<double> sum_confidence;
  std::vector<std::int64_t> count_correct;

  static BinStats accumulate(Records records, int num_bins = kDefaultBins);
  static int bin_of(double confidence, int num_bins);
  std::int64_t total() const;
  nlohmann::json to_json() const;
};

/// Count-weighted expected calibration error.
double ece(Records records, int num_bins = kDefaultBins, BinStats* bins = nullptr);
/// ECE over the mispredicted subset; absent when every record is correct.
std::optional<double> ic_ece(Records records, int num_bins = kDefaultBins);
/// Mean confidence over mispredictions; absent when there are none.
std::optional<double> overconfidence(Records records);
/// Prediction rejection ratio in [-100, 100]; absent unless both correct and
/// incorrect records exist.
std::optional<double> prr(Records records);
/// Mean -log p(true label); absent if any record lacks probabilities.
std::optional<double> nll(Records records);
double accuracy(Records records);

struct CalibrationReport {
  std::int64_t n = 0;
  double accuracy = 0.0;
  double ece = 0.0;
  std::optional<double> ic_ece;
  std::optional<double> oc;
  std::optional<double> prr;
  std::optional<double> nll;
  BinStats bins;

  nlohmann::json to_json() const;
};

CalibrationReport report(Records records, int num_bins = kDefaultBins);

// ---------------------------------------------------------------------------
// Predictions file: CSV id,true_label,pred_label,confidence

void write_predictions_csv(Records records, const std::filesystem::path& file);
/// Throws ConfigError naming the offending row on malformed input.
std::vector<PredictionRecord> read_predictions_csv(const std::filesystem::path& file);
/// [N, K] probabilities next to a predictions file, f64 LE.
void write_probs_sidecar(Records records, const std::filesystem::path& file);
void attach_probs_sidecar(std::vector<PredictionRecord>& records, const std::filesystem::path& file);

// ---------------------------------------------------------------------------
// Distribution distances

struct Bandwidth {
  /// Fixed RBF sigma; the median heuristic is used when unset.
  std::optional<double> sigma;
  std::uint64_t seed = 0;
  /// Cap on the number of pooled points used by the median heuristic.
  Index median_points = 1000;

  static Bandwidth median(std::uint64_t seed = 0) { return {std::nullopt, seed, 1000}; }
  static Bandwidth fixed(double s) { return {s, 0, 1000}; }
};

struct MmdResult {
  double mmd2 = 0.0;
  double bandwidth = 0.0;
  Index n = 0;
  Index m = 0;
};

/// Biased (V-statistic) squared MMD with k(x, y) = exp(-|x - y|^2 / (2 s^2)).
/// Symmetric in its arguments bit for bit.
MmdResult mmd2_rbf(const Eigen::Ref<const RowMatrixXd>& a, const Eigen::Ref<const RowMatrixXd>& b,
                   const Bandwidth& bandwidth = Bandwidth::median());

/// Median pairwise Euclidean distance of the pooled samples.
double median_pairwise_distance(const Eigen::Ref<const RowMatrixXd>& a,
                                const Eigen::Ref<const RowMatrixXd>& b, std::uint64_t seed,
                                Index max_points);

/// Integral of P_T^2 / P_S by nested composite Simpson quadrature (d <= 2).
/// Returns +inf when the integral does not converge.
double renyi_d2(const DensityPair& densities, double rel_tol = 1e-4);

// ---------------------------------------------------------------------------
// Target calibration bound

/// Translation of tabular source inputs.
struct TranslateAug {
  Vector<double> offset;

  /// Offset that moves the source mean onto the (unlabeled) target mean.
  static TranslateAug from_means(const LabeledDataset& source, const UnlabeledDataset& target);
};

enum class BoundVerdict { holds, inconclusive, violated };
std::string to_string(BoundVerdict v);

struct BoundReport {
  Index n_mc = 0;
  double target_cal_loss = 0.0;
  double divergence_d2 = 0.0;
  double source_cal_sq = 0.0;
  double upper_bound_u = 0.0;
  std::optional<double> divergence_d2_aug;
  std::optional<double> source_cal_sq_aug;
  std::optional<double> upper_bound_u_aug;

  double stderr_target_cal_loss = 0.0;
  double stderr_divergence_d2 = 0.0;
  double stderr_source_cal_sq = 0.0;
  double stderr_upper_bound_u = 0.0;
  std::optional<double> stderr_upper_bound_u_aug;
  /// Combined stderr of (U - target_cal_loss).
  double stderr_bound_gap = 0.0;
  /// Stderr of the paired difference (U - U_aug).
  std::optional<double> stderr_aug_gap;

  BoundVerdict bound = BoundVerdict::inconclusive;
  std::optional<BoundVerdict> aug_tighter;

  /// target <= U + 3 stderr (the statistical acceptance form).
  bool bound_within_tolerance(double sigmas = 3.0) const;
  bool aug_within_tolerance(double sigmas = 3.0) const;

  nlohmann::json to_json() const;
};

/// Per-sample calibration loss |1[y = yhat] - confidence|.
Vector<double> pointwise_calibration_loss(const MlpParams& model,
                                          const Eigen::Ref<const RowMatrixXd>& x,
                                          std::span<const std::uint32_t> labels);

/// Monte-Carlo estimate of both sides of the target calibration bound on
/// samples drawn from `densities`. With `aug`, also the augmented bound.
/// Throws NumericError when an importance weight exceeds 1e6.
BoundReport verify_bound(const MlpParams& model, const DensityPair& densities,
                         const LabeledDataset& source, const LabeledDataset& target,
                         const TranslateAug* aug = nullptr);

}  // namespace augcal
