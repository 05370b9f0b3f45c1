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
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "augcal/analysis.hpp"
#include "augcal/data.hpp"
#include "augcal/train.hpp"

namespace augcal {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

/// Exit codes of every subcommand.
enum ExitCode : int { kExitOk = 0, kExitUsage = 2, kExitNumeric = 3 };

/// Where the two domains come from: dataset directories, or an inline
/// generator spec {"kind": ..., "params": {...}}.
struct DataSpec {
  std::optional<std::filesystem::path> source_dir;
  std::optional<std::filesystem::path> target_dir;
  std::optional<nlohmann::json> generate;

  nlohmann::json to_json() const;
  static DataSpec from_json(const nlohmann::json& j);
};

struct RunConfig {
  int schema_version = kSchemaVersion;
  DataSpec data;
  TrainConfig train;

  /// Normalized form with every default filled in; this is what artifacts echo.
  nlohmann::json to_json() const;
  /// FNV-1a of the normalized JSON, 16 hex digits.
  std::string hash() const;
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::filesystem::path& file);
};

struct LoadedData {
  LabeledDataset source;
  LabeledDataset target;
};
/// Loads both directories, or runs the inline generator.
LoadedData load_data(const DataSpec& spec);

/// Warnings for configurations that are valid but probably unintended.
std::vector<std::string> lint(const RunConfig& config);

struct TrainArtifacts {
  TrainResult result;
  CalibrationReport target_report;
  CalibrationReport target_report_tempered;
  nlohmann::json report_json;
};

/// Trains per `config` on already loaded data and writes checkpoint/,
/// history.csv, predictions.csv, probs.bin and report.json under `out_dir`.
TrainArtifacts run_training(const RunConfig& config, const LoadedData& data,
                            const std::filesystem::path& out_dir, std::ostream& log);

/// Header fields shared by every output artifact.
nlohmann::json artifact_header(const RunConfig& config);

// ---------------------------------------------------------------------------
// Subcommands. Each returns an exit code; stdout/stderr are passed in.

struct GenerateArgs {
  std::string kind;
  std::filesystem::path out;
  std::uint64_t seed = 0;
  /// Generator parameters overriding defaults (the seed is set from `seed`).
  nlohmann::json params = nlohmann::json::object();
};

struct MmdArgs {
  std::filesystem::path a;
  std::filesystem::path b;
  std::optional<std::string> aug;
  std::uint64_t seed = 0;
  std::optional<double> bandwidth;
};

int cmd_generate(const GenerateArgs& args, std::ostream& out, std::ostream& err);
int cmd_train(const std::filesystem::path& config, const std::filesystem::path& out_dir,
              std::ostream& out, std::ostream& err);
int cmd_eval(const std::filesystem::path& preds, const std::filesystem::path& out_file, int bins,
             std::ostream& out, std::ostream& err);
int cmd_mmd(const MmdArgs& args, std::ostream& out, std::ostream& err);
int cmd_bound(const std::filesystem::path& config, Index n_mc, const std::filesystem::path& out_file,
              std::ostream& out, std::ostream& err);
int cmd_sweep(const std::filesystem::path& config, const std::vector<double>& lambdas,
              const std::filesystem::path& out_dir, std::ostream& out, std::ostream& err);

/// Runs `body`, mapping ConfigError to 2, NumericError to 3.
int guarded(std::ostream& err, const std::function<int()>& body);

/// Worker cap from AUGCAL_LAB_THREADS (default 1).
int worker_threads();

/// MMD between pool A (optionally augmented) and pool B on raw features.
MmdResult measure_mmd(const LabeledDataset& a, const LabeledDataset& b,
                      std::optional<AugChoice> aug, std::uint64_t seed,
                      std::optional<double> bandwidth = std::nullopt);

/// Bound verification for a gauss-shift run config on n_mc fresh samples.
BoundReport run_bound(const RunConfig& config, const LoadedData& data, Index n_mc);

}  // namespace augcal
