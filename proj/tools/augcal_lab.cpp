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

// augcal_lab: dataset generation, training, evaluation, MMD checks, bound
// verification and lambda sweeps.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "augcal/cli.hpp"
#include "augcal/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"augcal_lab"};
  app.require_subcommand(1);
  app.set_version_flag("--version", augcal::kToolVersion);

  augcal::GenerateArgs gen;
  std::optional<long long> n_per_domain;
  std::optional<int> dim;
  std::optional<int> num_classes;
  std::optional<int> image_size;
  std::optional<int> channels;
  std::optional<double> mean_shift;
  std::string gen_params;
  auto* generate = app.add_subcommand("generate", "Write source/ and target/ dataset directories");
  generate->add_option("--kind", gen.kind, "spectral-shift | gauss-shift")->required();
  generate->add_option("--out", gen.out, "Output directory")->required();
  generate->add_option("--seed", gen.seed, "Generator seed");
  generate->add_option("--n", n_per_domain, "Samples per domain");
  generate->add_option("--dim", dim, "gauss-shift input dimension");
  generate->add_option("--delta", mean_shift, "gauss-shift mean shift");
  generate->add_option("--num-classes", num_classes, "Number of classes");
  generate->add_option("--image-size", image_size, "spectral-shift image side");
  generate->add_option("--channels", channels, "spectral-shift channels");
  generate->add_option("--params", gen_params, "Generator parameters as a JSON object");

  std::string train_config;
  std::string train_out;
  auto* train = app.add_subcommand("train", "Train one configuration and report on the target set");
  train->add_option("--config", train_config, "Run config JSON")->required();
  train->add_option("--out", train_out, "Output directory")->required();

  std::string preds;
  std::string eval_out;
  int bins = augcal::kDefaultBins;
  auto* eval = app.add_subcommand("eval", "Calibration report from a predictions CSV");
  eval->add_option("--preds", preds, "Predictions CSV")->required();
  eval->add_option("--out", eval_out, "Report JSON (stdout when omitted)");
  eval->add_option("--bins", bins, "Number of confidence bins");

  augcal::MmdArgs mmd;
  std::string mmd_aug;
  std::optional<double> mmd_bw;
  auto* mmd_cmd = app.add_subcommand("mmd", "Squared RBF MMD between two datasets");
  mmd_cmd->add_option("--a", mmd.a, "Dataset directory A")->required();
  mmd_cmd->add_option("--b", mmd.b, "Dataset directory B")->required();
  mmd_cmd->add_option("--aug", mmd_aug, "Augment pool A first: pasta | randaugment");
  mmd_cmd->add_option("--seed", mmd.seed, "Seed for augmentation and bandwidth subsampling");
  mmd_cmd->add_option("--bandwidth", mmd_bw, "Fixed RBF sigma (median heuristic otherwise)");

  std::string bound_config;
  long long n_mc = 100000;
  std::string bound_out;
  auto* bound = app.add_subcommand("bound", "Monte-Carlo check of the target calibration bound");
  bound->add_option("--config", bound_config, "Run config JSON (gauss-shift data)")->required();
  bound->add_option("--n-mc", n_mc, "Monte-Carlo samples per domain");
  bound->add_option("--out", bound_out, "Report JSON (stdout when omitted)");

  std::string sweep_config;
  std::vector<double> lambdas{0.1, 0.5, 1.0, 5.0, 10.0, 20.0, 100.0};
  std::string sweep_out;
  auto* sweep = app.add_subcommand("sweep", "One training run per lambda_cal value");
  sweep->add_option("--config", sweep_config, "Base run config JSON")->required();
  sweep->add_option("--lambda-cal", lambdas, "Comma-separated values")->delimiter(',');
  sweep->add_option("--out", sweep_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : augcal::kExitUsage;
  }

  if (*generate) {
    return augcal::guarded(std::cerr, [&] {
      if (!gen_params.empty()) gen.params = nlohmann::json::parse(gen_params);
      if (!gen.params.is_object()) throw augcal::ConfigError("--params must be a JSON object");
      if (n_per_domain) gen.params["n_per_domain"] = *n_per_domain;
      if (dim) gen.params["dim"] = *dim;
      if (mean_shift) gen.params["mean_shift"] = *mean_shift;
      if (num_classes) gen.params["num_classes"] = *num_classes;
      if (image_size) gen.params["image_size"] = *image_size;
      if (channels) gen.params["channels"] = *channels;
      return augcal::cmd_generate(gen, std::cout, std::cerr);
    });
  }
  if (*train) return augcal::cmd_train(train_config, train_out, std::cout, std::cerr);
  if (*eval) return augcal::cmd_eval(preds, eval_out, bins, std::cout, std::cerr);
  if (*mmd_cmd) {
    if (!mmd_aug.empty()) mmd.aug = mmd_aug;
    mmd.bandwidth = mmd_bw;
    return augcal::cmd_mmd(mmd, std::cout, std::cerr);
  }
  if (*bound) return augcal::cmd_bound(bound_config, n_mc, bound_out, std::cout, std::cerr);
  if (*sweep) return augcal::cmd_sweep(sweep_config, lambdas, sweep_out, std::cout, std::cerr);
  return augcal::kExitUsage;
}
