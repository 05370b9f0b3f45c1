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

#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "augcal/cli.hpp"
#include "augcal/errors.hpp"

using namespace augcal;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("augcal_test_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_json(const fs::path& file, const json& j) {
  std::ofstream out(file, std::ios::binary);
  out << j.dump(2);
}

/// Runs the real binary; returns its exit status and captures stderr.
int run_binary(const std::string& args, std::string* err_text = nullptr) {
  const fs::path err_file = fs::temp_directory_path() / "augcal_test_cli_stderr.txt";
  const std::string cmd = std::string(AUGCAL_LAB_BINARY) + " " + args + " > /dev/null 2> " + err_file.string();
  const int status = std::system(cmd.c_str());
  if (err_text != nullptr) *err_text = slurp(err_file);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json small_spectral_config(double lambda_cal = 1.0) {
  return {{"schema_version", 1},
          {"data", {{"generate", {{"kind", "spectral-shift"}, {"params", {{"n_per_domain", 80}}}}}}},
          {"train",
           {{"steps", 60},
            {"eval_every", 20},
            {"hidden_sizes", {16}},
            {"aug_choice", "pasta"},
            {"objective", {{"lambda_cal", lambda_cal}}}}}};
}

json small_gauss_config() {
  return {{"schema_version", 1},
          {"data", {{"generate", {{"kind", "gauss-shift"}, {"params", {{"n_per_domain", 400}}}}}}},
          {"train", {{"steps", 200}, {"hidden_sizes", {16}}, {"objective", {{"lambda_cal", 0.0}, {"lambda_uda", 0.0}}}}}};
}

}  // namespace

TEST_CASE("run config: strict schema, defaults and hash") {
  const RunConfig c = RunConfig::from_json(small_spectral_config());
  CHECK(c.train.steps == 60);
  CHECK(c.train.batch_size == 64);
  CHECK(c.hash().size() == 16);
  CHECK(RunConfig::from_json(c.to_json()).hash() == c.hash());
  CHECK(c.to_json().at("data").at("generate").at("params").contains("amplitude"));

  json extra = small_spectral_config();
  extra["train"]["epochs"] = 3;
  CHECK_THROWS_AS(RunConfig::from_json(extra), ConfigError);
  json top = small_spectral_config();
  top["output"] = "x";
  CHECK_THROWS_AS(RunConfig::from_json(top), ConfigError);
  json no_version = small_spectral_config();
  no_version.erase("schema_version");
  CHECK_THROWS_AS(RunConfig::from_json(no_version), ConfigError);
  json both = small_spectral_config();
  both["data"]["source_dir"] = "a";
  CHECK_THROWS_AS(RunConfig::from_json(both), ConfigError);

  json other = small_spectral_config(0.5);
  CHECK(RunConfig::from_json(other).hash() != c.hash());
}

TEST_CASE("lint warns about inert calibration terms") {
  const RunConfig c = RunConfig::from_json(small_spectral_config(0.0));
  const auto w = lint(c);
  REQUIRE_FALSE(w.empty());
  CHECK(w.front().find("lambda_cal") != std::string::npos);
  CHECK(lint(RunConfig::from_json(small_spectral_config(1.0))).empty());
}

TEST_CASE("generate: loadable, byte-identical on repeat, validation names the field") {
  const fs::path a = fresh_dir("gen_a");
  const fs::path b = fresh_dir("gen_b");
  CHECK(run_binary("generate --kind spectral-shift --out " + a.string() + " --seed 3 --n 40") == 0);
  CHECK(run_binary("generate --kind spectral-shift --out " + b.string() + " --seed 3 --n 40") == 0);
  for (const char* dom : {"source", "target"}) {
    for (const char* file : {"manifest.json", "features.bin", "labels.bin"}) {
      CHECK(slurp(a / dom / file) == slurp(b / dom / file));
    }
    CHECK(load_dataset(a / dom).size() == 40);
  }

  std::string err;
  CHECK(run_binary("generate --kind gauss-shift --dim 3 --out " + fresh_dir("gen_c").string(), &err) == 2);
  CHECK(err.find("dim") != std::string::npos);
  CHECK(run_binary("generate --kind nonsense --out " + fresh_dir("gen_d").string()) == 2);
  CHECK(run_binary("generate --out x") == 2);
}

TEST_CASE("train: artifacts, header fields, determinism") {
  const fs::path dir = fresh_dir("train");
  write_json(dir / "cfg.json", small_spectral_config());
  CHECK(run_binary("train --config " + (dir / "cfg.json").string() + " --out " + (dir / "run1").string()) == 0);
  CHECK(run_binary("train --config " + (dir / "cfg.json").string() + " --out " + (dir / "run2").string()) == 0);
  for (const char* f : {"report.json", "history.csv", "predictions.csv", "probs.bin", "checkpoint/manifest.json",
                        "checkpoint/weights.bin"}) {
    REQUIRE(fs::exists(dir / "run1" / f));
    CHECK(slurp(dir / "run1" / f) == slurp(dir / "run2" / f));
  }
  const json rep = json::parse(slurp(dir / "run1" / "report.json"));
  const RunConfig cfg = RunConfig::from_json(small_spectral_config());
  CHECK(rep.at("schema_version") == 1);
  CHECK(rep.at("tool_version") == kToolVersion);
  CHECK(rep.at("config_hash") == cfg.hash());
  CHECK(rep.at("seed") == 0);
  CHECK(rep.at("config") == cfg.to_json());
  CHECK(rep.at("report").at("n") == 80);
  CHECK(rep.at("temperature").at("fitted_on") == "source_val");
  CHECK(slurp(dir / "run1" / "history.csv").rfind("step,total,ce,uda,cal,quality,val_accuracy,val_ece\n", 0) == 0);
}

TEST_CASE("train: schema errors exit 2, lint warning is reported") {
  const fs::path dir = fresh_dir("train_err");
  json bad = small_spectral_config();
  bad["train"]["momentum"] = 1.5;
  write_json(dir / "bad.json", bad);
  CHECK(run_binary("train --config " + (dir / "bad.json").string() + " --out " + (dir / "o").string()) == 2);
  CHECK(run_binary("train --config " + (dir / "missing.json").string() + " --out " + (dir / "o").string()) == 2);

  write_json(dir / "inert.json", small_spectral_config(0.0));
  std::string err;
  CHECK(run_binary("train --config " + (dir / "inert.json").string() + " --out " + (dir / "i").string(), &err) == 0);
  CHECK(err.find("lambda_cal") != std::string::npos);
  const json rep = json::parse(slurp(dir / "i" / "report.json"));
  CHECK_FALSE(rep.at("warnings").empty());
}

TEST_CASE("train: non-finite data maps to exit 3") {
  const RunConfig cfg = RunConfig::from_json(small_gauss_config());
  LoadedData data = load_data(cfg.data);
  data.target.features.data()(0) = std::numeric_limits<double>::quiet_NaN();
  std::ostringstream err;
  const int code = guarded(err, [&] {
    run_training(cfg, data, fresh_dir("nan"), err);
    return kExitOk;
  });
  CHECK(code == kExitNumeric);
}

TEST_CASE("eval: fixture report, degenerate bins, errors") {
  const fs::path dir = fresh_dir("eval");
  {
    std::ofstream out(dir / "six.csv");
    out << "id,true_label,pred_label,confidence\n"
           "0,0,0,0.9\n1,0,0,0.8\n2,0,0,0.6\n3,0,1,0.7\n4,0,1,0.5\n5,0,1,0.4\n";
  }
  std::ostringstream out;
  std::ostringstream err;
  REQUIRE(cmd_eval(dir / "six.csv", dir / "r.json", 15, out, err) == 0);
  const json rep = json::parse(slurp(dir / "r.json")).at("report");
  CHECK(rep.at("prr").get<double>() == doctest::Approx(9100.0 / 111.0).epsilon(1e-14));
  CHECK(rep.at("oc").get<double>() == doctest::Approx(1.6 / 3).epsilon(1e-14));
  CHECK(rep.at("accuracy") == 0.5);

  REQUIRE(cmd_eval(dir / "six.csv", dir / "r1.json", 1, out, err) == 0);
  const json one = json::parse(slurp(dir / "r1.json")).at("report");
  CHECK(one.at("ic_ece") == one.at("oc"));

  { std::ofstream empty(dir / "empty.csv"); }
  CHECK(run_binary("eval --preds " + (dir / "empty.csv").string()) == 2);
  {
    std::ofstream bad(dir / "bad.csv");
    bad << "id,true_label,pred_label,confidence\n0,0,0,0.9\n1,0,0\n";
  }
  std::string msg;
  CHECK(run_binary("eval --preds " + (dir / "bad.csv").string(), &msg) == 2);
  CHECK(msg.find("row 3") != std::string::npos);
  CHECK(run_binary("eval --preds " + (dir / "six.csv").string() + " --bins 0") == 2);
}

TEST_CASE("mmd: self distance, shift direction, errors") {
  const fs::path dir = fresh_dir("mmd");
  REQUIRE(run_binary("generate --kind spectral-shift --out " + dir.string() + " --n 100") == 0);
  const LabeledDataset s = load_dataset(dir / "source");
  const LabeledDataset t = load_dataset(dir / "target");
  CHECK(std::abs(measure_mmd(s, s, std::nullopt, 0).mmd2) < 1e-12);
  CHECK(measure_mmd(s, t, std::nullopt, 0).mmd2 > 0.0);

  MmdArgs args;
  args.a = dir / "source";
  args.b = dir / "target";
  args.aug = "pasta";
  std::ostringstream out;
  std::ostringstream err;
  REQUIRE(cmd_mmd(args, out, err) == 0);
  const json j = json::parse(out.str());
  for (const char* key : {"mmd2", "bandwidth", "n", "m"}) CHECK(j.contains(key));

  CHECK(run_binary("mmd --a " + (dir / "nope").string() + " --b " + (dir / "target").string()) == 2);
  const fs::path g = fresh_dir("mmd_gauss");
  REQUIRE(run_binary("generate --kind gauss-shift --out " + g.string() + " --n 50") == 0);
  CHECK(run_binary("mmd --a " + (dir / "source").string() + " --b " + (g / "target").string()) == 2);
  CHECK(run_binary("mmd --a " + (dir / "source").string() + " --b " + (dir / "target").string() + " --aug cutout") == 2);
}

TEST_CASE("bound: densities required, fields present") {
  const fs::path dir = fresh_dir("bound");
  write_json(dir / "img.json", small_spectral_config());
  std::string err;
  CHECK(run_binary("bound --config " + (dir / "img.json").string() + " --n-mc 100", &err) == 2);
  CHECK(err.find("densit") != std::string::npos);

  write_json(dir / "g.json", small_gauss_config());
  REQUIRE(run_binary("bound --config " + (dir / "g.json").string() + " --n-mc 20000 --out " +
                     (dir / "b.json").string()) == 0);
  const json b = json::parse(slurp(dir / "b.json"));
  CHECK(b.contains("config_hash"));
  for (const char* key : {"n_mc", "target_cal_loss", "divergence_d2", "source_cal_sq", "upper_bound_u",
                          "upper_bound_u_aug", "stderr", "bound"}) {
    CHECK(b.at("bound").contains(key));
  }
  CHECK(b.at("bound").at("stderr").contains("bound_gap"));

  json flat = small_gauss_config();
  flat["data"]["generate"]["params"]["mean_shift"] = 0.0;
  write_json(dir / "flat.json", flat);
  REQUIRE(run_binary("bound --config " + (dir / "flat.json").string() + " --n-mc 5000 --out " +
                     (dir / "f.json").string()) == 0);
  const json f = json::parse(slurp(dir / "f.json")).at("bound");
  CHECK(f.at("divergence_d2").get<double>() == doctest::Approx(1.0).epsilon(1e-12));

  REQUIRE(run_binary("bound --config " + (dir / "g.json").string() + " --n-mc 10 --out " +
                     (dir / "t.json").string()) == 0);
  const json t = json::parse(slurp(dir / "t.json")).at("bound");
  CHECK(t.at("bound") != "violated");
}

TEST_CASE("sweep: one row per value, single value equals train") {
  const fs::path dir = fresh_dir("sweep");
  write_json(dir / "cfg.json", small_spectral_config(1.0));
  REQUIRE(run_binary("sweep --config " + (dir / "cfg.json").string() + " --lambda-cal 0,1 --out " +
                     (dir / "s").string()) == 0);
  const std::string csv = slurp(dir / "s" / "summary.csv");
  CHECK(csv.rfind("lambda_cal,accuracy,ece,ic_ece,oc,prr,error\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

  REQUIRE(run_binary("train --config " + (dir / "cfg.json").string() + " --out " + (dir / "t").string()) == 0);
  CHECK(slurp(dir / "s" / "lambda_1" / "report.json") == slurp(dir / "t" / "report.json"));
  CHECK(slurp(dir / "s" / "lambda_1" / "checkpoint" / "weights.bin") == slurp(dir / "t" / "checkpoint" / "weights.bin"));

  // parallel workers give the same bytes
  ::setenv("AUGCAL_LAB_THREADS", "2", 1);
  CHECK(worker_threads() == 2);
  REQUIRE(run_binary("sweep --config " + (dir / "cfg.json").string() + " --lambda-cal 0,1 --out " +
                     (dir / "p").string()) == 0);
  ::unsetenv("AUGCAL_LAB_THREADS");
  CHECK(slurp(dir / "p" / "summary.csv") == csv);
  CHECK(worker_threads() == 1);

  CHECK(run_binary("sweep --config " + (dir / "cfg.json").string() + " --lambda-cal -1 --out " +
                   (dir / "n").string()) == 2);
}

TEST_CASE("sweep: a failing run is recorded and the sweep continues") {
  // a regular file where the first run's directory should go makes that run fail
  const fs::path dir = fresh_dir("sweep_fail");
  write_json(dir / "cfg.json", small_gauss_config());
  fs::create_directories(dir / "out");
  { std::ofstream blocker(dir / "out" / "lambda_0"); }
  std::ostringstream out;
  std::ostringstream err;
  CHECK(cmd_sweep(dir / "cfg.json", {0.0, 1.0}, dir / "out", out, err) == 0);
  CHECK(out.str().find("1 of 2 runs finished") != std::string::npos);
  std::istringstream csv(slurp(dir / "out" / "summary.csv"));
  std::string header, first, second;
  std::getline(csv, header);
  std::getline(csv, first);
  std::getline(csv, second);
  CHECK(first.rfind("0,,,,,,", 0) == 0);
  CHECK(first.size() > 7);
  CHECK(second.back() == ',');
  CHECK(fs::exists(dir / "out" / "lambda_1" / "report.json"));
}

TEST_CASE("version flag") {
  CHECK(run_binary("--version") == 0);
  CHECK(run_binary("") == 2);
  CHECK(run_binary("frobnicate") == 2);
}
