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

#include "augcal/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "augcal/errors.hpp"

namespace augcal {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw ConfigError(where + ": unknown field '" + key + "'");
    }
  }
}

void write_text(const fs::path& file, const std::string& text) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + file.string());
  out << text;
  if (!out) throw ConfigError("failed writing " + file.string());
}

std::string format_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

json DataSpec::to_json() const {
  json j = json::object();
  if (source_dir) j["source_dir"] = source_dir->generic_string();
  if (target_dir) j["target_dir"] = target_dir->generic_string();
  if (generate) j["generate"] = *generate;
  return j;
}

DataSpec DataSpec::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("data must be a JSON object");
  reject_unknown(j, {"source_dir", "target_dir", "generate"}, "data");
  DataSpec d;
  try {
    if (j.contains("source_dir")) d.source_dir = j.at("source_dir").get<std::string>();
    if (j.contains("target_dir")) d.target_dir = j.at("target_dir").get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("data: ") + e.what());
  }
  if (j.contains("generate")) {
    const json& g = j.at("generate");
    if (!g.is_object()) throw ConfigError("data.generate must be a JSON object");
    reject_unknown(g, {"kind", "params"}, "data.generate");
    if (!g.contains("kind") || !g.at("kind").is_string()) throw ConfigError("data.generate.kind is required");
    const std::string kind = g.at("kind").get<std::string>();
    const json params = g.value("params", json::object());
    // normalize through the typed config so defaults are explicit
    if (kind == "spectral-shift") {
      d.generate = json{{"kind", kind}, {"params", SpectralShiftConfig::from_json(params).to_json()}};
    } else if (kind == "gauss-shift") {
      d.generate = json{{"kind", kind}, {"params", GaussianShiftConfig::from_json(params).to_json()}};
    } else {
      throw ConfigError("data.generate.kind: unknown value '" + kind + "' (expected spectral-shift|gauss-shift)");
    }
  }
  const bool dirs = d.source_dir.has_value() || d.target_dir.has_value();
  if (dirs == d.generate.has_value()) {
    throw ConfigError("data: give either source_dir and target_dir, or generate");
  }
  if (dirs && (!d.source_dir || !d.target_dir)) throw ConfigError("data: both source_dir and target_dir are required");
  return d;
}

json RunConfig::to_json() const {
  return {{"schema_version", schema_version}, {"data", data.to_json()}, {"train", train.to_json()}};
}

std::string RunConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(hash_name(to_json().dump())));
  return buf;
}

RunConfig RunConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(j, {"schema_version", "data", "train"}, "config");
  if (!j.contains("schema_version")) throw ConfigError("config: schema_version is required");
  if (!j.at("schema_version").is_number_integer() || j.at("schema_version").get<int>() != kSchemaVersion) {
    throw ConfigError("config: unsupported schema_version (expected " + std::to_string(kSchemaVersion) + ")");
  }
  if (!j.contains("data")) throw ConfigError("config: data is required");
  RunConfig c;
  c.data = DataSpec::from_json(j.at("data"));
  if (j.contains("train")) c.train = TrainConfig::from_json(j.at("train"));
  return c;
}

RunConfig RunConfig::load(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config " + file.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
  return from_json(j);
}

LoadedData load_data(const DataSpec& spec) {
  if (spec.generate) {
    const std::string kind = spec.generate->at("kind").get<std::string>();
    const json& params = spec.generate->at("params");
    if (kind == "spectral-shift") {
      DomainPair pair = generate_spectral_shift(SpectralShiftConfig::from_json(params));
      return {std::move(pair.source), std::move(pair.target)};
    }
    GaussianShift pair = generate_gaussian_shift(GaussianShiftConfig::from_json(params));
    return {std::move(pair.source), std::move(pair.target)};
  }
  LoadedData d{load_dataset(*spec.source_dir), load_dataset(*spec.target_dir)};
  if (d.source.feature_dim() != d.target.feature_dim()) {
    throw DataError("source and target feature dimensions differ");
  }
  return d;
}

std::vector<std::string> lint(const RunConfig& config) {
  std::vector<std::string> warnings;
  const auto& obj = config.train.objective;
  if (obj.lambda_cal == 0.0 && obj.cal_choice != CalChoice::none) {
    warnings.push_back("lambda_cal is 0, so the " + to_string(obj.cal_choice) + " calibration term is inert");
  }
  if (obj.lambda_uda == 0.0 && obj.uda_choice != UdaChoice::none) {
    warnings.push_back("lambda_uda is 0, so the " + to_string(obj.uda_choice) + " adaptation term is inert");
  }
  return warnings;
}

json artifact_header(const RunConfig& config) {
  return {{"schema_version", kSchemaVersion},
          {"tool_version", kToolVersion},
          {"config_hash", config.hash()},
          {"seed", config.train.seed},
          {"config", config.to_json()}};
}

int worker_threads() {
  const char* env = std::getenv("AUGCAL_LAB_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || n < 1) return 1;
  return static_cast<int>(std::min<long>(n, 256));
}

int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const json::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

// ---------------------------------------------------------------------------
// Training

TrainArtifacts run_training(const RunConfig& config, const LoadedData& data, const fs::path& out_dir,
                            std::ostream& log) {
  const auto warnings = lint(config);
  for (const auto& w : warnings) log << "warning: " << w << "\n";

  TrainArtifacts art;
  art.result = train(data.source, strip_labels(data.target), config.train);

  const RowMatrixXd logits = forward(art.result.params, data.target.features.matrix());
  const auto records = make_records(softmax_rows(logits), data.target.labels);
  const auto tempered =
      make_records(apply_temperature(logits, art.result.temperature.value), data.target.labels);
  art.target_report = report(records);
  art.target_report_tempered = report(tempered);

  fs::create_directories(out_dir);
  save_checkpoint(art.result.params,
                  {config.train.seed, config.train.steps}, out_dir / "checkpoint");
  write_history_csv(art.result.history, out_dir / "history.csv");
  write_predictions_csv(records, out_dir / "predictions.csv");
  write_probs_sidecar(records, out_dir / "probs.bin");

  json rep = artifact_header(config);
  rep["warnings"] = warnings;
  rep["report"] = art.target_report.to_json();
  rep["temperature"] = {{"value", art.result.temperature.value},
                        {"degenerate", art.result.temperature.degenerate},
                        {"fitted_on", "source_val"}};
  rep["report_tempered"] = art.target_report_tempered.to_json();
  art.report_json = rep;
  write_text(out_dir / "report.json", rep.dump(2) + "\n");
  return art;
}

int cmd_train(const fs::path& config, const fs::path& out_dir, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = RunConfig::load(config);
    const LoadedData data = load_data(cfg.data);
    const TrainArtifacts art = run_training(cfg, data, out_dir, err);
    out << "accuracy " << format_g(art.target_report.accuracy) << " ece "
        << format_g(art.target_report.ece) << " -> " << (out_dir / "report.json").string() << "\n";
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------

int cmd_generate(const GenerateArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    json params = args.params;
    params["seed"] = args.seed;
    LabeledDataset source;
    LabeledDataset target;
    if (args.kind == "spectral-shift") {
      DomainPair pair = generate_spectral_shift(SpectralShiftConfig::from_json(params));
      source = std::move(pair.source);
      target = std::move(pair.target);
    } else if (args.kind == "gauss-shift") {
      GaussianShift pair = generate_gaussian_shift(GaussianShiftConfig::from_json(params));
      source = std::move(pair.source);
      target = std::move(pair.target);
    } else {
      throw ConfigError("kind: unknown value '" + args.kind + "' (expected spectral-shift|gauss-shift)");
    }
    save_dataset(source, args.out / "source", "source");
    save_dataset(target, args.out / "target", "target");
    out << "wrote " << (args.out / "source").string() << " and " << (args.out / "target").string() << "\n";
    return kExitOk;
  });
}

int cmd_eval(const fs::path& preds, const fs::path& out_file, int bins, std::ostream& out,
             std::ostream& err) {
  return guarded(err, [&] {
    if (bins < 1) throw ConfigError("bins must be >= 1");
    auto records = read_predictions_csv(preds);
    const fs::path sidecar = preds.parent_path() / "probs.bin";
    if (fs::exists(sidecar)) attach_probs_sidecar(records, sidecar);
    const CalibrationReport rep = report(records, bins);
    json j = {{"schema_version", kSchemaVersion},
              {"tool_version", kToolVersion},
              {"predictions", preds.generic_string()},
              {"report", rep.to_json()}};
    if (out_file.empty()) {
      out << j.dump(2) << "\n";
    } else {
      write_text(out_file, j.dump(2) + "\n");
      out << "ece " << format_g(rep.ece) << " -> " << out_file.string() << "\n";
    }
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------

MmdResult measure_mmd(const LabeledDataset& a, const LabeledDataset& b, std::optional<AugChoice> aug,
                      std::uint64_t seed, std::optional<double> bandwidth) {
  if (a.feature_dim() != b.feature_dim()) {
    throw DataError("feature dimensions differ: " + std::to_string(a.feature_dim()) + " vs " +
                    std::to_string(b.feature_dim()));
  }
  TensorXd pool_a = a.features;
  if (aug && *aug != AugChoice::none) {
    if (a.kind != DataKind::image) throw ConfigError("--aug needs image data");
    pool_a = augment_batch(a.features, *aug, AugmentConfig{}, Rng(seed, "mmd/augment"));
  }
  Bandwidth bw = Bandwidth::median(seed);
  bw.sigma = bandwidth;
  return mmd2_rbf(pool_a.matrix(), b.features.matrix(), bw);
}

int cmd_mmd(const MmdArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const LabeledDataset a = load_dataset(args.a);
    const LabeledDataset b = load_dataset(args.b);
    std::optional<AugChoice> aug;
    if (args.aug) aug = parse_aug_choice(*args.aug);
    const MmdResult r = measure_mmd(a, b, aug, args.seed, args.bandwidth);
    json j = {{"schema_version", kSchemaVersion},
              {"tool_version", kToolVersion},
              {"seed", args.seed},
              {"aug", aug ? to_string(*aug) : "none"},
              {"mmd2", r.mmd2},
              {"bandwidth", r.bandwidth},
              {"n", r.n},
              {"m", r.m}};
    out << j.dump(2) << "\n";
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------

BoundReport run_bound(const RunConfig& config, const LoadedData& data, Index n_mc) {
  if (n_mc < 2) throw ConfigError("n-mc must be >= 2");
  const json& gen = data.source.generator_config;
  if (gen.value("kind", std::string()) != "gauss-shift") {
    throw ConfigError(
        "bound verification needs known densities; only gauss-shift data has them (got '" +
        gen.value("kind", std::string("unknown")) + "')");
  }
  GaussianShiftConfig gcfg = GaussianShiftConfig::from_json(gen.at("params"));
  const TrainResult trained = train(data.source, strip_labels(data.target), config.train);

  // fresh Monte-Carlo draws from the same densities
  GaussianShiftConfig mc_cfg = gcfg;
  mc_cfg.n_per_domain = n_mc;
  mc_cfg.seed = mix64(gcfg.seed ^ hash_name("bound/mc") ^ config.train.seed);
  const GaussianShift mc = generate_gaussian_shift(mc_cfg);
  const TranslateAug aug = TranslateAug::from_means(data.source, strip_labels(data.target));
  return verify_bound(trained.params, mc.densities, mc.source, mc.target, &aug);
}

int cmd_bound(const fs::path& config, Index n_mc, const fs::path& out_file, std::ostream& out,
              std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = RunConfig::load(config);
    const LoadedData data = load_data(cfg.data);
    const BoundReport rep = run_bound(cfg, data, n_mc);
    json j = artifact_header(cfg);
    j["n_mc"] = n_mc;
    j["bound"] = rep.to_json();
    if (out_file.empty()) {
      out << j.dump(2) << "\n";
    } else {
      write_text(out_file, j.dump(2) + "\n");
      out << "bound " << to_string(rep.bound) << " -> " << out_file.string() << "\n";
    }
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------

int cmd_sweep(const fs::path& config, const std::vector<double>& lambdas, const fs::path& out_dir,
              std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (lambdas.empty()) throw ConfigError("lambda-cal list is empty");
    for (double l : lambdas) {
      if (!(l >= 0.0)) throw ConfigError("lambda-cal values must be >= 0");
    }
    const RunConfig base = RunConfig::load(config);
    const LoadedData data = load_data(base.data);

    struct Row {
      std::optional<CalibrationReport> report;
      std::string error;
      std::string log;
    };
    std::vector<Row> rows(lambdas.size());
    const auto run_one = [&](std::size_t i) {
      RunConfig cfg = base;
      cfg.train.objective.lambda_cal = lambdas[i];
      std::ostringstream log;
      std::ostringstream run_err;
      const int code = guarded(run_err, [&] {
        char name[64];
        std::snprintf(name, sizeof(name), "lambda_%g", lambdas[i]);
        rows[i].report = run_training(cfg, data, out_dir / name, log).target_report;
        return kExitOk;
      });
      if (code != kExitOk) rows[i].error = run_err.str();
      rows[i].log = log.str();
    };

    const int workers = std::min<int>(worker_threads(), static_cast<int>(lambdas.size()));
    if (workers <= 1) {
      for (std::size_t i = 0; i < lambdas.size(); ++i) run_one(i);
    } else {
      std::atomic<std::size_t> next{0};
      std::vector<std::thread> pool;
      for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
          for (std::size_t i; (i = next++) < lambdas.size();) run_one(i);
        });
      }
      for (auto& t : pool) t.join();
    }

    std::ostringstream csv;
    csv << "lambda_cal,accuracy,ece,ic_ece,oc,prr,error\n";
    const auto cell = [](const std::optional<double>& v) { return v ? format_g(*v) : std::string(); };
    int failures = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      err << rows[i].log;
      csv << format_g(lambdas[i]) << ',';
      if (rows[i].report) {
        const auto& r = *rows[i].report;
        csv << format_g(r.accuracy) << ',' << format_g(r.ece) << ',' << cell(r.ic_ece) << ','
            << cell(r.oc) << ',' << cell(r.prr) << ",\n";
      } else {
        ++failures;
        std::string msg = rows[i].error;
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        std::replace(msg.begin(), msg.end(), ',', ';');
        csv << ",,,,," << msg << "\n";
        err << "lambda_cal " << format_g(lambdas[i]) << " failed: " << rows[i].error;
      }
    }
    write_text(out_dir / "summary.csv", csv.str());
    out << rows.size() - static_cast<std::size_t>(failures) << " of " << rows.size()
        << " runs finished -> " << (out_dir / "summary.csv").string() << "\n";
    return kExitOk;
  });
}

}  // namespace augcal
