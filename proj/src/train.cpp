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

#include "augcal/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "augcal/analysis.hpp"
#include "augcal/errors.hpp"

namespace augcal {

using nlohmann::json;

ObjectiveOutput augcal_objective(const MlpParams& model, const TensorXd& source_batch,
                                 Labels source_labels, const TensorXd& target_batch,
                                 const ObjectiveConfig& objective, AugChoice aug_choice,
                                 const AugmentConfig& aug_config, const Rng& rng,
                                 const MlpParams* teacher) {
  if (source_batch.empty() || target_batch.empty()) throw std::invalid_argument("empty batch");
  ObjectiveOutput out;
  out.augmented_source = augment_batch(source_batch, aug_choice, aug_config, rng);

  ForwardCache source_cache;
  const RowMatrixXd source_logits = forward(model, out.augmented_source.matrix(), &source_cache);
  const LossOutput ce = cross_entropy(source_logits, source_labels);
  const LossOutput cal =
      calibration_loss(objective.cal_choice, source_logits, source_labels, objective.mbls_margin);
  out.ce = ce.value;
  out.cal = cal.value;
  RowMatrixXd source_grad = ce.grad_logits + objective.lambda_cal * cal.grad_logits;
  out.grads = backward(model, source_cache, source_grad);

  if (objective.uda_choice != UdaChoice::none) {
    ForwardCache target_cache;
    const RowMatrixXd target_logits = forward(model, target_batch.matrix(), &target_cache);
    LossOutput uda{0.0, RowMatrixXd::Zero(target_logits.rows(), target_logits.cols())};
    if (objective.uda_choice == UdaChoice::entmin) {
      uda = entmin(target_logits);
    } else if (teacher != nullptr) {
      const RowMatrixXd teacher_probs = softmax_rows(forward(*teacher, target_batch.matrix()));
      SelfTrainOutput st = selftrain(target_logits, teacher_probs, objective.selftrain_threshold);
      uda = std::move(st.loss);
      out.quality = st.quality;
    }
    out.uda = uda.value;
    MlpGradients target_grads =
        backward(model, target_cache, RowMatrixXd(objective.lambda_uda * uda.grad_logits));
    out.grads += target_grads;
  }
  out.total = out.ce + objective.lambda_uda * out.uda + objective.lambda_cal * out.cal;
  return out;
}

// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  for (Index h : hidden_sizes) {
    if (h < 1) throw ConfigError("hidden_sizes entries must be >= 1");
  }
  if (steps < 0) throw ConfigError("steps must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must be in [0, 1)");
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  objective.validate();
}

json TrainConfig::to_json() const {
  return {{"hidden_sizes", hidden_sizes},
          {"steps", steps},
          {"batch_size", batch_size},
          {"learning_rate", learning_rate},
          {"momentum", momentum},
          {"seed", seed},
          {"val_fraction", val_fraction},
          {"eval_every", eval_every},
          {"objective", objective.to_json()},
          {"aug_choice", to_string(aug_choice)},
          {"pasta", augment.pasta.to_json()},
          {"randaugment", augment.randaugment.to_json()}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  static const char* known[] = {"hidden_sizes", "steps",      "batch_size", "learning_rate",
                                "momentum",     "seed",       "val_fraction", "eval_every",
                                "objective",    "aug_choice", "pasta",      "randaugment"};
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(std::begin(known), std::end(known), [&](const char* k) { return key == k; })) {
      throw ConfigError("train: unknown field '" + key + "'");
    }
  }
  TrainConfig c;
  try {
    c.hidden_sizes = j.value("hidden_sizes", c.hidden_sizes);
    c.steps = j.value("steps", c.steps);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.momentum = j.value("momentum", c.momentum);
    c.seed = j.value("seed", c.seed);
    c.val_fraction = j.value("val_fraction", c.val_fraction);
    c.eval_every = j.value("eval_every", c.eval_every);
    if (j.contains("objective")) c.objective = ObjectiveConfig::from_json(j.at("objective"));
    if (j.contains("aug_choice")) c.aug_choice = parse_aug_choice(j.at("aug_choice").get<std::string>());
    if (j.contains("pasta")) c.augment.pasta = PastaConfig::from_json(j.at("pasta"));
    if (j.contains("randaugment")) c.augment.randaugment = RandAugConfig::from_json(j.at("randaugment"));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train: ") + e.what());
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------

namespace {

TensorXd gather(const TensorXd& features, std::span<const Index> rows) {
  std::vector<Index> shape = features.shape();
  shape[0] = static_cast<Index>(rows.size());
  TensorXd out(shape);
  auto dst = out.matrix();
  const auto src = features.matrix();
  for (std::size_t i = 0; i < rows.size(); ++i) dst.row(static_cast<Index>(i)) = src.row(rows[i]);
  return out;
}

std::vector<Index> draw_rows(Rng& rng, Index population, Index count) {
  std::vector<Index> rows(static_cast<std::size_t>(count));
  for (auto& r : rows) r = static_cast<Index>(rng.uniform_int(static_cast<std::uint64_t>(population)));
  return rows;
}

}  // namespace

TrainResult train(const LabeledDataset& source, const UnlabeledDataset& target,
                  const TrainConfig& cfg) {
  cfg.validate();
  source.validate();
  if (source.feature_dim() != target.feature_dim()) {
    throw DataError("source and target feature dimensions differ");
  }
  if (target.size() < 1) throw DataError("target set is empty");
  if (cfg.aug_choice != AugChoice::none && source.kind != DataKind::image) {
    throw ConfigError("aug_choice '" + to_string(cfg.aug_choice) + "' needs image data");
  }

  const Rng root(cfg.seed, "train");
  Rng init_rng = root.substream("init");
  Rng split_rng = root.substream("split");
  Rng source_rng = root.substream("batch/source");
  Rng target_rng = root.substream("batch/target");
  const Rng aug_root = root.substream("augment");

  // holdout split by a seeded Fisher-Yates shuffle
  const Index n = source.size();
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  for (Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Index>(split_rng.uniform_int(static_cast<std::uint64_t>(i + 1)));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  const auto n_val = static_cast<Index>(std::floor(cfg.val_fraction * static_cast<double>(n)));
  if (n - n_val < 1) throw DataError("no source rows left for training");
  std::vector<Index> val_rows(perm.begin(), perm.begin() + n_val);
  std::vector<Index> train_rows(perm.begin() + n_val, perm.end());
  std::sort(val_rows.begin(), val_rows.end());
  std::sort(train_rows.begin(), train_rows.end());
  const LabeledDataset train_set = select_rows(source, train_rows);
  const LabeledDataset val_set = select_rows(source, val_rows);

  std::vector<Index> sizes{source.feature_dim()};
  sizes.insert(sizes.end(), cfg.hidden_sizes.begin(), cfg.hidden_sizes.end());
  sizes.push_back(source.num_classes);

  TrainResult result;
  result.params = MlpParams::he_uniform(sizes, init_rng);
  {
    const auto xs = train_set.features.matrix();
    const double mean = xs.mean();
    const double var = (xs.array() - mean).square().mean();
    result.params.input_mean = mean;
    result.params.input_std = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  result.val_rows = val_rows;
  MlpParams velocity = MlpParams::zeros(sizes);
  const bool self_training = cfg.objective.uda_choice == UdaChoice::selftrain;
  MlpParams teacher = result.params;

  const auto evaluate_val = [&](HistoryEntry& entry) {
    if (val_set.size() == 0) return;
    const RowMatrixXd probs = softmax_rows(forward(result.params, val_set.features.matrix()));
    const auto records = make_records(probs, val_set.labels);
    entry.val_accuracy = accuracy(records);
    entry.val_ece = ece(records);
  };

  for (std::int64_t step = 0; step < cfg.steps; ++step) {
    const auto s_rows = draw_rows(source_rng, train_set.size(), cfg.batch_size);
    const auto t_rows = draw_rows(target_rng, target.size(), cfg.batch_size);
    const TensorXd xs = gather(train_set.features, s_rows);
    std::vector<std::uint32_t> ys(s_rows.size());
    for (std::size_t i = 0; i < s_rows.size(); ++i) {
      ys[i] = train_set.labels[static_cast<std::size_t>(s_rows[i])];
    }
    const TensorXd xt = gather(target.features, t_rows);

    const MlpParams* active_teacher =
        self_training && step >= cfg.objective.selftrain_warmup ? &teacher : nullptr;
    ObjectiveOutput obj =
        augcal_objective(result.params, xs, ys, xt, cfg.objective, cfg.aug_choice, cfg.augment,
                         aug_root.substream(static_cast<std::uint64_t>(step)), active_teacher);
    if (!std::isfinite(obj.total)) {
      throw NumericError("loss is not finite at step " + std::to_string(step));
    }

    velocity *= cfg.momentum;
    velocity += obj.grads;
    MlpParams update = velocity;
    update *= -cfg.learning_rate;
    result.params += update;
    if (!result.params.all_finite()) {
      throw NumericError("parameters became non-finite at step " + std::to_string(step));
    }

    if (self_training) {
      teacher *= cfg.objective.ema_alpha;
      MlpParams blend = result.params;
      blend *= 1.0 - cfg.objective.ema_alpha;
      teacher += blend;
    }

    if ((step + 1) % cfg.eval_every == 0 || step + 1 == cfg.steps) {
      HistoryEntry entry{step + 1, obj.total, obj.ce, obj.uda, obj.cal, obj.quality, 0.0, 0.0};
      evaluate_val(entry);
      result.history.push_back(entry);
    }
  }

  if (val_set.size() >= 2) {
    result.temperature =
        fit_temperature(forward(result.params, val_set.features.matrix()), val_set.labels);
  }
  return result;
}

void write_history_csv(const std::vector<HistoryEntry>& history, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + file.string());
  out << "step,total,ce,uda,cal,quality,val_accuracy,val_ece\n";
  char buf[512];
  for (const auto& h : history) {
    std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  static_cast<long long>(h.step), h.total, h.ce, h.uda, h.cal, h.quality,
                  h.val_accuracy, h.val_ece);
    out << buf;
  }
}

}  // namespace augcal
