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

#include "augcal/model.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "augcal/data.hpp"
#include "augcal/errors.hpp"

namespace augcal {

namespace fs = std::filesystem;

MlpParams MlpParams::zeros(std::vector<Index> sizes) {
  if (sizes.size() < 2) throw std::invalid_argument("an MLP needs at least input and output sizes");
  MlpParams p;
  p.sizes = std::move(sizes);
  for (std::size_t l = 0; l + 1 < p.sizes.size(); ++l) {
    p.layers.push_back({RowMatrixXd::Zero(p.sizes[l], p.sizes[l + 1]),
                        Eigen::RowVectorXd::Zero(p.sizes[l + 1])});
  }
  return p;
}

MlpParams MlpParams::he_uniform(std::vector<Index> sizes, Rng& rng) {
  MlpParams p = zeros(std::move(sizes));
  for (auto& layer : p.layers) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.weight.rows()));
    for (Index i = 0; i < layer.weight.size(); ++i) {
      layer.weight.data()[i] = limit * (2.0 * rng.uniform() - 1.0);
    }
  }
  return p;
}

Index MlpParams::num_parameters() const {
  Index n = 0;
  for (const auto& layer : layers) n += layer.weight.size() + layer.bias.size();
  return n;
}

bool MlpParams::all_finite() const {
  for (const auto& layer : layers) {
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
  }
  return true;
}

Vector<double> MlpParams::flatten() const {
  Vector<double> flat(num_parameters());
  Index offset = 0;
  for (const auto& layer : layers) {
    flat.segment(offset, layer.weight.size()) = layer.weight.reshaped<Eigen::RowMajor>();
    offset += layer.weight.size();
    flat.segment(offset, layer.bias.size()) = layer.bias.transpose();
    offset += layer.bias.size();
  }
  return flat;
}

void MlpParams::assign(const Vector<double>& flat) {
  if (flat.size() != num_parameters()) throw std::invalid_argument("parameter count mismatch");
  Index offset = 0;
  for (auto& layer : layers) {
    layer.weight.reshaped<Eigen::RowMajor>() = flat.segment(offset, layer.weight.size());
    offset += layer.weight.size();
    layer.bias = flat.segment(offset, layer.bias.size()).transpose();
    offset += layer.bias.size();
  }
}

MlpParams& MlpParams::operator+=(const MlpParams& other) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].weight += other.layers[l].weight;
    layers[l].bias += other.layers[l].bias;
  }
  return *this;
}

MlpParams& MlpParams::operator*=(double s) {
  for (auto& layer : layers) {
    layer.weight *= s;
    layer.bias *= s;
  }
  return *this;
}

RowMatrixXd forward(const MlpParams& params, const Eigen::Ref<const RowMatrixXd>& x,
                    ForwardCache* cache) {
  if (x.cols() != params.input_dim()) {
    throw std::invalid_argument("forward: input has " + std::to_string(x.cols()) +
                                " features, network expects " + std::to_string(params.input_dim()));
  }
  if (cache != nullptr) {
    cache->inputs.clear();
    cache->preactivations.clear();
  }
  RowMatrixXd h = (x.array() - params.input_mean) / params.input_std;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    RowMatrixXd z = h * layer.weight;
    z.rowwise() += layer.bias;
    if (cache != nullptr) {
      cache->inputs.push_back(h);
      cache->preactivations.push_back(z);
    }
    h = l + 1 < params.layers.size() ? RowMatrixXd(z.cwiseMax(0.0)) : std::move(z);
  }
  return h;
}

std::vector<RowMatrixXd> hidden_activations(const MlpParams& params,
                                            const Eigen::Ref<const RowMatrixXd>& x) {
  ForwardCache cache;
  forward(params, x, &cache);
  std::vector<RowMatrixXd> out;
  for (std::size_t l = 1; l < cache.inputs.size(); ++l) out.push_back(cache.inputs[l]);
  return out;
}

MlpGradients backward(const MlpParams& params, const ForwardCache& cache,
                      const RowMatrixXd& grad_logits) {
  MlpGradients grads = MlpParams::zeros(params.sizes);
  RowMatrixXd delta = grad_logits;
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    grads.layers[l].weight.noalias() = cache.inputs[l].transpose() * delta;
    grads.layers[l].bias = delta.colwise().sum();
    if (l == 0) break;
    RowMatrixXd upstream = delta * params.layers[l].weight.transpose();
    // ReLU of the previous layer's pre-activation
    delta = (cache.preactivations[l - 1].array() > 0.0).select(upstream, 0.0);
  }
  return grads;
}

// ---------------------------------------------------------------------------

void save_checkpoint(const MlpParams& params, const CheckpointInfo& info, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create " + dir.string() + ": " + ec.message());
  nlohmann::json manifest = {{"layer_sizes", params.sizes},
                             {"seed", info.seed},
                             {"step", info.step},
                             {"dtype", "f64"},
                             {"byte_order", "LE"},
                             {"weights_file", "weights.bin"},
                             {"num_parameters", params.num_parameters()},
                             {"input_mean", params.input_mean},
                             {"input_std", params.input_std}};
  std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  out << manifest.dump(2) << "\n";
  if (!out) throw ConfigError("failed writing checkpoint manifest");
  write_f64_blob(dir / "weights.bin", params.flatten());
}

MlpParams load_checkpoint(const fs::path& dir, CheckpointInfo* info) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw DataError("missing checkpoint manifest in " + dir.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
    MlpParams params = MlpParams::zeros(manifest.at("layer_sizes").get<std::vector<Index>>());
    params.assign(read_f64_blob(dir / manifest.at("weights_file").get<std::string>(),
                                params.num_parameters()));
    params.input_mean = manifest.at("input_mean").get<double>();
    params.input_std = manifest.at("input_std").get<double>();
    if (!(params.input_std > 0.0)) throw DataError("checkpoint manifest: input_std must be positive");
    if (info != nullptr) {
      info->seed = manifest.at("seed").get<std::uint64_t>();
      info->step = manifest.at("step").get<std::int64_t>();
    }
    return params;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint manifest: " + std::string(e.what()));
  }
}

// ---------------------------------------------------------------------------

double tempered_nll(const RowMatrixXd& logits, std::span<const std::uint32_t> labels, double t) {
  const RowMatrixXd logp = log_softmax_rows(RowMatrixXd(logits / t));
  double total = 0.0;
  for (Index i = 0; i < logits.rows(); ++i) total -= logp(i, labels[static_cast<std::size_t>(i)]);
  return total / static_cast<double>(logits.rows());
}

Temperature fit_temperature(const RowMatrixXd& logits, std::span<const std::uint32_t> labels,
                            double lo, double hi, double tol) {
  if (logits.rows() < 2) throw std::invalid_argument("fit_temperature needs at least two rows");
  if (static_cast<Index>(labels.size()) != logits.rows()) {
    throw std::invalid_argument("fit_temperature: label count mismatch");
  }
  for (auto y : labels) {
    if (y >= static_cast<std::uint32_t>(logits.cols())) throw std::invalid_argument("fit_temperature: label out of range");
  }
  if (!(lo > 0.0 && lo < hi)) throw std::invalid_argument("fit_temperature: invalid bounds");

  bool informative = false;
  for (Index i = 0; i < logits.rows() && !informative; ++i) {
    informative = logits.row(i).maxCoeff() > logits.row(i).minCoeff();
  }
  if (!informative) return {1.0, true};

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = tempered_nll(logits, labels, c);
  double fd = tempered_nll(logits, labels, d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = tempered_nll(logits, labels, c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = tempered_nll(logits, labels, d);
    }
  }
  double t = 0.5 * (a + b);
  if (lo <= 1.0 && 1.0 <= hi && tempered_nll(logits, labels, 1.0) < tempered_nll(logits, labels, t)) {
    t = 1.0;
  }
  return {t, false};
}

RowMatrixXd apply_temperature(const RowMatrixXd& logits, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("temperature must be positive");
  return softmax_rows(RowMatrixXd(logits / t));
}

}  // namespace augcal
