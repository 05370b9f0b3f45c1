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

#include "augcal/losses.hpp"

#include <algorithm>
#include <cmath>

#include "augcal/errors.hpp"

namespace augcal {

using nlohmann::json;

std::string to_string(CalChoice c) {
  switch (c) {
    case CalChoice::none: return "none";
    case CalChoice::dca: return "dca";
    case CalChoice::mdca: return "mdca";
    case CalChoice::mbls: return "mbls";
  }
  return "?";
}

std::string to_string(UdaChoice c) {
  switch (c) {
    case UdaChoice::none: return "none";
    case UdaChoice::entmin: return "entmin";
    case UdaChoice::selftrain: return "selftrain";
  }
  return "?";
}

CalChoice parse_cal_choice(const std::string& s) {
  if (s == "none") return CalChoice::none;
  if (s == "dca") return CalChoice::dca;
  if (s == "mdca") return CalChoice::mdca;
  if (s == "mbls") return CalChoice::mbls;
  throw ConfigError("cal_choice: unknown value '" + s + "' (expected dca|mdca|mbls|none)");
}

UdaChoice parse_uda_choice(const std::string& s) {
  if (s == "none") return UdaChoice::none;
  if (s == "entmin") return UdaChoice::entmin;
  if (s == "selftrain") return UdaChoice::selftrain;
  throw ConfigError("uda_choice: unknown value '" + s + "' (expected entmin|selftrain|none)");
}

void ObjectiveConfig::validate() const {
  if (!(lambda_uda >= 0.0)) throw ConfigError("lambda_uda must be >= 0");
  if (!(lambda_cal >= 0.0)) throw ConfigError("lambda_cal must be >= 0");
  if (!(mbls_margin >= 0.0)) throw ConfigError("mbls_margin must be >= 0");
  if (!(selftrain_threshold > 0.0 && selftrain_threshold < 1.0)) {
    throw ConfigError("selftrain_threshold must be in (0, 1)");
  }
  if (!(ema_alpha >= 0.0 && ema_alpha < 1.0)) throw ConfigError("ema_alpha must be in [0, 1)");
  if (selftrain_warmup < 0) throw ConfigError("selftrain_warmup must be >= 0");
}

json ObjectiveConfig::to_json() const {
  return {{"lambda_uda", lambda_uda},
          {"lambda_cal", lambda_cal},
          {"cal_choice", to_string(cal_choice)},
          {"uda_choice", to_string(uda_choice)},
          {"mbls_margin", mbls_margin},
          {"selftrain_threshold", selftrain_threshold},
          {"ema_alpha", ema_alpha},
          {"selftrain_warmup", selftrain_warmup}};
}

ObjectiveConfig ObjectiveConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("objective must be a JSON object");
  static const char* known[] = {"lambda_uda", "lambda_cal", "cal_choice", "uda_choice",
                                "mbls_margin", "selftrain_threshold", "ema_alpha",
                                "selftrain_warmup"};
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(std::begin(known), std::end(known), [&](const char* k) { return key == k; })) {
      throw ConfigError("objective: unknown field '" + key + "'");
    }
  }
  ObjectiveConfig c;
  try {
    c.lambda_uda = j.value("lambda_uda", c.lambda_uda);
    c.lambda_cal = j.value("lambda_cal", c.lambda_cal);
    if (j.contains("cal_choice")) c.cal_choice = parse_cal_choice(j.at("cal_choice").get<std::string>());
    if (j.contains("uda_choice")) c.uda_choice = parse_uda_choice(j.at("uda_choice").get<std::string>());
    c.mbls_margin = j.value("mbls_margin", c.mbls_margin);
    c.selftrain_threshold = j.value("selftrain_threshold", c.selftrain_threshold);
    c.ema_alpha = j.value("ema_alpha", c.ema_alpha);
    c.selftrain_warmup = j.value("selftrain_warmup", c.selftrain_warmup);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("objective: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

void check_labels(const RowMatrixXd& logits, Labels labels) {
  if (static_cast<Index>(labels.size()) != logits.rows()) {
    throw std::invalid_argument("label count does not match batch size");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= static_cast<std::uint32_t>(logits.cols())) {
      throw std::invalid_argument("label " + std::to_string(labels[i]) + " at index " +
                                  std::to_string(i) + " is out of range");
    }
  }
}

double sign(double x) { return static_cast<double>((x > 0.0) - (x < 0.0)); }

}  // namespace

RowMatrixXd softmax_backward(const RowMatrixXd& probs, const RowMatrixXd& grad_probs) {
  RowMatrixXd out(probs.rows(), probs.cols());
  for (Index i = 0; i < probs.rows(); ++i) {
    const double dot = probs.row(i).dot(grad_probs.row(i));
    out.row(i) = probs.row(i).array() * (grad_probs.row(i).array() - dot);
  }
  return out;
}

LossOutput cross_entropy(const RowMatrixXd& logits, Labels labels) {
  check_labels(logits, labels);
  const Index b = logits.rows();
  const RowMatrixXd logp = log_softmax_rows(logits);
  LossOutput out;
  out.grad_logits = softmax_rows(logits);
  double total = 0.0;
  for (Index i = 0; i < b; ++i) {
    total -= logp(i, labels[static_cast<std::size_t>(i)]);
    out.grad_logits(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
  }
  out.value = total / static_cast<double>(b);
  out.grad_logits /= static_cast<double>(b);
  return out;
}

LossOutput dca(const RowMatrixXd& logits, Labels labels) {
  check_labels(logits, labels);
  const Index b = logits.rows();
  const RowMatrixXd probs = softmax_rows(logits);
  double correct = 0.0;
  double confidence = 0.0;
  std::vector<Index> predicted(static_cast<std::size_t>(b));
  for (Index i = 0; i < b; ++i) {
    const Index yhat = argmax(probs.row(i));
    predicted[static_cast<std::size_t>(i)] = yhat;
    correct += yhat == static_cast<Index>(labels[static_cast<std::size_t>(i)]) ? 1.0 : 0.0;
    confidence += probs(i, yhat);
  }
  const double gap = (correct - confidence) / static_cast<double>(b);

  RowMatrixXd grad_probs = RowMatrixXd::Zero(b, logits.cols());
  const double g = -sign(gap) / static_cast<double>(b);
  for (Index i = 0; i < b; ++i) grad_probs(i, predicted[static_cast<std::size_t>(i)]) = g;
  return {std::abs(gap), softmax_backward(probs, grad_probs)};
}

LossOutput mdca(const RowMatrixXd& logits, Labels labels) {
  check_labels(logits, labels);
  const Index b = logits.rows();
  const Index k = logits.cols();
  const RowMatrixXd probs = softmax_rows(logits);
  Vector<double> freq = Vector<double>::Zero(k);
  for (auto y : labels) freq(y) += 1.0;
  freq /= static_cast<double>(b);
  const Vector<double> mean_probs = probs.colwise().mean().transpose();

  double value = 0.0;
  RowMatrixXd grad_probs(b, k);
  for (Index c = 0; c < k; ++c) {
    const double diff = mean_probs(c) - freq(c);
    value += std::abs(diff);
    grad_probs.col(c).setConstant(sign(diff) / static_cast<double>(k * b));
  }
  return {value / static_cast<double>(k), softmax_backward(probs, grad_probs)};
}

LossOutput mbls(const RowMatrixXd& logits, double margin) {
  const Index b = logits.rows();
  LossOutput out;
  out.grad_logits = RowMatrixXd::Zero(b, logits.cols());
  double total = 0.0;
  const double scale = 1.0 / static_cast<double>(b);
  for (Index i = 0; i < b; ++i) {
    const Index top = argmax(logits.row(i));
    for (Index c = 0; c < logits.cols(); ++c) {
      const double excess = logits(i, top) - logits(i, c) - margin;
      if (excess > 0.0) {
        total += excess;
        out.grad_logits(i, top) += scale;
        out.grad_logits(i, c) -= scale;
      }
    }
  }
  out.value = total * scale;
  return out;
}

LossOutput entmin(const RowMatrixXd& logits) {
  const Index k = logits.cols();
  if (k < 2) throw std::invalid_argument("entmin needs at least two classes");
  const Index b = logits.rows();
  const RowMatrixXd probs = softmax_rows(logits);
  const double norm = 1.0 / std::log(static_cast<double>(k));
  RowMatrixXd grad_probs(b, k);
  double total = 0.0;
  for (Index i = 0; i < b; ++i) {
    for (Index c = 0; c < k; ++c) {
      const double p = probs(i, c);
      if (p > 0.0) {
        total -= p * std::log(p);
        grad_probs(i, c) = -(std::log(p) + 1.0) * norm / static_cast<double>(b);
      } else {
        grad_probs(i, c) = 0.0;
      }
    }
  }
  return {total * norm / static_cast<double>(b), softmax_backward(probs, grad_probs)};
}

SelfTrainOutput selftrain(const RowMatrixXd& student_logits, const RowMatrixXd& teacher_probs,
                          double threshold) {
  const Index b = student_logits.rows();
  if (teacher_probs.rows() != b || teacher_probs.cols() != student_logits.cols()) {
    throw std::invalid_argument("teacher and student batches differ in shape");
  }
  std::vector<std::uint32_t> pseudo(static_cast<std::size_t>(b));
  double confident = 0.0;
  for (Index i = 0; i < b; ++i) {
    const Index top = argmax(teacher_probs.row(i));
    pseudo[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(top);
    if (teacher_probs(i, top) >= threshold) confident += 1.0;
  }
  SelfTrainOutput out;
  out.quality = confident / static_cast<double>(b);
  if (out.quality == 0.0) {
    out.loss = {0.0, RowMatrixXd::Zero(b, student_logits.cols())};
    return out;
  }
  LossOutput ce = cross_entropy(student_logits, pseudo);
  out.loss.value = out.quality * ce.value;
  out.loss.grad_logits = out.quality * ce.grad_logits;
  return out;
}

LossOutput calibration_loss(CalChoice choice, const RowMatrixXd& logits, Labels labels,
                            double mbls_margin) {
  switch (choice) {
    case CalChoice::dca: return dca(logits, labels);
    case CalChoice::mdca: return mdca(logits, labels);
    case CalChoice::mbls: return mbls(logits, mbls_margin);
    case CalChoice::none: break;
  }
  return {0.0, RowMatrixXd::Zero(logits.rows(), logits.cols())};
}

}  // namespace augcal
