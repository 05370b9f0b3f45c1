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

#include "augcal/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

#include "augcal/errors.hpp"

namespace augcal {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<PredictionRecord> make_records(const RowMatrixXd& probs,
                                           std::span<const std::uint32_t> labels) {
  if (static_cast<Index>(labels.size()) != probs.rows()) {
    throw std::invalid_argument("make_records: label count mismatch");
  }
  std::vector<PredictionRecord> out;
  out.reserve(labels.size());
  for (Index i = 0; i < probs.rows(); ++i) {
    PredictionRecord r;
    r.id = i;
    r.true_label = labels[static_cast<std::size_t>(i)];
    r.pred_label = static_cast<std::uint32_t>(argmax(probs.row(i)));
    r.confidence = probs(i, r.pred_label);
    r.probs = probs.row(i);
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Binning

int BinStats::bin_of(double confidence, int num_bins) {
  const double b = static_cast<double>(num_bins);
  int j = static_cast<int>(std::floor(confidence * b));
  j = std::clamp(j, 0, num_bins - 1);
  // keep the assignment consistent with the edges j / B as computed
  if (j > 0 && static_cast<double>(j) / b > confidence) --j;
  if (j + 1 < num_bins && static_cast<double>(j + 1) / b <= confidence) ++j;
  return j;
}

BinStats BinStats::accumulate(Records records, int num_bins) {
  if (num_bins < 1) throw std::invalid_argument("num_bins must be >= 1");
  BinStats s;
  s.num_bins = num_bins;
  s.count.assign(static_cast<std::size_t>(num_bins), 0);
  s.sum_confidence.assign(static_cast<std::size_t>(num_bins), 0.0);
  s.count_correct.assign(static_cast<std::size_t>(num_bins), 0);
  for (const auto& r : records) {
    const auto j = static_cast<std::size_t>(bin_of(r.confidence, num_bins));
    ++s.count[j];
    s.sum_confidence[j] += r.confidence;
    if (r.correct()) ++s.count_correct[j];
  }
  return s;
}

std::int64_t BinStats::total() const {
  return std::accumulate(count.begin(), count.end(), std::int64_t{0});
}

json BinStats::to_json() const {
  json bins = json::array();
  for (int j = 0; j < num_bins; ++j) {
    const auto k = static_cast<std::size_t>(j);
    json entry = {{"lower", static_cast<double>(j) / num_bins},
                  {"upper", static_cast<double>(j + 1) / num_bins},
                  {"count", count[k]},
                  {"count_correct", count_correct[k]},
                  {"sum_confidence", sum_confidence[k]}};
    if (count[k] > 0) {
      entry["accuracy"] = static_cast<double>(count_correct[k]) / static_cast<double>(count[k]);
      entry["mean_confidence"] = sum_confidence[k] / static_cast<double>(count[k]);
    } else {
      entry["accuracy"] = nullptr;
      entry["mean_confidence"] = nullptr;
    }
    bins.push_back(std::move(entry));
  }
  return bins;
}

// ---------------------------------------------------------------------------
// Metrics

namespace {

double binned_gap(const BinStats& bins) {
  const double n = static_cast<double>(bins.total());
  double value = 0.0;
  for (std::size_t j = 0; j < bins.count.size(); ++j) {
    if (bins.count[j] == 0) continue;
    const double nb = static_cast<double>(bins.count[j]);
    const double acc = static_cast<double>(bins.count_correct[j]) / nb;
    const double conf = bins.sum_confidence[j] / nb;
    value += (nb / n) * std::abs(acc - conf);
  }
  return value;
}

}  // namespace

double ece(Records records, int num_bins, BinStats* bins) {
  if (records.empty()) throw std::invalid_argument("ece: empty record set");
  BinStats stats = BinStats::accumulate(records, num_bins);
  const double value = binned_gap(stats);
  if (bins != nullptr) *bins = std::move(stats);
  return value;
}

std::optional<double> ic_ece(Records records, int num_bins) {
  std::vector<PredictionRecord> wrong;
  for (const auto& r : records) {
    if (!r.correct()) wrong.push_back(r);
  }
  if (wrong.empty()) return std::nullopt;
  return binned_gap(BinStats::accumulate(wrong, num_bins));
}

std::optional<double> overconfidence(Records records) {
  double sum = 0.0;
  std::int64_t n = 0;
  for (const auto& r : records) {
    if (r.correct()) continue;
    sum += r.confidence;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

double accuracy(Records records) {
  if (records.empty()) throw std::invalid_argument("accuracy: empty record set");
  std::int64_t hits = 0;
  for (const auto& r : records) hits += r.correct() ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

namespace {

/// Area under the error-rate-vs-rejected-fraction curve, trapezoid rule on
/// the grid r = i / N. `wrong_in_order[i]` flags the i-th rejected record.
/// Accumulated in long double: PRR divides two small differences of areas.
long double rejection_auc(const std::vector<bool>& wrong_in_order) {
  const auto n = static_cast<std::int64_t>(wrong_in_order.size());
  std::int64_t remaining_wrong = std::count(wrong_in_order.begin(), wrong_in_order.end(), true);
  std::vector<long double> error(static_cast<std::size_t>(n + 1), 0.0L);
  for (std::int64_t i = 0; i < n; ++i) {
    error[static_cast<std::size_t>(i)] =
        static_cast<long double>(remaining_wrong) / static_cast<long double>(n - i);
    if (wrong_in_order[static_cast<std::size_t>(i)]) --remaining_wrong;
  }
  long double area = 0.0L;
  for (std::int64_t i = 0; i < n; ++i) {
    area += 0.5L * (error[static_cast<std::size_t>(i)] + error[static_cast<std::size_t>(i + 1)]);
  }
  return area / static_cast<long double>(n);
}

}  // namespace

std::optional<double> prr(Records records) {
  const auto n = static_cast<std::int64_t>(records.size());
  if (n < 2) return std::nullopt;
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (records[a].confidence != records[b].confidence) return records[a].confidence < records[b].confidence;
    return records[a].id < records[b].id;
  });

  std::vector<bool> model_order;
  model_order.reserve(order.size());
  std::int64_t wrong = 0;
  for (std::size_t idx : order) {
    model_order.push_back(!records[idx].correct());
    wrong += records[idx].correct() ? 0 : 1;
  }
  if (wrong == 0 || wrong == n) return std::nullopt;

  std::vector<bool> oracle_order(static_cast<std::size_t>(n), false);
  std::fill(oracle_order.begin(), oracle_order.begin() + wrong, true);

  const long double base_error = static_cast<long double>(wrong) / static_cast<long double>(n);
  // constant error until everything is rejected, then 0
  const long double auc_random = base_error * (1.0L - 0.5L / static_cast<long double>(n));
  const long double auc_model = rejection_auc(model_order);
  const long double auc_oracle = rejection_auc(oracle_order);
  return static_cast<double>(100.0L * (auc_random - auc_model) / (auc_random - auc_oracle));
}

std::optional<double> nll(Records records) {
  if (records.empty()) return std::nullopt;
  double total = 0.0;
  for (const auto& r : records) {
    if (r.probs.size() == 0 || r.true_label >= r.probs.size()) return std::nullopt;
    total -= std::log(std::max(r.probs(r.true_label), std::numeric_limits<double>::min()));
  }
  return total / static_cast<double>(records.size());
}

CalibrationReport report(Records records, int num_bins) {
  if (records.empty()) throw std::invalid_argument("report: empty record set");
  CalibrationReport rep;
  rep.n = static_cast<std::int64_t>(records.size());
  rep.accuracy = accuracy(records);
  rep.ece = ece(records, num_bins, &rep.bins);
  rep.ic_ece = ic_ece(records, num_bins);
  rep.oc = overconfidence(records);
  rep.prr = prr(records);
  rep.nll = nll(records);
  return rep;
}

namespace {
json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
}  // namespace

json CalibrationReport::to_json() const {
  return {{"n", n},
          {"accuracy", accuracy},
          {"ece", ece},
          {"ic_ece", optional_json(ic_ece)},
          {"oc", optional_json(oc)},
          {"prr", optional_json(prr)},
          {"nll", optional_json(nll)},
          {"num_bins", bins.num_bins},
          {"bins", bins.to_json()}};
}

// ---------------------------------------------------------------------------
// Predictions CSV

namespace {

std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <typename T>
bool parse_number(std::string_view field, T& out) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) field.remove_suffix(1);
  if (field.empty()) return false;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
  return ec == std::errc() && ptr == field.data() + field.size();
}

}  // namespace

void write_predictions_csv(Records records, const fs::path& file) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + file.string());
  out << "id,true_label,pred_label,confidence\n";
  for (const auto& r : records) {
    out << r.id << ',' << r.true_label << ',' << r.pred_label << ',' << format_g17(r.confidence) << '\n';
  }
  if (!out) throw ConfigError("failed writing " + file.string());
}

std::vector<PredictionRecord> read_predictions_csv(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError("cannot open predictions file " + file.string());
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(file.string() + ": empty file (missing header)");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "id,true_label,pred_label,confidence") {
    throw ConfigError(file.string() + ": row 1: expected header id,true_label,pred_label,confidence");
  }
  std::vector<PredictionRecord> records;
  std::int64_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (std::size_t pos; (pos = rest.find(',')) != std::string_view::npos;) {
      fields.push_back(rest.substr(0, pos));
      rest.remove_prefix(pos + 1);
    }
    fields.push_back(rest);
    const auto fail = [&](const std::string& why) {
      return ConfigError(file.string() + ": row " + std::to_string(row) + ": " + why);
    };
    if (fields.size() != 4) throw fail("expected 4 fields, found " + std::to_string(fields.size()));
    PredictionRecord r;
    if (!parse_number(fields[0], r.id)) throw fail("invalid id");
    if (!parse_number(fields[1], r.true_label)) throw fail("invalid true_label");
    if (!parse_number(fields[2], r.pred_label)) throw fail("invalid pred_label");
    if (!parse_number(fields[3], r.confidence)) throw fail("invalid confidence");
    if (!(r.confidence >= 0.0 && r.confidence <= 1.0)) throw fail("confidence outside [0, 1]");
    records.push_back(std::move(r));
  }
  if (records.empty()) throw ConfigError(file.string() + ": no prediction rows");
  return records;
}

void write_probs_sidecar(Records records, const fs::path& file) {
  if (records.empty()) return;
  const Index k = records.front().probs.size();
  Vector<double> flat(static_cast<Index>(records.size()) * k);
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].probs.size() != k) throw std::invalid_argument("records carry ragged probabilities");
    flat.segment(static_cast<Index>(i) * k, k) = records[i].probs.transpose();
  }
  write_f64_blob(file, flat);
}

void attach_probs_sidecar(std::vector<PredictionRecord>& records, const fs::path& file) {
  const auto bytes = fs::file_size(file);
  const auto n = static_cast<std::uintmax_t>(records.size());
  if (n == 0 || bytes % (8 * n) != 0) throw DataError(file.string() + ": size does not match record count");
  const auto k = static_cast<Index>(bytes / (8 * n));
  const Vector<double> flat = read_f64_blob(file, static_cast<Index>(n) * k);
  for (std::size_t i = 0; i < records.size(); ++i) {
    records[i].probs = flat.segment(static_cast<Index>(i) * k, k).transpose();
  }
}

// ---------------------------------------------------------------------------
// MMD

namespace {

bool lexicographically_greater(const Eigen::Ref<const RowMatrixXd>& a,
                               const Eigen::Ref<const RowMatrixXd>& b) {
  if (a.rows() != b.rows()) return a.rows() > b.rows();
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      if (a(i, j) != b(i, j)) return a(i, j) > b(i, j);
    }
  }
  return false;
}

double mean_kernel(const Eigen::Ref<const RowMatrixXd>& x, const Eigen::Ref<const RowMatrixXd>& y,
                   double inv_two_sigma_sq) {
  double total = 0.0;
  for (Index i = 0; i < x.rows(); ++i) {
    double row_total = 0.0;
    for (Index j = 0; j < y.rows(); ++j) {
      row_total += std::exp(-(x.row(i) - y.row(j)).squaredNorm() * inv_two_sigma_sq);
    }
    total += row_total;
  }
  return total / static_cast<double>(x.rows() * y.rows());
}

}  // namespace

double median_pairwise_distance(const Eigen::Ref<const RowMatrixXd>& a,
                                const Eigen::Ref<const RowMatrixXd>& b, std::uint64_t seed,
                                Index max_points) {
  const Index total = a.rows() + b.rows();
  std::vector<Index> pick(static_cast<std::size_t>(total));
  std::iota(pick.begin(), pick.end(), Index{0});
  const Index used = std::min(total, max_points);
  if (used < total) {
    Rng rng(seed, "mmd/median-subsample");
    for (Index i = 0; i < used; ++i) {
      const auto j = i + static_cast<Index>(rng.uniform_int(static_cast<std::uint64_t>(total - i)));
      std::swap(pick[static_cast<std::size_t>(i)], pick[static_cast<std::size_t>(j)]);
    }
    pick.resize(static_cast<std::size_t>(used));
  }
  const auto point = [&](Index idx) {
    return idx < a.rows() ? a.row(idx) : b.row(idx - a.rows());
  };
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(used * (used - 1) / 2));
  for (Index i = 0; i < used; ++i) {
    for (Index j = i + 1; j < used; ++j) {
      dist.push_back((point(pick[static_cast<std::size_t>(i)]) - point(pick[static_cast<std::size_t>(j)])).norm());
    }
  }
  if (dist.empty()) return 0.0;
  const std::size_t mid = dist.size() / 2;
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid), dist.end());
  const double upper = dist[mid];
  if (dist.size() % 2 == 1) return upper;
  const double lower = *std::max_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

MmdResult mmd2_rbf(const Eigen::Ref<const RowMatrixXd>& a, const Eigen::Ref<const RowMatrixXd>& b,
                   const Bandwidth& bandwidth) {
  if (a.rows() < 2 || b.rows() < 2) throw std::invalid_argument("mmd2_rbf needs at least two samples per pool");
  if (a.cols() != b.cols()) throw std::invalid_argument("mmd2_rbf: feature dimensions differ");
  // canonical argument order makes the estimator exactly symmetric
  if (lexicographically_greater(a, b)) {
    MmdResult swapped = mmd2_rbf(b, a, bandwidth);
    std::swap(swapped.n, swapped.m);
    return swapped;
  }
  MmdResult out;
  out.n = a.rows();
  out.m = b.rows();
  out.bandwidth = bandwidth.sigma ? *bandwidth.sigma
                                  : median_pairwise_distance(a, b, bandwidth.seed, bandwidth.median_points);
  if (!(out.bandwidth > 0.0)) {
    out.mmd2 = 0.0;
    return out;
  }
  const double inv = 1.0 / (2.0 * out.bandwidth * out.bandwidth);
  const double kaa = mean_kernel(a, a, inv);
  const double kbb = mean_kernel(b, b, inv);
  const double kab = mean_kernel(a, b, inv);
  out.mmd2 = kaa + kbb - 2.0 * kab;
  return out;
}

// ---------------------------------------------------------------------------
// Renyi d2 by quadrature

namespace {

struct Box {
  std::vector<double> lo, hi;
};

Box covering_box(const DensityPair& densities, double margin) {
  const Index d = densities.source.dim();
  Box box{std::vector<double>(static_cast<std::size_t>(d), std::numeric_limits<double>::infinity()),
          std::vector<double>(static_cast<std::size_t>(d), -std::numeric_limits<double>::infinity())};
  for (const auto* mix : {&densities.source, &densities.target}) {
    for (const auto& c : mix->components()) {
      for (Index k = 0; k < d; ++k) {
        auto& lo = box.lo[static_cast<std::size_t>(k)];
        auto& hi = box.hi[static_cast<std::size_t>(k)];
        lo = std::min(lo, c.mean(k) - margin * c.stddev);
        hi = std::max(hi, c.mean(k) + margin * c.stddev);
      }
    }
  }
  return box;
}

double simpson_weight(Index i, Index n) {
  if (i == 0 || i == n) return 1.0;
  return i % 2 == 1 ? 4.0 : 2.0;
}

/// Composite Simpson with n (even) intervals per axis.
double simpson(const std::function<double(const Vector<double>&)>& f, const Box& box, Index n) {
  const auto d = box.lo.size();
  Vector<double> x(static_cast<Index>(d));
  if (d == 1) {
    const double h = (box.hi[0] - box.lo[0]) / static_cast<double>(n);
    double total = 0.0;
    for (Index i = 0; i <= n; ++i) {
      x(0) = box.lo[0] + h * static_cast<double>(i);
      total += simpson_weight(i, n) * f(x);
    }
    return total * h / 3.0;
  }
  const double h0 = (box.hi[0] - box.lo[0]) / static_cast<double>(n);
  const double h1 = (box.hi[1] - box.lo[1]) / static_cast<double>(n);
  double total = 0.0;
  for (Index i = 0; i <= n; ++i) {
    x(0) = box.lo[0] + h0 * static_cast<double>(i);
    double row = 0.0;
    for (Index j = 0; j <= n; ++j) {
      x(1) = box.lo[1] + h1 * static_cast<double>(j);
      row += simpson_weight(j, n) * f(x);
    }
    total += simpson_weight(i, n) * row;
  }
  return total * h0 * h1 / 9.0;
}

std::optional<double> refine(const std::function<double(const Vector<double>&)>& f, const Box& box,
                             double rel_tol) {
  const Index n_max = box.lo.size() == 1 ? (Index{1} << 16) : (Index{1} << 10);
  Index n = 32;
  double prev = simpson(f, box, n);
  while (n < n_max) {
    n *= 2;
    const double cur = simpson(f, box, n);
    if (!std::isfinite(cur)) return std::nullopt;
    if (std::abs(cur - prev) <= rel_tol * std::abs(cur)) return cur;
    prev = cur;
  }
  return std::nullopt;
}

}  // namespace

double renyi_d2(const DensityPair& densities, double rel_tol) {
  const Index d = densities.source.dim();
  if (d < 1 || d > 2) throw std::invalid_argument("renyi_d2 supports d = 1 or 2");
  if (densities.target.dim() != d) throw std::invalid_argument("renyi_d2: densities differ in dim");
  const auto integrand = [&](const Vector<double>& x) {
    return std::exp(2.0 * densities.log_density_target(x) - densities.log_density_source(x));
  };
  // The value must also be stable as the box grows; a heavy target tail
  // makes the integral diverge.
  std::optional<double> previous;
  for (double margin : {8.0, 16.0, 32.0}) {
    const auto value = refine(integrand, covering_box(densities, margin), rel_tol);
    if (!value) return std::numeric_limits<double>::infinity();
    if (previous && std::abs(*value - *previous) <= 10.0 * rel_tol * std::abs(*value)) return *value;
    previous = value;
  }
  return std::numeric_limits<double>::infinity();
}

// ---------------------------------------------------------------------------
// Bound verification

TranslateAug TranslateAug::from_means(const LabeledDataset& source, const UnlabeledDataset& target) {
  const Vector<double> ms = source.features.matrix().colwise().mean().transpose();
  const Vector<double> mt = target.features.matrix().colwise().mean().transpose();
  return {mt - ms};
}

std::string to_string(BoundVerdict v) {
  switch (v) {
    case BoundVerdict::holds: return "holds";
    case BoundVerdict::inconclusive: return "inconclusive";
    case BoundVerdict::violated: return "violated";
  }
  return "?";
}

bool BoundReport::bound_within_tolerance(double sigmas) const {
  return target_cal_loss <= upper_bound_u + sigmas * stderr_bound_gap;
}

bool BoundReport::aug_within_tolerance(double sigmas) const {
  if (!upper_bound_u_aug || !stderr_aug_gap) return false;
  return *upper_bound_u_aug <= upper_bound_u + sigmas * *stderr_aug_gap;
}

json BoundReport::to_json() const {
  json j = {{"n_mc", n_mc},
            {"target_cal_loss", target_cal_loss},
            {"divergence_d2", divergence_d2},
            {"source_cal_sq", source_cal_sq},
            {"upper_bound_u", upper_bound_u},
            {"divergence_d2_aug", optional_json(divergence_d2_aug)},
            {"source_cal_sq_aug", optional_json(source_cal_sq_aug)},
            {"upper_bound_u_aug", optional_json(upper_bound_u_aug)},
            {"stderr",
             {{"target_cal_loss", stderr_target_cal_loss},
              {"divergence_d2", stderr_divergence_d2},
              {"source_cal_sq", stderr_source_cal_sq},
              {"upper_bound_u", stderr_upper_bound_u},
              {"upper_bound_u_aug", optional_json(stderr_upper_bound_u_aug)},
              {"bound_gap", stderr_bound_gap},
              {"aug_gap", optional_json(stderr_aug_gap)}}},
            {"bound", to_string(bound)},
            {"aug_tighter", aug_tighter ? json(to_string(*aug_tighter)) : json(nullptr)}};
  return j;
}

Vector<double> pointwise_calibration_loss(const MlpParams& model,
                                          const Eigen::Ref<const RowMatrixXd>& x,
                                          std::span<const std::uint32_t> labels) {
  const RowMatrixXd probs = softmax_rows(forward(model, x));
  Vector<double> loss(probs.rows());
  for (Index i = 0; i < probs.rows(); ++i) {
    const Index yhat = argmax(probs.row(i));
    const double correct = yhat == static_cast<Index>(labels[static_cast<std::size_t>(i)]) ? 1.0 : 0.0;
    loss(i) = std::abs(correct - probs(i, yhat));
  }
  return loss;
}

namespace {

double mean_of(const Vector<double>& v) { return v.sum() / static_cast<double>(v.size()); }

double stderr_of(const Vector<double>& v) {
  const double n = static_cast<double>(v.size());
  if (v.size() < 2) return std::numeric_limits<double>::infinity();
  const double mu = mean_of(v);
  return std::sqrt((v.array() - mu).square().sum() / (n - 1.0) / n);
}

BoundVerdict verdict(double lhs, double rhs, double se) {
  if (lhs + 3.0 * se < rhs) return BoundVerdict::holds;
  if (lhs - 3.0 * se > rhs) return BoundVerdict::violated;
  return BoundVerdict::inconclusive;
}

constexpr double kMaxImportanceWeight = 1e6;

Vector<double> squared_weights(const GaussianMixture& target, const GaussianMixture& proposal,
                               const Eigen::Ref<const RowMatrixXd>& x) {
  Vector<double> w2(x.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    const Vector<double> xi = x.row(i).transpose();
    const double w = std::exp(target.log_density(xi) - proposal.log_density(xi));
    if (!(w <= kMaxImportanceWeight)) {
      throw NumericError("importance weight " + std::to_string(w) + " at sample " + std::to_string(i) +
                         " exceeds 1e6; the shift is too large for importance sampling");
    }
    w2(i) = w * w;
  }
  return w2;
}

}  // namespace

BoundReport verify_bound(const MlpParams& model, const DensityPair& densities,
                         const LabeledDataset& source, const LabeledDataset& target,
                         const TranslateAug* aug) {
  if (source.kind != DataKind::tabular || target.kind != DataKind::tabular) {
    throw ConfigError("verify_bound needs tabular data with known densities");
  }
  if (source.size() < 2 || target.size() < 2) throw std::invalid_argument("verify_bound needs n_mc >= 2");
  const auto xs = source.features.matrix();
  const auto xt = target.features.matrix();

  BoundReport rep;
  rep.n_mc = source.size();

  const Vector<double> target_loss = pointwise_calibration_loss(model, xt, target.labels);
  rep.target_cal_loss = mean_of(target_loss);
  rep.stderr_target_cal_loss = stderr_of(target_loss);

  const Vector<double> w2 = squared_weights(densities.target, densities.source, xs);
  const Vector<double> source_loss = pointwise_calibration_loss(model, xs, source.labels);
  const Vector<double> source_sq = source_loss.array().square().matrix();
  rep.divergence_d2 = mean_of(w2);
  rep.source_cal_sq = mean_of(source_sq);
  rep.upper_bound_u = 0.5 * rep.divergence_d2 + 0.5 * rep.source_cal_sq;
  rep.stderr_divergence_d2 = stderr_of(w2);
  rep.stderr_source_cal_sq = stderr_of(source_sq);
  const Vector<double> u_terms = 0.5 * w2 + 0.5 * source_sq;
  rep.stderr_upper_bound_u = stderr_of(u_terms);
  rep.stderr_bound_gap = std::hypot(rep.stderr_upper_bound_u, rep.stderr_target_cal_loss);
  rep.bound = verdict(rep.target_cal_loss, rep.upper_bound_u, rep.stderr_bound_gap);

  if (aug != nullptr) {
    RowMatrixXd moved = xs;
    moved.rowwise() += aug->offset.transpose();
    const GaussianMixture augmented_source = densities.source.translated(aug->offset);
    const Vector<double> w2_aug = squared_weights(densities.target, augmented_source, moved);
    const Vector<double> loss_aug = pointwise_calibration_loss(model, moved, source.labels);
    const Vector<double> sq_aug = loss_aug.array().square().matrix();
    rep.divergence_d2_aug = mean_of(w2_aug);
    rep.source_cal_sq_aug = mean_of(sq_aug);
    rep.upper_bound_u_aug = 0.5 * *rep.divergence_d2_aug + 0.5 * *rep.source_cal_sq_aug;
    const Vector<double> u_aug_terms = 0.5 * w2_aug + 0.5 * sq_aug;
    rep.stderr_upper_bound_u_aug = stderr_of(u_aug_terms);
    rep.stderr_aug_gap = stderr_of(Vector<double>(u_terms - u_aug_terms));
    rep.aug_tighter = verdict(*rep.upper_bound_u_aug, rep.upper_bound_u, *rep.stderr_aug_gap);
  }
  return rep;
}

}  // namespace augcal
