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

#include "augcal/data.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>

#include "augcal/errors.hpp"

namespace augcal {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(DomainTag tag) { return tag == DomainTag::source ? "source" : "target"; }
std::string to_string(DataKind kind) { return kind == DataKind::image ? "image" : "tabular"; }

namespace {

DomainTag parse_domain(const std::string& s) {
  if (s == "source") return DomainTag::source;
  if (s == "target") return DomainTag::target;
  throw DataError("manifest: unknown domain_tag '" + s + "'");
}

DataKind parse_kind(const std::string& s) {
  if (s == "image") return DataKind::image;
  if (s == "tabular") return DataKind::tabular;
  throw DataError("manifest: unknown kind '" + s + "'");
}

template <typename T>
T read_field(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("field '") + key + "' has the wrong type");
  }
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError(std::string(what) + ": unknown field '" + key + "'");
  }
}

}  // namespace

void LabeledDataset::validate() const {
  const Index n = size();
  if (n < 1) throw DataError("dataset is empty");
  if (static_cast<Index>(labels.size()) != n) {
    throw DataError("dataset has " + std::to_string(labels.size()) + " labels for " +
                    std::to_string(n) + " samples");
  }
  if (num_classes < 1) throw DataError("num_classes must be positive");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= static_cast<std::uint32_t>(num_classes)) {
      throw DataError("label " + std::to_string(labels[i]) + " at index " + std::to_string(i) +
                      " is outside [0, " + std::to_string(num_classes) + ")");
    }
  }
  if (kind == DataKind::image) {
    if (features.rank() != 4) throw DataError("image features must be [N, H, W, C]");
    const auto& v = features.data();
    if (v.size() > 0 && (v.minCoeff() < 0.0 || v.maxCoeff() > 1.0)) {
      throw DataError("image features must lie in [0, 1]");
    }
  } else if (features.rank() != 2) {
    throw DataError("tabular features must be [N, d]");
  }
  if (!features.all_finite()) throw DataError("features contain non-finite values");
}

UnlabeledDataset strip_labels(const LabeledDataset& ds) {
  return {ds.features, ds.num_classes, ds.kind};
}

LabeledDataset select_rows(const LabeledDataset& ds, std::span<const Index> rows) {
  std::vector<Index> shape = ds.features.shape();
  shape[0] = static_cast<Index>(rows.size());
  LabeledDataset out;
  out.features = TensorXd(shape);
  out.num_classes = ds.num_classes;
  out.domain = ds.domain;
  out.kind = ds.kind;
  out.generator_config = ds.generator_config;
  out.labels.reserve(rows.size());
  auto dst = out.features.matrix();
  const auto src = ds.features.matrix();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    dst.row(static_cast<Index>(i)) = src.row(rows[i]);
    out.labels.push_back(ds.labels.at(static_cast<std::size_t>(rows[i])));
  }
  return out;
}

// ---------------------------------------------------------------------------
// GaussianMixture

GaussianMixture::GaussianMixture(std::vector<GaussianComponent> components)
    : components_(std::move(components)) {
  if (components_.empty()) throw std::invalid_argument("mixture needs at least one component");
  dim_ = components_.front().mean.size();
  double total = 0.0;
  for (const auto& c : components_) {
    if (c.mean.size() != dim_) throw std::invalid_argument("mixture components differ in dim");
    if (!(c.stddev > 0.0)) throw std::invalid_argument("mixture stddev must be positive");
    total += c.weight;
  }
  for (auto& c : components_) c.weight /= total;
}

double GaussianMixture::log_density(const Eigen::Ref<const Vector<double>>& x) const {
  // log-sum-exp over components
  std::vector<double> terms;
  terms.reserve(components_.size());
  for (const auto& c : components_) {
    const double var = c.stddev * c.stddev;
    const double sq = (x - c.mean).squaredNorm();
    terms.push_back(std::log(c.weight) - 0.5 * static_cast<double>(dim_) *
                                             std::log(2.0 * std::numbers::pi * var) -
                    0.5 * sq / var);
  }
  const double top = *std::max_element(terms.begin(), terms.end());
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - top);
  return top + std::log(acc);
}

Vector<double> GaussianMixture::sample(Rng& rng) const {
  const double u = rng.uniform();
  std::size_t pick = components_.size() - 1;
  double cum = 0.0;
  for (std::size_t i = 0; i < components_.size(); ++i) {
    cum += components_[i].weight;
    if (u < cum) {
      pick = i;
      break;
    }
  }
  const auto& c = components_[pick];
  Vector<double> x(dim_);
  for (Index k = 0; k < dim_; ++k) x(k) = c.mean(k) + c.stddev * rng.normal();
  return x;
}

GaussianMixture GaussianMixture::translated(const Vector<double>& offset) const {
  auto moved = components_;
  for (auto& c : moved) c.mean += offset;
  return GaussianMixture(std::move(moved));
}

json GaussianMixture::to_json() const {
  json out = json::array();
  for (const auto& c : components_) {
    out.push_back({{"weight", c.weight},
                   {"mean", std::vector<double>(c.mean.data(), c.mean.data() + c.mean.size())},
                   {"stddev", c.stddev}});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Spectral shift

void SpectralShiftConfig::validate() const {
  if (image_size < 8) throw ConfigError("image_size must be at least 8");
  if (channels < 1) throw ConfigError("channels must be at least 1");
  if (num_classes < 2) throw ConfigError("num_classes must be at least 2");
  if (n_per_domain < num_classes) throw ConfigError("n_per_domain must be at least num_classes");
  if (!(noise_std >= 0.0)) throw ConfigError("noise_std must be non-negative");
  if (!(base_frequency > 0.0)) throw ConfigError("base_frequency must be positive");
}

json SpectralShiftConfig::to_json() const {
  return {{"n_per_domain", n_per_domain},       {"image_size", image_size},
          {"channels", channels},               {"num_classes", num_classes},
          {"seed", seed},                       {"base_frequency", base_frequency},
          {"amplitude", amplitude},             {"orientation_jitter", orientation_jitter},
          {"noise_std", noise_std},             {"highfreq_scale", highfreq_scale},
          {"highfreq_radius", highfreq_radius}, {"brightness_offset", brightness_offset},
          {"contrast_scale", contrast_scale}};
}

SpectralShiftConfig SpectralShiftConfig::from_json(const json& j) {
  reject_unknown(j,
                 {"n_per_domain", "image_size", "channels", "num_classes", "seed",
                  "base_frequency", "amplitude", "orientation_jitter", "noise_std",
                  "highfreq_scale", "highfreq_radius", "brightness_offset", "contrast_scale"},
                 "spectral-shift config");
  SpectralShiftConfig c;
  c.n_per_domain = read_field(j, "n_per_domain", c.n_per_domain);
  c.image_size = read_field(j, "image_size", c.image_size);
  c.channels = read_field(j, "channels", c.channels);
  c.num_classes = read_field(j, "num_classes", c.num_classes);
  c.seed = read_field(j, "seed", c.seed);
  c.base_frequency = read_field(j, "base_frequency", c.base_frequency);
  c.amplitude = read_field(j, "amplitude", c.amplitude);
  c.orientation_jitter = read_field(j, "orientation_jitter", c.orientation_jitter);
  c.noise_std = read_field(j, "noise_std", c.noise_std);
  c.highfreq_scale = read_field(j, "highfreq_scale", c.highfreq_scale);
  c.highfreq_radius = read_field(j, "highfreq_radius", c.highfreq_radius);
  c.brightness_offset = read_field(j, "brightness_offset", c.brightness_offset);
  c.contrast_scale = read_field(j, "contrast_scale", c.contrast_scale);
  return c;
}

RowMatrixXd render_grating(Index size, double frequency, double amplitude, double orientation,
                           double phase) {
  RowMatrixXd img(size, size);
  const double kx = 2.0 * std::numbers::pi * frequency * std::cos(orientation) / size;
  const double ky = 2.0 * std::numbers::pi * frequency * std::sin(orientation) / size;
  for (Index r = 0; r < size; ++r) {
    for (Index c = 0; c < size; ++c) {
      img(r, c) = 0.5 + amplitude * std::cos(kx * c + ky * r + phase);
    }
  }
  return img;
}

RowMatrixXd apply_target_shift(const RowMatrixXd& channel, const SpectralShiftConfig& config) {
  const Index h = channel.rows();
  const Index w = channel.cols();
  ComplexMatrixXd spec = fft2(channel);
  const double cutoff = config.highfreq_radius * static_cast<double>(h);
  for (Index u = 0; u < h; ++u) {
    const double fu = static_cast<double>(u <= h / 2 ? u : u - h);
    for (Index v = 0; v < w; ++v) {
      const double fv = static_cast<double>(v <= w / 2 ? v : v - w);
      if (std::sqrt(fu * fu + fv * fv) > cutoff) spec(u, v) *= config.highfreq_scale;
    }
  }
  RowMatrixXd out = ifft2(spec).real();
  const double mean = out.mean();
  out = ((out.array() - mean) * config.contrast_scale + mean + config.brightness_offset).matrix();
  return out;
}

DomainPair generate_spectral_shift(const SpectralShiftConfig& config) {
  config.validate();
  const Index n = config.n_per_domain;
  const Index h = config.image_size;
  const Index ch = config.channels;
  const int k = config.num_classes;

  auto make = [&](DomainTag tag) {
    Rng rng(config.seed, "spectral-shift/" + to_string(tag));
    LabeledDataset ds;
    ds.features = TensorXd({n, h, h, ch});
    ds.num_classes = k;
    ds.domain = tag;
    ds.kind = DataKind::image;
    ds.generator_config = {{"kind", "spectral-shift"}, {"params", config.to_json()}};
    ds.labels.resize(static_cast<std::size_t>(n));
    auto rows = ds.features.matrix();
    for (Index i = 0; i < n; ++i) {
      const auto label = static_cast<std::uint32_t>(rng.uniform_int(static_cast<std::uint64_t>(k)));
      const double orientation = std::numbers::pi * label / k + config.orientation_jitter * rng.normal();
      const double phase = 2.0 * std::numbers::pi * rng.uniform();
      const RowMatrixXd clean = render_grating(h, config.base_frequency, config.amplitude, orientation, phase);
      for (Index c = 0; c < ch; ++c) {
        RowMatrixXd img = clean;
        for (Index p = 0; p < img.size(); ++p) img.data()[p] += config.noise_std * rng.normal();
        if (tag == DomainTag::target) img = apply_target_shift(img, config);
        img = img.cwiseMax(0.0).cwiseMin(1.0);
        for (Index r = 0; r < h; ++r) {
          for (Index q = 0; q < h; ++q) rows(i, (r * h + q) * ch + c) = img(r, q);
        }
      }
      ds.labels[static_cast<std::size_t>(i)] = label;
    }
    return ds;
  };
  return {make(DomainTag::source), make(DomainTag::target)};
}

// ---------------------------------------------------------------------------
// Gaussian shift

void GaussianShiftConfig::validate() const {
  if (dim != 1 && dim != 2) throw ConfigError("dim must be 1 or 2 (got " + std::to_string(dim) + ")");
  if (num_classes != 2) throw ConfigError("num_classes must be 2 for gauss-shift");
  if (!(mean_shift >= 0.0)) throw ConfigError("mean_shift must be non-negative");
  if (n_per_domain < 2) throw ConfigError("n_per_domain must be at least 2");
}

json GaussianShiftConfig::to_json() const {
  return {{"n_per_domain", n_per_domain},
          {"dim", dim},
          {"num_classes", num_classes},
          {"mean_shift", mean_shift},
          {"seed", seed}};
}

GaussianShiftConfig GaussianShiftConfig::from_json(const json& j) {
  reject_unknown(j, {"n_per_domain", "dim", "num_classes", "mean_shift", "seed"},
                 "gauss-shift config");
  GaussianShiftConfig c;
  c.n_per_domain = read_field(j, "n_per_domain", c.n_per_domain);
  c.dim = read_field(j, "dim", c.dim);
  c.num_classes = read_field(j, "num_classes", c.num_classes);
  c.mean_shift = read_field(j, "mean_shift", c.mean_shift);
  c.seed = read_field(j, "seed", c.seed);
  return c;
}

DensityPair gaussian_shift_densities(const GaussianShiftConfig& config) {
  config.validate();
  const Index d = config.dim;
  Vector<double> e0 = Vector<double>::Zero(d);
  e0(0) = 1.0;
  GaussianMixture source({{0.5, -e0, 1.0}, {0.5, e0, 1.0}});
  Vector<double> shift = Vector<double>::Zero(d);
  shift(d - 1) = config.mean_shift;
  return {source, source.translated(shift)};
}

std::uint32_t gaussian_shift_label(const Eigen::Ref<const Vector<double>>& x) {
  return x(0) > 0.0 ? 1U : 0U;
}

GaussianShift generate_gaussian_shift(const GaussianShiftConfig& config) {
  DensityPair densities = gaussian_shift_densities(config);
  auto make = [&](DomainTag tag, const GaussianMixture& mixture) {
    Rng rng(config.seed, "gauss-shift/" + to_string(tag));
    LabeledDataset ds;
    ds.features = TensorXd({config.n_per_domain, config.dim});
    ds.num_classes = 2;
    ds.domain = tag;
    ds.kind = DataKind::tabular;
    ds.generator_config = {{"kind", "gauss-shift"}, {"params", config.to_json()}};
    auto rows = ds.features.matrix();
    for (Index i = 0; i < config.n_per_domain; ++i) {
      const Vector<double> x = mixture.sample(rng);
      rows.row(i) = x.transpose();
      ds.labels.push_back(gaussian_shift_label(x));
    }
    return ds;
  };
  GaussianShift out;
  out.source = make(DomainTag::source, densities.source);
  out.target = make(DomainTag::target, densities.target);
  out.densities = std::move(densities);
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

template <typename T>
void put_le(std::string& buf, T value) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t b = 0; b < sizeof(T); ++b) buf.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
}

template <typename T>
T get_le(const unsigned char* p) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  U bits = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b) bits |= static_cast<U>(p[b]) << (8 * b);
  return std::bit_cast<T>(bits);
}

void write_file(const fs::path& file, const std::string& bytes) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + file.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ConfigError("failed writing " + file.string());
}

std::string read_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("missing file " + file.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

void write_f64_blob(const fs::path& file, const Vector<double>& values) {
  std::string buf;
  buf.reserve(static_cast<std::size_t>(values.size()) * 8);
  for (Index i = 0; i < values.size(); ++i) put_le(buf, values(i));
  write_file(file, buf);
}

Vector<double> read_f64_blob(const fs::path& file, Index expected_count) {
  const std::string bytes = read_file(file);
  const auto expected = static_cast<std::size_t>(expected_count) * 8;
  if (bytes.size() != expected) {
    throw DataError(file.filename().string() + ": expected " + std::to_string(expected) +
                    " bytes, found " + std::to_string(bytes.size()));
  }
  Vector<double> out(expected_count);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  for (Index i = 0; i < expected_count; ++i) out(i) = get_le<double>(p + 8 * i);
  return out;
}

void save_dataset(const LabeledDataset& ds, const fs::path& dir, const std::string& name) {
  ds.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create " + dir.string() + ": " + ec.message());

  json manifest = {{"name", name},
                   {"num_samples", ds.size()},
                   {"shape", ds.features.shape()},
                   {"num_classes", ds.num_classes},
                   {"dtype", "f64"},
                   {"byte_order", "LE"},
                   {"feature_file", "features.bin"},
                   {"label_file", "labels.bin"},
                   {"domain_tag", to_string(ds.domain)},
                   {"kind", to_string(ds.kind)},
                   {"generator_config", ds.generator_config}};
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  write_f64_blob(dir / "features.bin", ds.features.data());

  std::string labels;
  labels.reserve(ds.labels.size() * 4);
  for (std::uint32_t y : ds.labels) put_le(labels, y);
  write_file(dir / "labels.bin", labels);
}

LabeledDataset load_dataset(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("dataset directory not found: " + dir.string());
  json manifest;
  try {
    manifest = json::parse(read_file(dir / "manifest.json"));
  } catch (const json::parse_error& e) {
    throw DataError("manifest.json: " + std::string(e.what()));
  }

  LabeledDataset ds;
  std::vector<Index> shape;
  Index n = 0;
  std::string feature_file, label_file;
  try {
    if (manifest.at("dtype").get<std::string>() != "f64") throw DataError("manifest: dtype must be f64");
    if (manifest.at("byte_order").get<std::string>() != "LE") throw DataError("manifest: byte_order must be LE");
    shape = manifest.at("shape").get<std::vector<Index>>();
    n = manifest.at("num_samples").get<Index>();
    ds.num_classes = manifest.at("num_classes").get<int>();
    feature_file = manifest.at("feature_file").get<std::string>();
    label_file = manifest.at("label_file").get<std::string>();
    ds.domain = parse_domain(manifest.value("domain_tag", std::string("source")));
    ds.kind = parse_kind(manifest.value("kind", shape.size() == 4 ? std::string("image")
                                                                 : std::string("tabular")));
    ds.generator_config = manifest.value("generator_config", json::object());
  } catch (const json::exception& e) {
    throw DataError("manifest.json: " + std::string(e.what()));
  }
  if (shape.empty() || shape[0] != n) throw DataError("manifest: shape[0] does not match num_samples");
  for (Index extent : shape) {
    if (extent < 0) throw DataError("manifest: negative extent in shape");
  }

  ds.features = TensorXd(shape, read_f64_blob(dir / feature_file, TensorXd::product(shape)));

  const std::string label_bytes = read_file(dir / label_file);
  if (label_bytes.size() != static_cast<std::size_t>(n) * 4) {
    throw DataError(label_file + ": expected " + std::to_string(n * 4) + " bytes, found " +
                    std::to_string(label_bytes.size()));
  }
  const auto* p = reinterpret_cast<const unsigned char*>(label_bytes.data());
  ds.labels.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) ds.labels[static_cast<std::size_t>(i)] = get_le<std::uint32_t>(p + 4 * i);

  ds.validate();
  return ds;
}

}  // namespace augcal
