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

#include "augcal/augment.hpp"

#include <algorithm>
#include <cmath>

#include "augcal/errors.hpp"

namespace augcal {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
      throw ConfigError(std::string(what) + ": unknown field '" + key + "'");
    }
  }
}

struct Extent {
  Index h, w, c;
};

Extent image_extent(const TensorXd& image) {
  if (image.rank() != 3) throw std::invalid_argument("expected an [H, W, C] image");
  return {image.dim(0), image.dim(1), image.dim(2)};
}

TensorXd clipped(TensorXd image) {
  image.data() = image.data().cwiseMax(0.0).cwiseMin(1.0);
  return image;
}

}  // namespace

PastaConfig PastaConfig::from_json(const json& j) {
  reject_unknown(j, {"alpha", "beta", "k"}, "pasta config");
  PastaConfig c;
  c.alpha = j.value("alpha", c.alpha);
  c.beta = j.value("beta", c.beta);
  c.k = j.value("k", c.k);
  if (c.alpha < 0 || c.beta < 0 || c.k < 0) throw ConfigError("pasta: alpha, beta, k must be >= 0");
  return c;
}

RandAugConfig RandAugConfig::from_json(const json& j) {
  reject_unknown(j, {"magnitude", "num_ops"}, "randaugment config");
  RandAugConfig c;
  c.magnitude = j.value("magnitude", c.magnitude);
  c.num_ops = j.value("num_ops", c.num_ops);
  if (c.magnitude < 0 || c.magnitude > 30) throw ConfigError("randaugment: magnitude must be in [0, 30]");
  if (c.num_ops < 0) throw ConfigError("randaugment: num_ops must be >= 0");
  return c;
}

std::string to_string(PhotometricOp op) {
  switch (op) {
    case PhotometricOp::auto_contrast: return "AutoContrast";
    case PhotometricOp::equalize: return "Equalize";
    case PhotometricOp::contrast: return "Contrast";
    case PhotometricOp::brightness: return "Brightness";
    case PhotometricOp::sharpness: return "Sharpness";
    case PhotometricOp::posterize: return "Posterize";
    case PhotometricOp::solarize: return "Solarize";
    case PhotometricOp::solarize_add: return "SolarizeAdd";
  }
  return "?";
}

std::string to_string(AugChoice choice) {
  switch (choice) {
    case AugChoice::none: return "none";
    case AugChoice::pasta: return "pasta";
    case AugChoice::randaugment: return "randaugment";
  }
  return "?";
}

AugChoice parse_aug_choice(const std::string& s) {
  if (s == "none") return AugChoice::none;
  if (s == "pasta") return AugChoice::pasta;
  if (s == "randaugment") return AugChoice::randaugment;
  throw ConfigError("unknown aug choice '" + s + "' (expected none|pasta|randaugment)");
}

RowMatrixXd extract_channel(const TensorXd& image, Index c) {
  const auto [h, w, ch] = image_extent(image);
  RowMatrixXd out(h, w);
  const double* src = image.data().data();
  for (Index r = 0; r < h; ++r) {
    for (Index q = 0; q < w; ++q) out(r, q) = src[(r * w + q) * ch + c];
  }
  return out;
}

void assign_channel(TensorXd& image, Index c, const RowMatrixXd& values) {
  const auto [h, w, ch] = image_extent(image);
  double* dst = image.data().data();
  for (Index r = 0; r < h; ++r) {
    for (Index q = 0; q < w; ++q) dst[(r * w + q) * ch + c] = values(r, q);
  }
}

// ---------------------------------------------------------------------------
// PASTA

RowMatrixXd pasta_sigma(Index height, Index width, const PastaConfig& cfg) {
  RowMatrixXd sigma(height, width);
  const double norm = static_cast<double>(height * height + width * width);
  for (Index i = 0; i < height; ++i) {
    const double m = static_cast<double>(i - height / 2);
    for (Index j = 0; j < width; ++j) {
      const double n = static_cast<double>(j - width / 2);
      const double base = 2.0 * cfg.alpha * std::sqrt((m * m + n * n) / norm);
      // 0^k is taken as 0 for every k, so the DC entry is exactly beta.
      sigma(i, j) = (base > 0.0 ? std::pow(base, cfg.k) : 0.0) + cfg.beta;
    }
  }
  return sigma;
}

RowMatrixXd pasta_channel(const RowMatrixXd& channel, const PastaConfig& cfg, Rng& rng,
                          PastaTrace* trace) {
  const Index h = channel.rows();
  const Index w = channel.cols();
  const RowMatrixXd sigma = pasta_sigma(h, w, cfg);
  if (sigma.maxCoeff() == 0.0 && trace == nullptr) {
    // every epsilon is exactly 1: the transform is the identity
    return channel.cwiseMax(0.0).cwiseMin(1.0);
  }
  const ComplexMatrixXd spectrum = fft2(channel);
  const RowMatrixXd amplitude = spectrum.cwiseAbs();
  const RowMatrixXd phase = spectrum.unaryExpr([](const std::complex<double>& z) { return std::arg(z); });
  const RowMatrixXd centered = fftshift2(amplitude);
  RowMatrixXd perturbed(h, w);
  for (Index i = 0; i < h; ++i) {
    for (Index j = 0; j < w; ++j) {
      const double eps = sigma(i, j) > 0.0 ? rng.normal(1.0, sigma(i, j)) : 1.0;
      // amplitudes stay non-negative so the phase spectrum is untouched
      perturbed(i, j) = std::abs(eps * centered(i, j));
    }
  }
  const RowMatrixXd restored = ifftshift2(perturbed);

  ComplexMatrixXd recombined(h, w);
  for (Index i = 0; i < h; ++i) {
    for (Index j = 0; j < w; ++j) recombined(i, j) = std::polar(restored(i, j), phase(i, j));
  }
  ComplexMatrixXd inverse = ifft2(recombined);
  RowMatrixXd out = inverse.real().cwiseMax(0.0).cwiseMin(1.0);
  if (trace != nullptr) {
    trace->input_spectrum = spectrum;
    trace->perturbed_spectrum = std::move(recombined);
    trace->inverse = std::move(inverse);
  }
  return out;
}

TensorXd pasta(const TensorXd& image, const PastaConfig& cfg, Rng& rng) {
  const auto [h, w, ch] = image_extent(image);
  TensorXd out = image;
  for (Index c = 0; c < ch; ++c) {
    assign_channel(out, c, pasta_channel(extract_channel(image, c), cfg, rng));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Photometric ops

namespace {

double signed_factor(int magnitude, Rng& rng) {
  const double delta = 0.9 * magnitude / 30.0;
  return rng.uniform() < 0.5 ? 1.0 - delta : 1.0 + delta;
}

/// Blend toward `degenerate`: degenerate + factor * (image - degenerate).
TensorXd blend(const TensorXd& degenerate, const TensorXd& image, double factor) {
  TensorXd out = image;
  out.data() = degenerate.data() + factor * (image.data() - degenerate.data());
  return clipped(std::move(out));
}

TensorXd auto_contrast(const TensorXd& image) {
  const auto [h, w, ch] = image_extent(image);
  TensorXd out = image;
  for (Index c = 0; c < ch; ++c) {
    RowMatrixXd plane = extract_channel(image, c);
    const double lo = plane.minCoeff();
    const double hi = plane.maxCoeff();
    if (hi > lo) {
      plane = ((plane.array() - lo) / (hi - lo)).matrix();
      assign_channel(out, c, plane);
    }
  }
  return out;
}

int to_level(double x) {
  return static_cast<int>(std::clamp(std::floor(x * 255.0 + 0.5), 0.0, 255.0));
}

/// Histogram equalization on the 8-bit grid, per channel.
TensorXd equalize(const TensorXd& image) {
  const auto [h, w, ch] = image_extent(image);
  TensorXd out = image;
  for (Index c = 0; c < ch; ++c) {
    RowMatrixXd plane = extract_channel(image, c);
    std::array<long, 256> hist{};
    for (Index p = 0; p < plane.size(); ++p) ++hist[static_cast<std::size_t>(to_level(plane.data()[p]))];
    long last_nonzero = 0;
    for (int i = 255; i >= 0; --i) {
      if (hist[static_cast<std::size_t>(i)] > 0) {
        last_nonzero = hist[static_cast<std::size_t>(i)];
        break;
      }
    }
    const long step = (plane.size() - last_nonzero) / 255;
    if (step == 0) continue;
    std::array<double, 256> lut{};
    long acc = step / 2;
    for (std::size_t i = 0; i < 256; ++i) {
      lut[i] = static_cast<double>(std::min(255L, acc / step)) / 255.0;
      acc += hist[i];
    }
    for (Index p = 0; p < plane.size(); ++p) plane.data()[p] = lut[static_cast<std::size_t>(to_level(plane.data()[p]))];
    assign_channel(out, c, plane);
  }
  return out;
}

TensorXd contrast(const TensorXd& image, double factor) {
  TensorXd degenerate = image;
  degenerate.data().setConstant(image.data().mean());
  return blend(degenerate, image, factor);
}

TensorXd brightness(const TensorXd& image, double factor) {
  TensorXd degenerate = image;
  degenerate.data().setZero();
  return blend(degenerate, image, factor);
}

/// Blend with a 3x3 smoothing filter (centre weight 5, others 1); border
/// pixels keep their original values.
TensorXd sharpness(const TensorXd& image, double factor) {
  const auto [h, w, ch] = image_extent(image);
  TensorXd degenerate = image;
  for (Index c = 0; c < ch; ++c) {
    const RowMatrixXd plane = extract_channel(image, c);
    RowMatrixXd smooth = plane;
    for (Index r = 1; r + 1 < h; ++r) {
      for (Index q = 1; q + 1 < w; ++q) {
        smooth(r, q) = (plane.block(r - 1, q - 1, 3, 3).sum() + 4.0 * plane(r, q)) / 13.0;
      }
    }
    assign_channel(degenerate, c, smooth);
  }
  return blend(degenerate, image, factor);
}

TensorXd posterize(const TensorXd& image, int magnitude) {
  const int bits = 8 - (4 * magnitude) / 30;
  const double levels = std::ldexp(1.0, bits);
  TensorXd out = image;
  out.data() = image.data().unaryExpr([&](double x) { return std::floor(x * levels) / levels; });
  return clipped(std::move(out));
}

TensorXd solarize(const TensorXd& image, int magnitude) {
  const double threshold = 1.0 - magnitude / 30.0;
  TensorXd out = image;
  out.data() = image.data().unaryExpr([&](double x) { return x >= threshold ? 1.0 - x : x; });
  return out;
}

TensorXd solarize_add(const TensorXd& image, int magnitude) {
  const double addition = (110.0 / 255.0) * magnitude / 30.0;
  const double threshold = 128.0 / 255.0;
  TensorXd out = image;
  out.data() = image.data().unaryExpr([&](double x) { return x < threshold ? x + addition : x; });
  return clipped(std::move(out));
}

}  // namespace

TensorXd apply_photometric(const TensorXd& image, PhotometricOp op, int magnitude, Rng& rng) {
  switch (op) {
    case PhotometricOp::auto_contrast: return auto_contrast(image);
    case PhotometricOp::equalize: return equalize(image);
    case PhotometricOp::contrast: return contrast(image, signed_factor(magnitude, rng));
    case PhotometricOp::brightness: return brightness(image, signed_factor(magnitude, rng));
    case PhotometricOp::sharpness: return sharpness(image, signed_factor(magnitude, rng));
    case PhotometricOp::posterize: return posterize(image, magnitude);
    case PhotometricOp::solarize: return solarize(image, magnitude);
    case PhotometricOp::solarize_add: return solarize_add(image, magnitude);
  }
  return image;
}

TensorXd randaugment(const TensorXd& image, const RandAugConfig& cfg, Rng& rng) {
  TensorXd out = image;
  for (int i = 0; i < cfg.num_ops; ++i) {
    const auto op = kPhotometricVocabulary[rng.uniform_int(kPhotometricVocabulary.size())];
    out = apply_photometric(out, op, cfg.magnitude, rng);
  }
  return clipped(std::move(out));
}

TensorXd augment_batch(const TensorXd& batch, AugChoice choice, const AugmentConfig& cfg,
                       const Rng& rng) {
  if (choice == AugChoice::none) return batch;
  if (batch.rank() != 4 || batch.dim(0) < 1) throw std::invalid_argument("augment_batch: expected [B, H, W, C]");
  const std::vector<Index> image_shape(batch.shape().begin() + 1, batch.shape().end());
  TensorXd out = batch;
  auto rows = out.matrix();
  const auto src = batch.matrix();
  for (Index b = 0; b < batch.dim(0); ++b) {
    Rng image_rng = rng.substream(static_cast<std::uint64_t>(b));
    TensorXd image(image_shape, src.row(b).transpose());
    TensorXd augmented = choice == AugChoice::pasta ? pasta(image, cfg.pasta, image_rng)
                                                    : randaugment(image, cfg.randaugment, image_rng);
    rows.row(b) = augmented.data().transpose();
  }
  return out;
}

}  // namespace augcal
