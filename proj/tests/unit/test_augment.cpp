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

#include <cmath>
#include <numbers>
#include <random>

#include "augcal/augment.hpp"
#include "augcal/data.hpp"
#include "augcal/errors.hpp"

using namespace augcal;

namespace {

TensorXd random_image(std::uint64_t seed, Index h, Index w, Index c) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  TensorXd t({h, w, c});
  for (Index i = 0; i < t.size(); ++i) t.data()(i) = u(gen);
  return t;
}

/// Image with a 1/f amplitude falloff: white noise filtered in the
/// frequency domain, then mapped affinely onto [0, 1].
RowMatrixXd pink_image(std::uint64_t seed, Index n) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  RowMatrixXd noise(n, n);
  for (Index i = 0; i < noise.size(); ++i) noise.data()[i] = nd(gen);
  ComplexMatrixXd s = fft2(noise);
  for (Index u = 0; u < n; ++u) {
    const double fu = static_cast<double>(u <= n / 2 ? u : u - n);
    for (Index v = 0; v < n; ++v) {
      const double fv = static_cast<double>(v <= n / 2 ? v : v - n);
      const double r = std::sqrt(fu * fu + fv * fv);
      s(u, v) *= r > 0 ? 1.0 / r : 0.0;
    }
  }
  RowMatrixXd img = ifft2(s).real();
  const double lo = img.minCoeff();
  const double hi = img.maxCoeff();
  return ((img.array() - lo) / (hi - lo)).matrix();
}

double sigma_oracle(Index i, Index j, Index h, Index w, const PastaConfig& cfg) {
  const double m = static_cast<double>(i) - static_cast<double>(h / 2);
  const double n = static_cast<double>(j) - static_cast<double>(w / 2);
  const double r = std::sqrt((m * m + n * n) / static_cast<double>(h * h + w * w));
  return std::pow(2 * cfg.alpha * r, cfg.k) + cfg.beta;
}

}  // namespace

TEST_CASE("pasta sigma grid matches the closed form") {
  const PastaConfig cfg;
  for (auto [h, w] : {std::pair<Index, Index>{16, 16}, {7, 9}}) {
    const RowMatrixXd s = pasta_sigma(h, w, cfg);
    for (Index i = 0; i < h; ++i) {
      for (Index j = 0; j < w; ++j) CHECK(s(i, j) == doctest::Approx(sigma_oracle(i, j, h, w, cfg)).epsilon(1e-14));
    }
    CHECK(s(h / 2, w / 2) == cfg.beta);
  }
}

TEST_CASE("pasta sigma is non-decreasing in radius") {
  for (const PastaConfig& cfg : {PastaConfig{}, PastaConfig{1.0, 0.0, 0.5}, PastaConfig{5.0, 0.1, 4.0}}) {
    const Index h = 17;
    const Index w = 12;
    const RowMatrixXd s = pasta_sigma(h, w, cfg);
    std::vector<std::pair<double, double>> by_radius;
    for (Index i = 0; i < h; ++i) {
      for (Index j = 0; j < w; ++j) {
        const double m = static_cast<double>(i - h / 2);
        const double n = static_cast<double>(j - w / 2);
        by_radius.emplace_back(m * m + n * n, s(i, j));
      }
    }
    std::sort(by_radius.begin(), by_radius.end());
    for (std::size_t a = 1; a < by_radius.size(); ++a) {
      if (by_radius[a].first > by_radius[a - 1].first) REQUIRE(by_radius[a].second >= by_radius[a - 1].second);
    }
  }
}

TEST_CASE("pasta with zero strength is the identity") {
  const PastaConfig zero{0.0, 0.0, 2.0};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const TensorXd img = random_image(seed, 12, 10, 3);
    Rng rng(seed, "pasta");
    const TensorXd out = pasta(img, zero, rng);
    CHECK((out.data() - img.data()).cwiseAbs().maxCoeff() < 1e-9);

    // the instrumented path runs the full transform
    Rng rng2(seed, "pasta");
    PastaTrace trace;
    const RowMatrixXd ch = extract_channel(img, 1);
    const RowMatrixXd traced = pasta_channel(ch, zero, rng2, &trace);
    CHECK((traced - ch).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((trace.inverse.real() - ch).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("pasta with beta = 0 leaves DC exactly unchanged") {
  const PastaConfig cfg{3.0, 0.0, 2.0};
  const RowMatrixXd ch = extract_channel(random_image(3, 16, 16, 1), 0);
  Rng rng(3, "pasta");
  PastaTrace trace;
  pasta_channel(ch, cfg, rng, &trace);
  CHECK(std::abs(trace.perturbed_spectrum(0, 0)) == doctest::Approx(std::abs(trace.input_spectrum(0, 0))).epsilon(1e-14));
}

TEST_CASE("pasta preserves the phase of every nonzero coefficient") {
  const PastaConfig cfg;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const RowMatrixXd ch = extract_channel(random_image(seed, 32, 32, 1), 0);
    Rng rng(seed, "phase");
    PastaTrace trace;
    pasta_channel(ch, cfg, rng, &trace);
    double worst = 0;
    for (Index i = 0; i < ch.size(); ++i) {
      const auto in = trace.input_spectrum.data()[i];
      const auto out = trace.perturbed_spectrum.data()[i];
      if (std::abs(out) == 0.0 || std::abs(in) == 0.0) continue;
      double d = std::abs(std::arg(out) - std::arg(in));
      d = std::min(d, 2 * std::numbers::pi - d);
      worst = std::max(worst, d);
    }
    CHECK(worst < 1e-6);
  }
}

/// Fraction of the inverse transform's energy that sits in the imaginary part.
double residue_fraction(const PastaTrace& trace) {
  const double imag = trace.inverse.imag().squaredNorm();
  return imag / (imag + trace.inverse.real().squaredNorm());
}

TEST_CASE("pasta imaginary residue vanishes at zero strength and grows with alpha") {
  double prev = -1;
  for (double alpha : {0.0, 0.5, 1.0, 2.0, 3.0}) {
    double mean = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(seed, "residue");
      PastaTrace trace;
      pasta_channel(pink_image(seed, 32), PastaConfig{alpha, alpha > 0 ? 0.25 : 0.0, 2.0}, rng, &trace);
      mean += residue_fraction(trace) / 20;
    }
    MESSAGE("alpha " << alpha << " mean residue fraction " << mean);
    if (alpha == 0.0) CHECK(mean < 1e-20);
    CHECK(mean > prev);
    prev = mean;
  }
}

TEST_CASE("pasta is deterministic and keeps shape and range") {
  const TensorXd img = random_image(8, 16, 16, 2);
  Rng a(1, "x");
  Rng b(1, "x");
  const TensorXd oa = pasta(img, PastaConfig{}, a);
  const TensorXd ob = pasta(img, PastaConfig{}, b);
  CHECK(oa == ob);
  CHECK(oa.shape() == img.shape());
  CHECK(oa.data().minCoeff() >= 0.0);
  CHECK(oa.data().maxCoeff() <= 1.0);
  CHECK_FALSE(oa == img);
}

TEST_CASE("randaugment with zero ops is the identity") {
  const TensorXd img = random_image(2, 8, 8, 3);
  Rng rng(0, "ra");
  CHECK(randaugment(img, RandAugConfig{30, 0}, rng) == img);
}

TEST_CASE("auto contrast leaves full-range channels alone") {
  TensorXd img = random_image(4, 8, 8, 2);
  for (Index c = 0; c < 2; ++c) {
    RowMatrixXd p = extract_channel(img, c);
    p(0, 0) = 0.0;
    p(1, 1) = 1.0;
    assign_channel(img, c, p);
  }
  Rng rng(0, "ac");
  const TensorXd out = apply_photometric(img, PhotometricOp::auto_contrast, 30, rng);
  CHECK((out.data() - img.data()).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("auto contrast stretches each channel to [0, 1]") {
  TensorXd img({2, 2, 1});
  img.data() << 0.2, 0.4, 0.3, 0.6;
  Rng rng(0, "ac");
  const TensorXd out = apply_photometric(img, PhotometricOp::auto_contrast, 0, rng);
  CHECK(out.data()(0) == doctest::Approx(0.0));
  CHECK(out.data()(1) == doctest::Approx(0.5));
  CHECK(out.data()(2) == doctest::Approx(0.25));
  CHECK(out.data()(3) == doctest::Approx(1.0));
}

TEST_CASE("posterize at full magnitude keeps four bits") {
  TensorXd img({1, 4, 1});
  img.data() << 0.5, 0.53, 0.99, 0.06;
  Rng rng(0, "p");
  const TensorXd out = apply_photometric(img, PhotometricOp::posterize, 30, rng);
  CHECK(out.data()(0) == 0.5);
  CHECK(out.data()(1) == 0.5);
  CHECK(out.data()(2) == std::floor(0.99 * 16) / 16);
  CHECK(out.data()(3) == 0.0);
}

TEST_CASE("solarize and solarize-add follow their linear maps") {
  TensorXd img({1, 3, 1});
  img.data() << 0.2, 0.5, 0.9;
  Rng rng(0, "s");
  // m = 15: threshold 0.5
  const TensorXd s = apply_photometric(img, PhotometricOp::solarize, 15, rng);
  CHECK(s.data()(0) == 0.2);
  CHECK(s.data()(1) == doctest::Approx(0.5));
  CHECK(s.data()(2) == doctest::Approx(0.1));
  // m = 0: threshold 1, nothing inverted below 1
  CHECK(apply_photometric(img, PhotometricOp::solarize, 0, rng) == img);

  const TensorXd a = apply_photometric(img, PhotometricOp::solarize_add, 30, rng);
  CHECK(a.data()(0) == doctest::Approx(0.2 + 110.0 / 255.0));
  CHECK(a.data()(1) == doctest::Approx(0.5 + 110.0 / 255.0));
  CHECK(a.data()(2) == 0.9);
}

TEST_CASE("brightness factors are 1 -/+ 0.9 m/30") {
  TensorXd img({1, 2, 1});
  img.data() << 0.2, 0.4;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed, "b");
    const TensorXd out = apply_photometric(img, PhotometricOp::brightness, 10, rng);
    const double f = out.data()(0) / 0.2;
    const bool low = std::abs(f - 0.7) < 1e-12;
    const bool high = std::abs(f - 1.3) < 1e-12;
    CHECK((low || high));
    CHECK(out.data()(1) == doctest::Approx(0.4 * f));
  }
}

TEST_CASE("every photometric op maps [0, 1] into [0, 1]") {
  const TensorXd img = random_image(5, 8, 8, 3);
  for (PhotometricOp op : kPhotometricVocabulary) {
    for (int m : {0, 10, 30}) {
      Rng rng(7, to_string(op));
      const TensorXd out = apply_photometric(img, op, m, rng);
      CHECK(out.shape() == img.shape());
      CHECK(out.data().minCoeff() >= 0.0);
      CHECK(out.data().maxCoeff() <= 1.0);
    }
  }
}

TEST_CASE("randaugment is deterministic given the stream") {
  const TensorXd img = random_image(6, 16, 16, 1);
  Rng a(9, "ra");
  Rng b(9, "ra");
  CHECK(randaugment(img, RandAugConfig{}, a) == randaugment(img, RandAugConfig{}, b));
}

TEST_CASE("augment_batch: none is identity, batch equals the per-image map") {
  SpectralShiftConfig gc;
  gc.n_per_domain = 8;
  const auto pair = generate_spectral_shift(gc);
  const TensorXd& batch = pair.source.features;
  const Rng rng(4, "batch");
  CHECK(augment_batch(batch, AugChoice::none, AugmentConfig{}, rng) == batch);

  for (AugChoice choice : {AugChoice::pasta, AugChoice::randaugment}) {
    const TensorXd out = augment_batch(batch, choice, AugmentConfig{}, rng);
    for (Index b = 0; b < 2; ++b) {
      const std::vector<Index> shape(batch.shape().begin() + 1, batch.shape().end());
      const TensorXd image(shape, batch.matrix().row(b).transpose());
      Rng image_rng = rng.substream(static_cast<std::uint64_t>(b));
      const TensorXd single = choice == AugChoice::pasta
                                  ? pasta(image, PastaConfig{}, image_rng)
                                  : randaugment(image, RandAugConfig{}, image_rng);
      CHECK(out.matrix().row(b) == single.data().transpose());
    }
  }
}

TEST_CASE("augment_batch: default pasta keeps pixels in range with small drift") {
  SpectralShiftConfig gc;
  gc.n_per_domain = 64;
  const auto pair = generate_spectral_shift(gc);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const TensorXd out = augment_batch(pair.source.features, AugChoice::pasta, AugmentConfig{}, Rng(seed, "smoke"));
    CHECK(out.data().minCoeff() >= 0.0);
    CHECK(out.data().maxCoeff() <= 1.0);
    CHECK(std::abs(out.data().mean() - pair.source.features.data().mean()) < 0.1);
  }
}

TEST_CASE("aug choice parsing and config strictness") {
  CHECK(parse_aug_choice("pasta") == AugChoice::pasta);
  CHECK_THROWS_AS(parse_aug_choice("mixup"), ConfigError);
  CHECK_THROWS_AS(PastaConfig::from_json({{"alpha", 1.0}, {"gamma", 2}}), ConfigError);
  CHECK_THROWS_AS(PastaConfig::from_json({{"alpha", -1.0}}), ConfigError);
  CHECK(PastaConfig::from_json(PastaConfig{}.to_json()).alpha == 3.0);
  CHECK_THROWS_AS(RandAugConfig::from_json({{"magnitude", 31}}), ConfigError);
}
