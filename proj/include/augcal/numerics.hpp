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

#pragma once

#include <complex>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

namespace augcal {

using Index = Eigen::Index;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using ComplexMatrix = RowMatrix<std::complex<Scalar>>;

using RowMatrixXd = RowMatrix<double>;
using ComplexMatrixXd = ComplexMatrix<double>;

/// Dense row-major array with an explicit shape. Storage is a flat Eigen
/// vector so whole-tensor arithmetic stays expression-friendly, and the
/// leading axis can be viewed as matrix rows.
template <typename Scalar>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<Index> shape) : shape_(std::move(shape)) {
    data_ = Vector<Scalar>::Zero(product(shape_));
  }

  Tensor(std::vector<Index> shape, Vector<Scalar> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (product(shape_) != data_.size()) {
      throw std::invalid_argument("tensor shape does not match data length");
    }
  }

  const std::vector<Index>& shape() const { return shape_; }
  Index dim(std::size_t axis) const { return shape_.at(axis); }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  Vector<Scalar>& data() { return data_; }
  const Vector<Scalar>& data() const { return data_; }

  /// Elements per slice along the leading axis.
  Index row_stride() const {
    return shape_.empty() ? 0 : product({shape_.begin() + 1, shape_.end()});
  }

  /// View as [shape[0], prod(shape[1:])].
  Eigen::Map<RowMatrix<Scalar>> matrix() {
    return {data_.data(), shape_.empty() ? 0 : shape_[0], row_stride()};
  }
  Eigen::Map<const RowMatrix<Scalar>> matrix() const {
    return {data_.data(), shape_.empty() ? 0 : shape_[0], row_stride()};
  }

  bool all_finite() const { return data_.allFinite(); }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_.size() == b.data_.size() &&
           std::equal(a.data_.data(), a.data_.data() + a.data_.size(), b.data_.data());
  }

  static Index product(std::span<const Index> extents) {
    return std::accumulate(extents.begin(), extents.end(), Index{1}, std::multiplies<>());
  }

 private:
  std::vector<Index> shape_;
  Vector<Scalar> data_;
};

using TensorXd = Tensor<double>;

/// Seeded generator with named sub-streams. The engine is mt19937_64 (its
/// output sequence is fixed by the standard); the uniform and normal
/// transforms are implemented here because std:: distributions are not
/// portable across library implementations.
class Rng {
 public:
  Rng(std::uint64_t seed, std::string_view stream);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t key() const { return key_; }

  /// Independent child stream, keyed by name.
  Rng substream(std::string_view name) const;
  /// Independent child stream, keyed by an index (sample id, step, ...).
  Rng substream(std::uint64_t index) const;

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n);
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  Rng(std::uint64_t seed, std::uint64_t key);

  std::uint64_t seed_;
  std::uint64_t key_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t mix64(std::uint64_t x);
std::uint64_t hash_name(std::string_view name);

// ---------------------------------------------------------------------------
// Fourier transforms

namespace detail {

/// 1-D transform; kissfft does not handle length 1, which is the identity.
template <typename Scalar>
void fft1d(Eigen::FFT<Scalar>& fft, std::vector<std::complex<Scalar>>& out,
           const std::vector<std::complex<Scalar>>& in, bool inverse) {
  if (in.size() == 1) {
    out = in;
  } else if (inverse) {
    fft.inv(out, in);
  } else {
    fft.fwd(out, in);
  }
}

}  // namespace detail

/// Unnormalized forward 2-D DFT of a real image.
template <typename Derived>
ComplexMatrix<typename Derived::Scalar> fft2(const Eigen::MatrixBase<Derived>& image) {
  using Scalar = typename Derived::Scalar;
  using Complex = std::complex<Scalar>;
  const Index rows = image.rows();
  const Index cols = image.cols();
  if (rows < 1 || cols < 1) throw std::invalid_argument("fft2: empty image");

  Eigen::FFT<Scalar> fft;
  ComplexMatrix<Scalar> out(rows, cols);
  std::vector<Complex> in_buf, out_buf;

  in_buf.resize(static_cast<std::size_t>(cols));
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) in_buf[c] = Complex(image(r, c), 0);
    detail::fft1d(fft, out_buf, in_buf, false);
    for (Index c = 0; c < cols; ++c) out(r, c) = out_buf[c];
  }
  in_buf.resize(static_cast<std::size_t>(rows));
  for (Index c = 0; c < cols; ++c) {
    for (Index r = 0; r < rows; ++r) in_buf[r] = out(r, c);
    detail::fft1d(fft, out_buf, in_buf, false);
    for (Index r = 0; r < rows; ++r) out(r, c) = out_buf[r];
  }
  return out;
}

/// Inverse 2-D DFT including the 1/(H*W) factor. Returns the complex result;
/// callers decide what to do with any imaginary residue.
template <typename Scalar>
ComplexMatrix<Scalar> ifft2(const ComplexMatrix<Scalar>& spectrum) {
  using Complex = std::complex<Scalar>;
  const Index rows = spectrum.rows();
  const Index cols = spectrum.cols();
  if (rows < 1 || cols < 1) throw std::invalid_argument("ifft2: empty spectrum");

  Eigen::FFT<Scalar> fft;
  ComplexMatrix<Scalar> out(rows, cols);
  std::vector<Complex> in_buf, out_buf;

  in_buf.resize(static_cast<std::size_t>(cols));
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) in_buf[c] = spectrum(r, c);
    detail::fft1d(fft, out_buf, in_buf, true);
    for (Index c = 0; c < cols; ++c) out(r, c) = out_buf[c];
  }
  in_buf.resize(static_cast<std::size_t>(rows));
  for (Index c = 0; c < cols; ++c) {
    for (Index r = 0; r < rows; ++r) in_buf[r] = out(r, c);
    detail::fft1d(fft, out_buf, in_buf, true);
    for (Index r = 0; r < rows; ++r) out(r, c) = out_buf[r];
  }
  return out;
}

namespace detail {
template <typename Derived>
auto circular_shift(const Eigen::MatrixBase<Derived>& m, Index row_shift, Index col_shift) {
  using Plain = typename Derived::PlainObject;
  const Index rows = m.rows();
  const Index cols = m.cols();
  Plain out(rows, cols);
  for (Index r = 0; r < rows; ++r) {
    const Index rr = (r + row_shift) % rows;
    for (Index c = 0; c < cols; ++c) out(rr, (c + col_shift) % cols) = m(r, c);
  }
  return out;
}
}  // namespace detail

/// Moves the zero-frequency entry to (floor(H/2), floor(W/2)).
template <typename Derived>
typename Derived::PlainObject fftshift2(const Eigen::MatrixBase<Derived>& m) {
  return detail::circular_shift(m, m.rows() / 2, m.cols() / 2);
}

/// Exact inverse of fftshift2 for every shape, odd extents included.
template <typename Derived>
typename Derived::PlainObject ifftshift2(const Eigen::MatrixBase<Derived>& m) {
  return detail::circular_shift(m, (m.rows() + 1) / 2, (m.cols() + 1) / 2);
}

// ---------------------------------------------------------------------------
// Softmax and friends

/// Zeroes entries below the smallest normal number. Subnormal probabilities
/// carry no usable information and make later arithmetic very slow.
template <typename Derived>
typename Derived::PlainObject flush_subnormal(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  return (m.array().abs() < std::numeric_limits<Scalar>::min()).select(Scalar(0), m);
}

/// Numerically stable softmax of a single vector.
template <typename Derived>
Vector<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  const Scalar top = logits.maxCoeff();
  Vector<Scalar> e = (logits.derived().reshaped().array() - top).exp().matrix();
  e /= e.sum();
  return flush_subnormal(e);
}

/// Row-wise softmax of a [B, K] logit matrix.
template <typename Derived>
RowMatrix<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  RowMatrix<Scalar> out(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    const Scalar top = logits.row(i).maxCoeff();
    out.row(i) = (logits.row(i).array() - top).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return flush_subnormal(out);
}

/// Row-wise log-softmax of a [B, K] logit matrix.
template <typename Derived>
RowMatrix<typename Derived::Scalar> log_softmax_rows(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  RowMatrix<Scalar> out(logits.rows(), logits.cols());
  for (Index i = 0; i < logits.rows(); ++i) {
    const Scalar top = logits.row(i).maxCoeff();
    const Scalar lse = top + std::log((logits.row(i).array() - top).exp().sum());
    out.row(i) = logits.row(i).array() - lse;
  }
  return out;
}

/// First index of the maximum (ties resolve to the lowest index).
template <typename Derived>
Index argmax(const Eigen::MatrixBase<Derived>& v) {
  Index best = 0;
  for (Index k = 1; k < v.size(); ++k) {
    if (v(k) > v(best)) best = k;
  }
  return best;
}

/// Left-to-right sum; evaluation order is fixed so results are reproducible.
template <typename Range>
double ordered_sum(const Range& values) {
  double acc = 0.0;
  for (double v : values) acc += v;
  return acc;
}

}  // namespace augcal
