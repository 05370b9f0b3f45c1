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

// Independent reference implementations used only by the tests. They favour
// obviousness over speed and share no code with the library.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMat = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Textbook O(H^2 W^2) DFT in long double.
inline CMat naive_dft2(const Mat& x) {
  const long h = x.rows();
  const long w = x.cols();
  CMat out(h, w);
  for (long u = 0; u < h; ++u) {
    for (long v = 0; v < w; ++v) {
      long double re = 0;
      long double im = 0;
      for (long r = 0; r < h; ++r) {
        for (long c = 0; c < w; ++c) {
          const long double angle = -2.0L * std::numbers::pi_v<long double> *
                                    (static_cast<long double>(u * r) / h + static_cast<long double>(v * c) / w);
          re += x(r, c) * std::cos(angle);
          im += x(r, c) * std::sin(angle);
        }
      }
      out(u, v) = {static_cast<double>(re), static_cast<double>(im)};
    }
  }
  return out;
}

inline std::vector<long double> softmax_ld(const std::vector<double>& z) {
  long double top = z[0];
  for (double v : z) top = std::max<long double>(top, v);
  std::vector<long double> e(z.size());
  long double sum = 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    e[i] = std::exp(static_cast<long double>(z[i]) - top);
    sum += e[i];
  }
  for (auto& v : e) v /= sum;
  return e;
}

/// Central differences of a scalar function of a flat parameter vector.
inline Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                          const Eigen::VectorXd& x, double h = 1e-7) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe(i) = x(i) + h;
    const double up = f(probe);
    probe(i) = x(i) - h;
    const double down = f(probe);
    probe(i) = x(i);
    g(i) = (up - down) / (2 * h);
  }
  return g;
}

/// max_i |a_i - b_i| / max(|b|_inf, floor): relative error on the whole vector.
inline double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double floor = 1e-6) {
  return (a - b).cwiseAbs().maxCoeff() / std::max(b.cwiseAbs().maxCoeff(), floor);
}

struct Rec {
  std::int64_t id;
  int y;
  int yhat;
  double conf;
};

/// Membership by explicit edge comparison: j/B <= c < (j+1)/B, c == 1 in the last bin.
inline int bin_by_edges(double c, int bins) {
  for (int j = 0; j < bins; ++j) {
    const double lo = static_cast<double>(j) / bins;
    const double hi = static_cast<double>(j + 1) / bins;
    if (lo <= c && (c < hi || j == bins - 1)) return j;
  }
  return 0;
}

/// Two-pass ECE: collect members per bin, then weight |acc - conf| by count.
inline double ece(const std::vector<Rec>& recs, int bins) {
  double total = 0;
  for (int j = 0; j < bins; ++j) {
    std::vector<Rec> members;
    for (const auto& r : recs) {
      if (bin_by_edges(r.conf, bins) == j) members.push_back(r);
    }
    if (members.empty()) continue;
    double acc = 0;
    double conf = 0;
    for (const auto& r : members) {
      acc += r.y == r.yhat ? 1 : 0;
      conf += r.conf;
    }
    acc /= static_cast<double>(members.size());
    conf /= static_cast<double>(members.size());
    total += static_cast<double>(members.size()) / static_cast<double>(recs.size()) * std::abs(acc - conf);
  }
  return total;
}

inline double ic_ece(const std::vector<Rec>& recs, int bins) {
  std::vector<Rec> wrong;
  for (const auto& r : recs) {
    if (r.y != r.yhat) wrong.push_back(r);
  }
  return ece(wrong, bins);
}

inline double oc(const std::vector<Rec>& recs) {
  double s = 0;
  int n = 0;
  for (const auto& r : recs) {
    if (r.y != r.yhat) {
      s += r.conf;
      ++n;
    }
  }
  return s / n;
}

/// Rejection curve by explicit set construction: for k = 0..N, drop the k
/// least confident records and count errors among the rest.
inline long double rejection_area(std::vector<Rec> order) {
  const std::size_t n = order.size();
  std::vector<long double> curve;
  for (std::size_t k = 0; k <= n; ++k) {
    std::vector<Rec> kept(order.begin() + static_cast<std::ptrdiff_t>(k), order.end());
    if (kept.empty()) {
      curve.push_back(0.0L);
      continue;
    }
    int err = 0;
    for (const auto& r : kept) err += r.y != r.yhat ? 1 : 0;
    curve.push_back(static_cast<long double>(err) / static_cast<long double>(kept.size()));
  }
  long double area = 0;
  for (std::size_t k = 0; k < n; ++k) area += (curve[k] + curve[k + 1]) / 2 / static_cast<long double>(n);
  return area;
}

inline double prr(const std::vector<Rec>& recs) {
  std::vector<Rec> model = recs;
  std::stable_sort(model.begin(), model.end(), [](const Rec& a, const Rec& b) {
    return a.conf != b.conf ? a.conf < b.conf : a.id < b.id;
  });
  std::vector<Rec> best = recs;
  std::stable_sort(best.begin(), best.end(), [](const Rec& a, const Rec& b) {
    return (a.y != a.yhat) > (b.y != b.yhat);
  });
  const auto n = static_cast<long double>(recs.size());
  long double err = 0;
  for (const auto& r : recs) err += r.y != r.yhat ? 1 : 0;
  err /= n;
  // constant error on every grid point but the last, which is 0
  long double random = 0;
  for (std::size_t k = 0; k < recs.size(); ++k) {
    const long double next = k + 1 == recs.size() ? 0.0L : err;
    random += (err + next) / 2 / n;
  }
  return static_cast<double>(100 * (random - rejection_area(model)) / (random - rejection_area(best)));
}

inline std::vector<Rec> random_records(std::mt19937_64& gen, int n, int k) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> cls(0, k - 1);
  std::vector<Rec> out;
  for (int i = 0; i < n; ++i) {
    const double conf = 1.0 / k + (1.0 - 1.0 / k) * u(gen);
    out.push_back({i, cls(gen), cls(gen), conf});
  }
  return out;
}

}  // namespace oracle
