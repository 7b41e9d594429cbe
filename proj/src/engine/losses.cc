// Copyright 2026 The Archfuzz Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Loss kernels. Every loss reduces the last axis to a per-row value and
// reports the mean over rows (batch and any leading axes).
#include <algorithm>
#include <cmath>
#include <limits>

#include "archfuzz/engine.h"
#include "kernels.h"

namespace archfuzz::engine {

namespace {

constexpr double kClipEpsilon = 1e-7;  // Keras backend epsilon
constexpr double kRedundantEpsilon = 1e-7;

struct Rows {
  int64_t rows;
  int64_t width;
};

template <typename T>
Rows rows_of(const Tensor<T>& pred) {
  const int64_t width = pred.dims.back();
  return {pred.size() / width, width};
}

// Mean over rows of row_value(r).
template <typename T, typename F>
T row_mean(const Rows& r, bool reordered, F&& row_value) {
  return ordered_sum<T>(r.rows, reordered, row_value) / static_cast<T>(r.rows);
}

template <typename T>
LossKernel<T> mse() {
  return {[](const Tensor<T>& p, const Tensor<T>& y, bool reordered, uint64_t*) {
            const Rows r = rows_of(p);
            return row_mean<T>(r, reordered, [&](int64_t i) {
              return ordered_sum<T>(r.width, reordered, [&](int64_t j) {
                       const T d = p[i * r.width + j] - y[i * r.width + j];
                       return d * d;
                     }) /
                     static_cast<T>(r.width);
            });
          },
          [](const Tensor<T>& p, const Tensor<T>& y, bool) {
            const Rows r = rows_of(p);
            const T scale = T(2) / static_cast<T>(r.width * r.rows);
            Tensor<T> g(p.dims);
            for (int64_t e = 0; e < p.size(); ++e) g[e] = scale * (p[e] - y[e]);
            return g;
          }};
}

template <typename T>
T mape_denominator(T y) {
  return std::max(std::abs(y), static_cast<T>(kClipEpsilon));
}

template <typename T>
T sign_of(T v) {
  if (std::isnan(v)) return v;
  return v > 0 ? T(1) : (v < 0 ? T(-1) : T(0));
}

template <typename T>
LossKernel<T> mape() {
  return {[](const Tensor<T>& p, const Tensor<T>& y, bool reordered, uint64_t* decisions) {
            const Rows r = rows_of(p);
            if (decisions != nullptr) {
              for (int64_t e = 0; e < p.size(); ++e) {
                *decisions = (*decisions * 31) + static_cast<uint64_t>(sign_of(p[e] - y[e]) + 1);
              }
            }
            return T(100) * row_mean<T>(r, reordered, [&](int64_t i) {
                     return ordered_sum<T>(r.width, reordered, [&](int64_t j) {
                              const int64_t e = i * r.width + j;
                              return std::abs(y[e] - p[e]) / mape_denominator(y[e]);
                            }) /
                            static_cast<T>(r.width);
                   });
          },
          [](const Tensor<T>& p, const Tensor<T>& y, bool) {
            const Rows r = rows_of(p);
            const T scale = T(100) / static_cast<T>(r.width * r.rows);
            Tensor<T> g(p.dims);
            for (int64_t e = 0; e < p.size(); ++e) {
              g[e] = scale * sign_of(p[e] - y[e]) / mape_denominator(y[e]);
            }
            return g;
          }};
}

// Binary cross-entropy on probabilities, clipped to
// [FLT_EPSILON, 1 - FLT_EPSILON]. `extra` is added inside both logarithms;
// the honest kernel uses 0.
template <typename T>
T bce_element(T p, T y, T extra) {
  const T eps = static_cast<T>(std::numeric_limits<float>::epsilon());
  const T pc = std::clamp(p, eps, T(1) - eps);
  return -(y * std::log(pc + extra) + (T(1) - y) * std::log(T(1) - pc + extra));
}

template <typename T>
LossKernel<T> bce(T extra) {
  return {[extra](const Tensor<T>& p, const Tensor<T>& y, bool reordered, uint64_t* decisions) {
            const Rows r = rows_of(p);
            const T eps = static_cast<T>(std::numeric_limits<float>::epsilon());
            if (decisions != nullptr) {
              for (int64_t e = 0; e < p.size(); ++e) {
                *decisions = (*decisions * 31) + (p[e] < eps) + 2 * (p[e] > T(1) - eps);
              }
            }
            return row_mean<T>(r, reordered, [&](int64_t i) {
              return ordered_sum<T>(r.width, reordered, [&](int64_t j) {
                       const int64_t e = i * r.width + j;
                       return bce_element(p[e], y[e], extra);
                     }) /
                     static_cast<T>(r.width);
            });
          },
          [extra](const Tensor<T>& p, const Tensor<T>& y, bool) {
            const Rows r = rows_of(p);
            const T eps = static_cast<T>(std::numeric_limits<float>::epsilon());
            const T scale = T(1) / static_cast<T>(r.width * r.rows);
            Tensor<T> g(p.dims);
            for (int64_t e = 0; e < p.size(); ++e) {
              if (std::isnan(p[e])) {
                g[e] = p[e];
                continue;
              }
              if (p[e] < eps || p[e] > T(1) - eps) continue;  // clipped
              g[e] = -scale * (y[e] / (p[e] + extra) - (T(1) - y[e]) / (T(1) - p[e] + extra));
            }
            return g;
          }};
}

// Categorical cross-entropy on probabilities: each row is renormalized to
// sum to one, clipped to [1e-7, 1 - 1e-7], and scored as -sum y log q.
template <typename T>
LossKernel<T> cce() {
  return {[](const Tensor<T>& p, const Tensor<T>& y, bool reordered, uint64_t* decisions) {
            const Rows r = rows_of(p);
            const T lo = static_cast<T>(kClipEpsilon);
            return row_mean<T>(r, reordered, [&](int64_t i) {
              const T* pr = &p[i * r.width];
              const T s = ordered_sum<T>(r.width, reordered, [&](int64_t j) { return pr[j]; });
              return -ordered_sum<T>(r.width, reordered, [&](int64_t j) {
                const T q = pr[j] / s;
                if (decisions != nullptr) {
                  *decisions = (*decisions * 31) + (q < lo) + 2 * (q > T(1) - lo);
                }
                return y[i * r.width + j] * std::log(std::clamp(q, lo, T(1) - lo));
              });
            });
          },
          [](const Tensor<T>& p, const Tensor<T>& y, bool reordered) {
            const Rows r = rows_of(p);
            const T lo = static_cast<T>(kClipEpsilon);
            Tensor<T> g(p.dims);
            std::vector<T> dq(r.width);
            for (int64_t i = 0; i < r.rows; ++i) {
              const T* pr = &p[i * r.width];
              const T s = ordered_sum<T>(r.width, reordered, [&](int64_t j) { return pr[j]; });
              for (int64_t j = 0; j < r.width; ++j) {
                const T q = pr[j] / s;
                const bool inside = q >= lo && q <= T(1) - lo;
                dq[j] = inside ? -y[i * r.width + j] / q : T(0);
                if (std::isnan(q)) dq[j] = q;
              }
              const T dot = ordered_sum<T>(r.width, reordered, [&](int64_t j) {
                return dq[j] * pr[j] / s;
              });
              for (int64_t j = 0; j < r.width; ++j) {
                g[i * r.width + j] = (dq[j] - dot) / s / static_cast<T>(r.rows);
              }
            }
            return g;
          }};
}

// Categorical hinge: max(0, max_j (1 - y_j) p_j - sum_j y_j p_j + 1). The
// subgradient of the inner max is shared equally among tied maxima unless
// `divide_ties` is false.
template <typename T>
struct HingeRow {
  T value;
  T neg;
  int64_t ties;
};

template <typename T>
HingeRow<T> hinge_row(const T* p, const T* y, int64_t width, bool reordered) {
  const T pos = ordered_sum<T>(width, reordered, [&](int64_t j) { return y[j] * p[j]; });
  T neg = (T(1) - y[0]) * p[0];
  for (int64_t j = 1; j < width; ++j) {
    const T v = (T(1) - y[j]) * p[j];
    if (std::isnan(v) || v > neg) neg = v;
  }
  int64_t ties = 0;
  for (int64_t j = 0; j < width; ++j) ties += (T(1) - y[j]) * p[j] == neg;
  const T margin = neg - pos + T(1);
  return {std::isnan(margin) ? margin : std::max(T(0), margin), neg, ties};
}

template <typename T>
LossKernel<T> hinge(bool divide_ties) {
  return {[](const Tensor<T>& p, const Tensor<T>& y, bool reordered, uint64_t* decisions) {
            const Rows r = rows_of(p);
            return row_mean<T>(r, reordered, [&](int64_t i) {
              const HingeRow<T> h =
                  hinge_row(&p[i * r.width], &y[i * r.width], r.width, reordered);
              if (decisions != nullptr) {
                *decisions = (*decisions * 31) + (h.value > 0);
                for (int64_t j = 0; j < r.width; ++j) {
                  const int64_t e = i * r.width + j;
                  *decisions = (*decisions * 31) + ((T(1) - y[e]) * p[e] == h.neg);
                }
              }
              return h.value;
            });
          },
          [divide_ties](const Tensor<T>& p, const Tensor<T>& y, bool reordered) {
            const Rows r = rows_of(p);
            Tensor<T> g(p.dims);
            const T inv_rows = T(1) / static_cast<T>(r.rows);
            for (int64_t i = 0; i < r.rows; ++i) {
              const T* pr = &p[i * r.width];
              const T* yr = &y[i * r.width];
              const HingeRow<T> h = hinge_row(pr, yr, r.width, reordered);
              if (std::isnan(h.value)) {
                for (int64_t j = 0; j < r.width; ++j) g[i * r.width + j] = h.value;
                continue;
              }
              if (!(h.value > 0)) continue;
              const T share = divide_ties ? T(1) / static_cast<T>(h.ties) : T(1);
              for (int64_t j = 0; j < r.width; ++j) {
                T d = -yr[j];
                if ((T(1) - yr[j]) * pr[j] == h.neg) d += share * (T(1) - yr[j]);
                g[i * r.width + j] = d * inv_rows;
              }
            }
            return g;
          }};
}

}  // namespace

template <typename T>
void add_honest_losses(KernelTable<T>& table) {
  table.losses["mean_squared_error"] = mse<T>();
  table.losses["mean_absolute_percentage_error"] = mape<T>();
  table.losses["binary_crossentropy"] = bce<T>(T(0));
  table.losses["categorical_crossentropy"] = cce<T>();
  table.losses["categorical_hinge"] = hinge<T>(true);
}

template <typename T>
bool apply_loss_fault(KernelTable<T>& table, const std::string& fault) {
  if (fault == "bce-epsilon-clip") {
    table.losses["binary_crossentropy"] = bce<T>(static_cast<T>(kRedundantEpsilon));
  } else if (fault == "hinge-no-divide") {
    table.losses["categorical_hinge"].grad = hinge<T>(false).grad;
  } else {
    return false;
  }
  return true;
}

template void add_honest_losses<float>(KernelTable<float>&);
template void add_honest_losses<double>(KernelTable<double>&);
template bool apply_loss_fault<float>(KernelTable<float>&, const std::string&);
template bool apply_loss_fault<double>(KernelTable<double>&, const std::string&);

}  // namespace archfuzz::engine

namespace archfuzz {

float binary_crossentropy_element(float output, float target,
                                  bool redundant_epsilon) {
  return engine::bce_element<float>(
      output, target,
      redundant_epsilon ? static_cast<float>(engine::kRedundantEpsilon) : 0.0f);
}

}  // namespace archfuzz
