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

// Honest layer kernels. Every kernel propagates NaN: comparisons treat a NaN
// operand as winning, so a NaN input never turns into a finite output.
#include <algorithm>
#include <cmath>
#include <limits>

#include "archfuzz/errors.h"
#include "archfuzz/params.h"
#include "kernels.h"

namespace archfuzz::engine {

Axis make_axis(int64_t in, int64_t window, int64_t stride,
               const std::string& padding) {
  Axis a{in, 0, window, stride, 0};
  if (padding == "same") {
    a.out = (in + stride - 1) / stride;
    const int64_t total = std::max<int64_t>((a.out - 1) * stride + window - in, 0);
    a.pad_before = total / 2;
  } else {
    a.out = (in - window) / stride + 1;
  }
  return a;
}

namespace {

using Dims = std::vector<int64_t>;

template <typename T>
Tensor<T> like_output(const LayerCall<T>& c) {
  return Tensor<T>(batched(c.batch, c.out_shape));
}

template <typename T>
Tensor<T> zeros_like(const Tensor<T>& t) {
  return Tensor<T>(t.dims);
}

template <typename T>
bool is_nan(T v) {
  return std::isnan(v);
}

// True when `v` should replace the running maximum `m`: NaN wins over any
// number, otherwise strictly greater; ties keep the first element.
template <typename T>
bool beats_max(T v, T m) {
  if (is_nan(m)) return false;
  return is_nan(v) || v > m;
}

template <typename T>
bool beats_min(T v, T m) {
  if (is_nan(m)) return false;
  return is_nan(v) || v < m;
}

// ---------------------------------------------------------------------------
// Input and pure data movement.

template <typename T>
LayerKernel<T> input_kernel() {
  return {[](const LayerCall<T>& c) { return *c.in[0]; },
          [](const LayerCall<T>&, const Tensor<T>&, const Tensor<T>& dy) {
            return std::vector<Tensor<T>>{dy};
          }};
}

template <typename T>
LayerKernel<T> copy_kernel() {
  return {[](const LayerCall<T>& c) {
            Tensor<T> y = like_output(c);
            y.data = c.in[0]->data;
            return y;
          },
          [](const LayerCall<T>& c, const Tensor<T>&, const Tensor<T>& dy) {
            Tensor<T> dx(c.in[0]->dims);
            dx.data = dy.data;
            return std::vector<Tensor<T>>{dx};
          }};
}

Dims row_strides(const Dims& dims) {
  Dims s(dims.size(), 1);
  for (int i = static_cast<int>(dims.size()) - 2; i >= 0; --i) {
    s[i] = s[i + 1] * dims[i + 1];
  }
  return s;
}

// Per-example index map: out element j reads input element map[j], or zero
// when map[j] < 0. `source` receives the output multi-index and writes the
// input multi-index, returning false for padding.
template <typename F>
std::vector<int64_t> build_map(const TensorShape& out, const TensorShape& in,
                               F&& source) {
  const Dims& od = out.dims();
  const Dims is = row_strides(in.dims());
  std::vector<int64_t> map(out.element_count());
  Dims idx(od.size(), 0), src(in.dims().size(), 0);
  for (int64_t j = 0; j < out.element_count(); ++j) {
    if (source(idx, src)) {
      int64_t flat = 0;
      for (size_t a = 0; a < src.size(); ++a) flat += src[a] * is[a];
      map[j] = flat;
    } else {
      map[j] = -1;
    }
    for (int a = static_cast<int>(od.size()) - 1; a >= 0; --a) {
      if (++idx[a] < od[a]) break;
      idx[a] = 0;
    }
  }
  return map;
}

using MapBuilder = std::function<std::vector<int64_t>(
    const TensorShape& in, const TensorShape& out, const Params& p)>;

template <typename T>
LayerKernel<T> gather_kernel(MapBuilder builder) {
  return {[builder](const LayerCall<T>& c) {
            const auto map = builder(c.in_shapes[0], c.out_shape, c.params());
            const int64_t in_n = c.in_shapes[0].element_count();
            const int64_t out_n = c.out_shape.element_count();
            Tensor<T> y = like_output(c);
            for (int64_t b = 0; b < c.batch; ++b) {
              for (int64_t j = 0; j < out_n; ++j) {
                if (map[j] >= 0) y[b * out_n + j] = (*c.in[0])[b * in_n + map[j]];
              }
            }
            return y;
          },
          [builder](const LayerCall<T>& c, const Tensor<T>&, const Tensor<T>& dy) {
            const auto map = builder(c.in_shapes[0], c.out_shape, c.params());
            const int64_t in_n = c.in_shapes[0].element_count();
            const int64_t out_n = c.out_shape.element_count();
            WideGrad<T> dx(c.in[0]->dims);
            for (int64_t b = 0; b < c.batch; ++b) {
              if (c.reordered) {
                for (int64_t j = out_n - 1; j >= 0; --j) {
                  if (map[j] >= 0) dx[b * in_n + map[j]] += dy[b * out_n + j];
                }
              } else {
                for (int64_t j = 0; j < out_n; ++j) {
                  if (map[j] >= 0) dx[b * in_n + map[j]] += dy[b * out_n + j];
                }
              }
            }
            return std::vector<Tensor<T>>{dx.round()};
          }};
}

std::vector<int64_t> permute_map(const TensorShape& in, const TensorShape& out,
                                 const Params& p) {
  const Dims& perm = param_ints(p, "dims");
  return build_map(out, in, [&](const Dims& o, Dims& s) {
    for (size_t a = 0; a < perm.size(); ++a) s[perm[a] - 1] = o[a];
    return true;
  });
}

std::vector<int64_t> zero_padding_map(const TensorShape& in,
                                      const TensorShape& out, const Params& p) {
  const Dims& pad = param_ints(p, "padding");
  return build_map(out, in, [&](const Dims& o, Dims& s) {
    for (size_t a = 0; a < o.size(); ++a) {
      const bool spatial = a + 1 < o.size();
      s[a] = spatial ? o[a] - pad[2 * a] : o[a];
      if (s[a] < 0 || s[a] >= in[static_cast<int>(a)]) return false;
    }
    return true;
  });
}

std::vector<int64_t> cropping_map(const TensorShape& in, const TensorShape& out,
                                  const Params& p) {
  const Dims& crop = param_ints(p, "cropping");
  return build_map(out, in, [&](const Dims& o, Dims& s) {
    for (size_t a = 0; a < o.size(); ++a) {
      s[a] = a + 1 < o.size() ? o[a] + crop[2 * a] : o[a];
    }
    return true;
  });
}

std::vector<int64_t> upsampling_map(const TensorShape& in,
                                    const TensorShape& out, const Params& p) {
  const Dims& size = param_ints(p, "size");
  return build_map(out, in, [&](const Dims& o, Dims& s) {
    for (size_t a = 0; a < o.size(); ++a) {
      s[a] = a + 1 < o.size() ? o[a] / size[a] : o[a];
    }
    return true;
  });
}

std::vector<int64_t> repeat_map(const TensorShape& in, const TensorShape& out,
                                const Params&) {
  return build_map(out, in, [](const Dims& o, Dims& s) {
    s[0] = o[1];
    return true;
  });
}

// ---------------------------------------------------------------------------
// Dense.

template <typename T>
LayerKernel<T> dense_kernel() {
  return {[](const LayerCall<T>& c) {
            const Tensor<T>& x = *c.in[0];
            const Tensor<T>& W = c.w(0);
            const Tensor<T>& bias = c.w(1);
            const int64_t K = c.in_shapes[0].back();
            const int64_t U = c.out_shape.back();
            const int64_t rows = x.size() / K;
            Tensor<T> y = like_output(c);
            for (int64_t r = 0; r < rows; ++r) {
              for (int64_t u = 0; u < U; ++u) {
                const T dot = ordered_sum<T>(K, c.reordered, [&](int64_t k) {
                  return x[r * K + k] * W[k * U + u];
                });
                y[r * U + u] = dot + bias[u];
              }
            }
            return y;
          },
          [](const LayerCall<T>& c, const Tensor<T>&, const Tensor<T>& dy) {
            const Tensor<T>& W = c.w(0);
            const int64_t K = c.in_shapes[0].back();
            const int64_t U = c.out_shape.back();
            const int64_t rows = dy.size() / U;
            Tensor<T> dx(c.in[0]->dims);
            for (int64_t r = 0; r < rows; ++r) {
              for (int64_t k = 0; k < K; ++k) {
                dx[r * K + k] = ordered_sum<T>(U, c.reordered, [&](int64_t u) {
                  return dy[r * U + u] * W[k * U + u];
                });
              }
            }
            return std::vector<Tensor<T>>{dx};
          }};
}

// ---------------------------------------------------------------------------
// Windowed ops: convolution, depthwise convolution, pooling. Inputs of rank
// spatial+1 are viewed as 3 spatial axes by prepending unit axes.

struct Window3 {
  Axis ax[3];
  int64_t channels = 1;
  int64_t in_count() const { return ax[0].in * ax[1].in * ax[2].in * channels; }
  int64_t out_positions() const { return ax[0].out * ax[1].out * ax[2].out; }
  int64_t window_size() const { return ax[0].window * ax[1].window * ax[2].window; }
};

Window3 make_window(const TensorShape& in, const Dims& window,
                    const Dims& strides, const std::string& padding) {
  Window3 w;
  const int spatial = in.rank() - 1;
  const int offset = 3 - spatial;
  for (int a = 0; a < 3; ++a) {
    if (a < offset) {
      w.ax[a] = Axis{1, 1, 1, 1, 0};
    } else {
      w.ax[a] = make_axis(in[a - offset], window[a - offset], strides[a - offset], padding);
    }
  }
  w.channels = in.back();
  return w;
}

// Calls fn(window_index, input_position) for every in-bounds tap of the
// window at output position `o`, in row-major window order. Input positions
// are spatial only (multiply by channels to address elements).
template <typename F>
void for_each_tap(const Window3& w, int64_t o, F&& fn) {
  const int64_t o2 = o % w.ax[2].out;
  const int64_t o1 = (o / w.ax[2].out) % w.ax[1].out;
  const int64_t o0 = o / (w.ax[2].out * w.ax[1].out);
  for (int64_t k0 = 0; k0 < w.ax[0].window; ++k0) {
    const int64_t i0 = o0 * w.ax[0].stride - w.ax[0].pad_before + k0;
    if (i0 < 0 || i0 >= w.ax[0].in) continue;
    for (int64_t k1 = 0; k1 < w.ax[1].window; ++k1) {
      const int64_t i1 = o1 * w.ax[1].stride - w.ax[1].pad_before + k1;
      if (i1 < 0 || i1 >= w.ax[1].in) continue;
      for (int64_t k2 = 0; k2 < w.ax[2].window; ++k2) {
        const int64_t i2 = o2 * w.ax[2].stride - w.ax[2].pad_before + k2;
        if (i2 < 0 || i2 >= w.ax[2].in) continue;
        const int64_t k = (k0 * w.ax[1].window + k1) * w.ax[2].window + k2;
        const int64_t i = (i0 * w.ax[1].in + i1) * w.ax[2].in + i2;
        fn(k, i);
      }
    }
  }
}

struct Tap {
  int64_t k;
  int64_t i;
};

std::vector<Tap> taps_of(const Window3& w, int64_t o) {
  std::vector<Tap> taps;
  for_each_tap(w, o, [&](int64_t k, int64_t i) { taps.push_back({k, i}); });
  return taps;
}

Window3 conv_window(const TensorShape& in, const Params& p) {
  const int spatial = in.rank() - 1;
  const int64_t k = param_int(p, "kernel_size");
  const int64_t s = param_int(p, "strides");
  return make_window(in, Dims(spatial, k), Dims(spatial, s), param_string(p, "padding"));
}

template <typename T>
LayerKernel<T> conv_kernel() {
  return {[](const LayerCall<T>& c) {
            const Window3 w = conv_window(c.in_shapes[0], c.params());
            const Tensor<T>& x = *c.in[0];
            const Tensor<T>& W = c.w(0);
            const Tensor<T>& bias = c.w(1);
            const int64_t C = w.channels;
            const int64_t F = c.out_shape.back();
            const int64_t P = w.out_positions();
            Tensor<T> y = like_output(c);
            for (int64_t o = 0; o < P; ++o) {
              const auto taps = taps_of(w, o);
              const int64_t n = static_cast<int64_t>(taps.size()) * C;
              for (int64_t b = 0; b < c.batch; ++b) {
                const int64_t xb = b * w.in_count();
                for (int64_t f = 0; f < F; ++f) {
                  const T dot = ordered_sum<T>(n, c.reordered, [&](int64_t t) {
                    const Tap& tap = taps[t / C];
                    const int64_t ch = t % C;
                    return x[xb + tap.i * C + ch] * W[(tap.k * C + ch) * F + f];
                  });
                  y[(b * P + o) * F + f] = dot + bias[f];
                }
              }
            }
            return y;
          },
          [](const LayerCall<T>& c, const Tensor<T>&, const Tensor<T>& dy) {
            const Window3 w = conv_window(c.in_shapes[0], c.params());
            const Tensor<T>& W = c.w(0);
            const int64_t C = w.channels;
            const int64_t F = c.out_shape.back();
            const int64_t P = w.out_positions();
            WideGrad<T> dx(c.in[0]->dims);
            for (int64_t b = 0; b < c.batch; ++b) {
              const int64_t xb = b * w.in_count();
              for (int64_t oo = 0; oo < P; ++oo) {
                const int64_t o = c.reordered ? P - 1 - oo : oo;
                for (const Tap& tap : taps_of(w, o)) {
                  for (int64_t ch = 0; ch < C; ++ch) {
                    dx[xb + tap.i * C + ch] += wide_sum<T>(F, c.reordered, [&](int64_t f) {
                      return dy[(b * P + o) * F + f] * W[(tap.k * C + ch) * F + f];
                    });
                  }
                }
              }
            }
            return std::vector<Tensor<T>>{dx.round()};
          }};
}

template <typename T>
LayerKernel<T> depthwise_kernel() {
  return {[](const LayerCall<T>& c) {
            const Window3 w = conv_window(c.in_shapes[0], c.params());
            const int64_t M = param_int(c.params(), "depth_multiplier");
            const Tensor<T>& x = *c.in[0];
            const Tensor<T>& W = c.w(0);
            const Tensor<T>& bias = c.w(1);
            const int64_t C = w.channels;
            const int64_t P = w.out_positions();
            Tensor<T> y = like_output(c);
            for (int64_t o = 0; o < P; ++o) {
              const auto taps = taps_of(w, o);
              const int64_t n = static_cast<int64_t>(taps.size());
              for (int64_t b = 0; b < c.batch; ++b) {
                const int64_t xb = b * w.in_count();
                for (int64_t ch = 0; ch < C; ++ch) {
                  for (int64_t m = 0; m < M; ++m) {
                    const T dot = ordered_sum<T>(n, c.reordered, [&](int64_t t) {
                      return x[xb + taps[t].i * C + ch] * W[(taps[t].k * C + ch) * M + m];
                    });
                    y[(b * P + o) * C * M + ch * M + m] = dot + bias[ch * M + m];
                  }
                }
              }
            }
            return y;
          },
          [](const LayerCall<T>& c, const Tensor<T>&, const Tensor<T>& dy) {
            const Window3 w = conv_window(c.in_shapes[0], c.params());
            const int64_t M = param_int(c.params(), "depth_multiplier");
            const Tensor<T>& W = c.w(0);
            const int64_t C = w.channels;
            const int64_t P = w.out_positions();
            WideGrad<T> dx(c.in[0]->dims);
            for (int64_t b = 0; b < c.batch; ++b) {
              const int64_t xb = b * w.in_count();
              for (int64_t oo = 0; oo < P; ++oo) {
                const int64_t o = c.reordered ? P - 1 - oo : oo;
                for (const Tap& tap : taps_of(w, o)) {
                  for (int64_t ch = 0; ch < C; ++ch) {
                    dx[xb + tap.i * C + ch] += wide_sum<T>(M, c.reordered, [&](int64_t m) {
                      return dy[(b * P + o) * C * M + ch * M + m] * W[(tap.k * C + ch) * M + m];
                    });
                  }
                }
              }
            }
            return std::vector<Tensor<T>>{dx.round()};
          }};
}

Window3 pool_window(const TensorShape& in, const Params& p) {
  return make_window(in, param_ints(p, "pool_size"), param_ints(p, "strides"),
                     param_string(p, "padding"));
}

// Index of the winning tap per (batch, output position, channel), honest
// NaN-propagating first-max rule.
template <typename T>
std::vector<int64_t> max_pool_args(const LayerCall<T>& c, const Window3& w) {
  const Tensor<T>& x = *c.in[0];
  const int64_t C = w.channels;
  const int64_t P = w.out_positions();
  std::vector<int64_t> args(c.batch * P * C, -1);
  for (int64_t o = 0; o < P; ++o) {
    const auto taps = taps_of(w, o);
    for (int64_t b = 0; b < c.batch; ++b) {
      const int64_t xb = b * w.in_count();
      for (int64_t ch = 0; ch < C; ++ch) {
        int64_t best = xb + taps[0].i * C + ch;
        for (size_t t = 1; t < taps.size(); ++t) {
          const int64_t idx = xb + taps[t].i * C + ch;
          if (beats_max(x[idx], x[best])) best = idx;
        }
        args[(b * P + o) * C + ch] = best;
      }
    }
  }
  return args;
}

template <typename T>
LayerKernel<T> max_pool_kernel() {
  return {[](const LayerCall<T>& c) {
            const Window3 w = pool_window(c.in_shapes[0], c.params());
            const auto args = max_pool_args(c, w);
            Tensor<T> y = like_output(c);
            for (size_t j = 0; j < args.size(); ++j) {
              y[j] = (*c.in[0])[args[j]];
              c.note(static_cast<uint64_t>(args[j]));
            }
            return y;
          },
          [](const LayerCall<T>& c, const Tensor<T>&, const Tensor<T>& dy) {
            const Window3 w = pool_window(c.in_shapes[0], c.params());
            const auto args = max_pool_args(c, w);
            Tensor<T> dx(c.in[0]->dims);
            for (size_t j = 0; j < args.size(); ++j) dx[args[j]] += dy[j];
            return std::vector<Tensor<T>>{dx};
          }};
}

template <typename T>
Tensor<T> avg_pool_forward(const LayerCall<T>& c, const Window3& w) {
  const Tensor<T>& x = *c.in[0];
  const int64_t C = w.channels;
  const int64_t P = w.out_positions();
  Tensor<T> y = like_output(c);
  for (int64_t o = 0; o < P; ++o) {
    const auto taps = taps_of(w, o);
    const int64_t n = static_cast<int64_t>(taps.size());
    for (int64_t b = 0; b < c.batch; ++b) {
      const int64_t xb = b * w.in_count();
      for (int64_t ch = 0; ch < C; ++ch) {
        const T sum = ordered_sum<T>(n, c.reordered, [&](int64_t t) {
          return x[xb + taps[t].i * C + ch];
        });
        y[(b * P + o) * C + ch] = sum / static_cast<T>(n);
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> avg_pool_backward(const LayerCall<T>& c, const Window3& w,
                            const Tensor<T>& dy) {
  const int64_t C = w.channels;
  const int64_t P = w.out_positions();
  WideGrad<T> dx(c.in[0]->dims);
  for (int64_t b = 0; b < c.batch; ++b) {
    const int64_t xb = b * w.in_count();
    for (int64_t oo = 0; oo < P; ++oo) {
      const int64_t o = c.reordered ? P - 1 - oo : oo;
      const auto taps = taps_of(w, o);
      const T n = static_cast<T>(taps.size());
      for (const Tap& tap : taps) {
        for (int64_t ch = 0; ch < C; ++ch) {
          dx[xb + tap.i * C + ch] += dy[(b * P + o) * C + ch] / n;
        }
      }
    }
  }
  return dx.round();
}

template <typename T>
LayerKernel<T> avg_pool_kernel() {
  return {[](const LayerCall<T>& c) {
            return avg_pool_forward(c, pool_window(c.in_shapes[0], c.params()));
          },
          [](const LayerCall<T>& c, const Tensor<T>&, const Tensor<T>& dy) {
            return std::vector<Tensor<T>>{
                avg_pool_backward(c, pool_window(c.in_shapes[0], c.params()), dy)};
          }};
}

// Global pooling reduces every spatial position of a channel.
template <typename T>
std::vector<int64_t> global_max_args(const LayerCall<T>& c) {
  const Tensor<T>& x = *c.in[0];
  const int64_t C = c.in_shapes[0].back();
  const int64_t S = c.in_shapes[0].element_count() / C;
  std::vector<int64_t> args(c.batch * C);
  for (int64_t b = 0; b < c.batch; ++b) {
    for (int64_t ch = 0; ch < C; ++ch) {
      int64_t best = b * S * C + ch;
      for (int64_t s = 1; s < S; ++s) {
        const int64_t idx = (b * S + s) * C + ch;
        if (beats_max(x[idx], x[best])) best = idx;
      }
      args[b * C + ch] = best;
    }
  }
  return args;
}

template <typename T>
LayerKernel<T> global_max_kernel() {
  return {[](const LayerCall<T>& c) {
            const auto args = global_max_args(c);
            Tensor<T> y = like_output(c);
            for (size_t j = 0; j < args.size(); ++j) {
              y[j] = (*c.in[0])[args[j]];
              c.note(static_cast<uint64_t>(args[j]));
            }
            return y;
          },
          [](const LayerCall<T>& c, const Tensor<T>&, const Tensor<T>& dy) {
            const auto args = global_max_args(c);
            Tensor<T> dx(c.in[0]->dims);
            for (size_t j = 0; j < args.size(); ++j) dx[args[j]] += dy[j];
            return std::vector<Tensor<T>>{dx};
          }};
}

template <typename T>
LayerKernel<T> global_avg_kernel() {
  return {[](const LayerCall<T>& c) {
            const Tensor<T>& x = *c.in[0];
            const int64_t C = c.in_shapes[0].back();
            const int64_t S = c.in_shapes[0].element_count() / C;
            Tensor<T> y = like_output(c);
            for (int64_t b = 0; b < c.batch; ++b) {
              for (int64_t ch = 0; ch < C; ++ch) {
                const T sum = ordered_sum<T>(S, c.reordered, [&](int64_t s) {
                  return x[(b * S + s) * C + ch];
                });
                y[b * C + ch] = sum / static_cast<T>(S);
              }
            }
            return y;
          },
          [](const LayerCall<T>& c, const Tensor<T>&, const Tensor<T>& dy) {
            const int64_t C = c.in_shapes[0].back();
            const int64_t S = c.in_shapes[0].element_count() / C;
            Tensor<T> dx(c.in[0]->dims);
            for (int64_t b = 0; b < c.batch; ++b) {
              for (int64_t s = 0; s < S; ++s) {
                for (int64_t ch = 0; ch < C; ++ch) {
                  dx[(b * S + s) * C + ch] = dy[b * C + ch] / static_cast<T>(S);
                }
              }
            }
            return std::vector<Tensor<T>>{dx};
          }};
}

// ---------------------------------------------------------------------------
// Normalization. Both use eps = 1e-3 and biased variance.

constexpr double kNormEps = 1e-3;

// Mean and variance of `n` values read through `at`, in the accumulator
// type. The naive policy uses two passes; the reordered policy uses Welford's
// update running backwards.
template <typename T, typename F>
std::pair<Accum<T>, Accum<T>> moments(int64_t n, bool reordered, F&& at) {
  using A = Accum<T>;
  if (!reordered) {
    const A mean = wide_sum<T>(n, false, at) / static_cast<A>(n);
    const A var = wide_sum<T>(n, false, [&](int64_t i) {
                    const A d = A(at(i)) - mean;
                    return d * d;
                  }) /
                  static_cast<A>(n);
    return {mean, var};
  }
  A mean = 0, m2 = 0;
  int64_t k = 0;
  for (int64_t i = n - 1; i >= 0; --i) {
    ++k;
    const A v = at(i);
    const A d = v - mean;
    mean += d / static_cast<A>(k);
    m2 += d * (v - mean);
  }
  return {mean, m2 / static_cast<A>(n)};
}

// Shared normalize/denormalize over groups. `group_of(e)` and `member(g, j)`
// describe the grouping: BatchNormalization groups by channel across batch
// and space, LayerNormalization groups by row across the last axis.
template <typename T>
struct NormLayout {
  int64_t groups;
  int64_t members;
  std::function<int64_t(int64_t g, int64_t j)> index;
  std::function<int64_t(int64_t g, int64_t j)> channel;
};

template <typename T>
NormLayout<T> batch_norm_layout(const LayerCall<T>& c) {
  const int64_t C = c.in_shapes[0].back();
  const int64_t n = c.in[0]->size() / C;
  return {C, n, [C](int64_t g, int64_t j) { return j * C + g; },
          [](int64_t g, int64_t) { return g; }};
}

template <typename T>
NormLayout<T> layer_norm_layout(const LayerCall<T>& c) {
  const int64_t C = c.in_shapes[0].back();
  const int64_t rows = c.in[0]->size() / C;
  return {rows, C, [C](int64_t g, int64_t j) { return g * C + j; },
          [](int64_t, int64_t j) { return j; }};
}

template <typename T>
LayerKernel<T> norm_kernel(NormLayout<T> (*layout_of)(const LayerCall<T>&)) {
  return {[layout_of](const LayerCall<T>& c) {
            const NormLayout<T> L = layout_of(c);
            const Tensor<T>& x = *c.in[0];
            const Tensor<T>& gamma = c.w(0);
            const Tensor<T>& beta = c.w(1);
            Tensor<T> y = like_output(c);
            for (int64_t g = 0; g < L.groups; ++g) {
              const auto [mean, var] = moments<T>(L.members, c.reordered, [&](int64_t j) {
                return x[L.index(g, j)];
              });
              using A = Accum<T>;
              const A inv = A(1) / std::sqrt(var + A(kNormEps));
              for (int64_t j = 0; j < L.members; ++j) {
                const int64_t e = L.index(g, j);
                const int64_t ch = L.channel(g, j);
                y[e] = static_cast<T>(A(gamma[ch]) * ((A(x[e]) - mean) * inv) + A(beta[ch]));
              }
            }
            return y;
          },
          [layout_of](const LayerCall<T>& c, const Tensor<T>&, const Tensor<T>& dy) {
            const NormLayout<T> L = layout_of(c);
            const Tensor<T>& x = *c.in[0];
            const Tensor<T>& gamma = c.w(0);
            Tensor<T> dx(x.dims);
            using A = Accum<T>;
            const A n = static_cast<A>(L.members);
            for (int64_t g = 0; g < L.groups; ++g) {
              const auto [mean, var] = moments<T>(L.members, c.reordered, [&](int64_t j) {
                return x[L.index(g, j)];
              });
              const A inv = A(1) / std::sqrt(var + A(kNormEps));
              auto gy = [&](int64_t j) {
                return A(dy[L.index(g, j)]) * A(gamma[L.channel(g, j)]);
              };
              auto xhat = [&](int64_t j) { return (A(x[L.index(g, j)]) - mean) * inv; };
              const A sum_g = wide_sum<T>(L.members, c.reordered, gy);
              const A sum_gx = wide_sum<T>(L.members, c.reordered, [&](int64_t j) {
                return gy(j) * xhat(j);
              });
              for (int64_t j = 0; j < L.members; ++j) {
                dx[L.index(g, j)] =
                    static_cast<T>(inv / n * (n * gy(j) - sum_g - xhat(j) * sum_gx));
              }
            }
            return std::vector<Tensor<T>>{dx};
          }};
}

// ---------------------------------------------------------------------------
// Elementwise activations. `fwd` maps x to y; `grad` gives dy/dx from x and y.

template <typename T>
using UnaryFwd = std::function<T(T x, const LayerCall<T>& c)>;
template <typename T>
using UnaryGrad = std::function<T(T x, T y, const LayerCall<T>& c)>;

template <typename T>
LayerKernel<T> unary_kernel(UnaryFwd<T> fwd, UnaryGrad<T> grad) {
  return {[fwd](const LayerCall<T>& c) {
            const Tensor<T>& x = *c.in[0];
            Tensor<T> y = like_output(c);
            for (int64_t e = 0; e < x.size(); ++e) y[e] = fwd(x[e], c);
            return y;
          },
          [grad](const LayerCall<T>& c, const Tensor<T>& y, const Tensor<T>& dy) {
            const Tensor<T>& x = *c.in[0];
            Tensor<T> dx(x.dims);
            for (int64_t e = 0; e < x.size(); ++e) dx[e] = dy[e] * grad(x[e], y[e], c);
            return std::vector<Tensor<T>>{dx};
          }};
}

template <typename T>
T relu_forward(T x, const LayerCall<T>& c) {
  c.note(x > 0);
  if (is_nan(x)) return x;
  return x > 0 ? x : T(0);
}

constexpr double kSeluAlpha = 1.6732632423543772848170429916717;
constexpr double kSeluScale = 1.0507009873554804934193349852946;

template <typename T>
T hard_sigmoid(T x, const LayerCall<T>& c) {
  c.note(x <= T(-2.5) ? 0 : (x >= T(2.5) ? 2 : 1));
  if (is_nan(x)) return x;
  return std::clamp(T(0.2) * x + T(0.5), T(0), T(1));
}

template <typename T>
LayerKernel<T> activation_kernel() {
  return {[](const LayerCall<T>& c) {
            const std::string& fn = param_string(c.params(), "activation");
            const Tensor<T>& x = *c.in[0];
            Tensor<T> y = like_output(c);
            for (int64_t e = 0; e < x.size(); ++e) {
              const T v = x[e];
              T out;
              if (fn == "sigmoid") {
                out = sigmoid(v, c.reordered);
              } else if (fn == "tanh") {
                out = std::tanh(v);
              } else if (fn == "softplus") {
                out = std::log1p(std::exp(-std::abs(v))) + std::max(v, T(0));
                if (is_nan(v)) out = v;
              } else if (fn == "softsign") {
                out = v / (T(1) + std::abs(v));
              } else if (fn == "hard_sigmoid") {
                out = hard_sigmoid(v, c);
              } else if (fn == "selu") {
                c.note(v > 0);
                out = v > 0 ? T(kSeluScale) * v
                            : T(kSeluScale * kSeluAlpha) * std::expm1(v);
              } else if (fn == "swish") {
                out = v * sigmoid(v, c.reordered);
              } else {
                throw Error("unsupported activation: " + fn);
              }
              y[e] = out;
            }
            return y;
          },
          [](const LayerCall<T>& c, const Tensor<T>& y, const Tensor<T>& dy) {
            const std::string& fn = param_string(c.params(), "activation");
            const Tensor<T>& x = *c.in[0];
            Tensor<T> dx(x.dims);
            for (int64_t e = 0; e < x.size(); ++e) {
              const T v = x[e];
              T d;
              if (fn == "sigmoid") {
                d = y[e] * (T(1) - y[e]);
              } else if (fn == "tanh") {
                d = T(1) - y[e] * y[e];
              } else if (fn == "softplus") {
                d = sigmoid(v, c.reordered);
              } else if (fn == "softsign") {
                const T den = T(1) + std::abs(v);
                d = T(1) / (den * den);
              } else if (fn == "hard_sigmoid") {
                d = (v > T(-2.5) && v < T(2.5)) ? T(0.2) : T(0);
                if (is_nan(v)) d = v;
              } else if (fn == "selu") {
                d = v > 0 ? T(kSeluScale) : T(kSeluScale * kSeluAlpha) * std::exp(v);
                if (is_nan(v)) d = v;
              } else {  // swish
                const T s = sigmoid(v, c.reordered);
                d = s + v * s * (T(1) - s);
              }
              dx[e] = dy[e] * d;
            }
            return std::vector<Tensor<T>>{dx};
          }};
}

template <typename T>
LayerKernel<T> prelu_kernel() {
  return {[](const LayerCall<T>& c) {
            const Tensor<T>& x = *c.in[0];
            const Tensor<T>& a = c.w(0);
            const int64_t n = a.size();
            Tensor<T> y = like_output(c);
            for (int64_t e = 0; e < x.size(); ++e) {
              c.note(x[e] > 0);
              y[e] = x[e] > 0 ? x[e] : a[e % n] * x[e];
            }
            return y;
          },
          [](const LayerCall<T>& c, const Tensor<T>&, const Tensor<T>& dy) {
            const Tensor<T>& x = *c.in[0];
            const Tensor<T>& a = c.w(0);
            const int64_t n = a.size();
            Tensor<T> dx(x.dims);
            for (int64_t e = 0; e < x.size(); ++e) {
              dx[e] = x[e] > 0 ? dy[e] : (is_nan(x[e]) ? x[e] : a[e % n] * dy[e]);
            }
            return std::vector<Tensor<T>>{dx};
          }};
}

template <typename T>
LayerKernel<T> softmax_kernel() {
  return {[](const LayerCall<T>& c) {
            const Tensor<T>& x = *c.in[0];
            const int64_t C = c.in_shapes[0].back();
            const int64_t rows = x.size() / C;
            Tensor<T> y = like_output(c);
            for (int64_t r = 0; r < rows; ++r) {
              const T* xr = &x[r * C];
              T m = xr[0];
              for (int64_t j = 1; j < C; ++j) {
                if (beats_max(xr[j], m)) m = xr[j];
              }
              using A = Accum<T>;
              auto e = [&](int64_t j) { return std::exp(A(xr[j]) - A(m)); };
              const A s = wide_sum<T>(C, c.reordered, e);
              if (c.reordered) {
                // Exponentials and reciprocal rounded to T, then one multiply
                // per entry: a rounding step or two away from the naive form.
                const T inv = static_cast<T>(A(1) / s);
                for (int64_t j = 0; j < C; ++j) y[r * C + j] = static_cast<T>(e(j)) * inv;
              } else {
                for (int64_t j = 0; j < C; ++j) y[r * C + j] = static_cast<T>(e(j) / s);
              }
            }
            return y;
          },
          [](const LayerCall<T>& c, const Tensor<T>& y, const Tensor<T>& dy) {
            const int64_t C = c.in_shapes[0].back();
            const int64_t rows = y.size() / C;
            Tensor<T> dx(y.dims);
            for (int64_t r = 0; r < rows; ++r) {
              const T dot = ordered_sum<T>(C, c.reordered, [&](int64_t j) {
                return dy[r * C + j] * y[r * C + j];
              });
              for (int64_t j = 0; j < C; ++j) {
                dx[r * C + j] = y[r * C + j] * (dy[r * C + j] - dot);
              }
            }
            return std::vector<Tensor<T>>{dx};
          }};
}

// ---------------------------------------------------------------------------
// Recurrent layers. Input [B, T, F], zero initial state, Keras gate order.

struct RnnDims {
  int64_t steps, features, units;
  bool sequences;
};

template <typename T>
RnnDims rnn_dims(const LayerCall<T>& c) {
  return {c.in_shapes[0][0], c.in_shapes[0][1], param_int(c.params(), "units"),
          param_int(c.params(), "return_sequences") != 0};
}

// z[g] = sum_f x[f] W[f, g] + sum_v h[v] R[v, g] + bias[g] for g < G.
template <typename T>
void gate_preact(const T* x, const T* h, const Tensor<T>& W, const Tensor<T>& R,
                 const T* bias, const T* rbias, int64_t F, int64_t U, int64_t G,
                 bool reordered, T* z, T* zr) {
  for (int64_t g = 0; g < G; ++g) {
    const T xi = ordered_sum<T>(F, reordered, [&](int64_t f) { return x[f] * W[f * G + g]; });
    const T hi = ordered_sum<T>(U, reordered, [&](int64_t v) { return h[v] * R[v * G + g]; });
    if (zr != nullptr) {
      z[g] = xi + bias[g];
      zr[g] = hi + rbias[g];
    } else {
      z[g] = xi + hi + bias[g];
    }
  }
}

// dx[f] += sum_g dz[g] W[f, g];  dh[v] += sum_g dzr[g] R[v, g].
template <typename T>
void gate_backprop(const T* dz, const T* dzr, const Tensor<T>& W,
                   const Tensor<T>& R, int64_t F, int64_t U, int64_t G,
                   bool reordered, T* dx, T* dh) {
  for (int64_t f = 0; f < F; ++f) {
    dx[f] += ordered_sum<T>(G, reordered, [&](int64_t g) { return dz[g] * W[f * G + g]; });
  }
  for (int64_t v = 0; v < U; ++v) {
    dh[v] += ordered_sum<T>(G, reordered, [&](int64_t g) { return dzr[g] * R[v * G + g]; });
  }
}

template <typename T>
Tensor<T> rnn_output(const LayerCall<T>& c, const RnnDims& d,
                     const std::vector<std::vector<T>>& hs) {
  Tensor<T> y = like_output(c);
  for (int64_t b = 0; b < c.batch; ++b) {
    for (int64_t t = 0; t < d.steps; ++t) {
      if (!d.sequences && t + 1 < d.steps) continue;
      const T* h = &hs[b][(t + 1) * d.units];
      T* out = d.sequences ? &y[(b * d.steps + t) * d.units] : &y[b * d.units];
      std::copy(h, h + d.units, out);
    }
  }
  return y;
}

template <typename T>
T dy_at(const Tensor<T>& dy, const RnnDims& d, int64_t b, int64_t t, int64_t u) {
  if (d.sequences) return dy[(b * d.steps + t) * d.units + u];
  return t + 1 == d.steps ? dy[b * d.units + u] : T(0);
}

// Per-step caches for one example; index 0 of h/c is the zero initial state.
template <typename T>
struct RnnCache {
  std::vector<T> h, c, gates, aux;
};

template <typename T>
RnnCache<T> simple_rnn_run(const LayerCall<T>& c, const RnnDims& d, int64_t b) {
  const int64_t U = d.units;
  RnnCache<T> k;
  k.h.assign((d.steps + 1) * U, T(0));
  std::vector<T> z(U);
  for (int64_t t = 0; t < d.steps; ++t) {
    const T* x = &(*c.in[0])[(b * d.steps + t) * d.features];
    gate_preact(x, &k.h[t * U], c.w(0), c.w(1), c.w(2).data.data(),
                static_cast<const T*>(nullptr), d.features, U, U, c.reordered,
                z.data(), static_cast<T*>(nullptr));
    for (int64_t u = 0; u < U; ++u) k.h[(t + 1) * U + u] = std::tanh(z[u]);
  }
  return k;
}

template <typename T>
LayerKernel<T> simple_rnn_kernel() {
  return {[](const LayerCall<T>& c) {
            const RnnDims d = rnn_dims(c);
            std::vector<std::vector<T>> hs;
            for (int64_t b = 0; b < c.batch; ++b) hs.push_back(simple_rnn_run(c, d, b).h);
            return rnn_output(c, d, hs);
          },
          [](const LayerCall<T>& c, const Tensor<T>&, const Tensor<T>& dy) {
            const RnnDims d = rnn_dims(c);
            const int64_t U = d.units;
            Tensor<T> dx(c.in[0]->dims);
            for (int64_t b = 0; b < c.batch; ++b) {
              const RnnCache<T> k = simple_rnn_run(c, d, b);
              std::vector<T> dh(U, T(0)), da(U), dh_prev(U);
              for (int64_t t = d.steps - 1; t >= 0; --t) {
                for (int64_t u = 0; u < U; ++u) {
                  const T h = k.h[(t + 1) * U + u];
                  da[u] = (dh[u] + dy_at(dy, d, b, t, u)) * (T(1) - h * h);
                }
                std::fill(dh_prev.begin(), dh_prev.end(), T(0));
                gate_backprop(da.data(), da.data(), c.w(0), c.w(1), d.features, U, U,
                              c.reordered, &dx[(b * d.steps + t) * d.features],
                              dh_prev.data());
                dh = dh_prev;
              }
            }
            return std::vector<Tensor<T>>{dx};
          }};
}

template <typename T>
RnnCache<T> lstm_run(const LayerCall<T>& c, const RnnDims& d, int64_t b) {
  const int64_t U = d.units;
  const int64_t G = 4 * U;
  RnnCache<T> k;
  k.h.assign((d.steps + 1) * U, T(0));
  k.c.assign((d.steps + 1) * U, T(0));
  k.gates.assign(d.steps * G, T(0));  // activated i, f, g, o
  std::vector<T> z(G);
  for (int64_t t = 0; t < d.steps; ++t) {
    const T* x = &(*c.in[0])[(b * d.steps + t) * d.features];
    gate_preact(x, &k.h[t * U], c.w(0), c.w(1), c.w(2).data.data(),
                static_cast<const T*>(nullptr), d.features, U, G, c.reordered,
                z.data(), static_cast<T*>(nullptr));
    T* a = &k.gates[t * G];
    for (int64_t u = 0; u < U; ++u) {
      a[u] = sigmoid(z[u], c.reordered);
      a[U + u] = sigmoid(z[U + u], c.reordered);
      a[2 * U + u] = std::tanh(z[2 * U + u]);
      a[3 * U + u] = sigmoid(z[3 * U + u], c.reordered);
      const T cell = a[U + u] * k.c[t * U + u] + a[u] * a[2 * U + u];
      k.c[(t + 1) * U + u] = cell;
      k.h[(t + 1) * U + u] = a[3 * U + u] * std::tanh(cell);
    }
  }
  return k;
}

template <typename T>
LayerKernel<T> lstm_kernel() {
  return {[](const LayerCall<T>& c) {
            const RnnDims d = rnn_dims(c);
            std::vector<std::vector<T>> hs;
            for (int64_t b = 0; b < c.batch; ++b) hs.push_back(lstm_run(c, d, b).h);
            return rnn_output(c, d, hs);
          },
          [](const LayerCall<T>& c, const Tensor<T>&, const Tensor<T>& dy) {
            const RnnDims d = rnn_dims(c);
            const int64_t U = d.units;
            const int64_t G = 4 * U;
            Tensor<T> dx(c.in[0]->dims);
            for (int64_t b = 0; b < c.batch; ++b) {
              const RnnCache<T> k = lstm_run(c, d, b);
              std::vector<T> dh(U, T(0)), dc(U, T(0)), dz(G), dh_prev(U);
              for (int64_t t = d.steps - 1; t >= 0; --t) {
                const T* a = &k.gates[t * G];
                for (int64_t u = 0; u < U; ++u) {
                  const T i = a[u], f = a[U + u], g = a[2 * U + u], o = a[3 * U + u];
                  const T tc = std::tanh(k.c[(t + 1) * U + u]);
                  const T dht = dh[u] + dy_at(dy, d, b, t, u);
                  const T dct = dc[u] + dht * o * (T(1) - tc * tc);
                  dz[u] = dct * g * i * (T(1) - i);
                  dz[U + u] = dct * k.c[t * U + u] * f * (T(1) - f);
                  dz[2 * U + u] = dct * i * (T(1) - g * g);
                  dz[3 * U + u] = dht * tc * o * (T(1) - o);
                  dc[u] = dct * f;
                }
                std::fill(dh_prev.begin(), dh_prev.end(), T(0));
                gate_backprop(dz.data(), dz.data(), c.w(0), c.w(1), d.features, U, G,
                              c.reordered, &dx[(b * d.steps + t) * d.features],
                              dh_prev.data());
                dh = dh_prev;
              }
            }
            return std::vector<Tensor<T>>{dx};
          }};
}

// GRU with the reset gate applied after the recurrent matmul. Bias row 0 is
// the input bias, row 1 the recurrent bias; gate blocks are z, r, h.
template <typename T>
RnnCache<T> gru_run(const LayerCall<T>& c, const RnnDims& d, int64_t b) {
  const int64_t U = d.units;
  const int64_t G = 3 * U;
  const T* bias = c.w(2).data.data();
  RnnCache<T> k;
  k.h.assign((d.steps + 1) * U, T(0));
  k.gates.assign(d.steps * G, T(0));  // z, r, hh
  k.aux.assign(d.steps * U, T(0));    // recurrent candidate pre-activation
  std::vector<T> xz(G), hz(G);
  for (int64_t t = 0; t < d.steps; ++t) {
    const T* x = &(*c.in[0])[(b * d.steps + t) * d.features];
    const T* hp = &k.h[t * U];
    gate_preact(x, hp, c.w(0), c.w(1), bias, bias + G, d.features, U, G,
                c.reordered, xz.data(), hz.data());
    T* a = &k.gates[t * G];
    for (int64_t u = 0; u < U; ++u) {
      const T z = sigmoid(xz[u] + hz[u], c.reordered);
      const T r = sigmoid(xz[U + u] + hz[U + u], c.reordered);
      const T hh = std::tanh(xz[2 * U + u] + r * hz[2 * U + u]);
      a[u] = z;
      a[U + u] = r;
      a[2 * U + u] = hh;
      k.aux[t * U + u] = hz[2 * U + u];
      k.h[(t + 1) * U + u] = z * hp[u] + (T(1) - z) * hh;
    }
  }
  return k;
}

template <typename T>
LayerKernel<T> gru_kernel() {
  return {[](const LayerCall<T>& c) {
            const RnnDims d = rnn_dims(c);
            std::vector<std::vector<T>> hs;
            for (int64_t b = 0; b < c.batch; ++b) hs.push_back(gru_run(c, d, b).h);
            return rnn_output(c, d, hs);
          },
          [](const LayerCall<T>& c, const Tensor<T>&, const Tensor<T>& dy) {
            const RnnDims d = rnn_dims(c);
            const int64_t U = d.units;
            const int64_t G = 3 * U;
            Tensor<T> dx(c.in[0]->dims);
            for (int64_t b = 0; b < c.batch; ++b) {
              const RnnCache<T> k = gru_run(c, d, b);
              std::vector<T> dh(U, T(0)), dxz(G), dhz(G), dh_prev(U);
              for (int64_t t = d.steps - 1; t >= 0; --t) {
                const T* a = &k.gates[t * G];
                const T* hp = &k.h[t * U];
                for (int64_t u = 0; u < U; ++u) {
                  const T z = a[u], r = a[U + u], hh = a[2 * U + u];
                  const T dht = dh[u] + dy_at(dy, d, b, t, u);
                  const T dzv = dht * (hp[u] - hh) * z * (T(1) - z);
                  const T da = dht * (T(1) - z) * (T(1) - hh * hh);
                  const T drv = da * k.aux[t * U + u] * r * (T(1) - r);
                  dxz[u] = dhz[u] = dzv;
                  dxz[U + u] = dhz[U + u] = drv;
                  dxz[2 * U + u] = da;
                  dhz[2 * U + u] = da * r;
                  dh_prev[u] = dht * z;
                }
                gate_backprop(dxz.data(), dhz.data(), c.w(0), c.w(1), d.features, U, G,
                              c.reordered, &dx[(b * d.steps + t) * d.features],
                              dh_prev.data());
                dh = dh_prev;
              }
            }
            return std::vector<Tensor<T>>{dx};
          }};
}

// ---------------------------------------------------------------------------
// Merges.

template <typename T>
LayerKernel<T> sum_merge_kernel(bool average) {
  return {[average](const LayerCall<T>& c) {
            Tensor<T> y = like_output(c);
            const int64_t n = static_cast<int64_t>(c.in.size());
            for (int64_t e = 0; e < y.size(); ++e) {
              const T s = ordered_sum<T>(n, c.reordered, [&](int64_t i) { return (*c.in[i])[e]; });
              y[e] = average ? s / static_cast<T>(n) : s;
            }
            return y;
          },
          [average](const LayerCall<T>& c, const Tensor<T>&, const Tensor<T>& dy) {
            std::vector<Tensor<T>> dx;
            const T n = static_cast<T>(c.in.size());
            for (size_t i = 0; i < c.in.size(); ++i) {
              Tensor<T> d(c.in[i]->dims);
              for (int64_t e = 0; e < d.size(); ++e) d[e] = average ? dy[e] / n : dy[e];
              dx.push_back(std::move(d));
            }
            return dx;
          }};
}

template <typename T>
LayerKernel<T> multiply_kernel() {
  auto product_except = [](const LayerCall<T>& c, int64_t e, int64_t skip) {
    const int64_t n = static_cast<int64_t>(c.in.size());
    Accum<T> p = 1;
    for (int64_t k = 0; k < n; ++k) {
      const int64_t i = c.reordered ? n - 1 - k : k;
      if (i != skip) p *= (*c.in[i])[e];
    }
    return p;
  };
  return {[product_except](const LayerCall<T>& c) {
            Tensor<T> y = like_output(c);
            for (int64_t e = 0; e < y.size(); ++e) {
              y[e] = static_cast<T>(product_except(c, e, -1));
            }
            return y;
          },
          [product_except](const LayerCall<T>& c, const Tensor<T>&, const Tensor<T>& dy) {
            std::vector<Tensor<T>> dx;
            for (size_t i = 0; i < c.in.size(); ++i) {
              Tensor<T> d(c.in[i]->dims);
              for (int64_t e = 0; e < d.size(); ++e) {
                d[e] = static_cast<T>(dy[e] * product_except(c, e, static_cast<int64_t>(i)));
              }
              dx.push_back(std::move(d));
            }
            return dx;
          }};
}

template <typename T>
LayerKernel<T> extremum_merge_kernel(bool maximum) {
  auto arg = [maximum](const LayerCall<T>& c, int64_t e) {
    size_t best = 0;
    for (size_t i = 1; i < c.in.size(); ++i) {
      const T v = (*c.in[i])[e];
      const T m = (*c.in[best])[e];
      if (maximum ? beats_max(v, m) : beats_min(v, m)) best = i;
    }
    return best;
  };
  return {[arg](const LayerCall<T>& c) {
            Tensor<T> y = like_output(c);
            for (int64_t e = 0; e < y.size(); ++e) {
              const size_t i = arg(c, e);
              c.note(i);
              y[e] = (*c.in[i])[e];
            }
            return y;
          },
          [arg](const LayerCall<T>& c, const Tensor<T>&, const Tensor<T>& dy) {
            std::vector<Tensor<T>> dx;
            for (size_t i = 0; i < c.in.size(); ++i) dx.emplace_back(c.in[i]->dims);
            for (int64_t e = 0; e < dy.size(); ++e) dx[arg(c, e)][e] = dy[e];
            return dx;
          }};
}

template <typename T>
LayerKernel<T> concat_kernel() {
  return {[](const LayerCall<T>& c) {
            Tensor<T> y = like_output(c);
            const int64_t out_c = c.out_shape.back();
            const int64_t rows = y.size() / out_c;
            int64_t offset = 0;
            for (size_t i = 0; i < c.in.size(); ++i) {
              const int64_t ci = c.in_shapes[i].back();
              for (int64_t r = 0; r < rows; ++r) {
                for (int64_t j = 0; j < ci; ++j) y[r * out_c + offset + j] = (*c.in[i])[r * ci + j];
              }
              offset += ci;
            }
            return y;
          },
          [](const LayerCall<T>& c, const Tensor<T>&, const Tensor<T>& dy) {
            const int64_t out_c = c.out_shape.back();
            const int64_t rows = dy.size() / out_c;
            std::vector<Tensor<T>> dx;
            int64_t offset = 0;
            for (size_t i = 0; i < c.in.size(); ++i) {
              const int64_t ci = c.in_shapes[i].back();
              Tensor<T> d(c.in[i]->dims);
              for (int64_t r = 0; r < rows; ++r) {
                for (int64_t j = 0; j < ci; ++j) d[r * ci + j] = dy[r * out_c + offset + j];
              }
              offset += ci;
              dx.push_back(std::move(d));
            }
            return dx;
          }};
}

template <typename T>
LayerKernel<T> unsupported_kernel(const std::string& kind) {
  return {[kind](const LayerCall<T>&) -> Tensor<T> {
            throw Error("unsupported: " + kind);
          },
          [kind](const LayerCall<T>&, const Tensor<T>&,
                 const Tensor<T>&) -> std::vector<Tensor<T>> {
            throw Error("unsupported: " + kind);
          }};
}

}  // namespace

template <typename T>
KernelTable<T> honest_layer_kernels() {
  KernelTable<T> t;
  auto& L = t.layers;
  L["Input"] = input_kernel<T>();
  L["Dense"] = dense_kernel<T>();
  for (const char* k : {"Conv1D", "Conv2D", "Conv3D"}) L[k] = conv_kernel<T>();
  L["DepthwiseConv2D"] = depthwise_kernel<T>();
  for (int s = 1; s <= 3; ++s) {
    const std::string d = std::to_string(s) + "D";
    L["MaxPooling" + d] = max_pool_kernel<T>();
    L["AveragePooling" + d] = avg_pool_kernel<T>();
    L["GlobalMaxPooling" + d] = global_max_kernel<T>();
    L["GlobalAveragePooling" + d] = global_avg_kernel<T>();
  }
  L["BatchNormalization"] = norm_kernel<T>(&batch_norm_layout<T>);
  L["LayerNormalization"] = norm_kernel<T>(&layer_norm_layout<T>);

  L["ReLU"] = unary_kernel<T>(relu_forward<T>, [](T x, T, const LayerCall<T>&) {
    return is_nan(x) ? x : (x > 0 ? T(1) : T(0));
  });
  L["LeakyReLU"] = unary_kernel<T>(
      [](T x, const LayerCall<T>& c) {
        c.note(x > 0);
        return x > 0 ? x : static_cast<T>(param_double(c.params(), "alpha")) * x;
      },
      [](T x, T, const LayerCall<T>& c) {
        if (is_nan(x)) return x;
        return x > 0 ? T(1) : static_cast<T>(param_double(c.params(), "alpha"));
      });
  L["ELU"] = unary_kernel<T>(
      [](T x, const LayerCall<T>& c) {
        c.note(x > 0);
        return x > 0 ? x : static_cast<T>(param_double(c.params(), "alpha")) * std::expm1(x);
      },
      [](T x, T, const LayerCall<T>& c) {
        if (is_nan(x)) return x;
        return x > 0 ? T(1)
                     : static_cast<T>(param_double(c.params(), "alpha")) * std::exp(x);
      });
  L["ThresholdedReLU"] = unary_kernel<T>(
      [](T x, const LayerCall<T>& c) {
        const T theta = static_cast<T>(param_double(c.params(), "theta"));
        c.note(x > theta);
        if (is_nan(x)) return x;
        return x > theta ? x : T(0);
      },
      [](T x, T, const LayerCall<T>& c) {
        if (is_nan(x)) return x;
        return x > static_cast<T>(param_double(c.params(), "theta")) ? T(1) : T(0);
      });
  L["Softmax"] = softmax_kernel<T>();
  L["PReLU"] = prelu_kernel<T>();
  L["Activation"] = activation_kernel<T>();
  L["SimpleRNN"] = simple_rnn_kernel<T>();
  L["LSTM"] = lstm_kernel<T>();
  L["GRU"] = gru_kernel<T>();

  L["Flatten"] = copy_kernel<T>();
  L["Reshape"] = copy_kernel<T>();
  L["RepeatVector"] = gather_kernel<T>(repeat_map);
  L["Permute"] = gather_kernel<T>(permute_map);
  for (const char* d : {"1D", "2D"}) {
    L[std::string("ZeroPadding") + d] = gather_kernel<T>(zero_padding_map);
    L[std::string("Cropping") + d] = gather_kernel<T>(cropping_map);
    L[std::string("UpSampling") + d] = gather_kernel<T>(upsampling_map);
  }

  L["Add"] = sum_merge_kernel<T>(false);
  L["Average"] = sum_merge_kernel<T>(true);
  L["Multiply"] = multiply_kernel<T>();
  L["Maximum"] = extremum_merge_kernel<T>(true);
  L["Minimum"] = extremum_merge_kernel<T>(false);
  L["Concatenate"] = concat_kernel<T>();

  for (const char* k : {"Dropout", "GaussianNoise", "GaussianDropout", "AlphaDropout"}) {
    L[k] = unsupported_kernel<T>(k);
  }
  return t;
}

template KernelTable<float> honest_layer_kernels<float>();
template KernelTable<double> honest_layer_kernels<double>();

// ---------------------------------------------------------------------------
// Seeded faults. Each replaces one honest kernel with a plausible bug.

namespace {

// AveragePooling2D that puts all same-padding before the data when the
// window spans the whole axis, shifting every window.
Window3 misplaced_pool_window(const TensorShape& in, const Params& p) {
  Window3 w = pool_window(in, p);
  if (param_string(p, "padding") != "same") return w;
  for (Axis& a : w.ax) {
    if (a.window > 1 && a.window == a.in) {
      a.pad_before = std::max<int64_t>((a.out - 1) * a.stride + a.window - a.in, 0);
    }
  }
  return w;
}

template <typename T>
LayerKernel<T> misplaced_avg_pool_kernel() {
  return {[](const LayerCall<T>& c) {
            return avg_pool_forward(c, misplaced_pool_window(c.in_shapes[0], c.params()));
          },
          [](const LayerCall<T>& c, const Tensor<T>&, const Tensor<T>& dy) {
            return std::vector<Tensor<T>>{avg_pool_backward(
                c, misplaced_pool_window(c.in_shapes[0], c.params()), dy)};
          }};
}

// MaxPooling backward that hands the full gradient to every tied maximum.
template <typename T>
BackwardFn<T> all_ties_max_pool_backward() {
  return [](const LayerCall<T>& c, const Tensor<T>&, const Tensor<T>& dy) {
    const Window3 w = pool_window(c.in_shapes[0], c.params());
    const auto args = max_pool_args(c, w);
    const Tensor<T>& x = *c.in[0];
    const int64_t C = w.channels;
    const int64_t P = w.out_positions();
    Tensor<T> dx(x.dims);
    for (int64_t b = 0; b < c.batch; ++b) {
      const int64_t xb = b * w.in_count();
      for (int64_t o = 0; o < P; ++o) {
        for (int64_t ch = 0; ch < C; ++ch) {
          const int64_t j = (b * P + o) * C + ch;
          const T m = x[args[j]];
          for_each_tap(w, o, [&](int64_t, int64_t i) {
            if (x[xb + i * C + ch] == m) dx[xb + i * C + ch] += dy[j];
          });
        }
      }
    }
    return std::vector<Tensor<T>>{dx};
  };
}

// GlobalMaxPooling that skips NaN and starts from -inf, so an all-NaN
// channel yields -inf instead of NaN.
template <typename T>
std::vector<int64_t> nan_skipping_args(const LayerCall<T>& c) {
  const Tensor<T>& x = *c.in[0];
  const int64_t C = c.in_shapes[0].back();
  const int64_t S = c.in_shapes[0].element_count() / C;
  std::vector<int64_t> args(c.batch * C, -1);
  for (int64_t b = 0; b < c.batch; ++b) {
    for (int64_t ch = 0; ch < C; ++ch) {
      T m = -std::numeric_limits<T>::infinity();
      for (int64_t s = 0; s < S; ++s) {
        const int64_t idx = (b * S + s) * C + ch;
        if (x[idx] > m) {
          m = x[idx];
          args[b * C + ch] = idx;
        }
      }
    }
  }
  return args;
}

template <typename T>
LayerKernel<T> nan_skipping_global_max_kernel() {
  return {[](const LayerCall<T>& c) {
            const auto args = nan_skipping_args(c);
            Tensor<T> y = like_output(c);
            for (size_t j = 0; j < args.size(); ++j) {
              y[j] = args[j] < 0 ? -std::numeric_limits<T>::infinity() : (*c.in[0])[args[j]];
            }
            return y;
          },
          [](const LayerCall<T>& c, const Tensor<T>&, const Tensor<T>& dy) {
            const auto args = nan_skipping_args(c);
            Tensor<T> dx(c.in[0]->dims);
            for (size_t j = 0; j < args.size(); ++j) {
              if (args[j] >= 0) dx[args[j]] += dy[j];
            }
            return std::vector<Tensor<T>>{dx};
          }};
}

}  // namespace

template <typename T>
bool apply_layer_fault(KernelTable<T>& table, const std::string& fault) {
  auto& L = table.layers;
  if (fault == "relu-eq-zero") {
    L["ReLU"].backward = unary_kernel<T>(relu_forward<T>, [](T x, T, const LayerCall<T>&) {
                           return is_nan(x) ? x : (x >= 0 ? T(1) : T(0));
                         }).backward;
  } else if (fault == "pooling-location") {
    L["AveragePooling2D"] = misplaced_avg_pool_kernel<T>();
  } else if (fault == "maxpool-tie-gradient") {
    L["MaxPooling1D"].backward = all_ties_max_pool_backward<T>();
  } else if (fault == "globalmaxpool-neginf-on-nan") {
    for (const char* k : {"GlobalMaxPooling1D", "GlobalMaxPooling2D", "GlobalMaxPooling3D"}) {
      L[k] = nan_skipping_global_max_kernel<T>();
    }
  } else {
    return false;
  }
  return true;
}

template bool apply_layer_fault<float>(KernelTable<float>&, const std::string&);
template bool apply_layer_fault<double>(KernelTable<double>&, const std::string&);

}  // namespace archfuzz::engine
