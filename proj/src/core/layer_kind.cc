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

#include "archfuzz/layer_kind.h"

#include <algorithm>
#include <stdexcept>

#include "archfuzz/errors.h"

namespace archfuzz {

std::string_view arity_name(Arity a) {
  switch (a) {
    case Arity::kSource:
      return "source";
    case Arity::kSingle:
      return "SI";
    case Arity::kMulti:
      return "MI";
  }
  return "?";
}

std::string_view category_name(Category c) {
  switch (c) {
    case Category::kInput:
      return "input";
    case Category::kDense:
      return "dense";
    case Category::kConvolution:
      return "convolution";
    case Category::kPooling:
      return "pooling";
    case Category::kNormalization:
      return "normalization";
    case Category::kActivation:
      return "activation";
    case Category::kRecurrent:
      return "recurrent";
    case Category::kMerge:
      return "merge";
    case Category::kReshape:
      return "reshape";
  }
  return "?";
}

namespace {

using Dims = std::vector<int64_t>;
using Shapes = std::span<const TensorShape>;

[[noreturn]] void violate(const std::string& rule) {
  throw ShapeRuleViolation(rule);
}

const TensorShape& single(Shapes in, const std::string& kind) {
  if (in.size() != 1) violate(kind + " expects exactly one input");
  return in[0];
}

void require_rank(const TensorShape& s, int rank, const std::string& kind) {
  if (s.rank() != rank) {
    violate(kind + " requires rank " + std::to_string(rank) + ", got " +
            std::to_string(s.rank()));
  }
}

// Output extent of a windowed op along one axis.
int64_t window_out(int64_t in, int64_t window, int64_t stride,
                   const std::string& padding) {
  if (window < 1 || stride < 1) violate("window and stride must be >= 1");
  if (padding == "same") return (in + stride - 1) / stride;
  if (padding != "valid") violate("unknown padding '" + padding + "'");
  if (in < window) violate("valid padding needs extent >= window");
  return (in - window) / stride + 1;
}

std::string pick_padding(Rng& rng) {
  return rng.bernoulli(0.5) ? "same" : "valid";
}

int64_t min_spatial(const TensorShape& s) {
  int64_t m = s[0];
  for (int i = 0; i + 1 < s.rank(); ++i) m = std::min(m, s[i]);
  return m;
}

TensorShape same_shape_rule(Shapes in, const Params&) {
  return single(in, "layer");
}

std::vector<Dims> no_weights(Shapes, const Params&) { return {}; }

std::vector<Dims> channel_affine(Shapes in, const Params&) {
  const int64_t c = in[0].back();
  return {{c}, {c}};
}

Params no_params(const TensorShape&, Rng&, const SampleOptions&) {
  return {};
}

LayerKind make_dense() {
  LayerKind k;
  k.name = "Dense";
  k.category = Category::kDense;
  k.schema = {{"units", "1..16"}};
  k.sample = [](const TensorShape&, Rng& rng, const SampleOptions&) {
    return Params{{"units", rng.uniform_int(1, 16)}};
  };
  k.shape_rule = [](Shapes in, const Params& p) {
    Dims d = single(in, "Dense").dims();
    const int64_t units = param_int(p, "units");
    if (units < 1) violate("Dense units must be >= 1");
    d.back() = units;
    return TensorShape(d);
  };
  k.weight_shapes = [](Shapes in, const Params& p) {
    const int64_t units = param_int(p, "units");
    return std::vector<Dims>{{in[0].back(), units}, {units}};
  };
  return k;
}

LayerKind make_conv(int spatial) {
  LayerKind k;
  k.name = "Conv" + std::to_string(spatial) + "D";
  k.category = Category::kConvolution;
  k.input_rank = spatial + 1;
  const int64_t max_filters = spatial == 3 ? 4 : 8;
  k.schema = {{"filters", "1.." + std::to_string(max_filters)},
              {"kernel_size", spatial == 3 ? "{1,3}" : "{1,3,5}"},
              {"strides", "{1,2}"},
              {"padding", "{valid,same}"}};
  const std::string name = k.name;
  k.sample = [spatial, max_filters](const TensorShape& in, Rng& rng,
                                    const SampleOptions&) {
    Params p;
    p["filters"] = rng.uniform_int(1, max_filters);
    p["padding"] = pick_padding(rng);
    std::vector<int64_t> kernels =
        spatial == 3 ? std::vector<int64_t>{1, 3} : std::vector<int64_t>{1, 3, 5};
    if (std::get<std::string>(p["padding"]) == "valid") {
      const int64_t m = min_spatial(in);
      std::erase_if(kernels, [m](int64_t v) { return v > m; });
    }
    p["kernel_size"] = rng.pick(kernels);
    p["strides"] = rng.uniform_int(1, 2);
    return p;
  };
  k.shape_rule = [spatial, name](Shapes in, const Params& p) {
    const TensorShape& s = single(in, name);
    require_rank(s, spatial + 1, name);
    const int64_t kernel = param_int(p, "kernel_size");
    const int64_t stride = param_int(p, "strides");
    const std::string& pad = param_string(p, "padding");
    Dims out;
    for (int i = 0; i < spatial; ++i)
      out.push_back(window_out(s[i], kernel, stride, pad));
    const int64_t filters = param_int(p, "filters");
    if (filters < 1) violate(name + " filters must be >= 1");
    out.push_back(filters);
    return TensorShape(out);
  };
  k.weight_shapes = [spatial](Shapes in, const Params& p) {
    const int64_t kernel = param_int(p, "kernel_size");
    Dims w(spatial, kernel);
    w.push_back(in[0].back());
    w.push_back(param_int(p, "filters"));
    return std::vector<Dims>{w, {param_int(p, "filters")}};
  };
  return k;
}

LayerKind make_depthwise() {
  LayerKind k;
  k.name = "DepthwiseConv2D";
  k.category = Category::kConvolution;
  k.input_rank = 3;
  k.schema = {{"kernel_size", "{1,3,5}"},
              {"strides", "{1,2}"},
              {"padding", "{valid,same}"},
              {"depth_multiplier", "1..2"}};
  k.sample = [](const TensorShape& in, Rng& rng, const SampleOptions&) {
    Params p;
    p["padding"] = pick_padding(rng);
    std::vector<int64_t> kernels{1, 3, 5};
    if (std::get<std::string>(p["padding"]) == "valid") {
      const int64_t m = min_spatial(in);
      std::erase_if(kernels, [m](int64_t v) { return v > m; });
    }
    p["kernel_size"] = rng.pick(kernels);
    p["strides"] = rng.uniform_int(1, 2);
    p["depth_multiplier"] = rng.uniform_int(1, 2);
    return p;
  };
  k.shape_rule = [](Shapes in, const Params& p) {
    const TensorShape& s = single(in, "DepthwiseConv2D");
    require_rank(s, 3, "DepthwiseConv2D");
    const int64_t kernel = param_int(p, "kernel_size");
    const int64_t stride = param_int(p, "strides");
    const std::string& pad = param_string(p, "padding");
    const int64_t mult = param_int(p, "depth_multiplier");
    if (mult < 1) violate("depth_multiplier must be >= 1");
    return TensorShape({window_out(s[0], kernel, stride, pad),
                        window_out(s[1], kernel, stride, pad), s[2] * mult});
  };
  k.weight_shapes = [](Shapes in, const Params& p) {
    const int64_t kernel = param_int(p, "kernel_size");
    const int64_t mult = param_int(p, "depth_multiplier");
    return std::vector<Dims>{{kernel, kernel, in[0].back(), mult},
                             {in[0].back() * mult}};
  };
  return k;
}

LayerKind make_pool(const std::string& op, int spatial) {
  LayerKind k;
  k.name = op + "Pooling" + std::to_string(spatial) + "D";
  k.category = Category::kPooling;
  k.input_rank = spatial + 1;
  k.schema = {{"pool_size", "per axis 1..input extent"},
              {"strides", "per axis 1 or pool_size"},
              {"padding", "{valid,same}"}};
  const std::string name = k.name;
  k.sample = [spatial](const TensorShape& in, Rng& rng,
                       const SampleOptions& options) {
    Params p;
    Dims pool, strides;
    if (options.trigger_bias) {
      // Full-extent windows at unit stride overlap almost completely, so max
      // ties and edge-window placement are exercised on every output.
      for (int i = 0; i < spatial; ++i) {
        pool.push_back(in[i]);
        strides.push_back(1);
      }
      p["padding"] = std::string("same");
    } else {
      const bool unit_stride = rng.bernoulli(0.5);
      for (int i = 0; i < spatial; ++i) {
        pool.push_back(rng.uniform_int(1, in[i]));
        strides.push_back(unit_stride ? 1 : pool.back());
      }
      p["padding"] = pick_padding(rng);
    }
    p["pool_size"] = pool;
    p["strides"] = strides;
    return p;
  };
  k.shape_rule = [spatial, name](Shapes in, const Params& p) {
    const TensorShape& s = single(in, name);
    require_rank(s, spatial + 1, name);
    const Dims& pool = param_ints(p, "pool_size");
    const Dims& strides = param_ints(p, "strides");
    if (static_cast<int>(pool.size()) != spatial ||
        static_cast<int>(strides.size()) != spatial) {
      violate(name + " pool_size/strides need one entry per spatial axis");
    }
    const std::string& pad = param_string(p, "padding");
    Dims out;
    for (int i = 0; i < spatial; ++i)
      out.push_back(window_out(s[i], pool[i], strides[i], pad));
    out.push_back(s.back());
    return TensorShape(out);
  };
  k.weight_shapes = no_weights;
  return k;
}

LayerKind make_global_pool(const std::string& op, int spatial) {
  LayerKind k;
  k.name = "Global" + op + "Pooling" + std::to_string(spatial) + "D";
  k.category = Category::kPooling;
  k.input_rank = spatial + 1;
  const std::string name = k.name;
  k.sample = no_params;
  k.shape_rule = [spatial, name](Shapes in, const Params&) {
    const TensorShape& s = single(in, name);
    require_rank(s, spatial + 1, name);
    return TensorShape({s.back()});
  };
  k.weight_shapes = no_weights;
  return k;
}

LayerKind make_norm(const std::string& name) {
  LayerKind k;
  k.name = name;
  k.category = Category::kNormalization;
  k.sample = no_params;
  k.shape_rule = same_shape_rule;
  k.weight_shapes = channel_affine;
  return k;
}

LayerKind make_elementwise(const std::string& name, Category cat,
                           std::vector<ParamSpec> schema,
                           decltype(LayerKind::sample) sample) {
  LayerKind k;
  k.name = name;
  k.category = cat;
  k.schema = std::move(schema);
  k.sample = sample ? std::move(sample) : no_params;
  k.shape_rule = same_shape_rule;
  k.weight_shapes = no_weights;
  return k;
}

template <typename T>
decltype(LayerKind::sample) pick_double(std::string name,
                                        std::vector<T> values) {
  return [name, values](const TensorShape&, Rng& rng, const SampleOptions&) {
    return Params{{name, static_cast<double>(rng.pick(values))}};
  };
}

LayerKind make_rnn(const std::string& name, int gates) {
  LayerKind k;
  k.name = name;
  k.category = Category::kRecurrent;
  k.input_rank = 2;
  k.schema = {{"units", "1..8"}, {"return_sequences", "{0,1}"}};
  k.sample = [](const TensorShape&, Rng& rng, const SampleOptions&) {
    return Params{{"units", rng.uniform_int(1, 8)},
                  {"return_sequences", rng.uniform_int(0, 1)}};
  };
  k.shape_rule = [name](Shapes in, const Params& p) {
    const TensorShape& s = single(in, name);
    require_rank(s, 2, name);
    const int64_t units = param_int(p, "units");
    if (units < 1) violate(name + " units must be >= 1");
    if (param_int(p, "return_sequences") != 0) return TensorShape({s[0], units});
    return TensorShape({units});
  };
  k.weight_shapes = [gates, name](Shapes in, const Params& p) {
    const int64_t units = param_int(p, "units");
    const int64_t f = in[0].back();
    std::vector<Dims> w{{f, gates * units}, {units, gates * units}};
    // GRU keeps separate input and recurrent biases (reset_after form).
    if (name == "GRU") {
      w.push_back({2, gates * units});
    } else {
      w.push_back({gates * units});
    }
    return w;
  };
  return k;
}

LayerKind make_reshape_kind(const std::string& name) {
  LayerKind k;
  k.name = name;
  k.category = Category::kReshape;
  k.weight_shapes = no_weights;
  return k;
}

LayerKind make_merge(const std::string& name) {
  LayerKind k;
  k.name = name;
  k.arity = Arity::kMulti;
  k.category = Category::kMerge;
  k.max_inputs = 1 << 20;
  k.sample = no_params;
  k.weight_shapes = no_weights;
  if (name == "Concatenate") {
    k.schema = {{"axis", "-1"}};
    k.shape_rule = [](Shapes in, const Params&) {
      if (in.size() < 2) violate("MI layer needs >= 2 inputs");
      Dims out = in[0].dims();
      out.back() = 0;
      for (const TensorShape& s : in) {
        if (s.rank() != in[0].rank()) violate("MI shape mismatch");
        for (int i = 0; i + 1 < s.rank(); ++i) {
          if (s[i] != in[0][i]) violate("MI shape mismatch");
        }
        out.back() += s.back();
      }
      return TensorShape(out);
    };
  } else {
    k.shape_rule = [](Shapes in, const Params&) {
      if (in.size() < 2) violate("MI layer needs >= 2 inputs");
      for (const TensorShape& s : in) {
        if (s != in[0]) violate("MI shape mismatch");
      }
      return in[0];
    };
  }
  return k;
}

std::vector<LayerKind> build_registry() {
  std::vector<LayerKind> r;

  LayerKind input;
  input.name = "Input";
  input.arity = Arity::kSource;
  input.category = Category::kInput;
  input.max_inputs = 0;
  input.sample = no_params;
  input.shape_rule = [](Shapes in, const Params&) -> TensorShape {
    if (!in.empty()) violate("Input takes no inputs");
    violate("Input shape comes from the model input");
  };
  input.weight_shapes = no_weights;
  r.push_back(input);

  r.push_back(make_dense());
  for (int s = 1; s <= 3; ++s) r.push_back(make_conv(s));
  r.push_back(make_depthwise());
  for (int s = 1; s <= 3; ++s) {
    r.push_back(make_pool("Max", s));
    r.push_back(make_pool("Average", s));
  }
  for (int s = 1; s <= 3; ++s) {
    r.push_back(make_global_pool("Max", s));
    r.push_back(make_global_pool("Average", s));
  }
  r.push_back(make_norm("BatchNormalization"));
  r.push_back(make_norm("LayerNormalization"));

  r.push_back(make_elementwise("ReLU", Category::kActivation, {}, nullptr));
  r.push_back(make_elementwise("LeakyReLU", Category::kActivation,
                               {{"alpha", "{0.01,0.1,0.3}"}},
                               pick_double("alpha", std::vector<double>{
                                                        0.01, 0.1, 0.3})));
  r.push_back(make_elementwise("ELU", Category::kActivation,
                               {{"alpha", "{0.5,1.0}"}},
                               pick_double("alpha",
                                           std::vector<double>{0.5, 1.0})));
  r.push_back(make_elementwise(
      "ThresholdedReLU", Category::kActivation, {{"theta", "{0.5,1.0}"}},
      pick_double("theta", std::vector<double>{0.5, 1.0})));
  r.push_back(make_elementwise("Softmax", Category::kActivation,
                               {{"axis", "-1"}}, nullptr));
  {
    LayerKind k = make_elementwise(
        "PReLU", Category::kActivation, {}, nullptr);
    k.weight_shapes = [](Shapes in, const Params&) {
      return std::vector<Dims>{in[0].dims()};
    };
    r.push_back(k);
  }
  r.push_back(make_elementwise(
      "Activation", Category::kActivation,
      {{"activation",
        "{sigmoid,tanh,softplus,softsign,hard_sigmoid,selu,swish}"}},
      [](const TensorShape&, Rng& rng, const SampleOptions&) {
        static const std::vector<std::string> fns{
            "sigmoid", "tanh", "softplus", "softsign",
            "hard_sigmoid", "selu", "swish"};
        return Params{{"activation", rng.pick(fns)}};
      }));

  r.push_back(make_rnn("SimpleRNN", 1));
  r.push_back(make_rnn("LSTM", 4));
  r.push_back(make_rnn("GRU", 3));

  {
    LayerKind k = make_reshape_kind("Flatten");
    k.sample = no_params;
    k.shape_rule = [](Shapes in, const Params&) {
      return TensorShape({single(in, "Flatten").element_count()});
    };
    r.push_back(k);
  }
  {
    LayerKind k = make_reshape_kind("Reshape");
    k.schema = {{"target_shape", "any factorization of the element count"}};
    k.sample = [](const TensorShape& in, Rng& rng, const SampleOptions&) {
      const int rank = static_cast<int>(rng.uniform_int(1, 4));
      return Params{
          {"target_shape", random_factorization(in.element_count(), rank, rng)}};
    };
    k.shape_rule = [](Shapes in, const Params& p) {
      const TensorShape target(param_ints(p, "target_shape"));
      if (!target.is_valid()) violate("Reshape target must have rank 1..4");
      if (target.element_count() != single(in, "Reshape").element_count()) {
        violate("Reshape must preserve the element count");
      }
      return target;
    };
    r.push_back(k);
  }
  {
    LayerKind k = make_reshape_kind("RepeatVector");
    k.input_rank = 1;
    k.schema = {{"n", "1..4"}};
    k.sample = [](const TensorShape&, Rng& rng, const SampleOptions&) {
      return Params{{"n", rng.uniform_int(1, 4)}};
    };
    k.shape_rule = [](Shapes in, const Params& p) {
      const TensorShape& s = single(in, "RepeatVector");
      require_rank(s, 1, "RepeatVector");
      const int64_t n = param_int(p, "n");
      if (n < 1) violate("RepeatVector n must be >= 1");
      return TensorShape({n, s[0]});
    };
    r.push_back(k);
  }
  {
    LayerKind k = make_reshape_kind("Permute");
    k.input_rank = -2;
    k.schema = {{"dims", "permutation of 1..rank"}};
    k.sample = [](const TensorShape& in, Rng& rng, const SampleOptions&) {
      Dims perm;
      for (int i = 1; i <= in.rank(); ++i) perm.push_back(i);
      rng.shuffle(perm);
      return Params{{"dims", perm}};
    };
    k.shape_rule = [](Shapes in, const Params& p) {
      const TensorShape& s = single(in, "Permute");
      const Dims& perm = param_ints(p, "dims");
      if (static_cast<int>(perm.size()) != s.rank() || s.rank() < 2) {
        violate("Permute dims must cover every axis");
      }
      Dims out, seen(s.rank(), 0);
      for (int64_t axis : perm) {
        if (axis < 1 || axis > s.rank() || seen[axis - 1]++) {
          violate("Permute dims must be a permutation of 1..rank");
        }
        out.push_back(s[static_cast<int>(axis - 1)]);
      }
      return TensorShape(out);
    };
    r.push_back(k);
  }
  for (int spatial = 1; spatial <= 2; ++spatial) {
    const std::string sfx = std::to_string(spatial) + "D";
    {
      LayerKind k = make_reshape_kind("ZeroPadding" + sfx);
      k.input_rank = spatial + 1;
      k.schema = {{"padding", "before/after per axis, 0..2"}};
      const std::string name = k.name;
      k.sample = [spatial](const TensorShape&, Rng& rng,
                           const SampleOptions&) {
        Dims pad;
        for (int i = 0; i < 2 * spatial; ++i) pad.push_back(rng.uniform_int(0, 2));
        return Params{{"padding", pad}};
      };
      k.shape_rule = [spatial, name](Shapes in, const Params& p) {
        const TensorShape& s = single(in, name);
        require_rank(s, spatial + 1, name);
        const Dims& pad = param_ints(p, "padding");
        if (static_cast<int>(pad.size()) != 2 * spatial)
          violate(name + " padding needs two entries per axis");
        Dims out = s.dims();
        for (int i = 0; i < spatial; ++i) {
          if (pad[2 * i] < 0 || pad[2 * i + 1] < 0) violate("negative padding");
          out[i] += pad[2 * i] + pad[2 * i + 1];
        }
        return TensorShape(out);
      };
      r.push_back(k);
    }
    {
      LayerKind k = make_reshape_kind("Cropping" + sfx);
      k.input_rank = spatial + 1;
      k.schema = {{"cropping", "before/after per axis, total < extent"}};
      const std::string name = k.name;
      k.sample = [spatial](const TensorShape& in, Rng& rng,
                           const SampleOptions&) {
        Dims crop;
        for (int i = 0; i < spatial; ++i) {
          const int64_t total = rng.uniform_int(0, in[i] - 1);
          const int64_t before = rng.uniform_int(0, total);
          crop.push_back(before);
          crop.push_back(total - before);
        }
        return Params{{"cropping", crop}};
      };
      k.shape_rule = [spatial, name](Shapes in, const Params& p) {
        const TensorShape& s = single(in, name);
        require_rank(s, spatial + 1, name);
        const Dims& crop = param_ints(p, "cropping");
        if (static_cast<int>(crop.size()) != 2 * spatial)
          violate(name + " cropping needs two entries per axis");
        Dims out = s.dims();
        for (int i = 0; i < spatial; ++i) {
          if (crop[2 * i] < 0 || crop[2 * i + 1] < 0) violate("negative crop");
          out[i] -= crop[2 * i] + crop[2 * i + 1];
          if (out[i] < 1) violate(name + " crops the whole axis");
        }
        return TensorShape(out);
      };
      r.push_back(k);
    }
    {
      LayerKind k = make_reshape_kind("UpSampling" + sfx);
      k.input_rank = spatial + 1;
      k.schema = {{"size", "per axis 1..3"}};
      const std::string name = k.name;
      k.sample = [spatial](const TensorShape&, Rng& rng,
                           const SampleOptions&) {
        Dims size;
        for (int i = 0; i < spatial; ++i) size.push_back(rng.uniform_int(1, 3));
        return Params{{"size", size}};
      };
      k.shape_rule = [spatial, name](Shapes in, const Params& p) {
        const TensorShape& s = single(in, name);
        require_rank(s, spatial + 1, name);
        const Dims& size = param_ints(p, "size");
        if (static_cast<int>(size.size()) != spatial)
          violate(name + " size needs one entry per axis");
        Dims out = s.dims();
        for (int i = 0; i < spatial; ++i) {
          if (size[i] < 1) violate(name + " size must be >= 1");
          out[i] *= size[i];
        }
        return TensorShape(out);
      };
      r.push_back(k);
    }
  }

  for (const char* name :
       {"Add", "Multiply", "Average", "Maximum", "Minimum", "Concatenate"}) {
    r.push_back(make_merge(name));
  }

  for (const char* name :
       {"Dropout", "GaussianNoise", "GaussianDropout", "AlphaDropout"}) {
    const std::string param =
        std::string(name) == "GaussianNoise" ? "stddev" : "rate";
    LayerKind k = make_elementwise(
        name, Category::kActivation, {{param, "{0.1,0.5}"}},
        pick_double(param, std::vector<double>{0.1, 0.5}));
    k.stochastic = true;
    r.push_back(k);
  }
  return r;
}

}  // namespace

// Splits `n` into `rank` positive extents with product n, assigning prime
// factors to random axes.
std::vector<int64_t> random_factorization(int64_t n, int rank, Rng& rng) {
  std::vector<int64_t> dims(rank, 1);
  int64_t rest = n;
  for (int64_t p = 2; p * p <= rest; ++p) {
    while (rest % p == 0) {
      dims[rng.uniform_int(0, rank - 1)] *= p;
      rest /= p;
    }
  }
  if (rest > 1) dims[rng.uniform_int(0, rank - 1)] *= rest;
  return dims;
}

const std::vector<LayerKind>& layer_registry() {
  static const std::vector<LayerKind> registry = build_registry();
  return registry;
}

const LayerKind* find_layer_kind(std::string_view name) {
  for (const LayerKind& k : layer_registry()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

const LayerKind& layer_kind(std::string_view name) {
  const LayerKind* k = find_layer_kind(name);
  if (k == nullptr) throw Error("unknown layer kind '" + std::string(name) + "'");
  return *k;
}

std::vector<const LayerKind*> selectable_kinds(
    Arity arity, const std::vector<std::string>& excluded) {
  std::vector<const LayerKind*> out;
  for (const LayerKind& k : layer_registry()) {
    if (k.arity != arity) continue;
    if (std::find(excluded.begin(), excluded.end(), k.name) != excluded.end())
      continue;
    out.push_back(&k);
  }
  return out;
}

std::vector<std::string> default_excluded_kinds() {
  std::vector<std::string> out;
  for (const LayerKind& k : layer_registry()) {
    if (k.stochastic) out.push_back(k.name);
  }
  return out;
}

const std::vector<LossKind>& loss_registry() {
  static const std::vector<LossKind> losses{
      {"mean_squared_error", HeadActivation::kNone, 1.0},
      {"mean_absolute_percentage_error", HeadActivation::kNone, 100.0},
      {"binary_crossentropy", HeadActivation::kSigmoid, 1.0},
      {"categorical_crossentropy", HeadActivation::kSoftmax, 1.0},
      {"categorical_hinge", HeadActivation::kSoftmax, 1.0},
  };
  return losses;
}

const LossKind& loss_kind(std::string_view name) {
  for (const LossKind& l : loss_registry()) {
    if (l.name == name) return l;
  }
  throw Error("unknown loss kind '" + std::string(name) + "'");
}

}  // namespace archfuzz
