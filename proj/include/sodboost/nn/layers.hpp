#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "sodboost/conv.hpp"
#include "sodboost/norm.hpp"
#include "sodboost/rng.hpp"
#include "sodboost/tensor.hpp"

namespace sodboost {

// Forward-pass context: the active tape (nullptr for untracked inference)
// and the train/eval switch for batch statistics.
template <typename T>
struct Ctx {
    Tape<T>* tape = nullptr;
    bool training = false;

    Tensor<T> use(Parameter<T>& p) const {
        if (tape) return tape->watch(p);
        return Tensor<T>::from(p.shape, p.value);
    }
};

// Named registry of a module tree's parameters and persistent buffers
// (running statistics). Collection order is deterministic; checkpointing,
// the optimizer and parameter snapshots all walk this list.
template <typename T>
struct ModuleItems {
    std::vector<std::pair<std::string, Parameter<T>*>> params;
    std::vector<std::pair<std::string, std::vector<T>*>> buffers;

    void add_param(const std::string& name, Parameter<T>& p) {
        p.name = name;
        params.emplace_back(name, &p);
    }
    void add_buffer(const std::string& name, std::vector<T>& b) { buffers.emplace_back(name, &b); }
};

namespace init {

// Fan-in scaled normal init for layers followed by ReLU.
template <typename T>
std::vector<T> kaiming(Rng& rng, int64_t n, int64_t fan_in) {
    std::vector<T> v(static_cast<size_t>(n));
    const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (auto& x : v) x = static_cast<T>(rng.normal(0.0, std_dev));
    return v;
}

template <typename T>
std::vector<T> normal(Rng& rng, int64_t n, double std_dev) {
    std::vector<T> v(static_cast<size_t>(n));
    for (auto& x : v) x = static_cast<T>(rng.normal(0.0, std_dev));
    return v;
}

}  // namespace init

template <typename T>
struct Conv2dLayer {
    Parameter<T> weight;
    Parameter<T> bias;
    int stride = 1, pad = 0, dilation = 1;
    bool with_bias = true;

    void init(Rng& rng, int in_ch, int out_ch, int k, int stride_ = 1, int pad_ = 0,
              int dilation_ = 1, bool bias_ = true, bool zero_init = false) {
        stride = stride_;
        pad = pad_;
        dilation = dilation_;
        with_bias = bias_;
        const int64_t n = static_cast<int64_t>(out_ch) * in_ch * k * k;
        if (zero_init) {
            weight.init(Shape{out_ch, in_ch, k, k}, std::vector<T>(static_cast<size_t>(n), T(0)));
        } else {
            weight.init(Shape{out_ch, in_ch, k, k},
                        init::kaiming<T>(rng, n, static_cast<int64_t>(in_ch) * k * k));
        }
        if (with_bias) bias.init(Shape{out_ch}, std::vector<T>(static_cast<size_t>(out_ch), T(0)));
    }

    Tensor<T> forward(const Ctx<T>& ctx, const Tensor<T>& x) {
        if (with_bias) {
            return conv2d(x, ctx.use(weight), std::optional<Tensor<T>>(ctx.use(bias)), stride,
                          pad, dilation);
        }
        return conv2d(x, ctx.use(weight), std::optional<Tensor<T>>{}, stride, pad, dilation);
    }

    void collect(const std::string& prefix, ModuleItems<T>& items) {
        items.add_param(prefix + ".w", weight);
        if (with_bias) items.add_param(prefix + ".b", bias);
    }
};

template <typename T>
struct BatchNorm2dLayer {
    Parameter<T> gamma, beta;
    std::vector<T> running_mean, running_var;

    void init(int channels) {
        gamma.init(Shape{channels}, std::vector<T>(static_cast<size_t>(channels), T(1)));
        beta.init(Shape{channels}, std::vector<T>(static_cast<size_t>(channels), T(0)));
        running_mean.assign(static_cast<size_t>(channels), T(0));
        running_var.assign(static_cast<size_t>(channels), T(1));
    }

    Tensor<T> forward(const Ctx<T>& ctx, const Tensor<T>& x) {
        return batchnorm2d(x, ctx.use(gamma), ctx.use(beta), running_mean, running_var,
                           ctx.training);
    }

    void collect(const std::string& prefix, ModuleItems<T>& items) {
        items.add_param(prefix + ".g", gamma);
        items.add_param(prefix + ".b", beta);
        items.add_buffer(prefix + ".rm", running_mean);
        items.add_buffer(prefix + ".rv", running_var);
    }
};

template <typename T>
struct LayerNormLayer {
    Parameter<T> gamma, beta;

    void init(int features) {
        gamma.init(Shape{features}, std::vector<T>(static_cast<size_t>(features), T(1)));
        beta.init(Shape{features}, std::vector<T>(static_cast<size_t>(features), T(0)));
    }

    Tensor<T> forward(const Ctx<T>& ctx, const Tensor<T>& x) {
        return layernorm(x, ctx.use(gamma), ctx.use(beta));
    }

    void collect(const std::string& prefix, ModuleItems<T>& items) {
        items.add_param(prefix + ".g", gamma);
        items.add_param(prefix + ".b", beta);
    }
};

// Dense layer on the trailing feature axis; weight is stored (in, out).
template <typename T>
struct LinearLayer {
    Parameter<T> weight;
    Parameter<T> bias;
    bool with_bias = true;
    int in_features = 0, out_features = 0;

    void init(Rng& rng, int in, int out, bool bias_ = true, double std_scale = 1.0) {
        in_features = in;
        out_features = out;
        with_bias = bias_;
        weight.init(Shape{in, out},
                    init::normal<T>(rng, static_cast<int64_t>(in) * out,
                                    std_scale * std::sqrt(1.0 / static_cast<double>(in))));
        if (with_bias) bias.init(Shape{out}, std::vector<T>(static_cast<size_t>(out), T(0)));
    }

    Tensor<T> forward(const Ctx<T>& ctx, const Tensor<T>& x) {
        require_shape(x.dim(-1) == in_features, "linear: feature dim mismatch");
        Shape out_shape = x.shape();
        out_shape.back() = out_features;
        const int64_t rows = x.size() / in_features;
        Tensor<T> flat = reshape(x, Shape{static_cast<int>(rows), in_features});
        Tensor<T> y = matmul(flat, ctx.use(weight));
        if (with_bias) y = add(y, reshape(ctx.use(bias), Shape{1, out_features}));
        return reshape(y, out_shape);
    }

    void collect(const std::string& prefix, ModuleItems<T>& items) {
        items.add_param(prefix + ".w", weight);
        if (with_bias) items.add_param(prefix + ".b", bias);
    }
};

// conv -> batchnorm -> relu, the workhorse block of the fusion and decoder
// stages.
template <typename T>
struct ConvBnRelu {
    Conv2dLayer<T> conv;
    BatchNorm2dLayer<T> bn;

    void init(Rng& rng, int in_ch, int out_ch, int k, int stride = 1, int pad = -1,
              int dilation = 1) {
        if (pad < 0) pad = dilation * (k - 1) / 2;
        conv.init(rng, in_ch, out_ch, k, stride, pad, dilation, /*bias=*/false);
        bn.init(out_ch);
    }

    Tensor<T> forward(const Ctx<T>& ctx, const Tensor<T>& x) {
        return relu(bn.forward(ctx, conv.forward(ctx, x)));
    }

    void collect(const std::string& prefix, ModuleItems<T>& items) {
        conv.collect(prefix + ".conv", items);
        bn.collect(prefix + ".bn", items);
    }
};

}  // namespace sodboost
