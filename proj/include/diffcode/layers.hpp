#pragma once

#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "diffcode/ops_nn.hpp"
#include "diffcode/random.hpp"

namespace diffcode {

// Named trainable tensor. Values persist across steps; grad is refreshed by
// Binder::harvest after each backward pass.
template <class S>
struct Param {
    std::string name;
    TensorT<S> value;
    TensorT<S> grad;

    void init(std::string n, TensorT<S> v) {
        name = std::move(n);
        value = std::move(v);
        grad = TensorT<S>::zeros(value.shape());
    }
};

// Binds parameters into a tape for one forward pass and routes gradients
// back to them afterwards. Frozen binders insert parameters as constants.
template <class S>
class Binder {
  public:
    Binder(TapeT<S>& tape, bool trainable) : tape_(&tape), trainable_(trainable) {}

    TapeT<S>& tape() { return *tape_; }

    Var operator()(Param<S>& p) {
        const Var v = tape_->leaf(p.value, trainable_);
        if (trainable_) bound_.emplace_back(&p, v);
        return v;
    }

    bool trainable() const { return trainable_; }

    // Copy tape gradients into Param::grad. A parameter bound more than once
    // accumulates over its bindings.
    void harvest() {
        std::unordered_set<Param<S>*> seen;
        for (auto& [p, v] : bound_) {
            if (seen.insert(p).second) p->grad.data().setZero();
        }
        for (auto& [p, v] : bound_) p->grad.data() += tape_->grad(v).data();
    }

  private:
    TapeT<S>* tape_;
    bool trainable_;
    std::vector<std::pair<Param<S>*, Var>> bound_;
};

namespace init {

// fan-in scaled uniform init.
template <class S>
TensorT<S> conv_weight(Rng& rng, Index out_ch, Index in_ch, Index kh, Index kw) {
    const double lim = std::sqrt(1.0 / static_cast<double>(in_ch * kh * kw));
    return TensorT<S>::random_uniform({out_ch, in_ch, kh, kw}, rng, -lim, lim);
}

template <class S>
TensorT<S> linear_weight(Rng& rng, Index out_f, Index in_f) {
    const double lim = std::sqrt(1.0 / static_cast<double>(in_f));
    return TensorT<S>::random_uniform({out_f, in_f}, rng, -lim, lim);
}

}  // namespace init

template <class S>
struct Conv2dLayer {
    Param<S> weight, bias;
    Index stride = 1, pad = 0;

    void init(Rng& rng, const std::string& name, Index in_ch, Index out_ch, Index k, Index stride_, Index pad_) {
        stride = stride_;
        pad = pad_;
        weight.init(name + ".weight", init::conv_weight<S>(rng, out_ch, in_ch, k, k));
        bias.init(name + ".bias", TensorT<S>::zeros({out_ch}));
    }

    Var forward(Binder<S>& bind, Var x) {
        Var y = ops::conv2d(bind.tape(), x, bind(weight), stride, pad);
        return ops::add_channel_bias(bind.tape(), y, bind(bias));
    }

    void collect(std::vector<Param<S>*>& out) {
        out.push_back(&weight);
        out.push_back(&bias);
    }
};

template <class S>
struct DepthwiseConv2dLayer {
    Param<S> weight, bias;
    Index pad = 1;

    void init(Rng& rng, const std::string& name, Index ch, Index k, Index pad_) {
        pad = pad_;
        weight.init(name + ".weight", init::conv_weight<S>(rng, ch, 1, k, k));
        bias.init(name + ".bias", TensorT<S>::zeros({ch}));
    }

    Var forward(Binder<S>& bind, Var x) {
        Var y = ops::depthwise_conv2d(bind.tape(), x, bind(weight), pad);
        return ops::add_channel_bias(bind.tape(), y, bind(bias));
    }

    void collect(std::vector<Param<S>*>& out) {
        out.push_back(&weight);
        out.push_back(&bias);
    }
};

template <class S>
struct LinearLayer {
    Param<S> weight, bias;

    void init(Rng& rng, const std::string& name, Index in_f, Index out_f) {
        weight.init(name + ".weight", init::linear_weight<S>(rng, out_f, in_f));
        bias.init(name + ".bias", TensorT<S>::zeros({out_f}));
    }

    Var forward(Binder<S>& bind, Var x) { return ops::linear(bind.tape(), x, bind(weight), bind(bias)); }

    void collect(std::vector<Param<S>*>& out) {
        out.push_back(&weight);
        out.push_back(&bias);
    }
};

template <class S>
struct RmsNormLayer {
    Param<S> gain;

    void init(const std::string& name, Index ch) { gain.init(name + ".gain", TensorT<S>::ones({ch})); }

    Var forward(Binder<S>& bind, Var x) { return ops::channel_rms_norm(bind.tape(), x, bind(gain)); }

    void collect(std::vector<Param<S>*>& out) { out.push_back(&gain); }
};

// Residual gated convolution block: norm -> 1x1 conv widening to 2c ->
// 3x3 depthwise -> split-channel gate -> 1x1 conv back to c, plus skip.
template <class S>
struct SimpleGatedBlock {
    RmsNormLayer<S> norm;
    Conv2dLayer<S> pw_in;
    DepthwiseConv2dLayer<S> dw;
    Conv2dLayer<S> pw_out;

    void init(Rng& rng, const std::string& name, Index ch) {
        norm.init(name + ".norm", ch);
        pw_in.init(rng, name + ".pw_in", ch, 2 * ch, 1, 1, 0);
        dw.init(rng, name + ".dw", 2 * ch, 3, 1);
        pw_out.init(rng, name + ".pw_out", ch, ch, 1, 1, 0);
    }

    Var forward(Binder<S>& bind, Var x) {
        TapeT<S>& t = bind.tape();
        Var h = norm.forward(bind, x);
        h = pw_in.forward(bind, h);
        h = dw.forward(bind, h);
        h = ops::channel_gate(t, h);
        h = pw_out.forward(bind, h);
        return ops::add(t, x, h);
    }

    void collect(std::vector<Param<S>*>& out) {
        norm.collect(out);
        pw_in.collect(out);
        dw.collect(out);
        pw_out.collect(out);
    }
};

}  // namespace diffcode
