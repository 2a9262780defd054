#pragma once

#include <cmath>
#include <vector>

#include "diffcode/tape.hpp"

namespace diffcode {
namespace ops {

// ---------------------------------------------------------------------------
// Elementwise arithmetic
// ---------------------------------------------------------------------------

template <class S>
Var add(TapeT<S>& t, Var a, Var b) {
    check_shape(t.value(a).same_shape(t.value(b)), "add: shape mismatch");
    TensorT<S> out(t.value(a).shape(), t.value(a).data() + t.value(b).data());
    return t.record("add", std::move(out), {a, b}, [a, b](TapeT<S>& t, Var self) {
        const auto& g = t.grad(self).data();
        t.accumulate(a, g);
        t.accumulate(b, g);
    });
}

template <class S>
Var sub(TapeT<S>& t, Var a, Var b) {
    check_shape(t.value(a).same_shape(t.value(b)), "sub: shape mismatch");
    TensorT<S> out(t.value(a).shape(), t.value(a).data() - t.value(b).data());
    return t.record("sub", std::move(out), {a, b}, [a, b](TapeT<S>& t, Var self) {
        const auto& g = t.grad(self).data();
        t.accumulate(a, g);
        t.accumulate(b, (-g).eval());
    });
}

template <class S>
Var mul(TapeT<S>& t, Var a, Var b) {
    check_shape(t.value(a).same_shape(t.value(b)), "mul: shape mismatch");
    TensorT<S> out(t.value(a).shape(), t.value(a).data() * t.value(b).data());
    return t.record("mul", std::move(out), {a, b}, [a, b](TapeT<S>& t, Var self) {
        const auto& g = t.grad(self).data();
        t.accumulate(a, (g * t.value(b).data()).eval());
        t.accumulate(b, (g * t.value(a).data()).eval());
    });
}

template <class S>
Var neg(TapeT<S>& t, Var a) {
    TensorT<S> out(t.value(a).shape(), (-t.value(a).data()).eval());
    return t.record("neg", std::move(out), {a}, [a](TapeT<S>& t, Var self) {
        t.accumulate(a, (-t.grad(self).data()).eval());
    });
}

template <class S>
Var scale(TapeT<S>& t, Var a, double c) {
    TensorT<S> out(t.value(a).shape(), (t.value(a).data() * static_cast<S>(c)).eval());
    return t.record("scale", std::move(out), {a}, [a, c](TapeT<S>& t, Var self) {
        t.accumulate(a, (t.grad(self).data() * static_cast<S>(c)).eval());
    });
}

template <class S>
Var add_scalar(TapeT<S>& t, Var a, double c) {
    TensorT<S> out(t.value(a).shape(), (t.value(a).data() + static_cast<S>(c)).eval());
    return t.record("add_scalar", std::move(out), {a}, [a](TapeT<S>& t, Var self) {
        t.accumulate(a, t.grad(self).data());
    });
}

template <class S>
Var silu(TapeT<S>& t, Var a) {
    const auto& x = t.value(a).data();
    ArrayX<S> sig = (S(1) / (S(1) + (-x).exp())).eval();
    TensorT<S> out(t.value(a).shape(), (x * sig).eval());
    return t.record("silu", std::move(out), {a}, [a](TapeT<S>& t, Var self) {
        const auto& x = t.value(a).data();
        ArrayX<S> sig = S(1) / (S(1) + (-x).exp());
        ArrayX<S> d = sig * (S(1) + x * (S(1) - sig));
        t.accumulate(a, (t.grad(self).data() * d).eval());
    });
}

template <class S>
Var sigmoid(TapeT<S>& t, Var a) {
    const auto& x = t.value(a).data();
    TensorT<S> out(t.value(a).shape(), (S(1) / (S(1) + (-x).exp())).eval());
    return t.record("sigmoid", std::move(out), {a}, [a](TapeT<S>& t, Var self) {
        const auto& y = t.value(self).data();
        t.accumulate(a, (t.grad(self).data() * y * (S(1) - y)).eval());
    });
}

// Hard clamp to [0,1]. Subgradient: passes only strictly inside the range.
template <class S>
Var clamp01(TapeT<S>& t, Var a) {
    const auto& x = t.value(a).data();
    TensorT<S> out(t.value(a).shape(), x.cwiseMax(S(0)).cwiseMin(S(1)).eval());
    return t.record("clamp01", std::move(out), {a}, [a](TapeT<S>& t, Var self) {
        const auto& x = t.value(a).data();
        ArrayX<S> mask = ((x > S(0)) && (x < S(1))).template cast<S>();
        t.accumulate(a, (t.grad(self).data() * mask).eval());
    });
}

// ---------------------------------------------------------------------------
// Gradient-flow control
// ---------------------------------------------------------------------------

// Identity in value; contributes nothing to the input's gradient.
template <class S>
Var stop_gradient(TapeT<S>& t, Var a) {
    return t.record_no_grad("stop_gradient", t.value(a));
}

// Forward takes the quantized value, backward hands the incoming gradient
// to the pre-quantization input unchanged.
template <class S>
Var straight_through(TapeT<S>& t, Var z, Var z_q) {
    check_shape(t.value(z).same_shape(t.value(z_q)), "straight_through: shape mismatch");
    return t.record("straight_through", t.value(z_q), {z}, [z](TapeT<S>& t, Var self) {
        t.accumulate(z, t.grad(self).data());
    });
}

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

template <class S>
Var reshape(TapeT<S>& t, Var a, std::vector<Index> shape) {
    TensorT<S> out = t.value(a).reshaped(std::move(shape));
    return t.record("reshape", std::move(out), {a}, [a](TapeT<S>& t, Var self) {
        t.accumulate(a, t.grad(self).data());
    });
}

// Concatenate rank-4 tensors along the channel dimension.
template <class S>
Var concat_channels(TapeT<S>& t, const std::vector<Var>& parts) {
    check(!parts.empty(), "concat_channels: no inputs");
    const auto& first = t.value(parts[0]);
    check_shape(first.rank() == 4, "concat_channels: rank-4 inputs required");
    const Index N = first.dim(0), H = first.dim(2), W = first.dim(3);
    Index Ctot = 0;
    std::vector<Index> chans;
    for (Var p : parts) {
        const auto& v = t.value(p);
        check_shape(v.rank() == 4 && v.dim(0) == N && v.dim(2) == H && v.dim(3) == W,
                    "concat_channels: incompatible shapes");
        chans.push_back(v.dim(1));
        Ctot += v.dim(1);
    }
    TensorT<S> out({N, Ctot, H, W});
    const Index hw = H * W;
    for (Index n = 0; n < N; ++n) {
        Index coff = 0;
        for (std::size_t i = 0; i < parts.size(); ++i) {
            const auto& src = t.value(parts[i]).data();
            out.data().segment((n * Ctot + coff) * hw, chans[i] * hw) = src.segment(n * chans[i] * hw, chans[i] * hw);
            coff += chans[i];
        }
    }
    std::vector<Var> ps(parts);
    return t.record("concat_channels", std::move(out), ps,
                    [ps, chans, N, Ctot, hw](TapeT<S>& t, Var self) {
                        const auto& g = t.grad(self).data();
                        for (Index n = 0; n < N; ++n) {
                            Index coff = 0;
                            for (std::size_t i = 0; i < ps.size(); ++i) {
                                if (ArrayX<S>* acc = t.grad_accum(ps[i])) {
                                    acc->segment(n * chans[i] * hw, chans[i] * hw) +=
                                        g.segment((n * Ctot + coff) * hw, chans[i] * hw);
                                }
                                coff += chans[i];
                            }
                        }
                    });
}

// Concatenate rank-2 tensors along the column (feature) dimension.
template <class S>
Var concat_cols(TapeT<S>& t, const std::vector<Var>& parts) {
    check(!parts.empty(), "concat_cols: no inputs");
    const Index R = t.value(parts[0]).dim(0);
    Index Ftot = 0;
    std::vector<Index> widths;
    for (Var p : parts) {
        const auto& v = t.value(p);
        check_shape(v.rank() == 2 && v.dim(0) == R, "concat_cols: incompatible shapes");
        widths.push_back(v.dim(1));
        Ftot += v.dim(1);
    }
    TensorT<S> out({R, Ftot});
    for (Index r = 0; r < R; ++r) {
        Index off = 0;
        for (std::size_t i = 0; i < parts.size(); ++i) {
            const auto& src = t.value(parts[i]).data();
            out.data().segment(r * Ftot + off, widths[i]) = src.segment(r * widths[i], widths[i]);
            off += widths[i];
        }
    }
    std::vector<Var> ps(parts);
    return t.record("concat_cols", std::move(out), ps, [ps, widths, R, Ftot](TapeT<S>& t, Var self) {
        const auto& g = t.grad(self).data();
        for (Index r = 0; r < R; ++r) {
            Index off = 0;
            for (std::size_t i = 0; i < ps.size(); ++i) {
                if (ArrayX<S>* acc = t.grad_accum(ps[i])) {
                    acc->segment(r * widths[i], widths[i]) += g.segment(r * Ftot + off, widths[i]);
                }
                off += widths[i];
            }
        }
    });
}

// Single-sample slice of a rank-4 batch.
template <class S>
Var slice_batch(TapeT<S>& t, Var a, Index n) {
    const auto& v = t.value(a);
    check_shape(v.rank() == 4, "slice_batch: rank-4 input required");
    check(n >= 0 && n < v.dim(0), "slice_batch: index out of range");
    const Index chw = v.dim(1) * v.dim(2) * v.dim(3);
    TensorT<S> out({Index(1), v.dim(1), v.dim(2), v.dim(3)});
    out.data() = v.data().segment(n * chw, chw);
    return t.record("slice_batch", std::move(out), {a}, [a, n, chw](TapeT<S>& t, Var self) {
        if (ArrayX<S>* acc = t.grad_accum(a)) acc->segment(n * chw, chw) += t.grad(self).data();
    });
}

// Concatenate rank-4 tensors along the batch dimension.
template <class S>
Var concat_batch(TapeT<S>& t, const std::vector<Var>& parts) {
    check(!parts.empty(), "concat_batch: no inputs");
    const auto& first = t.value(parts[0]);
    check_shape(first.rank() == 4, "concat_batch: rank-4 inputs required");
    const Index C = first.dim(1), H = first.dim(2), W = first.dim(3);
    Index Ntot = 0;
    std::vector<Index> batches;
    for (Var p : parts) {
        const auto& v = t.value(p);
        check_shape(v.rank() == 4 && v.dim(1) == C && v.dim(2) == H && v.dim(3) == W,
                    "concat_batch: incompatible shapes");
        batches.push_back(v.dim(0));
        Ntot += v.dim(0);
    }
    const Index chw = C * H * W;
    TensorT<S> out({Ntot, C, H, W});
    Index off = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        out.data().segment(off, batches[i] * chw) = t.value(parts[i]).data();
        off += batches[i] * chw;
    }
    std::vector<Var> ps(parts);
    return t.record("concat_batch", std::move(out), ps, [ps, batches, chw](TapeT<S>& t, Var self) {
        const auto& g = t.grad(self).data();
        Index off = 0;
        for (std::size_t i = 0; i < ps.size(); ++i) {
            if (ArrayX<S>* acc = t.grad_accum(ps[i])) *acc += g.segment(off, batches[i] * chw);
            off += batches[i] * chw;
        }
    });
}

// [N,C,H,W] -> [N*H*W, C]; row (n*H+y)*W+x carries the channel vector at
// that spatial position.
template <class S>
Var nchw_to_rows(TapeT<S>& t, Var a) {
    const auto& v = t.value(a);
    check_shape(v.rank() == 4, "nchw_to_rows: rank-4 input required");
    const Index N = v.dim(0), C = v.dim(1), H = v.dim(2), W = v.dim(3);
    TensorT<S> out({N * H * W, C});
    for (Index n = 0; n < N; ++n)
        for (Index c = 0; c < C; ++c)
            for (Index y = 0; y < H; ++y)
                for (Index x = 0; x < W; ++x)
                    out[((n * H + y) * W + x) * C + c] = v[((n * C + c) * H + y) * W + x];
    return t.record("nchw_to_rows", std::move(out), {a}, [a, N, C, H, W](TapeT<S>& t, Var self) {
        ArrayX<S>* acc = t.grad_accum(a);
        if (!acc) return;
        const auto& g = t.grad(self).data();
        for (Index n = 0; n < N; ++n)
            for (Index c = 0; c < C; ++c)
                for (Index y = 0; y < H; ++y)
                    for (Index x = 0; x < W; ++x)
                        (*acc)[((n * C + c) * H + y) * W + x] += g[((n * H + y) * W + x) * C + c];
    });
}

// Inverse of nchw_to_rows.
template <class S>
Var rows_to_nchw(TapeT<S>& t, Var a, Index N, Index H, Index W) {
    const auto& v = t.value(a);
    check_shape(v.rank() == 2 && v.dim(0) == N * H * W, "rows_to_nchw: row count mismatch");
    const Index C = v.dim(1);
    TensorT<S> out({N, C, H, W});
    for (Index n = 0; n < N; ++n)
        for (Index c = 0; c < C; ++c)
            for (Index y = 0; y < H; ++y)
                for (Index x = 0; x < W; ++x)
                    out[((n * C + c) * H + y) * W + x] = v[((n * H + y) * W + x) * C + c];
    return t.record("rows_to_nchw", std::move(out), {a}, [a, N, C, H, W](TapeT<S>& t, Var self) {
        ArrayX<S>* acc = t.grad_accum(a);
        if (!acc) return;
        const auto& g = t.grad(self).data();
        for (Index n = 0; n < N; ++n)
            for (Index c = 0; c < C; ++c)
                for (Index y = 0; y < H; ++y)
                    for (Index x = 0; x < W; ++x)
                        (*acc)[((n * H + y) * W + x) * C + c] += g[((n * C + c) * H + y) * W + x];
    });
}

// ---------------------------------------------------------------------------
// Reductions and losses
// ---------------------------------------------------------------------------

template <class S>
Var sum(TapeT<S>& t, Var a) {
    TensorT<S> out = TensorT<S>::scalar(t.value(a).data().sum());
    return t.record("sum", std::move(out), {a}, [a](TapeT<S>& t, Var self) {
        const S g = t.grad(self).data()[0];
        if (ArrayX<S>* acc = t.grad_accum(a)) *acc += g;
    });
}

template <class S>
Var mean(TapeT<S>& t, Var a) {
    const Index n = t.value(a).numel();
    TensorT<S> out = TensorT<S>::scalar(t.value(a).data().sum() / static_cast<S>(n));
    return t.record("mean", std::move(out), {a}, [a, n](TapeT<S>& t, Var self) {
        const S g = t.grad(self).data()[0] / static_cast<S>(n);
        if (ArrayX<S>* acc = t.grad_accum(a)) *acc += g;
    });
}

// Mean absolute difference. Subgradient sign(0) = 0.
template <class S>
Var l1_loss(TapeT<S>& t, Var a, Var b) {
    check_shape(t.value(a).same_shape(t.value(b)), "l1_loss: shape mismatch");
    const Index n = t.value(a).numel();
    ArrayX<S> d = t.value(a).data() - t.value(b).data();
    TensorT<S> out = TensorT<S>::scalar(d.abs().sum() / static_cast<S>(n));
    return t.record("l1_loss", std::move(out), {a, b}, [a, b, n](TapeT<S>& t, Var self) {
        const S g = t.grad(self).data()[0] / static_cast<S>(n);
        ArrayX<S> d = t.value(a).data() - t.value(b).data();
        ArrayX<S> s = d.sign();
        t.accumulate(a, (g * s).eval());
        t.accumulate(b, (-g * s).eval());
    });
}

// Mean squared difference.
template <class S>
Var mse_loss(TapeT<S>& t, Var a, Var b) {
    check_shape(t.value(a).same_shape(t.value(b)), "mse_loss: shape mismatch");
    const Index n = t.value(a).numel();
    ArrayX<S> d = t.value(a).data() - t.value(b).data();
    TensorT<S> out = TensorT<S>::scalar((d * d).sum() / static_cast<S>(n));
    return t.record("mse_loss", std::move(out), {a, b}, [a, b, n](TapeT<S>& t, Var self) {
        const S g = t.grad(self).data()[0] * S(2) / static_cast<S>(n);
        ArrayX<S> d = t.value(a).data() - t.value(b).data();
        t.accumulate(a, (g * d).eval());
        t.accumulate(b, (-g * d).eval());
    });
}

}  // namespace ops
}  // namespace diffcode
