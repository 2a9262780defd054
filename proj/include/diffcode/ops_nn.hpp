#pragma once

#include <cmath>
#include <vector>

#include "diffcode/ops_core.hpp"

namespace diffcode {
namespace ops {

namespace detail {

// Unfold [N,C,H,W] into [N*Ho*Wo, C*kh*kw] patches (zero padded).
template <class S>
MatrixX<S> im2col(const TensorT<S>& x, Index kh, Index kw, Index stride, Index pad, Index Ho, Index Wo) {
    const Index N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    MatrixX<S> cols(N * Ho * Wo, C * kh * kw);
    cols.setZero();
    for (Index n = 0; n < N; ++n)
        for (Index oy = 0; oy < Ho; ++oy)
            for (Index ox = 0; ox < Wo; ++ox) {
                const Index r = (n * Ho + oy) * Wo + ox;
                for (Index c = 0; c < C; ++c)
                    for (Index ky = 0; ky < kh; ++ky) {
                        const Index iy = oy * stride - pad + ky;
                        if (iy < 0 || iy >= H) continue;
                        for (Index kx = 0; kx < kw; ++kx) {
                            const Index ix = ox * stride - pad + kx;
                            if (ix < 0 || ix >= W) continue;
                            cols(r, (c * kh + ky) * kw + kx) = x[((n * C + c) * H + iy) * W + ix];
                        }
                    }
            }
    return cols;
}

// Fold patch gradients back onto the input grid (adjoint of im2col).
template <class S>
void col2im_add(const MatrixX<S>& dcols, Index N, Index C, Index H, Index W, Index kh, Index kw, Index stride,
                Index pad, Index Ho, Index Wo, ArrayX<S>& dx) {
    for (Index n = 0; n < N; ++n)
        for (Index oy = 0; oy < Ho; ++oy)
            for (Index ox = 0; ox < Wo; ++ox) {
                const Index r = (n * Ho + oy) * Wo + ox;
                for (Index c = 0; c < C; ++c)
                    for (Index ky = 0; ky < kh; ++ky) {
                        const Index iy = oy * stride - pad + ky;
                        if (iy < 0 || iy >= H) continue;
                        for (Index kx = 0; kx < kw; ++kx) {
                            const Index ix = ox * stride - pad + kx;
                            if (ix < 0 || ix >= W) continue;
                            dx[((n * C + c) * H + iy) * W + ix] += dcols(r, (c * kh + ky) * kw + kx);
                        }
                    }
            }
}

}  // namespace detail

// 2-d cross-correlation, NCHW layout, floor output size
// Ho = (H + 2*pad - kh)/stride + 1. Differentiable in input and kernel.
template <class S>
Var conv2d(TapeT<S>& t, Var input, Var kernel, Index stride, Index pad) {
    const auto& x = t.value(input);
    const auto& k = t.value(kernel);
    check_shape(x.rank() == 4 && k.rank() == 4, "conv2d: rank-4 input and kernel required");
    check(k.dim(2) % 2 == 1 && k.dim(3) % 2 == 1, "conv2d: kernel extents must be odd");
    check(pad >= 0, "conv2d: pad must be nonnegative");
    check(stride >= 1, "conv2d: stride must be positive");
    check_shape(x.dim(1) == k.dim(1), "conv2d: channel mismatch between input and kernel");
    const Index N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const Index O = k.dim(0), kh = k.dim(2), kw = k.dim(3);
    check_shape(H + 2 * pad >= kh && W + 2 * pad >= kw, "conv2d: kernel larger than padded input");
    const Index Ho = (H + 2 * pad - kh) / stride + 1;
    const Index Wo = (W + 2 * pad - kw) / stride + 1;

    MatrixX<S> cols = detail::im2col(x, kh, kw, stride, pad, Ho, Wo);
    Eigen::Map<const MatrixX<S>> wmat(k.data().data(), O, C * kh * kw);
    MatrixX<S> rows = cols * wmat.transpose();  // [N*Ho*Wo, O]

    TensorT<S> out({N, O, Ho, Wo});
    for (Index n = 0; n < N; ++n)
        for (Index o = 0; o < O; ++o)
            for (Index y = 0; y < Ho; ++y)
                for (Index xo = 0; xo < Wo; ++xo)
                    out[((n * O + o) * Ho + y) * Wo + xo] = rows((n * Ho + y) * Wo + xo, o);

    return t.record("conv2d", std::move(out), {input, kernel},
                    [input, kernel, stride, pad, N, C, H, W, O, kh, kw, Ho, Wo](TapeT<S>& t, Var self) {
                        const auto& g = t.grad(self).data();
                        MatrixX<S> grows(N * Ho * Wo, O);
                        for (Index n = 0; n < N; ++n)
                            for (Index o = 0; o < O; ++o)
                                for (Index y = 0; y < Ho; ++y)
                                    for (Index xo = 0; xo < Wo; ++xo)
                                        grows((n * Ho + y) * Wo + xo, o) = g[((n * O + o) * Ho + y) * Wo + xo];
                        const bool need_x = t.grad_accum(input) != nullptr;
                        const bool need_k = t.grad_accum(kernel) != nullptr;
                        if (need_k || need_x) {
                            Eigen::Map<const MatrixX<S>> wmat(t.value(kernel).data().data(), O, C * kh * kw);
                            if (need_k) {
                                MatrixX<S> cols = detail::im2col(t.value(input), kh, kw, stride, pad, Ho, Wo);
                                MatrixX<S> dw = grows.transpose() * cols;
                                Eigen::Map<const ArrayX<S>> dwflat(dw.data(), dw.size());
                                t.accumulate(kernel, dwflat.eval());
                            }
                            if (need_x) {
                                MatrixX<S> dcols = grows * wmat;
                                ArrayX<S>* dx = t.grad_accum(input);
                                detail::col2im_add(dcols, N, C, H, W, kh, kw, stride, pad, Ho, Wo, *dx);
                            }
                        }
                    });
}

// Depthwise 3x3-style convolution: kernel [C,1,kh,kw], stride 1.
template <class S>
Var depthwise_conv2d(TapeT<S>& t, Var input, Var kernel, Index pad) {
    const auto& x = t.value(input);
    const auto& k = t.value(kernel);
    check_shape(x.rank() == 4 && k.rank() == 4, "depthwise_conv2d: rank-4 input and kernel required");
    check_shape(k.dim(0) == x.dim(1) && k.dim(1) == 1, "depthwise_conv2d: kernel must be [C,1,kh,kw]");
    check(k.dim(2) % 2 == 1 && k.dim(3) % 2 == 1, "depthwise_conv2d: kernel extents must be odd");
    check(pad >= 0, "depthwise_conv2d: pad must be nonnegative");
    const Index N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const Index kh = k.dim(2), kw = k.dim(3);
    const Index Ho = H + 2 * pad - kh + 1;
    const Index Wo = W + 2 * pad - kw + 1;
    check_shape(Ho >= 1 && Wo >= 1, "depthwise_conv2d: kernel larger than padded input");

    TensorT<S> out({N, C, Ho, Wo});
    for (Index n = 0; n < N; ++n)
        for (Index c = 0; c < C; ++c)
            for (Index y = 0; y < Ho; ++y)
                for (Index xo = 0; xo < Wo; ++xo) {
                    S acc = 0;
                    for (Index ky = 0; ky < kh; ++ky) {
                        const Index iy = y - pad + ky;
                        if (iy < 0 || iy >= H) continue;
                        for (Index kx = 0; kx < kw; ++kx) {
                            const Index ix = xo - pad + kx;
                            if (ix < 0 || ix >= W) continue;
                            acc += x[((n * C + c) * H + iy) * W + ix] * k[((c * 1) * kh + ky) * kw + kx];
                        }
                    }
                    out[((n * C + c) * Ho + y) * Wo + xo] = acc;
                }

    return t.record("depthwise_conv2d", std::move(out), {input, kernel},
                    [input, kernel, pad, N, C, H, W, kh, kw, Ho, Wo](TapeT<S>& t, Var self) {
                        const auto& g = t.grad(self).data();
                        const auto& x = t.value(input).data();
                        const auto& k = t.value(kernel).data();
                        ArrayX<S>* dx = t.grad_accum(input);
                        ArrayX<S>* dk = t.grad_accum(kernel);
                        for (Index n = 0; n < N; ++n)
                            for (Index c = 0; c < C; ++c)
                                for (Index y = 0; y < Ho; ++y)
                                    for (Index xo = 0; xo < Wo; ++xo) {
                                        const S go = g[((n * C + c) * Ho + y) * Wo + xo];
                                        for (Index ky = 0; ky < kh; ++ky) {
                                            const Index iy = y - pad + ky;
                                            if (iy < 0 || iy >= H) continue;
                                            for (Index kx = 0; kx < kw; ++kx) {
                                                const Index ix = xo - pad + kx;
                                                if (ix < 0 || ix >= W) continue;
                                                const Index xi = ((n * C + c) * H + iy) * W + ix;
                                                const Index ki = (c * kh + ky) * kw + kx;
                                                if (dx) (*dx)[xi] += go * k[ki];
                                                if (dk) (*dk)[ki] += go * x[xi];
                                            }
                                        }
                                    }
                    });
}

// Fully connected layer: out[n,g] = sum_f in[n,f] * w[g,f] + b[g].
template <class S>
Var linear(TapeT<S>& t, Var input, Var weight, Var bias) {
    const auto& x = t.value(input);
    const auto& w = t.value(weight);
    const auto& b = t.value(bias);
    check_shape(x.rank() == 2 && w.rank() == 2 && b.rank() == 1, "linear: expects [N,F], [G,F], [G]");
    check_shape(x.dim(1) == w.dim(1), "linear: inner dimension mismatch");
    check_shape(b.dim(0) == w.dim(0), "linear: bias size mismatch");
    const Index N = x.dim(0), F = x.dim(1), G = w.dim(0);

    Eigen::Map<const MatrixX<S>> xm(x.data().data(), N, F);
    Eigen::Map<const MatrixX<S>> wm(w.data().data(), G, F);
    MatrixX<S> ym = xm * wm.transpose();
    TensorT<S> out({N, G});
    Eigen::Map<MatrixX<S>> om(out.data().data(), N, G);
    om = ym;
    for (Index n = 0; n < N; ++n)
        for (Index gCol = 0; gCol < G; ++gCol) out[n * G + gCol] += b[gCol];

    return t.record("linear", std::move(out), {input, weight, bias},
                    [input, weight, bias, N, F, G](TapeT<S>& t, Var self) {
                        Eigen::Map<const MatrixX<S>> gm(t.grad(self).data().data(), N, G);
                        if (ArrayX<S>* acc = t.grad_accum(input)) {
                            Eigen::Map<const MatrixX<S>> wm(t.value(weight).data().data(), G, F);
                            Eigen::Map<MatrixX<S>> am(acc->data(), N, F);
                            am += gm * wm;
                        }
                        if (ArrayX<S>* acc = t.grad_accum(weight)) {
                            Eigen::Map<const MatrixX<S>> xm(t.value(input).data().data(), N, F);
                            Eigen::Map<MatrixX<S>> am(acc->data(), G, F);
                            am += gm.transpose() * xm;
                        }
                        if (ArrayX<S>* acc = t.grad_accum(bias)) {
                            for (Index n = 0; n < N; ++n)
                                for (Index gCol = 0; gCol < G; ++gCol)
                                    (*acc)[gCol] += t.grad(self).data()[n * G + gCol];
                        }
                    });
}

// Adds a per-channel bias to an NCHW tensor.
template <class S>
Var add_channel_bias(TapeT<S>& t, Var input, Var bias) {
    const auto& x = t.value(input);
    const auto& b = t.value(bias);
    check_shape(x.rank() == 4 && b.rank() == 1 && b.dim(0) == x.dim(1), "add_channel_bias: shape mismatch");
    const Index N = x.dim(0), C = x.dim(1), hw = x.dim(2) * x.dim(3);
    TensorT<S> out(x.shape());
    for (Index n = 0; n < N; ++n)
        for (Index c = 0; c < C; ++c)
            out.data().segment((n * C + c) * hw, hw) = x.data().segment((n * C + c) * hw, hw) + b[c];
    return t.record("add_channel_bias", std::move(out), {input, bias},
                    [input, bias, N, C, hw](TapeT<S>& t, Var self) {
                        const auto& g = t.grad(self).data();
                        t.accumulate(input, g);
                        if (ArrayX<S>* acc = t.grad_accum(bias)) {
                            for (Index n = 0; n < N; ++n)
                                for (Index c = 0; c < C; ++c) (*acc)[c] += g.segment((n * C + c) * hw, hw).sum();
                        }
                    });
}

// Spatial mean per channel: [N,C,H,W] -> [N,C].
template <class S>
Var global_avg_pool(TapeT<S>& t, Var input) {
    const auto& x = t.value(input);
    check_shape(x.rank() == 4, "global_avg_pool: rank-4 input required");
    const Index N = x.dim(0), C = x.dim(1), hw = x.dim(2) * x.dim(3);
    TensorT<S> out({N, C});
    for (Index n = 0; n < N; ++n)
        for (Index c = 0; c < C; ++c)
            out[n * C + c] = x.data().segment((n * C + c) * hw, hw).sum() / static_cast<S>(hw);
    return t.record("global_avg_pool", std::move(out), {input}, [input, N, C, hw](TapeT<S>& t, Var self) {
        if (ArrayX<S>* acc = t.grad_accum(input)) {
            const auto& g = t.grad(self).data();
            for (Index n = 0; n < N; ++n)
                for (Index c = 0; c < C; ++c)
                    acc->segment((n * C + c) * hw, hw) += g[n * C + c] / static_cast<S>(hw);
        }
    });
}

// Nearest-neighbour 2x spatial upsampling.
template <class S>
Var upsample_nearest2x(TapeT<S>& t, Var input) {
    const auto& x = t.value(input);
    check_shape(x.rank() == 4, "upsample_nearest2x: rank-4 input required");
    const Index N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    TensorT<S> out({N, C, 2 * H, 2 * W});
    for (Index n = 0; n < N; ++n)
        for (Index c = 0; c < C; ++c)
            for (Index y = 0; y < H; ++y)
                for (Index xo = 0; xo < W; ++xo) {
                    const S v = x[((n * C + c) * H + y) * W + xo];
                    const Index base = ((n * C + c) * 2 * H + 2 * y) * 2 * W + 2 * xo;
                    out[base] = v;
                    out[base + 1] = v;
                    out[base + 2 * W] = v;
                    out[base + 2 * W + 1] = v;
                }
    return t.record("upsample_nearest2x", std::move(out), {input}, [input, N, C, H, W](TapeT<S>& t, Var self) {
        if (ArrayX<S>* acc = t.grad_accum(input)) {
            const auto& g = t.grad(self).data();
            for (Index n = 0; n < N; ++n)
                for (Index c = 0; c < C; ++c)
                    for (Index y = 0; y < H; ++y)
                        for (Index xo = 0; xo < W; ++xo) {
                            const Index base = ((n * C + c) * 2 * H + 2 * y) * 2 * W + 2 * xo;
                            (*acc)[((n * C + c) * H + y) * W + xo] +=
                                g[base] + g[base + 1] + g[base + 2 * W] + g[base + 2 * W + 1];
                        }
        }
    });
}

// RMS normalization over the channel dimension at each spatial position,
// with a learnable per-channel gain.
template <class S>
Var channel_rms_norm(TapeT<S>& t, Var input, Var gain, double eps = 1e-5) {
    const auto& x = t.value(input);
    const auto& gn = t.value(gain);
    check_shape(x.rank() == 4 && gn.rank() == 1 && gn.dim(0) == x.dim(1), "channel_rms_norm: shape mismatch");
    const Index N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const Index hw = H * W;
    TensorT<S> out(x.shape());
    for (Index n = 0; n < N; ++n)
        for (Index p = 0; p < hw; ++p) {
            S ss = 0;
            for (Index c = 0; c < C; ++c) {
                const S v = x[(n * C + c) * hw + p];
                ss += v * v;
            }
            const S s = std::sqrt(ss / static_cast<S>(C) + static_cast<S>(eps));
            for (Index c = 0; c < C; ++c) out[(n * C + c) * hw + p] = gn[c] * x[(n * C + c) * hw + p] / s;
        }
    return t.record("channel_rms_norm", std::move(out), {input, gain},
                    [input, gain, eps, N, C, hw](TapeT<S>& t, Var self) {
                        const auto& g = t.grad(self).data();
                        const auto& x = t.value(input).data();
                        const auto& gn = t.value(gain).data();
                        ArrayX<S>* dx = t.grad_accum(input);
                        ArrayX<S>* dg = t.grad_accum(gain);
                        for (Index n = 0; n < N; ++n)
                            for (Index p = 0; p < hw; ++p) {
                                S ss = 0;
                                for (Index c = 0; c < C; ++c) {
                                    const S v = x[(n * C + c) * hw + p];
                                    ss += v * v;
                                }
                                const S s = std::sqrt(ss / static_cast<S>(C) + static_cast<S>(eps));
                                S q = 0;
                                for (Index c = 0; c < C; ++c)
                                    q += g[(n * C + c) * hw + p] * gn[c] * x[(n * C + c) * hw + p];
                                const S s3 = s * s * s;
                                for (Index c = 0; c < C; ++c) {
                                    const Index i = (n * C + c) * hw + p;
                                    if (dx) (*dx)[i] += gn[c] * g[i] / s - x[i] * q / (static_cast<S>(C) * s3);
                                    if (dg) (*dg)[c] += g[i] * x[i] / s;
                                }
                            }
                    });
}

// Split-channel multiplicative gate: [N,2c,H,W] -> [N,c,H,W], first half
// times second half.
template <class S>
Var channel_gate(TapeT<S>& t, Var input) {
    const auto& x = t.value(input);
    check_shape(x.rank() == 4 && x.dim(1) % 2 == 0, "channel_gate: even channel count required");
    const Index N = x.dim(0), C2 = x.dim(1), c = C2 / 2, hw = x.dim(2) * x.dim(3);
    TensorT<S> out({N, c, x.dim(2), x.dim(3)});
    for (Index n = 0; n < N; ++n)
        for (Index i = 0; i < c; ++i)
            out.data().segment((n * c + i) * hw, hw) =
                x.data().segment((n * C2 + i) * hw, hw) * x.data().segment((n * C2 + c + i) * hw, hw);
    return t.record("channel_gate", std::move(out), {input}, [input, N, C2, c, hw](TapeT<S>& t, Var self) {
        if (ArrayX<S>* dx = t.grad_accum(input)) {
            const auto& g = t.grad(self).data();
            const auto& x = t.value(input).data();
            for (Index n = 0; n < N; ++n)
                for (Index i = 0; i < c; ++i) {
                    dx->segment((n * C2 + i) * hw, hw) +=
                        g.segment((n * c + i) * hw, hw) * x.segment((n * C2 + c + i) * hw, hw);
                    dx->segment((n * C2 + c + i) * hw, hw) +=
                        g.segment((n * c + i) * hw, hw) * x.segment((n * C2 + i) * hw, hw);
                }
        }
    });
}

// Numerically stable softmax over the trailing dimension.
template <class S>
Var softmax(TapeT<S>& t, Var input) {
    const auto& x = t.value(input);
    check_shape(x.rank() >= 1, "softmax: rank >= 1 required");
    const Index E = x.dim(x.rank() - 1);
    const Index R = x.numel() / E;
    TensorT<S> out(x.shape());
    for (Index r = 0; r < R; ++r) {
        auto row = x.data().segment(r * E, E);
        const S m = row.maxCoeff();
        ArrayX<S> e = (row - m).exp();
        out.data().segment(r * E, E) = e / e.sum();
    }
    return t.record("softmax", std::move(out), {input}, [input, R, E](TapeT<S>& t, Var self) {
        if (ArrayX<S>* dx = t.grad_accum(input)) {
            const auto& g = t.grad(self).data();
            const auto& y = t.value(self).data();
            for (Index r = 0; r < R; ++r) {
                auto yr = y.segment(r * E, E);
                auto gr = g.segment(r * E, E);
                const S dot = (gr * yr).sum();
                dx->segment(r * E, E) += yr * (gr - dot);
            }
        }
    });
}

// Mean cross entropy between logits [N,E] and integer labels.
template <class S>
Var softmax_cross_entropy(TapeT<S>& t, Var logits, std::vector<Index> labels) {
    const auto& x = t.value(logits);
    check_shape(x.rank() == 2, "softmax_cross_entropy: logits must be [N,E]");
    const Index N = x.dim(0), E = x.dim(1);
    check(static_cast<Index>(labels.size()) == N, "softmax_cross_entropy: label count mismatch");
    for (Index l : labels) check(l >= 0 && l < E, "softmax_cross_entropy: label out of range");
    S loss = 0;
    for (Index n = 0; n < N; ++n) {
        auto row = x.data().segment(n * E, E);
        const S m = row.maxCoeff();
        const S lse = m + std::log((row - m).exp().sum());
        loss += lse - row[labels[static_cast<std::size_t>(n)]];
    }
    TensorT<S> out = TensorT<S>::scalar(loss / static_cast<S>(N));
    return t.record("softmax_cross_entropy", std::move(out), {logits},
                    [logits, labels, N, E](TapeT<S>& t, Var self) {
                        if (ArrayX<S>* dx = t.grad_accum(logits)) {
                            const S g = t.grad(self).data()[0] / static_cast<S>(N);
                            const auto& x = t.value(logits).data();
                            for (Index n = 0; n < N; ++n) {
                                auto row = x.segment(n * E, E);
                                const S m = row.maxCoeff();
                                ArrayX<S> e = (row - m).exp();
                                ArrayX<S> p = e / e.sum();
                                p[labels[static_cast<std::size_t>(n)]] -= S(1);
                                dx->segment(n * E, E) += g * p;
                            }
                        }
                    });
}

// Sum of code vectors selected per position and depth:
// codes [M,Cc] gathered by idx [h,w,D] -> [Cc,h,w]. Backward scatter-adds
// into the selected code rows, which is how codebooks receive gradients.
template <class S>
Var gather_codes(TapeT<S>& t, Var codes, const TensorT<std::int32_t>& idx) {
    const auto& cb = t.value(codes);
    check_shape(cb.rank() == 2, "gather_codes: codes must be [M,C]");
    check_shape(idx.rank() == 3, "gather_codes: indices must be [h,w,D]");
    const Index M = cb.dim(0), Cc = cb.dim(1);
    const Index h = idx.dim(0), w = idx.dim(1), D = idx.dim(2);
    for (Index i = 0; i < idx.numel(); ++i)
        check(idx[i] >= 0 && idx[i] < M, "gather_codes: code index out of range");
    TensorT<S> out({Cc, h, w});
    for (Index i = 0; i < h; ++i)
        for (Index j = 0; j < w; ++j)
            for (Index d = 0; d < D; ++d) {
                const Index m = idx[(i * w + j) * D + d];
                for (Index c = 0; c < Cc; ++c) out[(c * h + i) * w + j] += cb[m * Cc + c];
            }
    TensorT<std::int32_t> idx_copy = idx;
    return t.record("gather_codes", std::move(out), {codes},
                    [codes, idx_copy, Cc, h, w, D](TapeT<S>& t, Var self) {
                        if (ArrayX<S>* dc = t.grad_accum(codes)) {
                            const auto& g = t.grad(self).data();
                            for (Index i = 0; i < h; ++i)
                                for (Index j = 0; j < w; ++j)
                                    for (Index d = 0; d < D; ++d) {
                                        const Index m = idx_copy[(i * w + j) * D + d];
                                        for (Index c = 0; c < Cc; ++c)
                                            (*dc)[m * Cc + c] += g[(c * h + i) * w + j];
                                    }
                        }
                    });
}

// Picks flat elements by index: y[i] = x[idx[i]].
template <class S>
Var gather_elems(TapeT<S>& t, Var input, std::vector<Index> idx) {
    const auto& x = t.value(input);
    for (Index i : idx) check(i >= 0 && i < x.numel(), "gather_elems: index out of range");
    TensorT<S> out({static_cast<Index>(idx.size())});
    for (std::size_t i = 0; i < idx.size(); ++i) out[static_cast<Index>(i)] = x[idx[i]];
    return t.record("gather_elems", std::move(out), {input}, [input, idx](TapeT<S>& t, Var self) {
        if (ArrayX<S>* dx = t.grad_accum(input)) {
            const auto& g = t.grad(self).data();
            for (std::size_t i = 0; i < idx.size(); ++i) (*dx)[idx[i]] += g[static_cast<Index>(i)];
        }
    });
}

// Multiplies a tensor by a one-element tensor variable (a tape scalar).
template <class S>
Var scale_by(TapeT<S>& t, Var input, Var scalar) {
    check_shape(t.value(scalar).numel() == 1, "scale_by: scalar var must have one element");
    const S s = t.value(scalar)[0];
    TensorT<S> out(t.value(input).shape(), (t.value(input).data() * s).eval());
    return t.record("scale_by", std::move(out), {input, scalar}, [input, scalar](TapeT<S>& t, Var self) {
        const auto& g = t.grad(self).data();
        const S s = t.value(scalar)[0];
        t.accumulate(input, (g * s).eval());
        if (ArrayX<S>* ds = t.grad_accum(scalar)) (*ds)[0] += (g * t.value(input).data()).sum();
    });
}

}  // namespace ops
}  // namespace diffcode
