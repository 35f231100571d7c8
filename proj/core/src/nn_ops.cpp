// Copyright 2026 The OPIR Authors
// SPDX-License-Identifier: Apache-2.0

#include "opir/nn_ops.hpp"

#include "opir/thread_pool.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace opir::nn {

void ParamTensor::resize(std::vector<int> s) {
    shape = std::move(s);
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    v.assign(n, 0.0f);
    g.assign(n, 0.0);
}

void ParamTensor::fill_uniform(Rng& rng, double lo, double hi) {
    for (float& x : v) x = static_cast<float>(rng.uniform(lo, hi));
}

ConvLayer::ConvLayer(int ci_, int co_, int k_, int stride_)
    : ci(ci_), co(co_), k(k_), stride(stride_) {
    if (k != 1 && k != 3) throw std::invalid_argument("ConvLayer: kernel must be 1 or 3");
    if (stride != 1 && stride != 2) throw std::invalid_argument("ConvLayer: stride must be 1 or 2");
    w.resize({k, k, ci, co});
    b.resize({co});
}

void ConvLayer::init(Rng& rng, bool zero_init) {
    if (zero_init) {
        std::fill(w.v.begin(), w.v.end(), 0.0f);
        std::fill(b.v.begin(), b.v.end(), 0.0f);
        return;
    }
    const double a = std::sqrt(1.0 / (static_cast<double>(ci) * k * k));
    w.fill_uniform(rng, -a, a);
    std::fill(b.v.begin(), b.v.end(), 0.0f);
}

int ConvLayer::out_dim(int in_dim) const {
    const int pad = (k - 1) / 2;
    return (in_dim + 2 * pad - k) / stride + 1;
}

namespace {
constexpr int kMaxChannels = 256;
constexpr int kRowGrain = 8;
} // namespace

Tensor conv2d_forward(const Tensor& in, const ConvLayer& l) {
    if (in.c != l.ci) throw std::invalid_argument("conv2d_forward: channel mismatch");
    if (l.co > kMaxChannels) throw std::invalid_argument("conv2d_forward: too many channels");
    const int pad = (l.k - 1) / 2;
    const int ho = l.out_dim(in.h), wo = l.out_dim(in.w);
    Tensor out(ho, wo, l.co);

    // widen the weights once; the inner loops then run pure double FMAs
    std::vector<double> W(l.w.v.begin(), l.w.v.end());
    std::vector<double> B(l.b.v.begin(), l.b.v.end());
    ThreadPool::instance().parallel_for(ho, kRowGrain, [&](int yb, int ye) {
        double acc[kMaxChannels];
        for (int y = yb; y < ye; ++y)
            for (int x = 0; x < wo; ++x) {
                for (int c = 0; c < l.co; ++c) acc[c] = B[c];
                for (int ky = 0; ky < l.k; ++ky) {
                    const int iy = y * l.stride + ky - pad;
                    if (iy < 0 || iy >= in.h) continue;
                    for (int kx = 0; kx < l.k; ++kx) {
                        const int ix = x * l.stride + kx - pad;
                        if (ix < 0 || ix >= in.w) continue;
                        const double* ip = &in.at(iy, ix, 0);
                        const double* wp =
                            W.data() + (static_cast<std::size_t>(ky) * l.k + kx) * l.ci * l.co;
                        for (int c = 0; c < l.ci; ++c) {
                            const double val = ip[c];
                            const double* wrow = wp + static_cast<std::size_t>(c) * l.co;
                            for (int o = 0; o < l.co; ++o) acc[o] += val * wrow[o];
                        }
                    }
                }
                double* op = &out.at(y, x, 0);
                for (int o = 0; o < l.co; ++o) op[o] = acc[o];
            }
    });
    return out;
}

Tensor conv2d_backward(const Tensor& in, ConvLayer& l, const Tensor& d_out) {
    const int pad = (l.k - 1) / 2;
    const int ho = l.out_dim(in.h), wo = l.out_dim(in.w);
    if (d_out.h != ho || d_out.w != wo || d_out.c != l.co)
        throw std::invalid_argument("conv2d_backward: upstream shape mismatch");

    Tensor d_in(in.h, in.w, in.c);
    std::vector<double> W(l.w.v.begin(), l.w.v.end());
    double* dW = l.w.g.data();
    double* dB = l.b.g.data();

    // Sequential: weight-gradient accumulation keeps one fixed order.
    for (int y = 0; y < ho; ++y)
        for (int x = 0; x < wo; ++x) {
            const double* gp = &d_out.at(y, x, 0);
            for (int o = 0; o < l.co; ++o) dB[o] += gp[o];
            for (int ky = 0; ky < l.k; ++ky) {
                const int iy = y * l.stride + ky - pad;
                if (iy < 0 || iy >= in.h) continue;
                for (int kx = 0; kx < l.k; ++kx) {
                    const int ix = x * l.stride + kx - pad;
                    if (ix < 0 || ix >= in.w) continue;
                    const double* ip = &in.at(iy, ix, 0);
                    double* dip = &d_in.at(iy, ix, 0);
                    const std::size_t base =
                        (static_cast<std::size_t>(ky) * l.k + kx) * l.ci * l.co;
                    for (int c = 0; c < l.ci; ++c) {
                        const double val = ip[c];
                        const double* wrow = W.data() + base + static_cast<std::size_t>(c) * l.co;
                        double* dwrow = dW + base + static_cast<std::size_t>(c) * l.co;
                        // two passes: FMA scatter vectorizes, dot uses
                        // four fixed-order partial sums
                        for (int o = 0; o < l.co; ++o) dwrow[o] += val * gp[o];
                        double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
                        int o = 0;
                        for (; o + 4 <= l.co; o += 4) {
                            s0 += wrow[o] * gp[o];
                            s1 += wrow[o + 1] * gp[o + 1];
                            s2 += wrow[o + 2] * gp[o + 2];
                            s3 += wrow[o + 3] * gp[o + 3];
                        }
                        double dot = (s0 + s1) + (s2 + s3);
                        for (; o < l.co; ++o) dot += wrow[o] * gp[o];
                        dip[c] += dot;
                    }
                }
            }
        }
    return d_in;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_grad(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
    const double pdf = std::exp(-0.5 * x * x) * 0.3989422804014326779; // 1/sqrt(2*pi)
    return cdf + x * pdf;
}

Tensor gelu_forward(const Tensor& pre) {
    Tensor out(pre.h, pre.w, pre.c);
    for (std::size_t i = 0; i < pre.v.size(); ++i) out.v[i] = gelu(pre.v[i]);
    return out;
}

Tensor gelu_backward(const Tensor& pre, const Tensor& d_post) {
    Tensor d_pre(pre.h, pre.w, pre.c);
    for (std::size_t i = 0; i < pre.v.size(); ++i) d_pre.v[i] = d_post.v[i] * gelu_grad(pre.v[i]);
    return d_pre;
}

Tensor gelu_forward_grad(const Tensor& pre, Tensor& grad) {
    Tensor out(pre.h, pre.w, pre.c);
    grad = Tensor(pre.h, pre.w, pre.c);
    for (std::size_t i = 0; i < pre.v.size(); ++i) {
        const double x = pre.v[i];
        const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
        const double pdf = std::exp(-0.5 * x * x) * 0.3989422804014326779;
        out.v[i] = x * cdf;
        grad.v[i] = cdf + x * pdf;
    }
    return out;
}

Tensor upsample2x(const Tensor& in) {
    Tensor out(in.h * 2, in.w * 2, in.c);
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x)
            std::memcpy(&out.at(y, x, 0), &in.at(y / 2, x / 2, 0), sizeof(double) * in.c);
    return out;
}

Tensor upsample2x_backward(const Tensor& d_out) {
    Tensor d_in(d_out.h / 2, d_out.w / 2, d_out.c);
    for (int y = 0; y < d_out.h; ++y)
        for (int x = 0; x < d_out.w; ++x) {
            const double* gp = &d_out.at(y, x, 0);
            double* dp = &d_in.at(y / 2, x / 2, 0);
            for (int c = 0; c < d_out.c; ++c) dp[c] += gp[c];
        }
    return d_in;
}

Tensor pad_replicate_br(const Tensor& in, int py, int px) {
    Tensor out(in.h + py, in.w + px, in.c);
    for (int y = 0; y < out.h; ++y) {
        const int sy = y < in.h ? y : in.h - 1;
        for (int x = 0; x < out.w; ++x) {
            const int sx = x < in.w ? x : in.w - 1;
            std::memcpy(&out.at(y, x, 0), &in.at(sy, sx, 0), sizeof(double) * in.c);
        }
    }
    return out;
}

Tensor pad_replicate_br_backward(const Tensor& d_padded, int h, int w) {
    Tensor d_in(h, w, d_padded.c);
    for (int y = 0; y < d_padded.h; ++y) {
        const int sy = y < h ? y : h - 1;
        for (int x = 0; x < d_padded.w; ++x) {
            const int sx = x < w ? x : w - 1;
            const double* gp = &d_padded.at(y, x, 0);
            double* dp = &d_in.at(sy, sx, 0);
            for (int c = 0; c < d_padded.c; ++c) dp[c] += gp[c];
        }
    }
    return d_in;
}

Tensor crop_tl(const Tensor& in, int h, int w) {
    Tensor out(h, w, in.c);
    for (int y = 0; y < h; ++y)
        std::memcpy(&out.at(y, 0, 0), &in.at(y, 0, 0), sizeof(double) * w * in.c);
    return out;
}

Tensor crop_tl_backward(const Tensor& d_cropped, int full_h, int full_w) {
    Tensor d_in(full_h, full_w, d_cropped.c);
    for (int y = 0; y < d_cropped.h; ++y)
        std::memcpy(&d_in.at(y, 0, 0), &d_cropped.at(y, 0, 0),
                    sizeof(double) * d_cropped.w * d_cropped.c);
    return d_in;
}

Tensor concat_c(const Tensor& a, const Tensor& b) {
    if (a.h != b.h || a.w != b.w) throw std::invalid_argument("concat_c: shape mismatch");
    Tensor out(a.h, a.w, a.c + b.c);
    for (int y = 0; y < a.h; ++y)
        for (int x = 0; x < a.w; ++x) {
            std::memcpy(&out.at(y, x, 0), &a.at(y, x, 0), sizeof(double) * a.c);
            std::memcpy(&out.at(y, x, a.c), &b.at(y, x, 0), sizeof(double) * b.c);
        }
    return out;
}

void split_c_backward(const Tensor& d_cat, int c_first, Tensor& d_a, Tensor& d_b) {
    d_a = Tensor(d_cat.h, d_cat.w, c_first);
    d_b = Tensor(d_cat.h, d_cat.w, d_cat.c - c_first);
    for (int y = 0; y < d_cat.h; ++y)
        for (int x = 0; x < d_cat.w; ++x) {
            std::memcpy(&d_a.at(y, x, 0), &d_cat.at(y, x, 0), sizeof(double) * c_first);
            std::memcpy(&d_b.at(y, x, 0), &d_cat.at(y, x, c_first),
                        sizeof(double) * (d_cat.c - c_first));
        }
}

} // namespace opir::nn
