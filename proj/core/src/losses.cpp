// Copyright 2026 The OPIR Authors
// SPDX-License-Identifier: Apache-2.0

#include "opir/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace opir::loss {

namespace {

void check_same_shape(const Tensor& x, const Tensor& y, const char* what) {
    if (!x.same_shape(y)) throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

int next_pow2(int n) {
    int p = 1;
    while (p < n) p <<= 1;
    return p;
}

} // namespace

LossResult charbonnier(const Tensor& x, const Tensor& y, double eps) {
    check_same_shape(x, y, "charbonnier");
    const double n = static_cast<double>(x.size());
    LossResult r;
    r.grad = Tensor(x.h, x.w, x.c);
    double acc = 0.0;
    for (std::size_t i = 0; i < x.v.size(); ++i) {
        const double d = x.v[i] - y.v[i];
        const double root = std::sqrt(d * d + eps * eps);
        acc += root;
        r.grad.v[i] = d / root / n;
    }
    r.value = acc / n;
    return r;
}

Tensor laplacian(const Tensor& x) {
    Tensor out(x.h, x.w, x.c);
    auto cl = [](int v, int hi) { return v < 0 ? 0 : (v > hi ? hi : v); };
    for (int y = 0; y < x.h; ++y)
        for (int xx = 0; xx < x.w; ++xx)
            for (int c = 0; c < x.c; ++c)
                out.at(y, xx, c) = x.at(cl(y - 1, x.h - 1), xx, c) +
                                   x.at(cl(y + 1, x.h - 1), xx, c) +
                                   x.at(y, cl(xx - 1, x.w - 1), c) +
                                   x.at(y, cl(xx + 1, x.w - 1), c) - 4.0 * x.at(y, xx, c);
    return out;
}

Tensor laplacian_adjoint(const Tensor& g) {
    Tensor out(g.h, g.w, g.c);
    auto cl = [](int v, int hi) { return v < 0 ? 0 : (v > hi ? hi : v); };
    for (int y = 0; y < g.h; ++y)
        for (int xx = 0; xx < g.w; ++xx)
            for (int c = 0; c < g.c; ++c) {
                const double v = g.at(y, xx, c);
                out.at(cl(y - 1, g.h - 1), xx, c) += v;
                out.at(cl(y + 1, g.h - 1), xx, c) += v;
                out.at(y, cl(xx - 1, g.w - 1), c) += v;
                out.at(y, cl(xx + 1, g.w - 1), c) += v;
                out.at(y, xx, c) -= 4.0 * v;
            }
    return out;
}

LossResult edge_loss(const Tensor& x, const Tensor& y, double eps) {
    check_same_shape(x, y, "edge_loss");
    LossResult inner = charbonnier(laplacian(x), laplacian(y), eps);
    LossResult r;
    r.value = inner.value;
    r.grad = laplacian_adjoint(inner.grad);
    return r;
}

// --- FFT ---

namespace {

// In-place radix-2 decimation-in-time over strided complex data.
void fft_1d(double* re, double* im, int n, std::size_t stride, bool invert) {
    // bit-reversal permutation
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) {
            std::swap(re[i * stride], re[j * stride]);
            std::swap(im[i * stride], im[j * stride]);
        }
    }
    for (int len = 2; len <= n; len <<= 1) {
        const double ang = 2.0 * M_PI / len * (invert ? 1.0 : -1.0);
        const double wr = std::cos(ang), wi = std::sin(ang);
        for (int i = 0; i < n; i += len) {
            double cr = 1.0, ci = 0.0;
            for (int j = 0; j < len / 2; ++j) {
                const std::size_t a = (i + j) * stride;
                const std::size_t b = (i + j + len / 2) * stride;
                const double ur = re[a], ui = im[a];
                const double vr = re[b] * cr - im[b] * ci;
                const double vi = re[b] * ci + im[b] * cr;
                re[a] = ur + vr;
                im[a] = ui + vi;
                re[b] = ur - vr;
                im[b] = ui - vi;
                const double ncr = cr * wr - ci * wi;
                ci = cr * wi + ci * wr;
                cr = ncr;
            }
        }
    }
}

void fft2_inplace(Spectrum& s, bool invert) {
    const std::size_t row_elems = static_cast<std::size_t>(s.w) * s.c;
    for (int c = 0; c < s.c; ++c) {
        for (int y = 0; y < s.h; ++y)
            fft_1d(&s.re[y * row_elems + c], &s.im[y * row_elems + c], s.w, s.c, invert);
        for (int x = 0; x < s.w; ++x)
            fft_1d(&s.re[static_cast<std::size_t>(x) * s.c + c],
                   &s.im[static_cast<std::size_t>(x) * s.c + c], s.h, row_elems, invert);
    }
}

} // namespace

Spectrum fft2(const Tensor& x) {
    if (!is_pow2(x.h) || !is_pow2(x.w))
        throw std::invalid_argument("fft2: dims must be powers of two");
    Spectrum s;
    s.h = x.h;
    s.w = x.w;
    s.c = x.c;
    s.re = x.v;
    s.im.assign(x.v.size(), 0.0);
    fft2_inplace(s, /*invert=*/false);
    return s;
}

Tensor ifft2(const Spectrum& s) {
    if (!is_pow2(s.h) || !is_pow2(s.w))
        throw std::invalid_argument("ifft2: dims must be powers of two");
    Spectrum tmp = s;
    fft2_inplace(tmp, /*invert=*/true);
    Tensor out(s.h, s.w, s.c);
    const double norm = 1.0 / (static_cast<double>(s.h) * s.w);
    for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] = tmp.re[i] * norm;
    return out;
}

LossResult freq_loss(const Tensor& x, const Tensor& y) {
    check_same_shape(x, y, "freq_loss");
    const Spectrum fx = fft2(x), fy = fft2(y);
    const double n = static_cast<double>(x.size());

    Spectrum g;
    g.h = x.h;
    g.w = x.w;
    g.c = x.c;
    g.re.resize(x.size());
    g.im.resize(x.size());
    double acc = 0.0;
    auto sgn = [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); };
    for (std::size_t i = 0; i < x.v.size(); ++i) {
        const double dr = fx.re[i] - fy.re[i];
        const double di = fx.im[i] - fy.im[i];
        acc += std::abs(dr) + std::abs(di);
        g.re[i] = sgn(dr) / n;
        g.im[i] = sgn(di) / n;
    }

    LossResult r;
    r.value = acc / n;
    // d/dx of sum_k Re(g_k conj(before)) pulls back through the unnormalized
    // inverse transform; ifft2 divides by HW, so scale back up.
    Tensor pulled = ifft2(g);
    const double hw = static_cast<double>(x.h) * x.w;
    r.grad = Tensor(x.h, x.w, x.c);
    for (std::size_t i = 0; i < pulled.v.size(); ++i) r.grad.v[i] = pulled.v[i] * hw;
    return r;
}

TotalLoss total_loss(const std::vector<const Tensor*>& outputs, const Tensor& target,
                     const LossWeights& w) {
    if (outputs.empty()) throw std::invalid_argument("total_loss: no outputs");
    TotalLoss t;
    const bool pad_needed = !is_pow2(target.h) || !is_pow2(target.w);
    const int ph = next_pow2(target.h), pw = next_pow2(target.w);

    Tensor target_padded;
    if (pad_needed) {
        target_padded = Tensor(ph, pw, target.c);
        for (int y = 0; y < target.h; ++y)
            for (int x = 0; x < target.w; ++x)
                for (int c = 0; c < target.c; ++c)
                    target_padded.at(y, x, c) = target.at(y, x, c);
    }

    for (const Tensor* out : outputs) {
        check_same_shape(*out, target, "total_loss");
        LossResult lc = charbonnier(*out, target, w.epsilon);
        LossResult le = edge_loss(*out, target, w.epsilon);
        LossResult lf;
        if (pad_needed) {
            Tensor padded(ph, pw, out->c);
            for (int y = 0; y < out->h; ++y)
                for (int x = 0; x < out->w; ++x)
                    for (int c = 0; c < out->c; ++c) padded.at(y, x, c) = out->at(y, x, c);
            LossResult lf_p = freq_loss(padded, target_padded);
            lf.value = lf_p.value;
            lf.grad = Tensor(out->h, out->w, out->c);
            for (int y = 0; y < out->h; ++y)
                for (int x = 0; x < out->w; ++x)
                    for (int c = 0; c < out->c; ++c) lf.grad.at(y, x, c) = lf_p.grad.at(y, x, c);
        } else {
            lf = freq_loss(*out, target);
        }

        t.l_c += lc.value;
        t.l_e += le.value;
        t.l_f += lf.value;
        Tensor grad(out->h, out->w, out->c);
        for (std::size_t i = 0; i < grad.v.size(); ++i)
            grad.v[i] = lc.grad.v[i] + w.delta_edge * le.grad.v[i] + w.lambda_freq * lf.grad.v[i];
        t.grads.push_back(std::move(grad));
    }
    t.total = t.l_c + w.delta_edge * t.l_e + w.lambda_freq * t.l_f;
    return t;
}

} // namespace opir::loss
