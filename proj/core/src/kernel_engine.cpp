// Copyright 2026 The OPIR Authors
// SPDX-License-Identifier: Apache-2.0

#include "opir/kernel_engine.hpp"

#include "opir/thread_pool.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace opir::engine {

namespace {

void check_image(const Tensor& img, const char* what) {
    if (img.h < 3 || img.w < 3)
        throw std::invalid_argument(std::string(what) + ": image smaller than 3x3");
}

void check_kernel_shape(const Tensor& img, const KernelField& k, const char* what) {
    if (k.h != img.h || k.w != img.w)
        throw std::invalid_argument(std::string(what) + ": kernel field shape mismatch");
}

void check_simplex(const FusionField& alpha, const char* what) {
    for (int y = 0; y < alpha.h; ++y)
        for (int x = 0; x < alpha.w; ++x) {
            const double* a = alpha.at(y, x);
            double sum = 0.0;
            for (int s = 0; s < alpha.num_scales; ++s) {
                if (a[s] < -1e-4)
                    throw std::invalid_argument(std::string(what) + ": negative fusion weight");
                sum += a[s];
            }
            if (std::abs(sum - 1.0) > 1e-4)
                throw std::invalid_argument(std::string(what) + ": fusion weights off simplex");
        }
}

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

constexpr int kRowGrain = 8;

} // namespace

KernelField identity_kernels(int h, int w) {
    KernelField k(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) k.at(y, x)[kCenterTap] = 1.0;
    return k;
}

ScaleSet::ScaleSet(std::vector<int> s) : scales(std::move(s)) {
    if (scales.empty()) throw std::invalid_argument("ScaleSet: empty");
    for (std::size_t i = 0; i < scales.size(); ++i) {
        if (scales[i] < 1) throw std::invalid_argument("ScaleSet: scale < 1");
        if (i > 0 && scales[i] <= scales[i - 1])
            throw std::invalid_argument("ScaleSet: not strictly increasing");
    }
}

FusionField uniform_fusion(int h, int w, int num_scales) {
    return FusionField(h, w, num_scales, 1.0 / num_scales);
}

Tensor apply_single_scale(const Tensor& img, const KernelField& k, int scale) {
    check_image(img, "apply_single_scale");
    check_kernel_shape(img, k, "apply_single_scale");
    if (scale < 1) throw std::invalid_argument("apply_single_scale: scale < 1");

    Tensor out(img.h, img.w, img.c);
    ThreadPool::instance().parallel_for(img.h, kRowGrain, [&](int yb, int ye) {
        for (int y = yb; y < ye; ++y)
            for (int x = 0; x < img.w; ++x) {
                const double* kp = k.at(y, x);
                for (int c = 0; c < img.c; ++c) {
                    double acc = 0.0;
                    for (int i = 0; i < kTaps; ++i) {
                        const int sy = clampi(y + scale * kTapDy[i], 0, img.h - 1);
                        const int sx = clampi(x + scale * kTapDx[i], 0, img.w - 1);
                        acc += kp[i] * img.at(sy, sx, c);
                    }
                    out.at(y, x, c) = acc;
                }
            }
    });
    return out;
}

DenseKernels materialize_dilated(const KernelField& k, int scale) {
    if (scale < 1) throw std::invalid_argument("materialize_dilated: scale < 1");
    const int kk = 2 * scale + 1;
    DenseKernels d;
    d.h = k.h;
    d.w = k.w;
    d.k = kk;
    d.weights.assign(static_cast<std::size_t>(k.h) * k.w * kk * kk, 0.0);
    for (int y = 0; y < k.h; ++y)
        for (int x = 0; x < k.w; ++x) {
            const double* kp = k.at(y, x);
            double* dp = &d.weights[(static_cast<std::size_t>(y) * k.w + x) * kk * kk];
            for (int i = 0; i < kTaps; ++i) {
                const int wy = scale * kTapDy[i] + scale; // window-local row
                const int wx = scale * kTapDx[i] + scale;
                dp[wy * kk + wx] = kp[i];
            }
        }
    return d;
}

SampledTensor gather_samples(const Tensor& img, const ScaleSet& scales) {
    check_image(img, "gather_samples");
    SampledTensor t;
    t.h = img.h;
    t.w = img.w;
    t.c = img.c;
    t.num_scales = scales.count();
    t.v.resize(static_cast<std::size_t>(img.h) * img.w * img.c * t.num_scales * kTaps);

    ThreadPool::instance().parallel_for(img.h, kRowGrain, [&](int yb, int ye) {
        for (int ch = 0; ch < img.c; ++ch)
            for (int y = yb; y < ye; ++y)
                for (int x = 0; x < img.w; ++x) {
                    double* dst = &t.v[t.index(ch, y, x, 0, 0)];
                    for (int s = 0; s < t.num_scales; ++s) {
                        const int sc = scales.scales[s];
                        for (int i = 0; i < kTaps; ++i) {
                            const int sy = clampi(y + sc * kTapDy[i], 0, img.h - 1);
                            const int sx = clampi(x + sc * kTapDx[i], 0, img.w - 1);
                            dst[s * kTaps + i] = img.at(sy, sx, ch);
                        }
                    }
                }
    });
    return t;
}

Tensor apply_multiscale_fast(const SampledTensor& samples, const KernelField& k,
                             const FusionField& alpha) {
    if (samples.h != k.h || samples.w != k.w)
        throw std::invalid_argument("apply_multiscale_fast: kernel field shape mismatch");
    if (alpha.h != k.h || alpha.w != k.w || alpha.num_scales != samples.num_scales)
        throw std::invalid_argument("apply_multiscale_fast: fusion field shape mismatch");
    check_simplex(alpha, "apply_multiscale_fast");

    const int S = samples.num_scales;
    Tensor out(samples.h, samples.w, samples.c);
    ThreadPool::instance().parallel_for(samples.h, kRowGrain, [&](int yb, int ye) {
        for (int ch = 0; ch < samples.c; ++ch)
            for (int y = yb; y < ye; ++y)
                for (int x = 0; x < samples.w; ++x) {
                    const double* kp = k.at(y, x);
                    const double* ap = alpha.at(y, x);
                    const double* sp = &samples.v[samples.index(ch, y, x, 0, 0)];
                    double acc = 0.0;
                    for (int s = 0; s < S; ++s) {
                        double scale_acc = 0.0;
                        const double* row = sp + s * kTaps;
                        for (int i = 0; i < kTaps; ++i) scale_acc += kp[i] * row[i];
                        acc += ap[s] * scale_acc;
                    }
                    out.at(y, x, ch) = acc;
                }
    });
    return out;
}

Tensor apply_multiscale_naive(const Tensor& img, const KernelField& k, const ScaleSet& scales,
                              const FusionField& alpha) {
    check_image(img, "apply_multiscale_naive");
    check_kernel_shape(img, k, "apply_multiscale_naive");
    if (alpha.h != img.h || alpha.w != img.w || alpha.num_scales != scales.count())
        throw std::invalid_argument("apply_multiscale_naive: fusion field shape mismatch");
    check_simplex(alpha, "apply_multiscale_naive");

    Tensor out(img.h, img.w, img.c);
    for (int s = 0; s < scales.count(); ++s) {
        const DenseKernels dense = materialize_dilated(k, scales.scales[s]);
        const int half = (dense.k - 1) / 2;
        ThreadPool::instance().parallel_for(img.h, kRowGrain, [&](int yb, int ye) {
            for (int y = yb; y < ye; ++y)
                for (int x = 0; x < img.w; ++x) {
                    const double* dp =
                        &dense.weights[(static_cast<std::size_t>(y) * img.w + x) * dense.k *
                                       dense.k];
                    const double a = alpha.at(y, x)[s];
                    for (int c = 0; c < img.c; ++c) {
                        // full (2s+1)^2 correlation, zeros included: this
                        // path carries the reference cost model
                        double acc = 0.0;
                        for (int wy = 0; wy < dense.k; ++wy)
                            for (int wx = 0; wx < dense.k; ++wx) {
                                const int sy = clampi(y + wy - half, 0, img.h - 1);
                                const int sx = clampi(x + wx - half, 0, img.w - 1);
                                acc += dp[wy * dense.k + wx] * img.at(sy, sx, c);
                            }
                        out.at(y, x, c) += a * acc;
                    }
                }
        });
    }
    return out;
}

UncertaintyMap uncertainty_map(const KernelField& k) {
    UncertaintyMap um(k.h, k.w);
    for (int y = 0; y < k.h; ++y)
        for (int x = 0; x < k.w; ++x) {
            const double* kp = k.at(y, x);
            double acc = 0.0;
            for (int i = 0; i < kTaps; ++i) acc += std::abs(kp[i]);
            um.at(y, x) = acc / kTaps;
        }
    return um;
}

FusionField softmax_fusion(const Tensor& logits) {
    FusionField alpha(logits.h, logits.w, logits.c);
    for (int y = 0; y < logits.h; ++y)
        for (int x = 0; x < logits.w; ++x) {
            double zmax = logits.at(y, x, 0);
            for (int s = 1; s < logits.c; ++s) zmax = std::max(zmax, logits.at(y, x, s));
            if (!std::isfinite(zmax))
                throw std::invalid_argument("softmax_fusion: non-finite logit");
            double* a = alpha.at(y, x);
            double sum = 0.0;
            for (int s = 0; s < logits.c; ++s) {
                a[s] = std::exp(logits.at(y, x, s) - zmax);
                sum += a[s];
            }
            for (int s = 0; s < logits.c; ++s) a[s] /= sum;
        }
    return alpha;
}

void apply_multiscale_fast_backward(const SampledTensor& samples, const KernelField& k,
                                    const FusionField& alpha, const ScaleSet& scales,
                                    const Tensor& d_out, KernelField& d_k, FusionField& d_alpha,
                                    Tensor& d_img) {
    const int S = samples.num_scales;
    if (d_out.h != samples.h || d_out.w != samples.w || d_out.c != samples.c)
        throw std::invalid_argument("fast_backward: upstream shape mismatch");
    if (d_img.h != samples.h || d_img.w != samples.w || d_img.c != samples.c)
        throw std::invalid_argument("fast_backward: d_img shape mismatch");

    // Sequential scatter: accumulation order is pixels row-major, channels
    // inner, scales outer of taps, matching the forward convention.
    for (int y = 0; y < samples.h; ++y)
        for (int x = 0; x < samples.w; ++x) {
            const double* kp = k.at(y, x);
            const double* ap = alpha.at(y, x);
            double* dkp = d_k.at(y, x);
            double* dap = d_alpha.at(y, x);
            for (int ch = 0; ch < samples.c; ++ch) {
                const double g = d_out.at(y, x, ch);
                if (g == 0.0) continue;
                const double* sp = &samples.v[samples.index(ch, y, x, 0, 0)];
                for (int s = 0; s < S; ++s) {
                    const double* row = sp + s * kTaps;
                    const double a = ap[s];
                    const int sc = scales.scales[s];
                    double scale_acc = 0.0;
                    for (int i = 0; i < kTaps; ++i) {
                        scale_acc += kp[i] * row[i];
                        dkp[i] += g * a * row[i];
                        const int sy = clampi(y + sc * kTapDy[i], 0, samples.h - 1);
                        const int sx = clampi(x + sc * kTapDx[i], 0, samples.w - 1);
                        d_img.at(sy, sx, ch) += g * a * kp[i];
                    }
                    dap[s] += g * scale_acc;
                }
            }
        }
}

Tensor softmax_fusion_backward(const FusionField& alpha, const FusionField& d_alpha) {
    Tensor d_logits(alpha.h, alpha.w, alpha.num_scales);
    for (int y = 0; y < alpha.h; ++y)
        for (int x = 0; x < alpha.w; ++x) {
            const double* a = alpha.at(y, x);
            const double* da = d_alpha.at(y, x);
            double dot = 0.0;
            for (int s = 0; s < alpha.num_scales; ++s) dot += a[s] * da[s];
            for (int s = 0; s < alpha.num_scales; ++s)
                d_logits.at(y, x, s) = a[s] * (da[s] - dot);
        }
    return d_logits;
}

void uncertainty_map_backward(const KernelField& k, const UncertaintyMap& d_um,
                              KernelField& d_k) {
    for (int y = 0; y < k.h; ++y)
        for (int x = 0; x < k.w; ++x) {
            const double g = d_um.at(y, x) / kTaps;
            if (g == 0.0) continue;
            const double* kp = k.at(y, x);
            double* dkp = d_k.at(y, x);
            for (int i = 0; i < kTaps; ++i) {
                if (kp[i] > 0.0) dkp[i] += g;
                else if (kp[i] < 0.0) dkp[i] -= g;
            }
        }
}

} // namespace opir::engine
