// Copyright 2026 The OPIR Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef OPIR_KERNEL_ENGINE_HPP
#define OPIR_KERNEL_ENGINE_HPP

#include "opir/tensor.hpp"

#include <vector>

namespace opir::engine {

// Fixed tap order, row-major over offsets delta in {-1,0,1}^2:
// (-1,-1),(-1,0),(-1,1),(0,-1),(0,0),(0,1),(1,-1),(1,0),(1,1).
inline constexpr int kTaps = 9;
inline constexpr int kCenterTap = 4;
inline constexpr int kTapDy[kTaps] = {-1, -1, -1, 0, 0, 0, 1, 1, 1};
inline constexpr int kTapDx[kTaps] = {-1, 0, 1, -1, 0, 1, -1, 0, 1};

/// Per-pixel 3x3 base inverse-operator weights, shared across image
/// channels. Storage: (y*w + x)*9 + tap.
struct KernelField {
    int h = 0, w = 0;
    std::vector<double> taps;

    KernelField() = default;
    KernelField(int h_, int w_, double fill = 0.0)
        : h(h_), w(w_), taps(static_cast<std::size_t>(h_) * w_ * kTaps, fill) {}

    double* at(int y, int x) { return &taps[(static_cast<std::size_t>(y) * w + x) * kTaps]; }
    const double* at(int y, int x) const {
        return &taps[(static_cast<std::size_t>(y) * w + x) * kTaps];
    }
};

/// Kernel field that reproduces the input: center tap 1, all others 0.
KernelField identity_kernels(int h, int w);

/// Ordered distinct dilation scales.
struct ScaleSet {
    std::vector<int> scales;

    ScaleSet() = default;
    explicit ScaleSet(std::vector<int> s);
    int count() const { return static_cast<int>(scales.size()); }
};

/// Per-pixel per-scale convex weights. Storage: (y*w + x)*S + s.
struct FusionField {
    int h = 0, w = 0, num_scales = 0;
    std::vector<double> weights;

    FusionField() = default;
    FusionField(int h_, int w_, int s, double fill = 0.0)
        : h(h_), w(w_), num_scales(s),
          weights(static_cast<std::size_t>(h_) * w_ * s, fill) {}

    double* at(int y, int x) {
        return &weights[(static_cast<std::size_t>(y) * w + x) * num_scales];
    }
    const double* at(int y, int x) const {
        return &weights[(static_cast<std::size_t>(y) * w + x) * num_scales];
    }
};

/// Uniform fusion (1/S per scale) on the simplex.
FusionField uniform_fusion(int h, int w, int num_scales);

/// Per-pixel nonnegative reconstruction-difficulty score.
struct UncertaintyMap {
    int h = 0, w = 0;
    std::vector<double> score;

    UncertaintyMap() = default;
    UncertaintyMap(int h_, int w_, double fill = 0.0)
        : h(h_), w(w_), score(static_cast<std::size_t>(h_) * w_, fill) {}

    double& at(int y, int x) { return score[static_cast<std::size_t>(y) * w + x]; }
    double at(int y, int x) const { return score[static_cast<std::size_t>(y) * w + x]; }
};

/// Gathered image values I(p + s*delta) for every pixel, tap, and scale,
/// replicate-padded. Storage: ((ch*h*w + y*w + x)*S + s)*9 + tap, so taps
/// are contiguous for the inner product.
struct SampledTensor {
    int h = 0, w = 0, c = 0, num_scales = 0;
    std::vector<double> v;

    std::size_t index(int ch, int y, int x, int s, int tap) const {
        return ((static_cast<std::size_t>(ch) * h * w + static_cast<std::size_t>(y) * w + x) *
                    num_scales +
                s) *
                   kTaps +
               tap;
    }
};

// --- operations ---

/// J_hat(p) = sum_tap K_p(tap) * I(p + s*delta_tap), per channel,
/// replicate padding.
Tensor apply_single_scale(const Tensor& img, const KernelField& k, int scale);

/// Dense (2s+1)^2 per-pixel kernels with the nine taps placed at s*delta
/// and zeros elsewhere. Reference path only.
struct DenseKernels {
    int h = 0, w = 0, k = 0; // k = 2s+1
    std::vector<double> weights; // (y*w + x)*k*k, row-major within window
};
DenseKernels materialize_dilated(const KernelField& k, int scale);

SampledTensor gather_samples(const Tensor& img, const ScaleSet& scales);

/// Fused multi-scale filtering: J_hat_p = sum_s alpha_p(s) *
/// sum_tap K_p(tap) * samples(p,tap,s). Taps inner, scales outer; the
/// per-pixel cost depends on the number of scales only, never on their
/// magnitudes.
Tensor apply_multiscale_fast(const SampledTensor& samples, const KernelField& k,
                             const FusionField& alpha);

/// Reference semantics: full dense correlation per scale, then fusion.
Tensor apply_multiscale_naive(const Tensor& img, const KernelField& k, const ScaleSet& scales,
                              const FusionField& alpha);

/// UM(p) = (1/9) * sum_tap |K_p(tap)|.
UncertaintyMap uncertainty_map(const KernelField& k);

/// Per-pixel softmax over scale logits (h x w x S tensor).
FusionField softmax_fusion(const Tensor& logits);

// --- backward passes (accumulate into the d* outputs) ---

void apply_multiscale_fast_backward(const SampledTensor& samples, const KernelField& k,
                                    const FusionField& alpha, const ScaleSet& scales,
                                    const Tensor& d_out, KernelField& d_k, FusionField& d_alpha,
                                    Tensor& d_img);

/// d logits from d alpha given the forward softmax output.
Tensor softmax_fusion_backward(const FusionField& alpha, const FusionField& d_alpha);

/// dK(tap) += dUM * (1/9) * sign(K(tap)); sign(0) = 0.
void uncertainty_map_backward(const KernelField& k, const UncertaintyMap& d_um, KernelField& d_k);

} // namespace opir::engine

#endif
