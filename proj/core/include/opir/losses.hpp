// Copyright 2026 The OPIR Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef OPIR_LOSSES_HPP
#define OPIR_LOSSES_HPP

#include "opir/tensor.hpp"

#include <vector>

namespace opir::loss {

struct LossWeights {
    double lambda_freq = 0.1; // frequency term weight
    double delta_edge = 0.05; // edge term weight
    double epsilon = 0.001;   // Charbonnier constant
};

struct LossResult {
    double value = 0.0;
    Tensor grad; // w.r.t. the first argument
};

/// mean sqrt((x-y)^2 + eps^2) over elements.
LossResult charbonnier(const Tensor& x, const Tensor& y, double eps);

/// 5-point stencil [[0,1,0],[1,-4,1],[0,1,0]] per channel, replicate padding.
Tensor laplacian(const Tensor& x);
/// Transpose of `laplacian` (replicate padding makes it asymmetric at edges).
Tensor laplacian_adjoint(const Tensor& y);

/// charbonnier(laplacian(x), laplacian(y)), gradient pulled back through
/// the adjoint.
LossResult edge_loss(const Tensor& x, const Tensor& y, double eps);

struct Spectrum {
    int h = 0, w = 0, c = 0;
    std::vector<double> re, im; // same (y,x,c) layout as Tensor
};

/// Radix-2 decimation-in-time FFT over rows then columns, per channel.
/// Forward is unnormalized; requires power-of-two dims.
Spectrum fft2(const Tensor& x);
/// Inverse with 1/(H*W) normalization; returns the real plane.
Tensor ifft2(const Spectrum& s);

/// mean over bins and channels of |Re(X-Y)| + |Im(X-Y)|.
LossResult freq_loss(const Tensor& x, const Tensor& y);

struct TotalLoss {
    double total = 0.0;
    double l_c = 0.0, l_e = 0.0, l_f = 0.0; // summed over outputs
    std::vector<Tensor> grads;              // one per output
};

/// Sum over provided outputs of L_c + delta*L_e + lambda*L_f against the
/// shared target. Non-power-of-two dims are zero-padded for the frequency
/// term only.
TotalLoss total_loss(const std::vector<const Tensor*>& outputs, const Tensor& target,
                     const LossWeights& w);

} // namespace opir::loss

#endif
