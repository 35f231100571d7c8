// Copyright 2026 The OPIR Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef OPIR_NN_OPS_HPP
#define OPIR_NN_OPS_HPP

#include "opir/rng.hpp"
#include "opir/tensor.hpp"

#include <string>
#include <vector>

namespace opir::nn {

/// Trainable tensor: float32 storage (checkpoints round-trip bit-exactly
/// through the raw tensor format) with a double gradient accumulator.
struct ParamTensor {
    std::vector<int> shape;
    std::vector<float> v;
    std::vector<double> g;

    void resize(std::vector<int> s);
    std::size_t size() const { return v.size(); }
    void zero_grad() { std::fill(g.begin(), g.end(), 0.0); }
    void fill_uniform(Rng& rng, double lo, double hi);
};

/// 2D convolution, NHWC, zero same-padding, kernel 1 or 3, stride 1 or 2.
/// Weight layout [ky][kx][ci][co] with co fastest so the inner loops run
/// contiguous.
struct ConvLayer {
    int ci = 0, co = 0, k = 3, stride = 1;
    ParamTensor w, b;

    ConvLayer() = default;
    ConvLayer(int ci_, int co_, int k_, int stride_ = 1);
    /// fan-in uniform init; zero_init weights AND bias to zero (heads).
    void init(Rng& rng, bool zero_init = false);
    int out_dim(int in_dim) const;
};

Tensor conv2d_forward(const Tensor& in, const ConvLayer& l);
/// Accumulates into l.w.g / l.b.g, returns d_in.
Tensor conv2d_backward(const Tensor& in, ConvLayer& l, const Tensor& d_out);

double gelu(double x);
double gelu_grad(double x);
Tensor gelu_forward(const Tensor& pre);
Tensor gelu_backward(const Tensor& pre, const Tensor& d_post);
/// Activation plus its derivative in one pass (the erf is shared), so the
/// backward pass is a plain elementwise product.
Tensor gelu_forward_grad(const Tensor& pre, Tensor& grad);

/// Nearest-neighbor 2x upsampling and its adjoint.
Tensor upsample2x(const Tensor& in);
Tensor upsample2x_backward(const Tensor& d_out);

/// Replicate-pads py rows at the bottom and px columns at the right, and
/// the adjoint pair used by the divisible-by-4 contract.
Tensor pad_replicate_br(const Tensor& in, int py, int px);
Tensor pad_replicate_br_backward(const Tensor& d_padded, int h, int w);
Tensor crop_tl(const Tensor& in, int h, int w);
Tensor crop_tl_backward(const Tensor& d_cropped, int full_h, int full_w);

Tensor concat_c(const Tensor& a, const Tensor& b);
void split_c_backward(const Tensor& d_cat, int c_first, Tensor& d_a, Tensor& d_b);

} // namespace opir::nn

#endif
