// Copyright 2026 The OPIR Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef OPIR_TENSOR_HPP
#define OPIR_TENSOR_HPP

#include "opir/image.hpp"

#include <vector>

namespace opir {

/// Double-precision H x W x C buffer used for everything between the file
/// boundary and the file boundary: network activations, kernel fields,
/// losses, gradients. Rasters on disk stay float32; the differentiable
/// path runs in 64-bit so finite-difference checks have headroom.
struct Tensor {
    int h = 0, w = 0, c = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int h_, int w_, int c_, double fill = 0.0)
        : h(h_), w(w_), c(c_), v(static_cast<std::size_t>(h_) * w_ * c_, fill) {}

    double& at(int y, int x, int ch) {
        return v[(static_cast<std::size_t>(y) * w + x) * c + ch];
    }
    const double& at(int y, int x, int ch) const {
        return v[(static_cast<std::size_t>(y) * w + x) * c + ch];
    }
    std::size_t size() const { return v.size(); }
    bool same_shape(const Tensor& o) const { return h == o.h && w == o.w && c == o.c; }
};

Tensor to_tensor(const Image& img);
Image to_image(const Tensor& t);

bool all_finite(const Tensor& t);

} // namespace opir

#endif
