// Copyright 2026 The OPIR Authors
// SPDX-License-Identifier: Apache-2.0

#include "opir/tensor.hpp"

#include <cmath>

namespace opir {

Tensor to_tensor(const Image& img) {
    Tensor t(img.height, img.width, img.channels);
    for (std::size_t i = 0; i < img.data.size(); ++i) t.v[i] = img.data[i];
    return t;
}

Image to_image(const Tensor& t) {
    Image img(t.h, t.w, t.c);
    for (std::size_t i = 0; i < t.v.size(); ++i) img.data[i] = static_cast<float>(t.v[i]);
    return img;
}

bool all_finite(const Tensor& t) {
    for (double x : t.v)
        if (!std::isfinite(x)) return false;
    return true;
}

} // namespace opir
