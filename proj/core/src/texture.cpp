// Copyright 2026 The OPIR Authors
// SPDX-License-Identifier: Apache-2.0

#include "opir/texture.hpp"

#include <algorithm>
#include <cmath>

namespace opir {

namespace {

double bilinear_grid(const std::vector<double>& grid, int gh, int gw, double fy, double fx) {
    const int y0 = std::min(static_cast<int>(fy), gh - 2);
    const int x0 = std::min(static_cast<int>(fx), gw - 2);
    const double ay = fy - y0, ax = fx - x0;
    const double v00 = grid[y0 * gw + x0], v01 = grid[y0 * gw + x0 + 1];
    const double v10 = grid[(y0 + 1) * gw + x0], v11 = grid[(y0 + 1) * gw + x0 + 1];
    return (1 - ay) * ((1 - ax) * v00 + ax * v01) + ay * ((1 - ax) * v10 + ax * v11);
}

} // namespace

Image procedural_texture(int height, int width, int channels, Rng& rng) {
    Image img(height, width, channels);

    // Layered smooth background: two octaves of bilinear noise per channel.
    for (int c = 0; c < channels; ++c) {
        const int g1 = 4, g2 = 9;
        std::vector<double> coarse(g1 * g1), fine(g2 * g2);
        for (double& v : coarse) v = rng.uniform(0.15, 0.85);
        for (double& v : fine) v = rng.uniform(-0.12, 0.12);
        for (int y = 0; y < height; ++y)
            for (int x = 0; x < width; ++x) {
                const double fy = (height == 1) ? 0 : static_cast<double>(y) / (height - 1);
                const double fx = (width == 1) ? 0 : static_cast<double>(x) / (width - 1);
                double v = bilinear_grid(coarse, g1, g1, fy * (g1 - 1), fx * (g1 - 1)) +
                           bilinear_grid(fine, g2, g2, fy * (g2 - 1), fx * (g2 - 1));
                img.at(y, x, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
    }

    // Shapes: filled anti-aliased disks and rectangles with random colors.
    const int n_shapes = 4 + rng.uniform_int(5);
    for (int k = 0; k < n_shapes; ++k) {
        double color[4];
        for (int c = 0; c < channels; ++c) color[c] = rng.uniform(0.05, 0.95);
        if (rng.bernoulli(0.5)) {
            const double cx = rng.uniform(0.0, width), cy = rng.uniform(0.0, height);
            const double r = rng.uniform(0.05, 0.25) * std::min(width, height);
            const int yb = std::max(0, static_cast<int>(cy - r - 1));
            const int ye = std::min(height - 1, static_cast<int>(cy + r + 1));
            const int xb = std::max(0, static_cast<int>(cx - r - 1));
            const int xe = std::min(width - 1, static_cast<int>(cx + r + 1));
            for (int y = yb; y <= ye; ++y)
                for (int x = xb; x <= xe; ++x) {
                    const double d = std::hypot(x + 0.5 - cx, y + 0.5 - cy);
                    const double a = std::clamp(r + 0.5 - d, 0.0, 1.0);
                    if (a > 0)
                        for (int c = 0; c < channels; ++c)
                            img.at(y, x, c) = static_cast<float>((1 - a) * img.at(y, x, c) +
                                                                 a * color[c]);
                }
        } else {
            const int rh = 2 + rng.uniform_int(std::max(1, height / 3));
            const int rw = 2 + rng.uniform_int(std::max(1, width / 3));
            const int ry = rng.uniform_int(std::max(1, height - rh));
            const int rx = rng.uniform_int(std::max(1, width - rw));
            for (int y = ry; y < std::min(height, ry + rh); ++y)
                for (int x = rx; x < std::min(width, rx + rw); ++x)
                    for (int c = 0; c < channels; ++c)
                        img.at(y, x, c) = static_cast<float>(color[c]);
        }
    }
    return img;
}

} // namespace opir
