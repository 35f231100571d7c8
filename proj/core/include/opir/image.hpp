// Copyright 2026 The OPIR Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef OPIR_IMAGE_HPP
#define OPIR_IMAGE_HPP

#include <cstddef>
#include <string>
#include <vector>

namespace opir {

/// H x W x C raster, row-major by (row, col, channel), nominal range [0,1].
/// Values outside the range are permitted for intermediates; file writers
/// clamp and quantize.
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<float> data;

    Image() = default;
    Image(int h, int w, int c, float fill = 0.0f)
        : height(h), width(w), channels(c),
          data(static_cast<std::size_t>(h) * w * c, fill) {}

    float& at(int y, int x, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    const float& at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::size_t size() const { return data.size(); }
    bool same_shape(const Image& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
};

/// Throws std::invalid_argument if dims/data length disagree or any value
/// is non-finite.
void validate_image(const Image& img, const char* what = "image");

// --- color / geometry ---

/// BT.601 full-range luma: Y = 0.299 R + 0.587 G + 0.114 B.
Image rgb_to_y(const Image& img);

/// Exact sub-raster copy; throws on out-of-bounds.
Image crop_patch(const Image& img, int top, int left, int size);

Image flip_h(const Image& img);
Image flip_v(const Image& img);

/// Channel-stacks a then b; heights/widths must match.
Image concat_channels(const Image& a, const Image& b);

/// Inverse of concat_channels: first `c_first` channels and the rest.
std::pair<Image, Image> split_channels(const Image& img, int c_first);

// --- PNG I/O (8-bit gray or RGB) ---

/// Loads a PNG (8-bit, 1 or 3 channels) or a raw tensor file, detected by
/// magic bytes. 8-bit samples map to value/255. Throws on unreadable or
/// unsupported files.
Image load_image(const std::string& path);

/// Clamps to [0,1], quantizes round-half-up to 8 bits, writes PNG.
/// 1-channel images write grayscale, 3-channel RGB.
void save_image(const Image& img, const std::string& path);

// --- raw tensor file ---
// magic "OPIRTNSR", then little-endian u32 {version=1, height, width,
// channels}, then h*w*c little-endian f32, row-major. Carries kernel
// fields, maps, and checkpoint tensors without quantization.

void save_tensor_file(const Image& img, const std::string& path);
Image load_tensor_file(const std::string& path);
bool is_tensor_file(const std::string& path);

} // namespace opir

#endif
