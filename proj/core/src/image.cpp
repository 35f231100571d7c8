// Copyright 2026 The OPIR Authors
// SPDX-License-Identifier: Apache-2.0

#include "opir/image.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace opir {

void validate_image(const Image& img, const char* what) {
    if (img.height <= 0 || img.width <= 0 || img.channels <= 0)
        throw std::invalid_argument(std::string(what) + ": non-positive dimensions");
    if (img.data.size() != static_cast<std::size_t>(img.height) * img.width * img.channels)
        throw std::invalid_argument(std::string(what) + ": data length != h*w*c");
    for (float v : img.data)
        if (!std::isfinite(v))
            throw std::invalid_argument(std::string(what) + ": non-finite value");
}

Image rgb_to_y(const Image& img) {
    if (img.channels != 3)
        throw std::invalid_argument("rgb_to_y: expected 3 channels, got " +
                                    std::to_string(img.channels));
    Image out(img.height, img.width, 1);
    const std::size_t n = static_cast<std::size_t>(img.height) * img.width;
    for (std::size_t i = 0; i < n; ++i) {
        const float* p = &img.data[i * 3];
        out.data[i] = 0.299f * p[0] + 0.587f * p[1] + 0.114f * p[2];
    }
    return out;
}

Image crop_patch(const Image& img, int top, int left, int size) {
    if (top < 0 || left < 0 || size <= 0 || top + size > img.height || left + size > img.width)
        throw std::invalid_argument("crop_patch: out-of-bounds crop");
    Image out(size, size, img.channels);
    const std::size_t row_bytes = static_cast<std::size_t>(size) * img.channels * sizeof(float);
    for (int y = 0; y < size; ++y)
        std::memcpy(&out.at(y, 0, 0), &img.at(top + y, left, 0), row_bytes);
    return out;
}

Image flip_h(const Image& img) {
    Image out(img.height, img.width, img.channels);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < img.channels; ++c)
                out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
    return out;
}

Image flip_v(const Image& img) {
    Image out(img.height, img.width, img.channels);
    const std::size_t row_bytes = static_cast<std::size_t>(img.width) * img.channels * sizeof(float);
    for (int y = 0; y < img.height; ++y)
        std::memcpy(&out.at(y, 0, 0), &img.at(img.height - 1 - y, 0, 0), row_bytes);
    return out;
}

Image concat_channels(const Image& a, const Image& b) {
    if (a.height != b.height || a.width != b.width)
        throw std::invalid_argument("concat_channels: height/width mismatch");
    Image out(a.height, a.width, a.channels + b.channels);
    for (int y = 0; y < a.height; ++y)
        for (int x = 0; x < a.width; ++x) {
            for (int c = 0; c < a.channels; ++c) out.at(y, x, c) = a.at(y, x, c);
            for (int c = 0; c < b.channels; ++c) out.at(y, x, a.channels + c) = b.at(y, x, c);
        }
    return out;
}

std::pair<Image, Image> split_channels(const Image& img, int c_first) {
    if (c_first <= 0 || c_first >= img.channels)
        throw std::invalid_argument("split_channels: bad split point");
    Image a(img.height, img.width, c_first);
    Image b(img.height, img.width, img.channels - c_first);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < c_first; ++c) a.at(y, x, c) = img.at(y, x, c);
            for (int c = c_first; c < img.channels; ++c) b.at(y, x, c - c_first) = img.at(y, x, c);
        }
    return {std::move(a), std::move(b)};
}

// --- raw tensor file ---

namespace {

constexpr char kTensorMagic[8] = {'O', 'P', 'I', 'R', 'T', 'N', 'S', 'R'};
constexpr std::uint32_t kTensorVersion = 1;

void put_u32_le(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                          static_cast<unsigned char>((v >> 8) & 0xFF),
                          static_cast<unsigned char>((v >> 16) & 0xFF),
                          static_cast<unsigned char>((v >> 24) & 0xFF)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32_le(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f32_le(std::ostream& os, float v) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    put_u32_le(os, u);
}

float get_f32_le(std::istream& is) {
    std::uint32_t u = get_u32_le(is);
    float v;
    std::memcpy(&v, &u, 4);
    return v;
}

} // namespace

void save_tensor_file(const Image& img, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_tensor_file: cannot open " + path);
    f.write(kTensorMagic, 8);
    put_u32_le(f, kTensorVersion);
    put_u32_le(f, static_cast<std::uint32_t>(img.height));
    put_u32_le(f, static_cast<std::uint32_t>(img.width));
    put_u32_le(f, static_cast<std::uint32_t>(img.channels));
    for (float v : img.data) put_f32_le(f, v);
    if (!f) throw std::runtime_error("save_tensor_file: write failed for " + path);
}

Image load_tensor_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_tensor_file: cannot open " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kTensorMagic, 8) != 0)
        throw std::runtime_error("load_tensor_file: bad magic in " + path);
    const std::uint32_t version = get_u32_le(f);
    if (version != kTensorVersion)
        throw std::runtime_error("load_tensor_file: unsupported version in " + path);
    const std::uint32_t h = get_u32_le(f), w = get_u32_le(f), c = get_u32_le(f);
    if (!f || h == 0 || w == 0 || c == 0)
        throw std::runtime_error("load_tensor_file: bad header in " + path);
    Image img(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c));
    for (float& v : img.data) v = get_f32_le(f);
    if (!f) throw std::runtime_error("load_tensor_file: truncated file " + path);
    return img;
}

bool is_tensor_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) return false;
    char magic[8];
    f.read(magic, 8);
    return f && std::memcmp(magic, kTensorMagic, 8) == 0;
}

} // namespace opir
