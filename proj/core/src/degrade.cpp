// Copyright 2026 The OPIR Authors
// SPDX-License-Identifier: Apache-2.0

#include "opir/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace opir::degrade {

int task_id(DegradationKind kind) { return static_cast<int>(kind); }

DegradationKind kind_from_task_id(int id) {
    if (id < 0 || id > 2) throw std::invalid_argument("unknown task id " + std::to_string(id));
    return static_cast<DegradationKind>(id);
}

const char* kind_name(DegradationKind kind) {
    switch (kind) {
    case DegradationKind::Rain: return "rain";
    case DegradationKind::Snow: return "snow";
    case DegradationKind::Haze: return "haze";
    }
    return "?";
}

DegradationKind kind_from_name(const std::string& name) {
    if (name == "rain") return DegradationKind::Rain;
    if (name == "snow") return DegradationKind::Snow;
    if (name == "haze") return DegradationKind::Haze;
    throw std::invalid_argument("unknown task name '" + name + "'");
}

void RainParams::validate() const {
    if (num_streaks < 0) throw std::invalid_argument("RainParams: num_streaks < 0");
    if (length_min > length_max || width_min > width_max || angle_min > angle_max ||
        intensity_min > intensity_max)
        throw std::invalid_argument("RainParams: empty range");
    if (intensity_min < 0.0 || intensity_max > 1.0)
        throw std::invalid_argument("RainParams: intensity outside [0,1]");
    if (width_min < 0.0 || length_min < 0.0)
        throw std::invalid_argument("RainParams: negative geometry");
}

void SnowParams::validate() const {
    if (density < 0.0 || density > 1.0) throw std::invalid_argument("SnowParams: density outside [0,1]");
    if (radius_min < 1.0 || radius_min > radius_max)
        throw std::invalid_argument("SnowParams: bad radius range");
    if (intensity_min > intensity_max || intensity_min < 0.0 || intensity_max > 1.0)
        throw std::invalid_argument("SnowParams: bad intensity range");
    if (mask_softness < 0) throw std::invalid_argument("SnowParams: negative softness");
}

void HazeParams::validate() const {
    if (atmospheric_light.empty()) throw std::invalid_argument("HazeParams: empty A");
    for (double a : atmospheric_light)
        if (!(a > 0.0 && a <= 1.0)) throw std::invalid_argument("HazeParams: A outside (0,1]");
    if (beta < 0.0) throw std::invalid_argument("HazeParams: beta < 0");
    if (t_min < 0.0 || t_min > 1.0) throw std::invalid_argument("HazeParams: t_min outside [0,1]");
}

// --- rain ---

std::vector<Streak> make_streaks(const RainParams& p, int height, int width) {
    p.validate();
    Rng rng(p.seed);
    std::vector<Streak> out;
    out.reserve(static_cast<std::size_t>(p.num_streaks));
    for (int k = 0; k < p.num_streaks; ++k) {
        Streak s;
        s.cx = rng.uniform(0.0, static_cast<double>(width));
        s.cy = rng.uniform(0.0, static_cast<double>(height));
        s.angle = rng.uniform(p.angle_min, p.angle_max);
        s.length = rng.uniform(p.length_min, p.length_max);
        s.width = rng.uniform(p.width_min, p.width_max);
        s.intensity = rng.uniform(p.intensity_min, p.intensity_max);
        out.push_back(s);
    }
    return out;
}

double streak_coverage(const Streak& s, double px, double py) {
    // Segment direction: angle measured from vertical (image +y).
    const double dx = std::sin(s.angle), dy = std::cos(s.angle);
    const double half = s.length * 0.5;
    // Project pixel center onto the segment axis, clamp to the endpoints.
    const double rx = px - s.cx, ry = py - s.cy;
    double t = rx * dx + ry * dy;
    t = std::clamp(t, -half, half);
    const double qx = s.cx + t * dx, qy = s.cy + t * dy;
    const double dist = std::hypot(px - qx, py - qy);
    return std::clamp(0.5 + s.width * 0.5 - dist, 0.0, 1.0);
}

Image rasterize_streaks(int height, int width, const std::vector<Streak>& streaks) {
    Image rain(height, width, 1);
    for (const Streak& s : streaks) {
        // Bounding box of the capsule, padded by the AA ramp.
        const double dx = std::sin(s.angle), dy = std::cos(s.angle);
        const double half = s.length * 0.5;
        const double pad = s.width * 0.5 + 1.5;
        const double x0 = s.cx - std::abs(dx) * half - pad, x1 = s.cx + std::abs(dx) * half + pad;
        const double y0 = s.cy - std::abs(dy) * half - pad, y1 = s.cy + std::abs(dy) * half + pad;
        const int yb = std::max(0, static_cast<int>(std::floor(y0)));
        const int ye = std::min(height - 1, static_cast<int>(std::ceil(y1)));
        const int xb = std::max(0, static_cast<int>(std::floor(x0)));
        const int xe = std::min(width - 1, static_cast<int>(std::ceil(x1)));
        for (int y = yb; y <= ye; ++y)
            for (int x = xb; x <= xe; ++x) {
                const double cov = streak_coverage(s, x + 0.5, y + 0.5);
                if (cov > 0.0)
                    rain.at(y, x, 0) += static_cast<float>(s.intensity * cov);
            }
    }
    return rain;
}

RainResult apply_rain(const Image& clean, const RainParams& p) {
    validate_image(clean, "apply_rain input");
    const auto streaks = make_streaks(p, clean.height, clean.width);
    Image rain = rasterize_streaks(clean.height, clean.width, streaks);
    Image degraded = clean;
    for (int y = 0; y < clean.height; ++y)
        for (int x = 0; x < clean.width; ++x) {
            const float r = rain.at(y, x, 0);
            for (int c = 0; c < clean.channels; ++c) degraded.at(y, x, c) += r;
        }
    return {std::move(degraded), std::move(rain)};
}

// --- snow ---

namespace {

// In-place box blur with replicate edges; radius 0 is the identity.
void box_blur(Image& img, int radius) {
    if (radius <= 0) return;
    const int h = img.height, w = img.width;
    const double norm = 1.0 / (2 * radius + 1);
    Image tmp(h, w, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int d = -radius; d <= radius; ++d)
                acc += img.at(y, std::clamp(x + d, 0, w - 1), 0);
            tmp.at(y, x, 0) = static_cast<float>(acc * norm);
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int d = -radius; d <= radius; ++d)
                acc += tmp.at(std::clamp(y + d, 0, h - 1), x, 0);
            img.at(y, x, 0) = static_cast<float>(std::clamp(acc * norm, 0.0, 1.0));
        }
}

} // namespace

Image compose_snow(const Image& clean, const Image& mask, const Image& particles) {
    if (mask.height != clean.height || mask.width != clean.width || mask.channels != 1 ||
        !mask.same_shape(particles))
        throw std::invalid_argument("compose_snow: map shape mismatch");
    Image out(clean.height, clean.width, clean.channels);
    for (int y = 0; y < clean.height; ++y)
        for (int x = 0; x < clean.width; ++x) {
            const double m = mask.at(y, x, 0), s = particles.at(y, x, 0);
            for (int c = 0; c < clean.channels; ++c)
                out.at(y, x, c) = static_cast<float>(m * s + (1.0 - m) * clean.at(y, x, c));
        }
    return out;
}

SnowResult apply_snow(const Image& clean, const SnowParams& p) {
    validate_image(clean, "apply_snow input");
    p.validate();
    const int h = clean.height, w = clean.width;
    Image mask(h, w, 1);
    Image particles(h, w, 1);

    Rng rng(p.seed);
    const double mean_r = 0.5 * (p.radius_min + p.radius_max);
    const double mean_area = 3.14159265358979323846 * mean_r * mean_r;
    const int count = static_cast<int>(std::ceil(p.density * h * w / std::max(mean_area, 1.0)));

    for (int k = 0; k < count; ++k) {
        const double cx = rng.uniform(0.0, static_cast<double>(w));
        const double cy = rng.uniform(0.0, static_cast<double>(h));
        const double r = rng.uniform(p.radius_min, p.radius_max);
        const double s = rng.uniform(p.intensity_min, p.intensity_max);
        // Particle value support is dilated by the softness radius so the
        // blurred mask never exposes S = 0 under M > 0.
        const double r_s = r + p.mask_softness + 1.0;
        const int yb = std::max(0, static_cast<int>(std::floor(cy - r_s - 1)));
        const int ye = std::min(h - 1, static_cast<int>(std::ceil(cy + r_s + 1)));
        const int xb = std::max(0, static_cast<int>(std::floor(cx - r_s - 1)));
        const int xe = std::min(w - 1, static_cast<int>(std::ceil(cx + r_s + 1)));
        for (int y = yb; y <= ye; ++y)
            for (int x = xb; x <= xe; ++x) {
                const double d = std::hypot(x + 0.5 - cx, y + 0.5 - cy);
                const double cov = std::clamp(r + 0.5 - d, 0.0, 1.0);
                if (cov > 0.0) {
                    float& m = mask.at(y, x, 0);
                    m = static_cast<float>(1.0 - (1.0 - m) * (1.0 - cov)); // soft OR
                }
                if (d < r_s)
                    particles.at(y, x, 0) = std::max(particles.at(y, x, 0), static_cast<float>(s));
            }
    }
    box_blur(mask, p.mask_softness);
    // Near-total occlusion snaps to total occlusion: intermediate masks in
    // (0.98, 1) would leave a residual gain 1-M inside the near-singular
    // band where the analytic inverse amplifies raster quantization past
    // its tolerance.
    for (float& m : mask.data)
        if (m > 0.98f) m = 1.0f;
    Image degraded = compose_snow(clean, mask, particles);
    return {std::move(degraded), std::move(mask), std::move(particles)};
}

// --- haze ---

Image compose_haze(const Image& clean, const Image& transmission,
                   const std::vector<double>& atmospheric_light) {
    if (transmission.height != clean.height || transmission.width != clean.width ||
        transmission.channels != 1)
        throw std::invalid_argument("compose_haze: transmission shape mismatch");
    if (atmospheric_light.size() != 1 &&
        atmospheric_light.size() != static_cast<std::size_t>(clean.channels))
        throw std::invalid_argument("compose_haze: A channel count mismatch");
    Image out(clean.height, clean.width, clean.channels);
    for (int y = 0; y < clean.height; ++y)
        for (int x = 0; x < clean.width; ++x) {
            const double t = transmission.at(y, x, 0);
            for (int c = 0; c < clean.channels; ++c) {
                const double a =
                    atmospheric_light[atmospheric_light.size() == 1 ? 0 : c];
                out.at(y, x, c) = static_cast<float>(clean.at(y, x, c) * t + a * (1.0 - t));
            }
        }
    return out;
}

namespace {

// Smooth random field in [0,1]: bilinear upsampling of a coarse grid.
Image smooth_random_field(int h, int w, int cells, Rng& rng) {
    const int gh = std::max(2, cells), gw = std::max(2, cells);
    std::vector<double> grid(static_cast<std::size_t>(gh) * gw);
    for (double& g : grid) g = rng.uniform();
    Image out(h, w, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double fy = (h == 1) ? 0.0 : static_cast<double>(y) / (h - 1) * (gh - 1);
            const double fx = (w == 1) ? 0.0 : static_cast<double>(x) / (w - 1) * (gw - 1);
            const int y0 = std::min(static_cast<int>(fy), gh - 2);
            const int x0 = std::min(static_cast<int>(fx), gw - 2);
            const double ay = fy - y0, ax = fx - x0;
            const double v00 = grid[y0 * gw + x0], v01 = grid[y0 * gw + x0 + 1];
            const double v10 = grid[(y0 + 1) * gw + x0], v11 = grid[(y0 + 1) * gw + x0 + 1];
            out.at(y, x, 0) = static_cast<float>((1 - ay) * ((1 - ax) * v00 + ax * v01) +
                                                 ay * ((1 - ax) * v10 + ax * v11));
        }
    return out;
}

} // namespace

HazeResult apply_haze_with_map(const Image& clean, const Image& transmission,
                               const std::vector<double>& atmospheric_light) {
    validate_image(clean, "apply_haze input");
    Image degraded = compose_haze(clean, transmission, atmospheric_light);
    return {std::move(degraded), transmission};
}

HazeResult apply_haze(const Image& clean, const HazeParams& p) {
    validate_image(clean, "apply_haze input");
    p.validate();
    Rng rng(p.seed);
    // depth in [0, 2]: smooth field scaled so beta produces visible variation
    Image depth = smooth_random_field(clean.height, clean.width, 5, rng);
    Image t(clean.height, clean.width, 1);
    for (int y = 0; y < clean.height; ++y)
        for (int x = 0; x < clean.width; ++x) {
            const double d = 2.0 * depth.at(y, x, 0);
            const double tv = std::exp(-p.beta * d);
            t.at(y, x, 0) = static_cast<float>(std::clamp(tv, p.t_min, 1.0));
        }
    Image degraded = compose_haze(clean, t, p.atmospheric_light);
    return {std::move(degraded), std::move(t)};
}

GainOnlyResult apply_gain_only(const Image& clean, double gain) {
    validate_image(clean, "apply_gain_only input");
    if (!std::isfinite(gain)) throw std::invalid_argument("apply_gain_only: non-finite gain");
    Image degraded(clean.height, clean.width, clean.channels);
    for (std::size_t i = 0; i < clean.data.size(); ++i)
        degraded.data[i] = static_cast<float>(gain * clean.data[i]);
    Image gmap(clean.height, clean.width, 1, static_cast<float>(gain));
    return {std::move(degraded), std::move(gmap)};
}

// --- affine views ---

namespace {

Image broadcast(const Image& map, int channels) {
    Image out(map.height, map.width, channels);
    for (int y = 0; y < map.height; ++y)
        for (int x = 0; x < map.width; ++x)
            for (int c = 0; c < channels; ++c) out.at(y, x, c) = map.at(y, x, 0);
    return out;
}

} // namespace

PerPixelAffine to_affine(const RainResult& r, int channels) {
    Image gain(r.rain.height, r.rain.width, channels, 1.0f);
    return {std::move(gain), broadcast(r.rain, channels)};
}

PerPixelAffine to_affine(const SnowResult& r, int channels) {
    Image gain(r.mask.height, r.mask.width, channels);
    Image bias(r.mask.height, r.mask.width, channels);
    for (int y = 0; y < r.mask.height; ++y)
        for (int x = 0; x < r.mask.width; ++x) {
            const float m = r.mask.at(y, x, 0), s = r.particles.at(y, x, 0);
            for (int c = 0; c < channels; ++c) {
                gain.at(y, x, c) = 1.0f - m;
                bias.at(y, x, c) = m * s;
            }
        }
    return {std::move(gain), std::move(bias)};
}

PerPixelAffine to_affine(const HazeResult& r, const std::vector<double>& atmospheric_light,
                         int channels) {
    if (atmospheric_light.size() != 1 &&
        atmospheric_light.size() != static_cast<std::size_t>(channels))
        throw std::invalid_argument("to_affine(haze): A channel count mismatch");
    Image gain(r.transmission.height, r.transmission.width, channels);
    Image bias(r.transmission.height, r.transmission.width, channels);
    for (int y = 0; y < gain.height; ++y)
        for (int x = 0; x < gain.width; ++x) {
            const double t = r.transmission.at(y, x, 0);
            for (int c = 0; c < channels; ++c) {
                const double a = atmospheric_light[atmospheric_light.size() == 1 ? 0 : c];
                gain.at(y, x, c) = static_cast<float>(t);
                bias.at(y, x, c) = static_cast<float>(a * (1.0 - t));
            }
        }
    return {std::move(gain), std::move(bias)};
}

PerPixelAffine to_affine(const GainOnlyResult& r, int channels) {
    Image bias(r.gain.height, r.gain.width, channels, 0.0f);
    return {broadcast(r.gain, channels), std::move(bias)};
}

Image oracle_inverse(const PerPixelAffine& a, const Image& degraded, double g_floor) {
    if (!a.gain.same_shape(degraded) || !a.bias.same_shape(degraded))
        throw std::invalid_argument("oracle_inverse: shape mismatch");
    for (float g : a.gain.data)
        if (std::abs(g) < g_floor)
            throw NearSingularGain("oracle_inverse: |gain| below floor " +
                                   std::to_string(g_floor));
    Image out(degraded.height, degraded.width, degraded.channels);
    for (std::size_t i = 0; i < degraded.data.size(); ++i)
        out.data[i] = (degraded.data[i] - a.bias.data[i]) / a.gain.data[i];
    return out;
}

} // namespace opir::degrade
