// Copyright 2026 The OPIR Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef OPIR_DEGRADE_HPP
#define OPIR_DEGRADE_HPP

#include "opir/image.hpp"
#include "opir/rng.hpp"

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace opir::degrade {

enum class DegradationKind { Rain = 0, Snow = 1, Haze = 2 };

int task_id(DegradationKind kind);
DegradationKind kind_from_task_id(int id);
const char* kind_name(DegradationKind kind);
DegradationKind kind_from_name(const std::string& name);

// --- parameter sets ---

struct RainParams {
    int num_streaks = 40;
    double length_min = 8.0, length_max = 24.0;   // pixels
    double angle_min = -0.35, angle_max = 0.35;   // radians from vertical
    double width_min = 1.0, width_max = 2.0;      // pixels
    double intensity_min = 0.1, intensity_max = 0.4;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SnowParams {
    double density = 0.10;                        // target covered fraction
    double radius_min = 1.0, radius_max = 3.0;    // pixels
    double intensity_min = 0.7, intensity_max = 1.0;
    int mask_softness = 1;                        // box-blur radius, 0 = hard
    std::uint64_t seed = 0;

    void validate() const;
};

struct HazeParams {
    std::vector<double> atmospheric_light = {0.8, 0.8, 0.8}; // per channel, (0,1]
    // Transmission comes either from an explicit map or from exp(-beta*depth)
    // over a synthesized smooth depth field.
    double beta = 1.0;    // scattering coefficient, >= 0
    double t_min = 0.05;  // lower clamp on transmission
    std::uint64_t seed = 0;

    void validate() const;
};

// --- unified affine ground truth:  I = g (.) J + b ---

struct PerPixelAffine {
    Image gain; // same shape as the degraded image
    Image bias;
};

/// Raised by oracle_inverse where min|g| < g_floor: the degradation
/// destroys information locally and the analytic inverse refuses to
/// amplify it.
struct NearSingularGain : std::runtime_error {
    explicit NearSingularGain(const std::string& msg) : std::runtime_error(msg) {}
};

constexpr double kGainFloor = 1e-3;

// --- generators ---

/// One anti-aliased additive streak segment. Coverage at a pixel center is
/// clamp(0.5 + half_width - distance_to_segment, 0, 1).
struct Streak {
    double cx, cy;      // center, pixel units
    double angle;       // radians from vertical
    double length;
    double width;
    double intensity;
};

std::vector<Streak> make_streaks(const RainParams& p, int height, int width);
Image rasterize_streaks(int height, int width, const std::vector<Streak>& streaks);
double streak_coverage(const Streak& s, double px, double py);

struct RainResult {
    Image degraded;  // J + R, unclamped
    Image rain;      // R, single channel
};
RainResult apply_rain(const Image& clean, const RainParams& p);

struct SnowResult {
    Image degraded;
    Image mask;       // M in [0,1], single channel
    Image particles;  // S, single channel
};
/// I = M (.) S + (1 - M) (.) J, elementwise with 1-channel M, S broadcast
/// over channels.
Image compose_snow(const Image& clean, const Image& mask, const Image& particles);
SnowResult apply_snow(const Image& clean, const SnowParams& p);

struct HazeResult {
    Image degraded;
    Image transmission; // t in [t_min, 1], single channel
};
/// I(x) = J(x) t(x) + A (1 - t(x)) per channel.
Image compose_haze(const Image& clean, const Image& transmission,
                   const std::vector<double>& atmospheric_light);
HazeResult apply_haze(const Image& clean, const HazeParams& p);
/// Haze with a caller-supplied transmission map (already clamped).
HazeResult apply_haze_with_map(const Image& clean, const Image& transmission,
                               const std::vector<double>& atmospheric_light);

/// Pure multiplicative attenuation I = g * J with a constant per-image
/// gain; the degenerate corner of the affine family used by the training
/// efficacy probe.
struct GainOnlyResult {
    Image degraded;
    Image gain; // constant map, single channel
};
GainOnlyResult apply_gain_only(const Image& clean, double gain);

// --- ground-truth affine views ---

PerPixelAffine to_affine(const RainResult& r, int channels);
PerPixelAffine to_affine(const SnowResult& r, int channels);
PerPixelAffine to_affine(const HazeResult& r, const std::vector<double>& atmospheric_light,
                         int channels);
PerPixelAffine to_affine(const GainOnlyResult& r, int channels);

/// J_hat = (I - b) / g elementwise. Throws NearSingularGain if min|g| is
/// below g_floor.
Image oracle_inverse(const PerPixelAffine& a, const Image& degraded,
                     double g_floor = kGainFloor);

} // namespace opir::degrade

#endif
