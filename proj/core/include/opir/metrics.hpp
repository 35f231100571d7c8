// Copyright 2026 The OPIR Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef OPIR_METRICS_HPP
#define OPIR_METRICS_HPP

#include "opir/image.hpp"
#include "opir/kpn_net.hpp"
#include "opir/manifest.hpp"

#include <string>
#include <vector>

namespace opir::metrics {

struct PsnrResult {
    double db = 0.0;
    bool identical = false; // infinite PSNR, reported as "inf"
};

/// 10*log10(peak^2 / MSE), MSE over all elements.
PsnrResult psnr(const Image& x, const Image& y, double peak = 1.0);

/// SSIM with an 11x11 Gaussian window (sigma 1.5), C1=(0.01)^2,
/// C2=(0.03)^2 at peak 1, windows fully inside the image, per channel
/// then averaged. Requires dims >= 11.
double ssim(const Image& x, const Image& y);

enum class ChannelMode { Rgb, Y };

ChannelMode mode_from_string(const std::string& s);
const char* mode_name(ChannelMode m);

struct EvalRow {
    std::string id;
    int task = 0;
    PsnrResult psnr;
    double ssim = 0.0;
};

struct EvalReport {
    ChannelMode mode = ChannelMode::Rgb;
    std::vector<EvalRow> rows;
    double mean_psnr = 0.0; // over finite entries
    double mean_ssim = 0.0;
    bool any_identical = false;
};

/// Restores every manifest pair with the model (inference only) and
/// computes PSNR/SSIM in the configured channel mode.
EvalReport evaluate(const Manifest& manifest, const net::TwoStageModel& model, ChannelMode mode);

/// CSV: "id,task,psnr_db,ssim" rows plus a trailing mean row.
void write_report_csv(const EvalReport& report, const std::string& path);

} // namespace opir::metrics

#endif
