// Copyright 2026 The OPIR Authors
// SPDX-License-Identifier: Apache-2.0

#include "opir/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace opir::metrics {

PsnrResult psnr(const Image& x, const Image& y, double peak) {
    if (!x.same_shape(y)) throw std::invalid_argument("psnr: shape mismatch");
    double mse = 0.0;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const double d = static_cast<double>(x.data[i]) - y.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(x.data.size());
    if (mse == 0.0) return {0.0, true};
    return {10.0 * std::log10(peak * peak / mse), false};
}

namespace {

constexpr int kWin = 11;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

const double* gaussian_window() {
    static double w[kWin * kWin];
    static bool built = false;
    if (!built) {
        const double sigma = 1.5;
        double sum = 0.0;
        for (int y = 0; y < kWin; ++y)
            for (int x = 0; x < kWin; ++x) {
                const double dy = y - kWin / 2, dx = x - kWin / 2;
                w[y * kWin + x] = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
                sum += w[y * kWin + x];
            }
        for (double& v : w) v /= sum;
        built = true;
    }
    return w;
}

} // namespace

double ssim(const Image& x, const Image& y) {
    if (!x.same_shape(y)) throw std::invalid_argument("ssim: shape mismatch");
    if (x.height < kWin || x.width < kWin)
        throw std::invalid_argument("ssim: image smaller than the 11x11 window");
    const double* w = gaussian_window();

    double total = 0.0;
    for (int c = 0; c < x.channels; ++c) {
        double acc = 0.0;
        long count = 0;
        for (int cy = 0; cy + kWin <= x.height; ++cy)
            for (int cx = 0; cx + kWin <= x.width; ++cx) {
                double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
                for (int dy = 0; dy < kWin; ++dy)
                    for (int dx = 0; dx < kWin; ++dx) {
                        const double wv = w[dy * kWin + dx];
                        const double a = x.at(cy + dy, cx + dx, c);
                        const double b = y.at(cy + dy, cx + dx, c);
                        mx += wv * a;
                        my += wv * b;
                        mxx += wv * a * a;
                        myy += wv * b * b;
                        mxy += wv * a * b;
                    }
                const double vx = mxx - mx * mx;
                const double vy = myy - my * my;
                const double cov = mxy - mx * my;
                acc += ((2 * mx * my + kC1) * (2 * cov + kC2)) /
                       ((mx * mx + my * my + kC1) * (vx + vy + kC2));
                ++count;
            }
        total += acc / static_cast<double>(count);
    }
    return total / x.channels;
}

ChannelMode mode_from_string(const std::string& s) {
    if (s == "rgb") return ChannelMode::Rgb;
    if (s == "y") return ChannelMode::Y;
    throw std::invalid_argument("unknown channel mode '" + s + "' (want rgb|y)");
}

const char* mode_name(ChannelMode m) { return m == ChannelMode::Rgb ? "rgb" : "y"; }

namespace {

Image to_mode(const Image& img, ChannelMode mode) {
    if (mode == ChannelMode::Y && img.channels == 3) return rgb_to_y(img);
    return img;
}

} // namespace

EvalReport evaluate(const Manifest& manifest, const net::TwoStageModel& model, ChannelMode mode) {
    if (manifest.records.empty()) throw std::runtime_error("evaluate: empty manifest");
    EvalReport rep;
    rep.mode = mode;

    double psnr_sum = 0.0, ssim_sum = 0.0;
    long psnr_n = 0;
    for (const auto& rec : manifest.records) {
        const Image degraded = load_image(manifest.resolve(rec.degraded_path));
        const Image clean = load_image(manifest.resolve(rec.clean_path));
        if (degraded.channels != model.cfg.in_channels)
            throw std::runtime_error("evaluate: manifest/checkpoint channel mismatch for id " +
                                     rec.id);
        if (!degraded.same_shape(clean))
            throw std::runtime_error("evaluate: pair shape mismatch for id " + rec.id);

        const Tensor restored = net::restore(model, to_tensor(degraded), rec.task_id);
        const Image restored_img = to_image(restored);

        EvalRow row;
        row.id = rec.id;
        row.task = rec.task_id;
        const Image a = to_mode(restored_img, mode), b = to_mode(clean, mode);
        row.psnr = psnr(a, b);
        row.ssim = ssim(a, b);
        if (row.psnr.identical) {
            rep.any_identical = true;
        } else {
            psnr_sum += row.psnr.db;
            ++psnr_n;
        }
        ssim_sum += row.ssim;
        rep.rows.push_back(std::move(row));
    }
    rep.mean_psnr = psnr_n ? psnr_sum / psnr_n : std::numeric_limits<double>::infinity();
    rep.mean_ssim = ssim_sum / static_cast<double>(rep.rows.size());
    return rep;
}

void write_report_csv(const EvalReport& report, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_report_csv: cannot open " + path);
    f << "id,task,psnr_db,ssim\n";
    char buf[128];
    for (const auto& row : report.rows) {
        if (row.psnr.identical)
            std::snprintf(buf, sizeof buf, "inf,%.6f", row.ssim);
        else
            std::snprintf(buf, sizeof buf, "%.6f,%.6f", row.psnr.db, row.ssim);
        f << row.id << ',' << row.task << ',' << buf << '\n';
    }
    if (std::isinf(report.mean_psnr))
        std::snprintf(buf, sizeof buf, "inf,%.6f", report.mean_ssim);
    else
        std::snprintf(buf, sizeof buf, "%.6f,%.6f", report.mean_psnr, report.mean_ssim);
    f << "mean,-1," << buf << '\n';
    if (!f) throw std::runtime_error("write_report_csv: write failed for " + path);
}

} // namespace opir::metrics
