// Copyright 2026 The OPIR Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite. Each criterion prints one [PASS]/[FAIL] line; the
// process exits nonzero if any executed criterion fails. Heavy artifacts
// (training runs) are cached under the work directory so the determinism
// criterion can compare against completed earlier runs.

#include "opir/datagen.hpp"
#include "opir/degrade.hpp"
#include "opir/kernel_engine.hpp"
#include "opir/kpn_net.hpp"
#include "opir/losses.hpp"
#include "opir/metrics.hpp"
#include "opir/texture.hpp"
#include "opir/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <vector>

namespace fs = std::filesystem;
using namespace opir;
using Clock = std::chrono::steady_clock;

namespace {

std::string g_workdir;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

bool trees_identical(const std::string& a, const std::string& b, std::string* why) {
    std::vector<std::string> rel;
    for (const auto& e : fs::recursive_directory_iterator(a))
        if (e.is_regular_file()) rel.push_back(fs::relative(e.path(), a).string());
    std::sort(rel.begin(), rel.end());
    for (const auto& r : rel) {
        if (!fs::exists(fs::path(b) / r)) {
            *why = "missing " + r;
            return false;
        }
        if (slurp((fs::path(a) / r).string()) != slurp((fs::path(b) / r).string())) {
            *why = "differs: " + r;
            return false;
        }
    }
    return true;
}

engine::KernelField random_kernels(int h, int w, Rng& rng) {
    engine::KernelField k(h, w);
    for (double& v : k.taps) v = rng.uniform(-0.5, 0.5);
    return k;
}

engine::FusionField random_simplex(int h, int w, int s, Rng& rng) {
    engine::FusionField f(h, w, s);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double* a = f.at(y, x);
            double sum = 0.0;
            for (int i = 0; i < s; ++i) {
                a[i] = rng.uniform(0.01, 1.0);
                sum += a[i];
            }
            for (int i = 0; i < s; ++i) a[i] /= sum;
        }
    return f;
}

// ---------------------------------------------------------------- 1
bool criterion_fast_naive(std::ostream& out) {
    const auto t0 = Clock::now();
    Rng rng(101);
    const std::vector<int> pool = {1, 2, 3, 4, 8};
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const int h = 8 + rng.uniform_int(57), w = 8 + rng.uniform_int(57);
        const int c = rng.bernoulli(0.5) ? 3 : 1;
        std::vector<int> subset;
        for (int s : pool)
            if (rng.bernoulli(0.5)) subset.push_back(s);
        if (subset.empty()) subset.push_back(pool[rng.uniform_int(5)]);
        const engine::ScaleSet scales(subset);

        Tensor img(h, w, c);
        for (double& v : img.v) v = rng.uniform();
        const engine::KernelField k = random_kernels(h, w, rng);
        const engine::FusionField alpha = random_simplex(h, w, scales.count(), rng);

        const Tensor fast = engine::apply_multiscale_fast(engine::gather_samples(img, scales), k,
                                                          alpha);
        const Tensor naive = engine::apply_multiscale_naive(img, k, scales, alpha);
        double peak = 1.0, diff = 0.0;
        for (double v : naive.v) peak = std::max(peak, std::abs(v));
        for (std::size_t i = 0; i < fast.v.size(); ++i)
            diff = std::max(diff, std::abs(fast.v[i] - naive.v[i]));
        worst = std::max(worst, diff / peak);
    }
    const double secs = seconds_since(t0);
    out << "100 randomized cases, worst relative Linf " << worst << ", " << secs << " s";
    return worst <= 1e-5 && secs < 30.0;
}

// ---------------------------------------------------------------- 2
bool criterion_identity_at_init(std::ostream& out) {
    net::ModelConfig cfg;
    cfg.in_channels = 3;
    cfg.base_width = 16;
    cfg.scales = {1, 2, 4};
    const net::TwoStageModel model = net::make_model(cfg, 2024);
    Rng rng(102);
    double worst = 0.0;
    for (const auto [h, w] : {std::pair{16, 16}, {33, 47}, {64, 64}}) {
        Tensor x(h, w, 3);
        for (double& v : x.v) v = rng.uniform();
        for (int task = 0; task < 3; ++task) {
            const net::TwoStageOut o = net::two_stage_forward(model, x, task);
            for (std::size_t i = 0; i < x.v.size(); ++i) {
                worst = std::max(worst, std::abs(o.j1.v[i] - x.v[i]));
                worst = std::max(worst, std::abs(o.j2.v[i] - x.v[i]));
            }
        }
    }
    out << "max |restored - input| at init " << worst;
    return worst <= 1e-6;
}

// ---------------------------------------------------------------- 3
bool criterion_uncertainty_map(std::ostream& out) {
    const auto um_id = engine::uncertainty_map(engine::identity_kernels(16, 16));
    double worst_id = 0.0;
    for (double v : um_id.score) worst_id = std::max(worst_id, std::abs(v - 1.0 / 9.0));

    Rng rng(103);
    double worst_eq = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const engine::KernelField k = random_kernels(12, 12, rng);
        const double c = rng.uniform(-3.0, 3.0);
        engine::KernelField ck(12, 12);
        for (std::size_t i = 0; i < k.taps.size(); ++i) ck.taps[i] = c * k.taps[i];
        const auto a = engine::uncertainty_map(k);
        const auto b = engine::uncertainty_map(ck);
        for (std::size_t i = 0; i < a.score.size(); ++i)
            worst_eq = std::max(worst_eq, std::abs(b.score[i] - std::abs(c) * a.score[i]));
    }
    out << "identity deviation " << worst_id << ", equivariance deviation " << worst_eq;
    return worst_id <= 1e-7 && worst_eq <= 1e-7;
}

// ---------------------------------------------------------------- 4
bool criterion_gradients(std::ostream& out) {
    const auto t0 = Clock::now();
    net::ModelConfig cfg;
    cfg.in_channels = 1;
    cfg.base_width = 4;
    cfg.tam_dim = 2;
    cfg.tam_hidden = 4;
    cfg.scales = {1, 2};
    net::TwoStageModel model = net::make_model(cfg, 404);
    Rng rng(104);
    for (auto& ref : net::collect_params(model)) ref.p->fill_uniform(rng, -0.25, 0.25);

    Tensor x(8, 8, 1), target(8, 8, 1);
    for (double& v : x.v) v = rng.uniform();
    for (double& v : target.v) v = rng.uniform();
    const int task = 1;
    const loss::LossWeights weights;

    auto loss_of = [&]() {
        const net::TwoStageOut o = net::two_stage_forward(model, x, task);
        return loss::total_loss({&o.j1, &o.j2}, target, weights).total;
    };

    net::zero_grads(model);
    {
        net::TwoStageCache cache;
        const net::TwoStageOut o = net::two_stage_forward(model, x, task, &cache);
        loss::TotalLoss tl = loss::total_loss({&o.j1, &o.j2}, target, weights);
        net::two_stage_backward(model, task, cache, tl.grads[0], tl.grads[1]);
    }

    auto refs = net::collect_params(model);
    // stratified draw: convolutions, TAM + embeddings, fusion heads
    std::vector<std::pair<std::size_t, std::size_t>> picks; // (ref idx, elem idx)
    Rng pick(105);
    auto draw_from = [&](auto&& pred, int want) {
        std::vector<std::size_t> pool_idx;
        for (std::size_t i = 0; i < refs.size(); ++i)
            if (pred(refs[i].name) && refs[i].p->size() > 0) pool_idx.push_back(i);
        for (int n = 0; n < want; ++n) {
            const std::size_t ri = pool_idx[pick.uniform_int(static_cast<int>(pool_idx.size()))];
            picks.emplace_back(ri, pick.uniform_int(static_cast<int>(refs[ri].p->size())));
        }
    };
    draw_from([](const std::string& n) { return n.find("tam") != std::string::npos ||
                                                 n.find("embeddings") != std::string::npos; }, 30);
    draw_from([](const std::string& n) { return n.find("fusion_head") != std::string::npos; }, 30);
    draw_from([](const std::string& n) { return n.find("net") != std::string::npos &&
                                                 n.find("fusion_head") == std::string::npos; }, 45);

    int checked = 0, failed = 0;
    double worst_rel = 0.0;
    for (const auto& [ri, j] : picks) {
        nn::ParamTensor& p = *refs[ri].p;
        const float saved = p.v[j];
        const double h = 1e-4;
        p.v[j] = static_cast<float>(saved + h);
        const double hi = loss_of();
        p.v[j] = static_cast<float>(saved - h);
        const double lo = loss_of();
        p.v[j] = saved;
        const double h_eff = static_cast<double>(static_cast<float>(saved + h)) -
                             static_cast<double>(static_cast<float>(saved - h));
        const double fd = (hi - lo) / h_eff;
        const double an = p.g[j];
        if (std::abs(fd) < 1e-10 && std::abs(an) < 1e-10) {
            ++checked;
            continue;
        }
        const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-8});
        worst_rel = std::max(worst_rel, rel);
        if (rel > 1e-3) ++failed;
        ++checked;
    }
    const double secs = seconds_since(t0);
    out << checked << " parameters checked, worst relative error " << worst_rel << ", " << failed
        << " failures, " << secs << " s";
    return checked >= 100 && failed == 0 && secs < 300.0;
}

// ---------------------------------------------------------------- 5
bool criterion_degradation_oracles(std::ostream& out) {
    using namespace opir::degrade;
    Rng base(505);
    double worst_consistency = 0.0, worst_recovery = 0.0;
    long recovered_px = 0;
    for (int task = 0; task < 3; ++task)
        for (int trial = 0; trial < 50; ++trial) {
            Rng rng = base.fork(task * 1000 + trial);
            const Image j = procedural_texture(32, 32, 3, rng);
            Image degraded;
            PerPixelAffine affine;
            if (task == 0) {
                RainParams p;
                p.num_streaks = 10 + rng.uniform_int(40);
                p.seed = rng.next_u64();
                auto r = apply_rain(j, p);
                degraded = r.degraded;
                affine = to_affine(r, 3);
            } else if (task == 1) {
                SnowParams p;
                p.density = rng.uniform(0.05, 0.25);
                p.seed = rng.next_u64();
                auto r = apply_snow(j, p);
                degraded = r.degraded;
                affine = to_affine(r, 3);
            } else {
                HazeParams p;
                p.beta = rng.uniform(0.5, 1.5);
                p.seed = rng.next_u64();
                auto r = apply_haze(j, p);
                degraded = r.degraded;
                affine = to_affine(r, p.atmospheric_light, 3);
            }
            for (std::size_t i = 0; i < j.data.size(); ++i) {
                const double lhs = degraded.data[i];
                const double rhs = static_cast<double>(affine.gain.data[i]) * j.data[i] +
                                   affine.bias.data[i];
                worst_consistency = std::max(worst_consistency, std::abs(lhs - rhs));
                if (std::abs(affine.gain.data[i]) >= kGainFloor) {
                    const double rec = (lhs - affine.bias.data[i]) / affine.gain.data[i];
                    worst_recovery = std::max(worst_recovery, std::abs(rec - j.data[i]));
                    ++recovered_px;
                }
            }
        }
    out << "150 pairs, consistency Linf " << worst_consistency << ", recovery Linf "
        << worst_recovery << " over " << recovered_px << " px";
    return worst_consistency <= 1e-6 && worst_recovery <= 1e-5;
}

// ---------------------------------------------------------------- 6
bool criterion_fft(std::ostream& out) {
    Rng rng(106);
    Tensor x(8, 8, 2);
    for (double& v : x.v) v = rng.uniform(-1.0, 1.0);
    const loss::Spectrum fast = loss::fft2(x);

    double worst_dft = 0.0;
    for (int c = 0; c < 2; ++c)
        for (int ky = 0; ky < 8; ++ky)
            for (int kx = 0; kx < 8; ++kx) {
                std::complex<double> acc(0, 0);
                for (int ny = 0; ny < 8; ++ny)
                    for (int nx = 0; nx < 8; ++nx) {
                        const double ang = -2.0 * M_PI * (ky * ny + kx * nx) / 8.0;
                        acc += x.at(ny, nx, c) * std::complex<double>(std::cos(ang), std::sin(ang));
                    }
                const std::size_t i = (static_cast<std::size_t>(ky) * 8 + kx) * 2 + c;
                worst_dft = std::max(worst_dft, std::abs(fast.re[i] - acc.real()));
                worst_dft = std::max(worst_dft, std::abs(fast.im[i] - acc.imag()));
            }

    double spatial = 0.0, spectral = 0.0;
    for (double v : x.v) spatial += v * v;
    for (std::size_t i = 0; i < fast.re.size(); ++i)
        spectral += fast.re[i] * fast.re[i] + fast.im[i] * fast.im[i];
    const double parseval = std::abs(spatial - spectral / 64.0) / spatial;

    const Tensor back = loss::ifft2(fast);
    double roundtrip = 0.0;
    for (std::size_t i = 0; i < x.v.size(); ++i)
        roundtrip = std::max(roundtrip, std::abs(back.v[i] - x.v[i]));

    out << "dft Linf " << worst_dft << ", parseval rel " << parseval << ", roundtrip " << roundtrip;
    return worst_dft <= 1e-5 && parseval <= 1e-4 && roundtrip <= 1e-5;
}

// ---------------------------------------------------------------- 7
train::TrainConfig efficacy_config(const std::string& data_dir, const std::string& out_dir) {
    train::TrainConfig cfg;
    cfg.total_steps = 2000;
    cfg.batch_size = 4;
    cfg.patch_size = 64;
    cfg.base_width = 16;
    cfg.scales = {1, 2, 4};
    cfg.seed = 7;
    cfg.log_every = 50;
    cfg.checkpoint_every = 0;
    cfg.probe_count = 8;
    cfg.out_dir = out_dir;
    cfg.tasks = {{0, (fs::path(data_dir) / "manifest.txt").string(), 1.0}};
    return cfg;
}

void ensure_efficacy_dataset(const std::string& data_dir) {
    if (fs::exists(fs::path(data_dir) / "manifest.txt")) return;
    datagen::GenOptions gen;
    gen.task = "rain";
    gen.count = 200;
    gen.height = gen.width = 64;
    gen.seed = 900;
    gen.gain_only = true;
    gen.out_dir = data_dir;
    datagen::generate_dataset(gen);
}

train::TrainResult run_efficacy(const std::string& out_dir) {
    const std::string data_dir = (fs::path(g_workdir) / "c7_data").string();
    ensure_efficacy_dataset(data_dir);
    return train::train(efficacy_config(data_dir, out_dir));
}

bool criterion_training_efficacy(std::ostream& out) {
    const auto t0 = Clock::now();
    const std::string run_dir = (fs::path(g_workdir) / "c7_runA").string();
    const std::string done = (fs::path(run_dir) / "DONE.txt").string();
    train::TrainResult res;
    if (fs::exists(done)) {
        // reuse the cached run (values recorded at completion)
        std::ifstream f(done);
        double final_psnr, degraded_psnr;
        f >> final_psnr >> degraded_psnr;
        out << "cached: probe " << degraded_psnr << " -> " << final_psnr << " dB";
        return final_psnr >= degraded_psnr + 3.0;
    }
    res = run_efficacy(run_dir);
    const double secs = seconds_since(t0);

    // loss trend: mean of the last two logged rows below the first two
    std::ifstream log(res.log_path);
    std::string line;
    std::getline(log, line);
    std::vector<double> totals;
    while (std::getline(log, line)) {
        std::istringstream row(line);
        std::string cell;
        for (int i = 0; i <= 5 && std::getline(row, cell, ','); ++i)
            if (i == 5) totals.push_back(std::stod(cell));
    }
    const bool trend_ok =
        totals.size() >= 4 &&
        (totals[totals.size() - 1] + totals[totals.size() - 2]) / 2.0 < (totals[0] + totals[1]) / 2.0;

    const double gain = res.final_probe.rain - res.degraded_probe.rain;
    {
        std::ofstream f(done);
        f << res.final_probe.rain << " " << res.degraded_probe.rain << "\n";
    }
    out << "probe " << res.degraded_probe.rain << " -> " << res.final_probe.rain << " dB (gain "
        << gain << "), loss trend " << (trend_ok ? "down" : "flat") << ", " << secs << " s";
    return gain >= 3.0 && trend_ok && secs < 1800.0;
}

// ---------------------------------------------------------------- 8
bool criterion_complexity(std::ostream& out) {
    const auto t0 = Clock::now();
    Rng rng(108);
    const int h = 256, w = 256;
    Tensor img(h, w, 3);
    for (double& v : img.v) v = rng.uniform();
    const engine::KernelField k = random_kernels(h, w, rng);

    auto median_time = [&](const std::vector<int>& sc, bool fast) {
        const engine::ScaleSet scales(sc);
        const engine::FusionField alpha = random_simplex(h, w, scales.count(), rng);
        std::vector<double> times;
        for (int rep = 0; rep < 5; ++rep) {
            const auto a = Clock::now();
            if (fast)
                engine::apply_multiscale_fast(engine::gather_samples(img, scales), k, alpha);
            else
                engine::apply_multiscale_naive(img, k, scales, alpha);
            times.push_back(std::chrono::duration<double, std::milli>(Clock::now() - a).count());
        }
        std::sort(times.begin(), times.end());
        return times[2];
    };

    const double fast_small = median_time({1, 2, 4}, true);
    const double fast_large = median_time({1, 2, 16}, true);
    const double naive_small = median_time({1, 2, 4}, false);
    const double naive_large = median_time({1, 2, 16}, false);
    const double secs = seconds_since(t0);

    out << "fast {1,2,4} " << fast_small << " ms vs {1,2,16} " << fast_large
        << " ms (ratio " << fast_large / fast_small << "); naive " << naive_small << " -> "
        << naive_large << " ms (ratio " << naive_large / naive_small << "); " << secs << " s";
    return fast_large <= 2.0 * fast_small && naive_large >= 4.0 * naive_small && secs < 300.0;
}

// ---------------------------------------------------------------- 9
namespace ref {

double psnr(const Image& x, const Image& y) {
    double mse = 0.0;
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const double d = static_cast<double>(x.data[i]) - y.data[i];
        mse += d * d;
    }
    mse /= x.data.size();
    return 10.0 * std::log10(1.0 / mse);
}

// separable-filter SSIM evaluated on fully interior windows
double ssim(const Image& x, const Image& y) {
    const int win = 11;
    const double sigma = 1.5, c1 = 1e-4, c2 = 9e-4;
    std::vector<double> g(win);
    double gsum = 0;
    for (int i = 0; i < win; ++i) {
        const double d = i - win / 2;
        g[i] = std::exp(-d * d / (2 * sigma * sigma));
        gsum += g[i];
    }
    for (double& v : g) v /= gsum;
    const int h = x.height, w = x.width;
    auto filt = [&](const std::vector<double>& p) {
        std::vector<double> tmp(p.size(), 0.0), outp(p.size(), 0.0);
        for (int yy = 0; yy < h; ++yy)
            for (int xx = 0; xx + win <= w; ++xx) {
                double acc = 0;
                for (int k = 0; k < win; ++k) acc += g[k] * p[yy * w + xx + k];
                tmp[yy * w + xx + win / 2] = acc;
            }
        for (int yy = 0; yy + win <= h; ++yy)
            for (int xx = 0; xx < w; ++xx) {
                double acc = 0;
                for (int k = 0; k < win; ++k) acc += g[k] * tmp[(yy + k) * w + xx];
                outp[(yy + win / 2) * w + xx] = acc;
            }
        return outp;
    };
    double total = 0.0;
    for (int c = 0; c < x.channels; ++c) {
        std::vector<double> px(h * w), py(h * w), pxx(h * w), pyy(h * w), pxy(h * w);
        for (int yy = 0; yy < h; ++yy)
            for (int xx = 0; xx < w; ++xx) {
                const double a = x.at(yy, xx, c), b = y.at(yy, xx, c);
                px[yy * w + xx] = a;
                py[yy * w + xx] = b;
                pxx[yy * w + xx] = a * a;
                pyy[yy * w + xx] = b * b;
                pxy[yy * w + xx] = a * b;
            }
        auto mx = filt(px), my = filt(py), mxx = filt(pxx), myy = filt(pyy), mxy = filt(pxy);
        double acc = 0;
        long n = 0;
        for (int yy = win / 2; yy < h - win / 2; ++yy)
            for (int xx = win / 2; xx < w - win / 2; ++xx) {
                const std::size_t i = yy * w + xx;
                const double vx = mxx[i] - mx[i] * mx[i], vy = myy[i] - my[i] * my[i];
                const double cov = mxy[i] - mx[i] * my[i];
                acc += ((2 * mx[i] * my[i] + c1) * (2 * cov + c2)) /
                       ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
                ++n;
            }
        total += acc / n;
    }
    return total / x.channels;
}

} // namespace ref

bool criterion_metric_fidelity(std::ostream& out) {
    Rng rng(109);
    double worst_psnr = 0.0, worst_ssim = 0.0;
    for (int pair = 0; pair < 5; ++pair) {
        Image x(20 + pair, 24, pair % 2 ? 1 : 3);
        for (float& v : x.data) v = static_cast<float>(rng.uniform());
        Image y = x;
        for (float& v : y.data)
            v = std::clamp(v + static_cast<float>(0.08 * (rng.uniform() - 0.5)), 0.0f, 1.0f);
        worst_psnr = std::max(worst_psnr, std::abs(metrics::psnr(x, y).db - ref::psnr(x, y)));
        worst_ssim = std::max(worst_ssim, std::abs(metrics::ssim(x, y) - ref::ssim(x, y)));
    }
    Image base(16, 16, 3, 0.4f), shifted(16, 16, 3, 0.5f);
    const double db = metrics::psnr(shifted, base).db;

    out << "5 pairs: psnr dev " << worst_psnr << " dB, ssim dev " << worst_ssim
        << "; 0.1-uniform pair " << db << " dB (dev " << std::abs(db - 20.0) << ")";
    // 0.1 is not binary-representable, so "exactly 20 dB" holds to the
    // same 1e-6 dB agreement bound used for the reference oracle
    return worst_psnr <= 1e-6 && worst_ssim <= 1e-4 && std::abs(db - 20.0) <= 1e-6;
}

// ---------------------------------------------------------------- 10
train::TrainConfig ablation_config(const std::string& manifest, const std::string& out_dir,
                                   std::uint64_t seed) {
    train::TrainConfig cfg;
    cfg.total_steps = 2000;
    cfg.batch_size = 4;
    cfg.patch_size = 32;
    cfg.base_width = 8;
    cfg.tam_dim = 8;
    cfg.tam_hidden = 16;
    cfg.scales = {1, 2, 4};
    cfg.seed = seed;
    cfg.log_every = 500;
    cfg.checkpoint_every = 0;
    cfg.probe_count = 8;
    cfg.out_dir = out_dir;
    cfg.tasks = {{0, manifest, 1.0}, {1, manifest, 1.0}, {2, manifest, 1.0}};
    return cfg;
}

std::string ensure_ablation_dataset() {
    const std::string dir = (fs::path(g_workdir) / "c10_data").string();
    const std::string manifest = (fs::path(dir) / "manifest.txt").string();
    if (fs::exists(manifest)) return manifest;
    datagen::GenOptions gen;
    gen.task = "all";
    gen.count = 60;
    gen.height = gen.width = 32;
    gen.seed = 1000;
    gen.out_dir = dir;
    datagen::generate_dataset(gen);
    return manifest;
}

// Trains one variant; returns the mean probe PSNR. Uses a task-filtered
// view of the shared manifest per task id.
double ablate_variant(const std::string& manifest, const std::string& out_dir,
                      const std::string& variant, std::uint64_t seed) {
    train::TrainConfig cfg = ablation_config(manifest, out_dir, seed);
    cfg.variant = variant;
    return train::train(cfg).final_probe.mean();
}

bool criterion_ablation(std::ostream& out) {
    const auto t0 = Clock::now();
    const std::string manifest = ensure_ablation_dataset();
    const std::string root = (fs::path(g_workdir) / "c10_runs").string();

    // Table-shaped CSV over all five variants at seed 11, then the
    // {full, no-um, one-stage} comparison repeated at three seeds.
    const std::vector<std::string> all_variants = {"full", "no-um", "one-stage", "no-tam",
                                                   "no-multiscale"};
    const std::vector<std::uint64_t> seeds = {11, 12, 13};

    int full_wins = 0;
    std::map<std::string, double> seed0_psnr;
    for (std::size_t rep = 0; rep < seeds.size(); ++rep) {
        const std::vector<std::string>& variants =
            rep == 0 ? all_variants : std::vector<std::string>{"full", "no-um", "one-stage"};
        std::map<std::string, double> psnr;
        for (const auto& v : variants) {
            const std::string run_dir =
                (fs::path(root) / ("seed" + std::to_string(seeds[rep])) / v).string();
            const std::string done = (fs::path(run_dir) / "PSNR.txt").string();
            double value;
            if (fs::exists(done)) {
                std::ifstream f(done);
                f >> value;
            } else {
                value = ablate_variant(manifest, run_dir, v, seeds[rep]);
                std::ofstream f(done);
                char buf[32];
                std::snprintf(buf, sizeof buf, "%.9f", value);
                f << buf << "\n";
            }
            psnr[v] = value;
        }
        if (rep == 0) seed0_psnr = psnr;
        if (psnr["full"] >= psnr["no-um"] && psnr["full"] >= psnr["one-stage"]) ++full_wins;
    }

    // emit the Table-5-shaped CSV from the seed-11 five-variant sweep
    const std::string csv = (fs::path(g_workdir) / "c10_ablation.csv").string();
    {
        std::ofstream f(csv);
        f << "variant,stages,uncertainty_map,task_aware_module,multi_scale_kernel,psnr_db,"
             "delta_db\n";
        const double base = seed0_psnr["full"];
        for (const auto& v : all_variants) {
            const int stages = v == "one-stage" ? 1 : 2;
            const bool um = v != "no-um" && v != "one-stage";
            char buf[160];
            std::snprintf(buf, sizeof buf, "%s,%d,%d,%d,%d,%.6f,%.6f", v.c_str(), stages,
                          um ? 1 : 0, v != "no-tam" ? 1 : 0, v != "no-multiscale" ? 1 : 0,
                          seed0_psnr[v], seed0_psnr[v] - base);
            f << buf << "\n";
        }
    }

    const double secs = seconds_since(t0);
    out << "csv " << csv << "; full/no-um/one-stage at seed 11: " << seed0_psnr["full"] << "/"
        << seed0_psnr["no-um"] << "/" << seed0_psnr["one-stage"] << "; full wins " << full_wins
        << "/3; " << secs << " s";
    return full_wins >= 2;
}

// ---------------------------------------------------------------- 11
bool criterion_determinism(std::ostream& out) {
    const auto t0 = Clock::now();
    std::string why;

    // repeat the training-efficacy run and demand identical bytes
    const std::string run_a = (fs::path(g_workdir) / "c7_runA").string();
    if (!fs::exists(fs::path(run_a) / "loss_log.csv")) run_efficacy(run_a);
    const std::string run_b = (fs::path(g_workdir) / "c11_runB").string();
    fs::remove_all(run_b);
    run_efficacy(run_b);
    const bool log_same =
        slurp(run_a + "/loss_log.csv") == slurp(run_b + "/loss_log.csv");
    bool ckpt_same =
        trees_identical(run_a + "/ckpt_final", run_b + "/ckpt_final", &why) &&
        trees_identical(run_b + "/ckpt_final", run_a + "/ckpt_final", &why);

    // repeat one ablation variant at the same seed
    const std::string manifest = ensure_ablation_dataset();
    const std::string ab_a = (fs::path(g_workdir) / "c10_runs" / "seed11" / "full").string();
    if (!fs::exists(fs::path(ab_a) / "loss_log.csv"))
        ablate_variant(manifest, ab_a, "full", 11);
    const std::string ab_b = (fs::path(g_workdir) / "c11_ablateB").string();
    fs::remove_all(ab_b);
    ablate_variant(manifest, ab_b, "full", 11);
    const bool ab_log_same = slurp(ab_a + "/loss_log.csv") == slurp(ab_b + "/loss_log.csv");
    bool ab_ckpt_same = trees_identical(ab_a + "/ckpt_final", ab_b + "/ckpt_final", &why) &&
                        trees_identical(ab_b + "/ckpt_final", ab_a + "/ckpt_final", &why);

    const double secs = seconds_since(t0);
    out << "training log " << (log_same ? "identical" : "DIFFERS") << ", checkpoint "
        << (ckpt_same ? "identical" : ("DIFFERS (" + why + ")")) << "; ablation log "
        << (ab_log_same ? "identical" : "DIFFERS") << ", checkpoint "
        << (ab_ckpt_same ? "identical" : "DIFFERS") << "; " << secs << " s";
    return log_same && ckpt_same && ab_log_same && ab_ckpt_same;
}

struct Criterion {
    int id;
    const char* title;
    std::function<bool(std::ostream&)> run;
};

const std::vector<Criterion>& criteria() {
    static const std::vector<Criterion> list = {
        {1, "fast/naive operator equivalence", criterion_fast_naive},
        {2, "identity at initialization", criterion_identity_at_init},
        {3, "uncertainty map correctness", criterion_uncertainty_map},
        {4, "gradient correctness (central finite differences)", criterion_gradients},
        {5, "degradation affine consistency and analytic inversion", criterion_degradation_oracles},
        {6, "fft against naive dft, parseval, round trip", criterion_fft},
        {7, "desk-scale training efficacy (>= 3 dB)", criterion_training_efficacy},
        {8, "fast-path cost independent of scale magnitude", criterion_complexity},
        {9, "metric fidelity against reference implementations", criterion_metric_fidelity},
        {10, "ablation harness ordering", criterion_ablation},
        {11, "bit-exact determinism of training and ablation", criterion_determinism},
    };
    return list;
}

} // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) only = std::atoi(argv[++i]);
        else if (std::strcmp(argv[i], "--workdir") == 0 && i + 1 < argc) g_workdir = argv[++i];
        else if (std::strcmp(argv[i], "--list") == 0) {
            for (const auto& c : criteria()) std::printf("%2d  %s\n", c.id, c.title);
            return 0;
        } else {
            std::fprintf(stderr, "usage: opir_acceptance [--criterion N] [--workdir DIR]\n");
            return 1;
        }
    }
    if (g_workdir.empty()) {
        if (const char* env = std::getenv("OPIR_ACCEPTANCE_DIR")) g_workdir = env;
        else g_workdir = (fs::current_path() / "opir_acceptance_work").string();
    }
    fs::create_directories(g_workdir);

    bool all_ok = true;
    for (const auto& c : criteria()) {
        if (only != 0 && c.id != only) continue;
        std::ostringstream detail;
        bool ok = false;
        try {
            ok = c.run(detail);
        } catch (const std::exception& e) {
            detail << "exception: " << e.what();
        }
        std::printf("[%s] criterion %2d: %s — %s\n", ok ? "PASS" : "FAIL", c.id, c.title,
                    detail.str().c_str());
        std::fflush(stdout);
        all_ok = all_ok && ok;
    }
    return all_ok ? 0 : 1;
}
