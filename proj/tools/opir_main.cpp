// Copyright 2026 The OPIR Authors
// SPDX-License-Identifier: Apache-2.0
//
// opir: all-in-one image restoration via predicted per-pixel inverse
// operators. Subcommands: gen, train, restore, eval, inspect, bench,
// ablate. Exit codes: 0 success, 1 usage error, 2 runtime/data error.

#include <CLI11.hpp>

#include "opir/checkpoint.hpp"
#include "opir/datagen.hpp"
#include "opir/kernel_engine.hpp"
#include "opir/manifest.hpp"
#include "opir/metrics.hpp"
#include "opir/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using namespace opir;

namespace {

std::vector<int> parse_scale_set(const std::string& s) {
    std::vector<int> out;
    std::istringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
    return out;
}

void echo_kv(const std::string& k, const std::string& v) {
    std::cout << "  " << k << " = " << v << "\n";
}

// --- gen ---

int run_gen(const datagen::GenOptions& opt) {
    std::cout << "gen: resolved options\n";
    echo_kv("task", opt.task);
    echo_kv("count", std::to_string(opt.count));
    echo_kv("size", std::to_string(opt.height) + "x" + std::to_string(opt.width));
    echo_kv("seed", std::to_string(opt.seed));
    echo_kv("out", opt.out_dir);
    echo_kv("clean", opt.clean_dir.empty() ? "(procedural)" : opt.clean_dir);
    echo_kv("gain_only", opt.gain_only ? "true" : "false");
    const std::string manifest = datagen::generate_dataset(opt);
    std::cout << "wrote " << manifest << "\n";
    return 0;
}

// --- train ---

int run_train(const std::string& config_path, const std::string& resume) {
    train::TrainConfig cfg = train::load_config(config_path);
    std::cout << "train: resolved config\n" << train::config_to_string(cfg);
    if (!resume.empty()) std::cout << "resume = " << resume << "\n";
    const train::TrainResult res = train::train(cfg, resume);
    std::cout << "final checkpoint: " << res.checkpoint_dir << "\n";
    std::cout << "loss log: " << res.log_path << "\n";
    char buf[160];
    std::snprintf(buf, sizeof buf, "probe psnr: rain=%.4f snow=%.4f haze=%.4f (degraded: %.4f)",
                  res.final_probe.rain, res.final_probe.snow, res.final_probe.haze,
                  res.degraded_probe.mean());
    std::cout << buf << "\n";
    return 0;
}

// --- restore ---

Image um_to_png(const engine::UncertaintyMap& um) {
    double peak = 0.0;
    for (double v : um.score) peak = std::max(peak, v);
    Image img(um.h, um.w, 1);
    for (std::size_t i = 0; i < um.score.size(); ++i)
        img.data[i] = peak > 0.0 ? static_cast<float>(um.score[i] / peak) : 0.0f;
    return img;
}

Image kernels_to_image(const engine::KernelField& k) {
    Image img(k.h, k.w, engine::kTaps);
    for (std::size_t i = 0; i < k.taps.size(); ++i) img.data[i] = static_cast<float>(k.taps[i]);
    return img;
}

void save_by_extension(const Image& img, const std::string& path) {
    if (fs::path(path).extension() == ".tnsr") save_tensor_file(img, path);
    else save_image(img, path);
}

int run_restore(const std::string& ckpt_dir, int task, const std::string& in_path,
                const std::string& out_path, const std::string& dump_dir) {
    std::cout << "restore: resolved options\n";
    echo_kv("ckpt", ckpt_dir);
    echo_kv("task", std::to_string(task));
    echo_kv("in", in_path);
    echo_kv("out", out_path);
    if (!dump_dir.empty()) echo_kv("dump-intermediates", dump_dir);

    const auto loaded = ckpt::load_checkpoint(ckpt_dir);
    const Image input = load_image(in_path);
    if (input.channels != loaded.model.cfg.in_channels)
        throw std::runtime_error("restore: input has " + std::to_string(input.channels) +
                                 " channels, checkpoint expects " +
                                 std::to_string(loaded.model.cfg.in_channels));

    net::TwoStageCache cache;
    const net::TwoStageOut out =
        net::two_stage_forward(loaded.model, to_tensor(input), task, &cache);
    const Tensor& final_out = loaded.model.cfg.variant.two_stage ? out.j2 : out.j1;
    save_by_extension(to_image(final_out), out_path);

    if (!dump_dir.empty()) {
        fs::create_directories(dump_dir);
        const std::string stem = fs::path(in_path).stem().string();
        auto p = [&](const std::string& suffix) {
            return (fs::path(dump_dir) / (stem + suffix)).string();
        };
        save_image(to_image(out.j1), p("_j1.png"));
        save_image(um_to_png(out.um), p("_um.png"));
        Image um_raw(out.um.h, out.um.w, 1);
        for (std::size_t i = 0; i < out.um.score.size(); ++i)
            um_raw.data[i] = static_cast<float>(out.um.score[i]);
        save_tensor_file(um_raw, p("_um.tnsr"));
        save_tensor_file(kernels_to_image(cache.s1.mod_kernels), p("_k1.tnsr"));
        if (loaded.model.cfg.variant.two_stage)
            save_tensor_file(kernels_to_image(cache.s2.mod_kernels), p("_k2.tnsr"));
        std::cout << "dumped intermediates to " << dump_dir << "\n";
    }
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

// --- eval ---

int run_eval(const std::string& ckpt_dir, const std::string& manifest_path,
             const std::string& mode_str, const std::string& report_path) {
    std::cout << "eval: resolved options\n";
    echo_kv("ckpt", ckpt_dir);
    echo_kv("manifest", manifest_path);
    echo_kv("mode", mode_str);
    echo_kv("report", report_path);
    const auto loaded = ckpt::load_checkpoint(ckpt_dir);
    const Manifest manifest = load_manifest(manifest_path);
    const auto mode = metrics::mode_from_string(mode_str);
    const auto report = metrics::evaluate(manifest, loaded.model, mode);
    metrics::write_report_csv(report, report_path);
    char buf[96];
    if (report.any_identical && !std::isfinite(report.mean_psnr))
        std::snprintf(buf, sizeof buf, "mean psnr: inf, mean ssim: %.6f", report.mean_ssim);
    else
        std::snprintf(buf, sizeof buf, "mean psnr: %.4f dB, mean ssim: %.6f", report.mean_psnr,
                      report.mean_ssim);
    std::cout << buf << "\n";
    return 0;
}

// --- inspect ---

int run_inspect(const std::string& path) {
    if (ckpt::is_checkpoint_dir(path)) {
        const auto loaded = ckpt::load_checkpoint(path);
        auto refs = net::collect_params(const_cast<net::TwoStageModel&>(loaded.model));
        std::size_t total = 0;
        std::cout << "checkpoint: " << path << "\n";
        for (const auto& ref : refs) {
            std::cout << "  " << ref.name << " [";
            for (std::size_t i = 0; i < ref.p->shape.size(); ++i)
                std::cout << (i ? "x" : "") << ref.p->shape[i];
            std::cout << "] = " << ref.p->size() << "\n";
            total += ref.p->size();
        }
        std::cout << "total parameters: " << total << "\n";
        for (const auto& [k, v] : loaded.extras.scalars) std::cout << "  " << k << " = " << v << "\n";
        return 0;
    }
    if (fs::is_regular_file(path) && is_tensor_file(path)) {
        const Image t = load_tensor_file(path);
        double lo = t.data[0], hi = t.data[0], sum = 0.0;
        for (float v : t.data) {
            lo = std::min(lo, static_cast<double>(v));
            hi = std::max(hi, static_cast<double>(v));
            sum += v;
        }
        std::cout << "tensor: " << path << "\n  dims: " << t.height << "x" << t.width << "x"
                  << t.channels << "\n";
        char buf[96];
        std::snprintf(buf, sizeof buf, "  min=%.6g max=%.6g mean=%.6g", lo, hi,
                      sum / t.data.size());
        std::cout << buf << "\n";
        return 0;
    }
    if (fs::is_regular_file(path) && fs::path(path).extension() == ".png") {
        const Image img = load_image(path);
        std::cout << "png: " << path << "\n  dims: " << img.height << "x" << img.width << "x"
                  << img.channels << "\n";
        return 0;
    }
    // try manifest
    const Manifest m = load_manifest(path);
    std::map<int, int> per_task;
    for (const auto& r : m.records) per_task[r.task_id]++;
    std::cout << "manifest: " << path << "\n  records: " << m.records.size() << "\n";
    for (const auto& [task, count] : per_task)
        std::cout << "  task " << task << ": " << count << "\n";
    return 0;
}

// --- bench ---

int run_bench(const std::string& sizes_str, const std::string& scales_str, int reps,
              const std::string& report_path, std::uint64_t seed) {
    std::cout << "bench: resolved options\n";
    echo_kv("sizes", sizes_str);
    echo_kv("scales", scales_str);
    echo_kv("reps", std::to_string(reps));
    echo_kv("report", report_path);

    std::vector<std::pair<int, int>> sizes;
    {
        std::istringstream ss(sizes_str);
        std::string item;
        while (std::getline(ss, item, ',')) {
            const auto x = item.find('x');
            if (x == std::string::npos) throw std::runtime_error("bench: bad size '" + item + "'");
            sizes.emplace_back(std::stoi(item.substr(0, x)), std::stoi(item.substr(x + 1)));
        }
    }
    std::vector<std::vector<int>> scale_sets;
    {
        std::istringstream ss(scales_str);
        std::string item;
        while (std::getline(ss, item, ';')) scale_sets.push_back(parse_scale_set(item));
    }
    if (reps < 1) reps = 1;

    std::ofstream report(report_path);
    if (!report) throw std::runtime_error("bench: cannot open " + report_path);
    report << "h,w,scales,naive_ms,fast_ms,speedup,max_abs_diff\n";

    using clock = std::chrono::steady_clock;
    auto median_ms = [&](auto&& fn) {
        std::vector<double> times;
        for (int r = 0; r < reps; ++r) {
            const auto t0 = clock::now();
            fn();
            const auto t1 = clock::now();
            times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
        }
        std::sort(times.begin(), times.end());
        return times[times.size() / 2];
    };

    Rng rng(seed);
    for (const auto& [h, w] : sizes) {
        for (const auto& sc : scale_sets) {
            const engine::ScaleSet scales(sc);
            Tensor img(h, w, 3);
            for (double& v : img.v) v = rng.uniform();
            engine::KernelField k(h, w);
            for (double& v : k.taps) v = rng.uniform(-0.5, 0.5);
            Tensor logits(h, w, scales.count());
            for (double& v : logits.v) v = rng.uniform(-1.0, 1.0);
            const engine::FusionField alpha = engine::softmax_fusion(logits);

            Tensor naive_out, fast_out;
            const double naive_ms = median_ms(
                [&] { naive_out = engine::apply_multiscale_naive(img, k, scales, alpha); });
            const double fast_ms = median_ms([&] {
                fast_out =
                    engine::apply_multiscale_fast(engine::gather_samples(img, scales), k, alpha);
            });
            double diff = 0.0;
            for (std::size_t i = 0; i < naive_out.v.size(); ++i)
                diff = std::max(diff, std::abs(naive_out.v[i] - fast_out.v[i]));

            std::string scale_text;
            for (std::size_t i = 0; i < sc.size(); ++i)
                scale_text += (i ? "|" : "") + std::to_string(sc[i]);
            char buf[192];
            std::snprintf(buf, sizeof buf, "%d,%d,%s,%.3f,%.3f,%.3f,%.3g", h, w,
                          scale_text.c_str(), naive_ms, fast_ms, naive_ms / fast_ms, diff);
            report << buf << "\n";
            std::cout << buf << "\n";
        }
    }
    std::cout << "wrote " << report_path << "\n";
    return 0;
}

// --- ablate ---

int run_ablate(const std::string& config_path, const std::string& variants_str,
               const std::string& report_path) {
    train::TrainConfig base = train::load_config(config_path);
    std::cout << "ablate: resolved config\n" << train::config_to_string(base);
    echo_kv("variants", variants_str);
    echo_kv("report", report_path);

    std::vector<std::string> variants;
    {
        std::istringstream ss(variants_str);
        std::string item;
        while (std::getline(ss, item, ',')) variants.push_back(item);
    }
    if (variants.empty()) throw std::runtime_error("ablate: empty variant list");

    struct Row {
        std::string variant;
        int stages;
        bool um, tam, multiscale;
        double psnr;
    };
    std::vector<Row> rows;
    for (const auto& v : variants) {
        train::TrainConfig cfg = base;
        cfg.variant = v;
        cfg.out_dir = (fs::path(base.out_dir) / v).string();
        cfg.validate(); // rejects unknown variants before any training
        std::cout << "--- training variant '" << v << "' ---\n";
        const train::TrainResult res = train::train(cfg);
        Row row;
        row.variant = v;
        row.stages = v == "one-stage" ? 1 : 2;
        row.um = v != "no-um" && v != "one-stage";
        row.tam = v != "no-tam";
        row.multiscale = v != "no-multiscale";
        row.psnr = res.final_probe.mean();
        rows.push_back(row);
    }

    std::ofstream report(report_path);
    if (!report) throw std::runtime_error("ablate: cannot open " + report_path);
    report << "variant,stages,uncertainty_map,task_aware_module,multi_scale_kernel,psnr_db,"
              "delta_db\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%s,%d,%d,%d,%d,%.6f,%.6f", r.variant.c_str(), r.stages,
                      r.um ? 1 : 0, r.tam ? 1 : 0, r.multiscale ? 1 : 0, r.psnr,
                      r.psnr - rows.front().psnr);
        report << buf << "\n";
        std::cout << buf << "\n";
    }
    std::cout << "wrote " << report_path << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"opir: task-aware inverse-operator image restoration"};
    app.require_subcommand(1);

    // gen
    datagen::GenOptions gen_opt;
    std::string gen_size = "64x64";
    auto* gen = app.add_subcommand("gen", "synthesize a degradation dataset");
    gen->add_option("--task", gen_opt.task, "rain|snow|haze|all")->required();
    gen->add_option("--count", gen_opt.count, "number of pairs")->required();
    gen->add_option("--size", gen_size, "HxW (default 64x64)");
    gen->add_option("--seed", gen_opt.seed, "generator seed");
    gen->add_option("--out", gen_opt.out_dir, "output directory")->required();
    gen->add_option("--clean", gen_opt.clean_dir, "directory of clean PNGs (default procedural)");
    bool procedural = false;
    gen->add_flag("--procedural", procedural, "use procedural textures (default)");
    gen->add_flag("--gain-only", gen_opt.gain_only,
                  "rain task as pure constant attenuation (training-efficacy probe sets)");

    // train
    std::string train_config, train_resume;
    auto* tr = app.add_subcommand("train", "train the two-stage restoration model");
    tr->add_option("--config", train_config, "key=value config file")->required();
    tr->add_option("--resume", train_resume, "checkpoint directory to resume from");

    // restore
    std::string r_ckpt, r_in, r_out, r_dump;
    int r_task = -1;
    auto* rs = app.add_subcommand("restore", "restore a single image");
    rs->add_option("--ckpt", r_ckpt, "checkpoint directory")->required();
    rs->add_option("--task", r_task, "task id (0 rain, 1 snow, 2 haze)")->required();
    rs->add_option("--in", r_in, "input image (png or tnsr)")->required();
    rs->add_option("--out", r_out, "output image path")->required();
    rs->add_option("--dump-intermediates", r_dump, "directory for J1/UM/kernel dumps");

    // eval
    std::string e_ckpt, e_manifest, e_mode = "rgb", e_report;
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a manifest");
    ev->add_option("--ckpt", e_ckpt)->required();
    ev->add_option("--manifest", e_manifest)->required();
    ev->add_option("--mode", e_mode, "rgb|y (y for deraining protocol)");
    ev->add_option("--report", e_report, "output CSV")->required();

    // inspect
    std::string i_path;
    auto* in = app.add_subcommand("inspect", "summarize a checkpoint, tensor, png, or manifest");
    in->add_option("path", i_path, "artifact path")->required();

    // bench
    std::string b_sizes = "256x256", b_scales = "1,2,4;1,2,16", b_report = "bench.csv";
    int b_reps = 5;
    std::uint64_t b_seed = 0;
    auto* be = app.add_subcommand("bench", "time naive vs fast multi-scale filtering");
    be->add_option("--sizes", b_sizes, "comma list of HxW");
    be->add_option("--scales", b_scales, "semicolon list of comma scale sets");
    be->add_option("--reps", b_reps, "repetitions (median reported)");
    be->add_option("--report", b_report, "output CSV");
    be->add_option("--seed", b_seed, "input generator seed");

    // ablate
    std::string a_config, a_variants = "full,no-um,one-stage,no-tam,no-multiscale",
                a_report = "ablation.csv";
    auto* ab = app.add_subcommand("ablate", "train variants under one budget and compare");
    ab->add_option("--config", a_config)->required();
    ab->add_option("--variants", a_variants, "comma list from {full,no-um,one-stage,no-tam,no-multiscale}");
    ab->add_option("--report", a_report, "output CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*gen) {
            const auto x = gen_size.find('x');
            if (x == std::string::npos)
                throw std::runtime_error("gen: --size must be HxW");
            gen_opt.height = std::stoi(gen_size.substr(0, x));
            gen_opt.width = std::stoi(gen_size.substr(x + 1));
            return run_gen(gen_opt);
        }
        if (*tr) return run_train(train_config, train_resume);
        if (*rs) return run_restore(r_ckpt, r_task, r_in, r_out, r_dump);
        if (*ev) return run_eval(e_ckpt, e_manifest, e_mode, e_report);
        if (*in) return run_inspect(i_path);
        if (*be) return run_bench(b_sizes, b_scales, b_reps, b_report, b_seed);
        if (*ab) return run_ablate(a_config, a_variants, a_report);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
