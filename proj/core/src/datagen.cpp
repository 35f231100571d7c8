// Copyright 2026 The OPIR Authors
// SPDX-License-Identifier: Apache-2.0

#include "opir/datagen.hpp"

#include "opir/texture.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

namespace opir::datagen {

namespace fs = std::filesystem;
using namespace opir::degrade;

namespace {

std::string record_id(int i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%06d", i);
    return buf;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::vector<std::string> list_pngs(const std::string& dir) {
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".png")
            out.push_back(e.path().string());
    std::sort(out.begin(), out.end());
    if (out.empty()) throw std::runtime_error("generate_dataset: no PNGs in " + dir);
    return out;
}

} // namespace

std::string generate_dataset(const GenOptions& opt) {
    if (opt.count <= 0) throw std::invalid_argument("generate_dataset: count must be > 0");
    if (opt.height < 3 || opt.width < 3)
        throw std::invalid_argument("generate_dataset: size too small");
    if (opt.task != "all" && opt.task != "rain" && opt.task != "snow" && opt.task != "haze")
        throw std::invalid_argument("generate_dataset: unknown task '" + opt.task + "'");
    if (opt.gain_only && opt.task != "rain")
        throw std::invalid_argument("generate_dataset: --gain-only applies to the rain task");

    fs::create_directories(fs::path(opt.out_dir) / "clean");
    fs::create_directories(fs::path(opt.out_dir) / "degraded");
    fs::create_directories(fs::path(opt.out_dir) / "aux");

    std::vector<std::string> clean_sources;
    if (!opt.clean_dir.empty()) clean_sources = list_pngs(opt.clean_dir);

    const Rng base(opt.seed);
    Manifest manifest;
    manifest.dir = opt.out_dir;

    const int per_task = opt.task == "all" ? opt.count / 3 : opt.count;
    for (int i = 0; i < opt.count; ++i) {
        DegradationKind kind;
        if (opt.task == "all") {
            const int block = std::min(i / std::max(per_task, 1), 2);
            kind = kind_from_task_id(block);
        } else {
            kind = kind_from_name(opt.task);
        }

        Rng rng = base.fork(static_cast<std::uint64_t>(i));
        Image clean;
        if (clean_sources.empty()) {
            clean = procedural_texture(opt.height, opt.width, opt.channels, rng);
        } else {
            if (opt.height != opt.width)
                throw std::invalid_argument(
                    "generate_dataset: --clean mode needs a square --size");
            clean = load_image(clean_sources[i % clean_sources.size()]);
            if (clean.height < opt.height || clean.width < opt.width)
                throw std::runtime_error("generate_dataset: clean source smaller than --size");
            const int top = rng.uniform_int(clean.height - opt.height + 1);
            const int left = rng.uniform_int(clean.width - opt.width + 1);
            clean = crop_patch(clean, top, left, opt.height);
        }

        ManifestRecord rec;
        rec.id = record_id(i);
        rec.task_id = task_id(kind);
        rec.seed = rng.state();
        rec.clean_path = "clean/" + rec.id + ".tnsr";
        rec.degraded_path = "degraded/" + rec.id + ".tnsr";

        Image degraded;
        if (opt.gain_only) {
            const double g = rng.uniform(0.55, 0.8);
            auto r = apply_gain_only(clean, g);
            degraded = std::move(r.degraded);
            const std::string aux = "aux/" + rec.id + "_gain.tnsr";
            save_tensor_file(r.gain, (fs::path(opt.out_dir) / aux).string());
            rec.aux.emplace_back("gain", aux);
            rec.params = "mode=gain_only,gain=" + fmt(g);
        } else if (kind == DegradationKind::Rain) {
            RainParams p;
            p.num_streaks = 20 + rng.uniform_int(41);
            p.seed = rng.next_u64();
            auto r = apply_rain(clean, p);
            degraded = std::move(r.degraded);
            const std::string aux = "aux/" + rec.id + "_R.tnsr";
            save_tensor_file(r.rain, (fs::path(opt.out_dir) / aux).string());
            rec.aux.emplace_back("R", aux);
            rec.params = "num_streaks=" + std::to_string(p.num_streaks);
        } else if (kind == DegradationKind::Snow) {
            SnowParams p;
            p.density = rng.uniform(0.05, 0.20);
            p.seed = rng.next_u64();
            auto r = apply_snow(clean, p);
            degraded = std::move(r.degraded);
            const std::string aux_m = "aux/" + rec.id + "_M.tnsr";
            const std::string aux_s = "aux/" + rec.id + "_S.tnsr";
            save_tensor_file(r.mask, (fs::path(opt.out_dir) / aux_m).string());
            save_tensor_file(r.particles, (fs::path(opt.out_dir) / aux_s).string());
            rec.aux.emplace_back("M", aux_m);
            rec.aux.emplace_back("S", aux_s);
            rec.params = "density=" + fmt(p.density);
        } else {
            HazeParams p;
            const double a = rng.uniform(0.7, 0.95);
            p.atmospheric_light = {a, a, a};
            if (opt.channels == 1) p.atmospheric_light = {a};
            p.beta = rng.uniform(0.6, 1.4);
            p.seed = rng.next_u64();
            auto r = apply_haze(clean, p);
            degraded = std::move(r.degraded);
            const std::string aux = "aux/" + rec.id + "_t.tnsr";
            save_tensor_file(r.transmission, (fs::path(opt.out_dir) / aux).string());
            rec.aux.emplace_back("t", aux);
            rec.params = "A=" + fmt(a) + ",beta=" + fmt(p.beta) + ",t_min=" + fmt(p.t_min);
        }

        save_tensor_file(clean, (fs::path(opt.out_dir) / rec.clean_path).string());
        save_tensor_file(degraded, (fs::path(opt.out_dir) / rec.degraded_path).string());
        manifest.records.push_back(std::move(rec));
    }

    const std::string manifest_path = (fs::path(opt.out_dir) / "manifest.txt").string();
    save_manifest(manifest, manifest_path);
    return manifest_path;
}

} // namespace opir::datagen
