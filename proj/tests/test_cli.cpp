// Copyright 2026 The OPIR Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "opir/checkpoint.hpp"
#include "opir/datagen.hpp"
#include "opir/image.hpp"
#include "opir/manifest.hpp"
#include "test_util.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using namespace opir;
using testutil::TempDir;

namespace {

const std::string kCli = OPIR_CLI_PATH;

int run(const std::string& args) {
    const std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// Byte-compare every regular file under two trees (relative paths must match).
bool trees_identical(const std::string& a, const std::string& b) {
    std::vector<std::string> rel;
    for (const auto& e : fs::recursive_directory_iterator(a))
        if (e.is_regular_file()) rel.push_back(fs::relative(e.path(), a).string());
    std::sort(rel.begin(), rel.end());
    for (const auto& r : rel) {
        if (!fs::exists(fs::path(b) / r)) return false;
        if (slurp((fs::path(a) / r).string()) != slurp((fs::path(b) / r).string())) return false;
    }
    std::size_t count_b = 0;
    for (const auto& e : fs::recursive_directory_iterator(b))
        if (e.is_regular_file()) ++count_b;
    return count_b == rel.size();
}

std::string make_identity_checkpoint(const TempDir& tmp) {
    net::ModelConfig mc;
    mc.in_channels = 3;
    mc.base_width = 4;
    mc.tam_dim = 2;
    mc.tam_hidden = 4;
    mc.scales = {1, 2};
    net::TwoStageModel model = net::make_model(mc, 0);
    const std::string dir = tmp.file("identity_ckpt");
    ckpt::save_checkpoint(dir, model, nullptr);
    return dir;
}

} // namespace

TEST_CASE("usage errors exit 1, runtime errors exit 2") {
    CHECK(run("definitely-not-a-command") == 1);
    CHECK(run("gen --task rain") == 1);            // missing required flags
    CHECK(run("gen --task rain --count 2 --out /tmp/x --definitely-unknown-flag") == 1);
    CHECK(run("restore --ckpt /nonexistent --task 0 --in a.png --out b.png") == 2);
    CHECK(run("inspect /nonexistent/path") == 2);
    CHECK(run("--help") == 0);
}

TEST_CASE("gen writes the requested manifest and is byte-reproducible") {
    TempDir tmp("cli_gen");
    const std::string d1 = tmp.file("d1"), d2 = tmp.file("d2");
    REQUIRE(run("gen --task haze --count 2 --size 16x16 --seed 7 --out " + d1) == 0);
    const Manifest m = load_manifest((fs::path(d1) / "manifest.txt").string());
    REQUIRE(m.records.size() == 2);
    for (const auto& r : m.records) CHECK(r.task_id == 2);

    REQUIRE(run("gen --task haze --count 2 --size 16x16 --seed 7 --out " + d2) == 0);
    CHECK(trees_identical(d1, d2));

    // equal split for --task all
    const std::string d3 = tmp.file("d3");
    REQUIRE(run("gen --task all --count 30 --size 16x16 --seed 3 --out " + d3) == 0);
    const Manifest m3 = load_manifest((fs::path(d3) / "manifest.txt").string());
    REQUIRE(m3.records.size() == 30);
    int per_task[3] = {0, 0, 0};
    for (const auto& r : m3.records) per_task[r.task_id]++;
    CHECK(per_task[0] == 10);
    CHECK(per_task[1] == 10);
    CHECK(per_task[2] == 10);

    CHECK(run("gen --task haze --count 0 --out " + tmp.file("d4")) == 2);
}

TEST_CASE("restore with an identity checkpoint reproduces the quantized input") {
    TempDir tmp("cli_restore");
    const std::string ckpt_dir = make_identity_checkpoint(tmp);

    Rng rng(5);
    const Image img = testutil::random_image(16, 16, 3, rng);
    save_image(img, tmp.file("in.png"));

    REQUIRE(run("restore --ckpt " + ckpt_dir + " --task 0 --in " + tmp.file("in.png") +
                " --out " + tmp.file("out.png")) == 0);
    CHECK(slurp(tmp.file("in.png")) == slurp(tmp.file("out.png")));

    // task id is mandatory
    CHECK(run("restore --ckpt " + ckpt_dir + " --in " + tmp.file("in.png") + " --out " +
              tmp.file("o2.png")) == 1);

    // channel mismatch is a data error
    save_image(rgb_to_y(img), tmp.file("gray.png"));
    CHECK(run("restore --ckpt " + ckpt_dir + " --task 0 --in " + tmp.file("gray.png") +
              " --out " + tmp.file("o3.png")) == 2);
}

TEST_CASE("restore --dump-intermediates writes exactly five artifacts") {
    TempDir tmp("cli_dump");
    const std::string ckpt_dir = make_identity_checkpoint(tmp);
    Rng rng(6);
    save_image(testutil::random_image(16, 16, 3, rng), tmp.file("x.png"));
    const std::string dump = tmp.file("dump");
    REQUIRE(run("restore --ckpt " + ckpt_dir + " --task 1 --in " + tmp.file("x.png") + " --out " +
                tmp.file("y.png") + " --dump-intermediates " + dump) == 0);
    CHECK(fs::exists(fs::path(dump) / "x_j1.png"));
    CHECK(fs::exists(fs::path(dump) / "x_um.png"));
    CHECK(fs::exists(fs::path(dump) / "x_um.tnsr"));
    CHECK(fs::exists(fs::path(dump) / "x_k1.tnsr"));
    CHECK(fs::exists(fs::path(dump) / "x_k2.tnsr"));
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(dump))
        if (e.is_regular_file()) ++files;
    CHECK(files == 5);

    // kernels at identity init: center tap one
    const Image k1 = load_tensor_file((fs::path(dump) / "x_k1.tnsr").string());
    CHECK(k1.channels == 9);
    CHECK(k1.at(3, 3, 4) == 1.0f);
    CHECK(k1.at(3, 3, 0) == 0.0f);
}

TEST_CASE("eval writes a report csv") {
    TempDir tmp("cli_eval");
    datagen::GenOptions gen;
    gen.task = "haze";
    gen.count = 2;
    gen.height = gen.width = 16;
    gen.seed = 9;
    gen.out_dir = tmp.file("data");
    const std::string manifest = datagen::generate_dataset(gen);
    const std::string ckpt_dir = make_identity_checkpoint(tmp);

    REQUIRE(run("eval --ckpt " + ckpt_dir + " --manifest " + manifest + " --mode rgb --report " +
                tmp.file("report.csv")) == 0);
    std::ifstream f(tmp.file("report.csv"));
    std::string header;
    std::getline(f, header);
    CHECK(header == "id,task,psnr_db,ssim");
    int rows = 0;
    std::string line;
    while (std::getline(f, line)) ++rows;
    CHECK(rows == 3); // 2 records + mean

    CHECK(run("eval --ckpt " + ckpt_dir + " --manifest " + manifest +
              " --mode luma --report " + tmp.file("r2.csv")) == 2);
}

TEST_CASE("inspect summarizes artifacts") {
    TempDir tmp("cli_inspect");
    const std::string ckpt_dir = make_identity_checkpoint(tmp);
    CHECK(run("inspect " + ckpt_dir) == 0);

    Rng rng(7);
    save_tensor_file(testutil::random_image(4, 4, 9, rng), tmp.file("k.tnsr"));
    CHECK(run("inspect " + tmp.file("k.tnsr")) == 0);

    save_image(testutil::random_image(8, 8, 3, rng), tmp.file("img.png"));
    CHECK(run("inspect " + tmp.file("img.png")) == 0);

    datagen::GenOptions gen;
    gen.task = "rain";
    gen.count = 2;
    gen.height = gen.width = 16;
    gen.out_dir = tmp.file("data");
    const std::string manifest = datagen::generate_dataset(gen);
    CHECK(run("inspect " + manifest) == 0);
}

TEST_CASE("bench verifies fast/naive agreement while timing") {
    TempDir tmp("cli_bench");
    REQUIRE(run("bench --sizes 32x32 --scales '1,2;1,4' --reps 2 --report " +
                tmp.file("bench.csv")) == 0);
    std::ifstream f(tmp.file("bench.csv"));
    std::string header;
    std::getline(f, header);
    CHECK(header == "h,w,scales,naive_ms,fast_ms,speedup,max_abs_diff");
    std::string line;
    int rows = 0;
    while (std::getline(f, line)) {
        ++rows;
        const auto last = line.rfind(',');
        const double diff = std::stod(line.substr(last + 1));
        CHECK(diff <= 1e-5);
    }
    CHECK(rows == 2);
}

TEST_CASE("train and ablate run end to end on a tiny budget") {
    TempDir tmp("cli_train");
    datagen::GenOptions gen;
    gen.task = "rain";
    gen.count = 3;
    gen.height = gen.width = 16;
    gen.seed = 2;
    gen.gain_only = true;
    gen.out_dir = tmp.file("data");
    const std::string manifest = datagen::generate_dataset(gen);

    {
        std::ofstream cfg(tmp.file("train.cfg"));
        cfg << "total_steps = 4\nbatch_size = 2\npatch_size = 16\nbase_width = 4\n"
            << "tam_dim = 2\ntam_hidden = 4\nscales = 1,2\nlog_every = 2\n"
            << "checkpoint_every = 0\nprobe_count = 1\nseed = 3\n"
            << "out_dir = " << tmp.file("run") << "\n"
            << "manifest_rain = " << manifest << "\n";
    }
    REQUIRE(run("train --config " + tmp.file("train.cfg")) == 0);
    CHECK(fs::exists(fs::path(tmp.file("run")) / "ckpt_final" / "index.txt"));
    CHECK(fs::exists(fs::path(tmp.file("run")) / "loss_log.csv"));

    {
        std::ofstream cfg(tmp.file("ablate.cfg"));
        cfg << "total_steps = 2\nbatch_size = 1\npatch_size = 16\nbase_width = 4\n"
            << "tam_dim = 2\ntam_hidden = 4\nscales = 1,2\nlog_every = 1\n"
            << "checkpoint_every = 0\nprobe_count = 1\nseed = 3\n"
            << "out_dir = " << tmp.file("ab") << "\n"
            << "manifest_rain = " << manifest << "\n";
    }
    REQUIRE(run("ablate --config " + tmp.file("ablate.cfg") +
                " --variants full,one-stage,no-um --report " + tmp.file("ablation.csv")) == 0);
    std::ifstream f(tmp.file("ablation.csv"));
    std::string header;
    std::getline(f, header);
    CHECK(header ==
          "variant,stages,uncertainty_map,task_aware_module,multi_scale_kernel,psnr_db,delta_db");
    int rows = 0;
    std::string line;
    while (std::getline(f, line)) ++rows;
    CHECK(rows == 3);

    CHECK(run("ablate --config " + tmp.file("ablate.cfg") + " --variants nonsense --report " +
              tmp.file("a2.csv")) == 2);
}
