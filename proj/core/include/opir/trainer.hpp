// Copyright 2026 The OPIR Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef OPIR_TRAINER_HPP
#define OPIR_TRAINER_HPP

#include "opir/checkpoint.hpp"
#include "opir/kpn_net.hpp"
#include "opir/manifest.hpp"
#include "opir/rng.hpp"

#include <limits>
#include <map>
#include <string>
#include <vector>

namespace opir::train {

struct TaskSource {
    int task_id = 0;
    std::string manifest_path;
    double weight = 1.0;
};

struct TrainConfig {
    double lr_start = 2e-4;
    double lr_min = 1e-7;
    long long total_steps = 2000;
    int batch_size = 4;
    int patch_size = 64; // power of two; full-scale runs use 256
    std::vector<int> scales = {1, 2, 4};
    std::uint64_t seed = 0;
    std::vector<TaskSource> tasks;
    long long checkpoint_every = 500;
    long long log_every = 100;
    int base_width = 16;
    int tam_dim = 16;
    int tam_hidden = 32;
    int probe_count = 4;  // held-out-style probe images per task (prefix)
    double grad_clip = 1.0;
    std::string out_dir = "run";
    std::string variant = "full"; // full|no-tam|no-multiscale|one-stage|no-um

    void validate() const;
};

/// Flat key=value file; '#' comments; unknown keys are errors.
TrainConfig load_config(const std::string& path);
void save_config(const TrainConfig& cfg, const std::string& path);
std::string config_to_string(const TrainConfig& cfg);

/// lr = lr_min + 0.5 (lr_start - lr_min) (1 + cos(pi step/total)).
double cosine_lr(long long step, const TrainConfig& cfg);

/// Bias-corrected Adam with beta1=0.9, beta2=0.999, 1e-8 floor added
/// after the square root. Moments are float32 like the parameters, so
/// checkpoints capture the full state bit-exactly.
struct AdamState {
    double beta1 = 0.9, beta2 = 0.999, floor = 1e-8;
    long long t = 0;
    std::vector<std::vector<float>> m, v; // parallel to the registry order

    void init(const std::vector<net::ParamRef>& params);
    bool initialized() const { return !m.empty(); }
};

void adam_step(std::vector<net::ParamRef>& params, AdamState& state, double lr);

struct BatchItem {
    Tensor degraded, clean;
    int task_id = 0;
    int record_index = 0;
    int top = 0, left = 0;
    bool hflip = false, vflip = false;
};

/// All pairs of one task held in memory (desk scale).
struct TaskData {
    int task_id = 0;
    double weight = 1.0;
    std::vector<Image> degraded, clean;
    std::vector<std::string> ids;
};

struct Dataset {
    std::vector<TaskData> tasks;
};

Dataset load_dataset(const TrainConfig& cfg);

/// Task by sampling weight, pair uniform within task, aligned random crop,
/// then independent 50% horizontal / 50% vertical flips applied to both
/// patches.
std::vector<BatchItem> sample_batch(const TrainConfig& cfg, const Dataset& data, Rng& rng);

struct ProbePsnr {
    double rain = std::numeric_limits<double>::quiet_NaN();
    double snow = std::numeric_limits<double>::quiet_NaN();
    double haze = std::numeric_limits<double>::quiet_NaN();
    double mean() const;
};

struct TrainResult {
    std::string checkpoint_dir; // final checkpoint
    std::string log_path;
    ProbePsnr final_probe;
    ProbePsnr degraded_probe; // PSNR of the degraded inputs themselves
    long long steps_run = 0;
};

/// Runs the full loop: forward, composite loss, backward, clipped Adam,
/// CSV log, periodic checkpoints. `resume_dir` continues bit-exactly from
/// a saved checkpoint.
TrainResult train(const TrainConfig& cfg, const std::string& resume_dir = "");

/// CSV header used by the loss log.
extern const char* kLossLogHeader;

} // namespace opir::train

#endif
