// Copyright 2026 The OPIR Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef OPIR_KPN_NET_HPP
#define OPIR_KPN_NET_HPP

#include "opir/kernel_engine.hpp"
#include "opir/nn_ops.hpp"
#include "opir/tam.hpp"

#include <memory>
#include <string>
#include <vector>

namespace opir::net {

/// Kernel prediction network: a small encoder-decoder with two stride-2
/// levels, GELU activations, and two linear 1x1 heads. The kernel head is
/// residual against the identity template (center tap +1) and both heads
/// start at zero, so a fresh network predicts the identity operator and
/// uniform fusion.
struct NetParams {
    int in_ch = 3;
    int base = 16;
    int num_scales = 3;

    nn::ConvLayer stem;             // in_ch -> b
    nn::ConvLayer down1_a, down1_b; // b -> 2b (stride 2), 2b -> 2b
    nn::ConvLayer down2_a, down2_b; // 2b -> 4b (stride 2), 4b -> 4b
    nn::ConvLayer bottleneck;       // 4b -> 4b
    nn::ConvLayer up1;              // 6b -> 2b (after skip concat)
    nn::ConvLayer up2;              // 3b -> b
    nn::ConvLayer kernel_head;      // b -> 9, 1x1
    nn::ConvLayer fusion_head;      // b -> S, 1x1

    NetParams() = default;
    NetParams(int in_ch_, int base_, int num_scales_);
    void init(Rng& rng);
};

struct ConvCache {
    Tensor in;       // conv input
    Tensor act_grad; // gelu'(pre), captured during the forward pass
};

struct NetCache {
    int orig_h = 0, orig_w = 0; // pre-padding dims
    ConvCache stem, d1a, d1b, d2a, d2b, bott, u1, u2;
    Tensor head_in; // shared input of both heads
};

struct NetOut {
    engine::KernelField raw_kernels;
    Tensor fusion_logits; // h x w x S
};

/// Pads H/W up to multiples of 4 (replicate), runs the network, crops the
/// outputs back. Throws on non-finite head outputs (divergence signal).
NetOut net_forward(const Tensor& x, const NetParams& p, NetCache* cache = nullptr);

/// Accumulates parameter gradients, returns gradient w.r.t. the input.
Tensor net_backward(NetParams& p, const NetCache& cache, const engine::KernelField& d_kernels,
                    const Tensor& d_logits);

// --- stages ---

struct StageParams {
    NetParams net;
    tam::TamParams tam;
    int stage_index = 1; // stage 2 consumes image channels + 1 (the UM)
};

struct StageCache {
    Tensor net_in, filt_in;
    NetCache net;
    engine::KernelField raw_kernels;
    tam::ModulationField mod;
    engine::KernelField mod_kernels;
    engine::FusionField alpha;
    engine::SampledTensor samples;
    bool used_tam = false;
    bool consumed = false;
};

struct StageOut {
    Tensor restored;
    engine::UncertaintyMap um;
};

/// One restoration stage: predict kernels and fusion logits from `net_in`,
/// modulate by task, filter `filt_in` multi-scale, and score uncertainty
/// from the modulated kernels. Stage 1 passes the degraded image as both
/// inputs; stage 2 predicts from concat(J1, UM) and filters J1.
StageOut stage_forward(const StageParams& sp, const tam::TaskEmbeddingTable& table, int task,
                       const Tensor& net_in, const Tensor& filt_in,
                       const engine::ScaleSet& scales, bool use_tam, StageCache* cache);

struct StageInputGrads {
    Tensor d_net_in;
    Tensor d_filt_in;
};

StageInputGrads stage_backward(StageParams& sp, tam::TaskEmbeddingTable& table, int task,
                               const engine::ScaleSet& scales, StageCache& cache,
                               const Tensor& d_restored, const engine::UncertaintyMap& d_um);

// --- full model ---

struct ModelVariant {
    bool use_tam = true;
    bool two_stage = true;
    bool use_um = true; // false feeds a zero map to stage 2
};

struct ModelConfig {
    int in_channels = 3;
    int base_width = 16;
    int tam_dim = 16;
    int tam_hidden = 32;
    int num_tasks = 3;
    std::vector<int> scales = {1, 2, 4};
    ModelVariant variant;
};

struct TwoStageModel {
    ModelConfig cfg;
    StageParams stage1, stage2;
    tam::TaskEmbeddingTable embeddings; // shared by both stages
    engine::ScaleSet scales;
};

TwoStageModel make_model(const ModelConfig& cfg, std::uint64_t seed);

struct TwoStageCache {
    StageCache s1, s2;
    engine::UncertaintyMap um1;
};

struct TwoStageOut {
    Tensor j1;
    engine::UncertaintyMap um;
    Tensor j2;
};

TwoStageOut two_stage_forward(const TwoStageModel& model, const Tensor& degraded, int task,
                              TwoStageCache* cache = nullptr);

/// dJ2 is ignored when the model runs one stage.
void two_stage_backward(TwoStageModel& model, int task, TwoStageCache& cache, const Tensor& d_j1,
                        const Tensor& d_j2);

/// Inference-only convenience: restored image (stage 2 output, or stage 1
/// under the one-stage variant), with intermediates optionally exposed.
Tensor restore(const TwoStageModel& model, const Tensor& degraded, int task,
               TwoStageOut* intermediates = nullptr);

// --- parameter registry (optimizer / checkpoint / gradient checks) ---

struct ParamRef {
    std::string name;
    nn::ParamTensor* p;
};

std::vector<ParamRef> collect_params(TwoStageModel& model);
void zero_grads(TwoStageModel& model);

} // namespace opir::net

#endif
