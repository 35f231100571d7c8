// Copyright 2026 The OPIR Authors
// SPDX-License-Identifier: Apache-2.0

#include "opir/kpn_net.hpp"

#include <cmath>
#include <stdexcept>

namespace opir::net {

NetParams::NetParams(int in_ch_, int base_, int num_scales_)
    : in_ch(in_ch_), base(base_), num_scales(num_scales_),
      stem(in_ch_, base_, 3),
      down1_a(base_, 2 * base_, 3, 2), down1_b(2 * base_, 2 * base_, 3),
      down2_a(2 * base_, 4 * base_, 3, 2), down2_b(4 * base_, 4 * base_, 3),
      bottleneck(4 * base_, 4 * base_, 3),
      up1(6 * base_, 2 * base_, 3),
      up2(3 * base_, base_, 3),
      kernel_head(base_, engine::kTaps, 1),
      fusion_head(base_, num_scales_, 1) {}

void NetParams::init(Rng& rng) {
    stem.init(rng);
    down1_a.init(rng);
    down1_b.init(rng);
    down2_a.init(rng);
    down2_b.init(rng);
    bottleneck.init(rng);
    up1.init(rng);
    up2.init(rng);
    kernel_head.init(rng, /*zero_init=*/true);
    fusion_head.init(rng, /*zero_init=*/true);
}

namespace {

Tensor conv_act(const Tensor& in, const nn::ConvLayer& l, ConvCache* cc) {
    Tensor pre = nn::conv2d_forward(in, l);
    if (cc) {
        cc->in = in;
        Tensor post = nn::gelu_forward_grad(pre, cc->act_grad);
        return post;
    }
    return nn::gelu_forward(pre);
}

Tensor act_backward(const ConvCache& cc, const Tensor& d_post) {
    Tensor d_pre(d_post.h, d_post.w, d_post.c);
    for (std::size_t i = 0; i < d_post.v.size(); ++i)
        d_pre.v[i] = d_post.v[i] * cc.act_grad.v[i];
    return d_pre;
}

bool finite(const Tensor& t) { return all_finite(t); }

} // namespace

NetOut net_forward(const Tensor& x, const NetParams& p, NetCache* cache) {
    if (x.c != p.in_ch)
        throw std::invalid_argument("net_forward: expected " + std::to_string(p.in_ch) +
                                    " channels, got " + std::to_string(x.c));
    if (x.h < 3 || x.w < 3) throw std::invalid_argument("net_forward: image smaller than 3x3");

    const int orig_h = x.h, orig_w = x.w;
    const int pad_y = (4 - x.h % 4) % 4, pad_x = (4 - x.w % 4) % 4;
    const Tensor xp = (pad_y || pad_x) ? nn::pad_replicate_br(x, pad_y, pad_x) : x;

    NetCache local;
    NetCache& nc = cache ? *cache : local;
    nc.orig_h = orig_h;
    nc.orig_w = orig_w;

    Tensor x0 = conv_act(xp, p.stem, &nc.stem);          // h,   b
    Tensor x1 = conv_act(x0, p.down1_a, &nc.d1a);        // h/2, 2b
    Tensor x1b = conv_act(x1, p.down1_b, &nc.d1b);       // h/2, 2b
    Tensor x2 = conv_act(x1b, p.down2_a, &nc.d2a);       // h/4, 4b
    Tensor x2b = conv_act(x2, p.down2_b, &nc.d2b);       // h/4, 4b
    Tensor xb = conv_act(x2b, p.bottleneck, &nc.bott);   // h/4, 4b
    Tensor y1 = conv_act(nn::concat_c(nn::upsample2x(xb), x1b), p.up1, &nc.u1);  // h/2, 2b
    Tensor y2 = conv_act(nn::concat_c(nn::upsample2x(y1), x0), p.up2, &nc.u2);   // h,   b
    nc.head_in = y2;

    Tensor k_raw = nn::conv2d_forward(y2, p.kernel_head); // h, w, 9
    Tensor logits = nn::conv2d_forward(y2, p.fusion_head);
    if (!finite(k_raw) || !finite(logits))
        throw std::runtime_error("net_forward: non-finite activation (diverged)");

    if (pad_y || pad_x) {
        k_raw = nn::crop_tl(k_raw, orig_h, orig_w);
        logits = nn::crop_tl(logits, orig_h, orig_w);
    }

    NetOut out;
    out.raw_kernels = engine::KernelField(orig_h, orig_w);
    for (int y = 0; y < orig_h; ++y)
        for (int x2_ = 0; x2_ < orig_w; ++x2_) {
            double* kp = out.raw_kernels.at(y, x2_);
            for (int i = 0; i < engine::kTaps; ++i) kp[i] = k_raw.at(y, x2_, i);
            kp[engine::kCenterTap] += 1.0; // identity-residual head
        }
    out.fusion_logits = std::move(logits);
    return out;
}

Tensor net_backward(NetParams& p, const NetCache& cache, const engine::KernelField& d_kernels,
                    const Tensor& d_logits) {
    const int h = cache.orig_h, w = cache.orig_w;
    const int hp = cache.head_in.h, wp = cache.head_in.w;

    // identity template is an additive constant: gradient passes through
    Tensor dk(h, w, engine::kTaps);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double* g = d_kernels.at(y, x);
            for (int i = 0; i < engine::kTaps; ++i) dk.at(y, x, i) = g[i];
        }
    Tensor dl = d_logits;
    if (hp != h || wp != w) {
        dk = nn::crop_tl_backward(dk, hp, wp);
        dl = nn::crop_tl_backward(dl, hp, wp);
    }

    Tensor d_head_in = nn::conv2d_backward(cache.head_in, p.kernel_head, dk);
    {
        Tensor d_fh = nn::conv2d_backward(cache.head_in, p.fusion_head, dl);
        for (std::size_t i = 0; i < d_head_in.v.size(); ++i) d_head_in.v[i] += d_fh.v[i];
    }

    // up2
    Tensor d_pre = act_backward(cache.u2, d_head_in);
    Tensor d_cat = nn::conv2d_backward(cache.u2.in, p.up2, d_pre);
    Tensor d_up, d_x0;
    nn::split_c_backward(d_cat, 2 * p.base, d_up, d_x0);
    Tensor d_y1 = nn::upsample2x_backward(d_up);

    // up1
    d_pre = act_backward(cache.u1, d_y1);
    d_cat = nn::conv2d_backward(cache.u1.in, p.up1, d_pre);
    Tensor d_x1b;
    nn::split_c_backward(d_cat, 4 * p.base, d_up, d_x1b);
    Tensor d_xb = nn::upsample2x_backward(d_up);

    // bottleneck and encoder, with skip gradients joined where they split
    d_pre = act_backward(cache.bott, d_xb);
    Tensor d_x2b = nn::conv2d_backward(cache.bott.in, p.bottleneck, d_pre);

    d_pre = act_backward(cache.d2b, d_x2b);
    Tensor d_x2 = nn::conv2d_backward(cache.d2b.in, p.down2_b, d_pre);

    d_pre = act_backward(cache.d2a, d_x2);
    {
        Tensor d_from_down = nn::conv2d_backward(cache.d2a.in, p.down2_a, d_pre);
        for (std::size_t i = 0; i < d_x1b.v.size(); ++i) d_x1b.v[i] += d_from_down.v[i];
    }

    d_pre = act_backward(cache.d1b, d_x1b);
    Tensor d_x1 = nn::conv2d_backward(cache.d1b.in, p.down1_b, d_pre);

    d_pre = act_backward(cache.d1a, d_x1);
    {
        Tensor d_from_down = nn::conv2d_backward(cache.d1a.in, p.down1_a, d_pre);
        for (std::size_t i = 0; i < d_x0.v.size(); ++i) d_x0.v[i] += d_from_down.v[i];
    }

    d_pre = act_backward(cache.stem, d_x0);
    Tensor d_xp = nn::conv2d_backward(cache.stem.in, p.stem, d_pre);

    if (hp != h || wp != w) return nn::pad_replicate_br_backward(d_xp, h, w);
    return d_xp;
}

// --- stages ---

StageOut stage_forward(const StageParams& sp, const tam::TaskEmbeddingTable& table, int task,
                       const Tensor& net_in, const Tensor& filt_in,
                       const engine::ScaleSet& scales, bool use_tam, StageCache* cache) {
    if (net_in.h != filt_in.h || net_in.w != filt_in.w)
        throw std::invalid_argument("stage_forward: input shape mismatch");

    StageCache local;
    StageCache& sc = cache ? *cache : local;
    sc.net_in = net_in;
    sc.filt_in = filt_in;
    sc.used_tam = use_tam;
    sc.consumed = false;

    NetOut no = net_forward(net_in, sp.net, &sc.net);
    sc.raw_kernels = std::move(no.raw_kernels);

    if (use_tam) {
        sc.mod = tam::modulation(sc.raw_kernels, task, table, sp.tam);
        sc.mod_kernels = tam::modulate(sc.raw_kernels, sc.mod);
    } else {
        sc.mod_kernels = sc.raw_kernels;
    }

    sc.alpha = engine::softmax_fusion(no.fusion_logits);
    sc.samples = engine::gather_samples(filt_in, scales);

    StageOut out;
    out.restored = engine::apply_multiscale_fast(sc.samples, sc.mod_kernels, sc.alpha);
    out.um = engine::uncertainty_map(sc.mod_kernels);
    return out;
}

StageInputGrads stage_backward(StageParams& sp, tam::TaskEmbeddingTable& table, int task,
                               const engine::ScaleSet& scales, StageCache& cache,
                               const Tensor& d_restored, const engine::UncertaintyMap& d_um) {
    if (cache.consumed) throw std::logic_error("stage_backward: cache already consumed");
    cache.consumed = true;

    engine::KernelField d_ktilde(cache.mod_kernels.h, cache.mod_kernels.w);
    engine::FusionField d_alpha(cache.alpha.h, cache.alpha.w, cache.alpha.num_scales);
    Tensor d_filt(cache.filt_in.h, cache.filt_in.w, cache.filt_in.c);

    engine::apply_multiscale_fast_backward(cache.samples, cache.mod_kernels, cache.alpha, scales,
                                           d_restored, d_ktilde, d_alpha, d_filt);
    engine::uncertainty_map_backward(cache.mod_kernels, d_um, d_ktilde);

    Tensor d_logits = engine::softmax_fusion_backward(cache.alpha, d_alpha);

    engine::KernelField d_kraw(cache.raw_kernels.h, cache.raw_kernels.w);
    if (cache.used_tam) {
        tam::tam_backward(cache.raw_kernels, task, table, sp.tam, cache.mod, d_ktilde, d_kraw);
    } else {
        d_kraw = d_ktilde;
    }

    StageInputGrads grads;
    grads.d_net_in = net_backward(sp.net, cache.net, d_kraw, d_logits);
    grads.d_filt_in = std::move(d_filt);
    return grads;
}

// --- full model ---

TwoStageModel make_model(const ModelConfig& cfg, std::uint64_t seed) {
    TwoStageModel m;
    m.cfg = cfg;
    m.scales = engine::ScaleSet(cfg.scales);
    const int S = m.scales.count();
    Rng rng(seed);

    m.stage1.net = NetParams(cfg.in_channels, cfg.base_width, S);
    m.stage1.net.init(rng);
    m.stage1.tam = tam::TamParams(cfg.tam_dim, cfg.tam_hidden);
    m.stage1.tam.init(rng);
    m.stage1.stage_index = 1;

    m.stage2.net = NetParams(cfg.in_channels + 1, cfg.base_width, S);
    m.stage2.net.init(rng);
    m.stage2.tam = tam::TamParams(cfg.tam_dim, cfg.tam_hidden);
    m.stage2.tam.init(rng);
    m.stage2.stage_index = 2;

    m.embeddings = tam::TaskEmbeddingTable(cfg.num_tasks, cfg.tam_dim);
    m.embeddings.init(rng);
    return m;
}

namespace {

Tensor um_to_channel(const engine::UncertaintyMap& um) {
    Tensor t(um.h, um.w, 1);
    for (std::size_t i = 0; i < um.score.size(); ++i) t.v[i] = um.score[i];
    return t;
}

} // namespace

TwoStageOut two_stage_forward(const TwoStageModel& model, const Tensor& degraded, int task,
                              TwoStageCache* cache) {
    TwoStageCache local;
    TwoStageCache& tc = cache ? *cache : local;

    StageOut s1 = stage_forward(model.stage1, model.embeddings, task, degraded, degraded,
                                model.scales, model.cfg.variant.use_tam, &tc.s1);
    tc.um1 = s1.um;

    TwoStageOut out;
    out.j1 = s1.restored;
    out.um = s1.um;

    if (!model.cfg.variant.two_stage) {
        out.j2 = out.j1;
        return out;
    }

    const Tensor um_ch = model.cfg.variant.use_um
                             ? um_to_channel(s1.um)
                             : Tensor(s1.um.h, s1.um.w, 1, 0.0);
    const Tensor net_in2 = nn::concat_c(out.j1, um_ch);
    StageOut s2 = stage_forward(model.stage2, model.embeddings, task, net_in2, out.j1,
                                model.scales, model.cfg.variant.use_tam, &tc.s2);
    out.j2 = std::move(s2.restored);
    return out;
}

void two_stage_backward(TwoStageModel& model, int task, TwoStageCache& cache, const Tensor& d_j1,
                        const Tensor& d_j2) {
    Tensor d_j1_total = d_j1;
    engine::UncertaintyMap d_um1(cache.um1.h, cache.um1.w, 0.0);

    if (model.cfg.variant.two_stage) {
        engine::UncertaintyMap d_um2(cache.s2.mod_kernels.h, cache.s2.mod_kernels.w, 0.0);
        StageInputGrads g2 = stage_backward(model.stage2, model.embeddings, task, model.scales,
                                            cache.s2, d_j2, d_um2);
        // net input was concat(J1, UM1): split and route both paths
        Tensor d_j1_from_net, d_um_ch;
        nn::split_c_backward(g2.d_net_in, g2.d_net_in.c - 1, d_j1_from_net, d_um_ch);
        for (std::size_t i = 0; i < d_j1_total.v.size(); ++i)
            d_j1_total.v[i] += g2.d_filt_in.v[i] + d_j1_from_net.v[i];
        if (model.cfg.variant.use_um)
            for (std::size_t i = 0; i < d_um1.score.size(); ++i) d_um1.score[i] = d_um_ch.v[i];
    }

    stage_backward(model.stage1, model.embeddings, task, model.scales, cache.s1, d_j1_total,
                   d_um1);
}

Tensor restore(const TwoStageModel& model, const Tensor& degraded, int task,
               TwoStageOut* intermediates) {
    TwoStageOut out = two_stage_forward(model, degraded, task, nullptr);
    Tensor result = model.cfg.variant.two_stage ? out.j2 : out.j1;
    if (intermediates) *intermediates = std::move(out);
    return result;
}

// --- registry ---

namespace {

void collect_net(const std::string& prefix, NetParams& n, std::vector<ParamRef>& out) {
    auto add = [&](const std::string& name, nn::ConvLayer& l) {
        out.push_back({prefix + "." + name + ".w", &l.w});
        out.push_back({prefix + "." + name + ".b", &l.b});
    };
    add("stem", n.stem);
    add("down1_a", n.down1_a);
    add("down1_b", n.down1_b);
    add("down2_a", n.down2_a);
    add("down2_b", n.down2_b);
    add("bottleneck", n.bottleneck);
    add("up1", n.up1);
    add("up2", n.up2);
    add("kernel_head", n.kernel_head);
    add("fusion_head", n.fusion_head);
}

void collect_tam(const std::string& prefix, tam::TamParams& t, std::vector<ParamRef>& out) {
    out.push_back({prefix + ".w1", &t.w1});
    out.push_back({prefix + ".b1", &t.b1});
    out.push_back({prefix + ".w2", &t.w2});
    out.push_back({prefix + ".b2", &t.b2});
}

} // namespace

std::vector<ParamRef> collect_params(TwoStageModel& model) {
    std::vector<ParamRef> out;
    collect_net("stage1.net", model.stage1.net, out);
    collect_tam("stage1.tam", model.stage1.tam, out);
    collect_net("stage2.net", model.stage2.net, out);
    collect_tam("stage2.tam", model.stage2.tam, out);
    out.push_back({"embeddings.e", &model.embeddings.e});
    return out;
}

void zero_grads(TwoStageModel& model) {
    for (auto& ref : collect_params(model)) ref.p->zero_grad();
}

} // namespace opir::net
