// Copyright 2026 The OPIR Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "opir/kpn_net.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace opir;
using namespace opir::net;

namespace {

// Plain per-output-pixel convolution, no blocking, used as the scalar
// reference for the network forward.
Tensor ref_conv(const Tensor& in, const nn::ConvLayer& l) {
    const int pad = (l.k - 1) / 2;
    const int ho = l.out_dim(in.h), wo = l.out_dim(in.w);
    Tensor out(ho, wo, l.co);
    for (int y = 0; y < ho; ++y)
        for (int x = 0; x < wo; ++x)
            for (int o = 0; o < l.co; ++o) {
                double acc = l.b.v[o];
                for (int ky = 0; ky < l.k; ++ky)
                    for (int kx = 0; kx < l.k; ++kx) {
                        const int iy = y * l.stride + ky - pad;
                        const int ix = x * l.stride + kx - pad;
                        if (iy < 0 || iy >= in.h || ix < 0 || ix >= in.w) continue;
                        for (int ci = 0; ci < l.ci; ++ci)
                            acc += in.at(iy, ix, ci) *
                                   l.w.v[((static_cast<std::size_t>(ky) * l.k + kx) * l.ci + ci) *
                                             l.co +
                                         o];
                    }
                out.at(y, x, o) = acc;
            }
    return out;
}

Tensor ref_gelu(const Tensor& t) {
    Tensor out = t;
    for (double& v : out.v) v = 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0)));
    return out;
}

Tensor ref_upsample(const Tensor& t) {
    Tensor out(t.h * 2, t.w * 2, t.c);
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x)
            for (int c = 0; c < t.c; ++c) out.at(y, x, c) = t.at(y / 2, x / 2, c);
    return out;
}

Tensor ref_concat(const Tensor& a, const Tensor& b) {
    Tensor out(a.h, a.w, a.c + b.c);
    for (int y = 0; y < a.h; ++y)
        for (int x = 0; x < a.w; ++x) {
            for (int c = 0; c < a.c; ++c) out.at(y, x, c) = a.at(y, x, c);
            for (int c = 0; c < b.c; ++c) out.at(y, x, a.c + c) = b.at(y, x, c);
        }
    return out;
}

void randomize_params(TwoStageModel& model, Rng& rng, double scale = 0.3) {
    for (auto& ref : collect_params(model)) ref.p->fill_uniform(rng, -scale, scale);
}

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.in_channels = 1;
    cfg.base_width = 4;
    cfg.tam_dim = 2;
    cfg.tam_hidden = 4;
    cfg.scales = {1, 2};
    return cfg;
}

} // namespace

TEST_CASE("zero-initialized heads predict the identity kernel and uniform fusion") {
    ModelConfig cfg = tiny_config();
    TwoStageModel model = make_model(cfg, 42);
    Rng rng(1);
    const Tensor x = testutil::random_tensor(8, 8, 1, rng);
    const NetOut out = net_forward(x, model.stage1.net);
    for (int y = 0; y < 8; ++y)
        for (int xx = 0; xx < 8; ++xx)
            for (int i = 0; i < engine::kTaps; ++i)
                CHECK(out.raw_kernels.at(y, xx)[i] == (i == engine::kCenterTap ? 1.0 : 0.0));
    const auto alpha = engine::softmax_fusion(out.fusion_logits);
    for (double v : alpha.weights) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("network forward matches a scalar layer-by-layer reference") {
    ModelConfig cfg = tiny_config();
    TwoStageModel model = make_model(cfg, 7);
    Rng rng(2);
    randomize_params(model, rng, 0.25);
    const NetParams& p = model.stage1.net;

    const Tensor x = testutil::random_tensor(8, 8, 1, rng);
    const NetOut out = net_forward(x, p);

    const Tensor x0 = ref_gelu(ref_conv(x, p.stem));
    const Tensor x1 = ref_gelu(ref_conv(x0, p.down1_a));
    const Tensor x1b = ref_gelu(ref_conv(x1, p.down1_b));
    const Tensor x2 = ref_gelu(ref_conv(x1b, p.down2_a));
    const Tensor x2b = ref_gelu(ref_conv(x2, p.down2_b));
    const Tensor xb = ref_gelu(ref_conv(x2b, p.bottleneck));
    const Tensor y1 = ref_gelu(ref_conv(ref_concat(ref_upsample(xb), x1b), p.up1));
    const Tensor y2 = ref_gelu(ref_conv(ref_concat(ref_upsample(y1), x0), p.up2));
    const Tensor k_raw = ref_conv(y2, p.kernel_head);
    const Tensor logits = ref_conv(y2, p.fusion_head);

    for (int y = 0; y < 8; ++y)
        for (int xx = 0; xx < 8; ++xx) {
            for (int i = 0; i < engine::kTaps; ++i) {
                const double expect = k_raw.at(y, xx, i) + (i == engine::kCenterTap ? 1.0 : 0.0);
                CHECK(std::abs(out.raw_kernels.at(y, xx)[i] - expect) <= 1e-6);
            }
            for (int s = 0; s < 2; ++s)
                CHECK(std::abs(out.fusion_logits.at(y, xx, s) - logits.at(y, xx, s)) <= 1e-6);
        }
}

TEST_CASE("non-divisible dims are padded then cropped back") {
    ModelConfig cfg = tiny_config();
    TwoStageModel model = make_model(cfg, 3);
    Rng rng(3);
    const Tensor x = testutil::random_tensor(10, 13, 1, rng);
    const NetOut out = net_forward(x, model.stage1.net);
    CHECK(out.raw_kernels.h == 10);
    CHECK(out.raw_kernels.w == 13);
    CHECK(out.fusion_logits.h == 10);
    CHECK(out.fusion_logits.w == 13);
}

TEST_CASE("stage_forward equals the composition of the public module calls") {
    ModelConfig cfg = tiny_config();
    TwoStageModel model = make_model(cfg, 11);
    Rng rng(4);
    randomize_params(model, rng, 0.2);
    const Tensor x = testutil::random_tensor(8, 8, 1, rng);

    const StageOut so = stage_forward(model.stage1, model.embeddings, 1, x, x, model.scales,
                                      /*use_tam=*/true, nullptr);

    const NetOut no = net_forward(x, model.stage1.net);
    const auto mod = tam::modulation(no.raw_kernels, 1, model.embeddings, model.stage1.tam);
    const auto ktilde = tam::modulate(no.raw_kernels, mod);
    const auto alpha = engine::softmax_fusion(no.fusion_logits);
    const auto samples = engine::gather_samples(x, model.scales);
    const Tensor restored = engine::apply_multiscale_fast(samples, ktilde, alpha);
    const auto um = engine::uncertainty_map(ktilde);

    CHECK(testutil::max_abs_diff(so.restored, restored) <= 1e-7);
    for (std::size_t i = 0; i < um.score.size(); ++i)
        CHECK(std::abs(so.um.score[i] - um.score[i]) <= 1e-7);
}

TEST_CASE("a center-tap 1/g kernel inverts a constant gain exactly") {
    Rng rng(5);
    const Tensor clean = testutil::random_tensor(8, 8, 3, rng);
    const double g = 0.6;
    Tensor degraded = clean;
    for (double& v : degraded.v) v *= g;

    engine::KernelField inv = engine::identity_kernels(8, 8);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) inv.at(y, x)[engine::kCenterTap] = 1.0 / g;
    const Tensor rec = engine::apply_single_scale(degraded, inv, 1);
    CHECK(testutil::max_abs_diff(rec, clean) <= 1e-12);
}

TEST_CASE("untrained two-stage model is the identity for every task and scale set") {
    ModelConfig cfg;
    cfg.in_channels = 3;
    cfg.base_width = 8;
    cfg.tam_dim = 4;
    cfg.tam_hidden = 8;
    cfg.scales = {1, 2, 4};
    TwoStageModel model = make_model(cfg, 99);
    Rng rng(6);
    const Tensor x = testutil::random_tensor(12, 16, 3, rng);
    for (int task = 0; task < 3; ++task) {
        const TwoStageOut out = two_stage_forward(model, x, task);
        CHECK(testutil::max_abs_diff(out.j1, x) <= 1e-6);
        CHECK(testutil::max_abs_diff(out.j2, x) <= 1e-6);
        for (double v : out.um.score) CHECK(v == doctest::Approx(1.0 / 9.0).epsilon(1e-9));
    }
}

TEST_CASE("stage two consumes image channels plus the uncertainty map") {
    ModelConfig cfg = tiny_config();
    TwoStageModel model = make_model(cfg, 15);
    CHECK(model.stage2.net.in_ch == cfg.in_channels + 1);
    Rng rng(7);
    const Tensor wrong = testutil::random_tensor(8, 8, 1, rng);
    CHECK_THROWS(net_forward(wrong, model.stage2.net)); // needs 2 channels
}

TEST_CASE("the uncertainty channel is live in stage two") {
    ModelConfig cfg = tiny_config();
    Rng rng(8);

    TwoStageModel with_um = make_model(cfg, 21);
    randomize_params(with_um, rng, 0.3);
    TwoStageModel no_um = with_um;
    no_um.cfg.variant.use_um = false;

    Rng rng2(9);
    const Tensor x = testutil::random_tensor(8, 8, 1, rng2);
    const TwoStageOut a = two_stage_forward(with_um, x, 0);
    const TwoStageOut b = two_stage_forward(no_um, x, 0);
    CHECK(testutil::max_abs_diff(a.j1, b.j1) == 0.0); // stage 1 unaffected
    CHECK(testutil::max_abs_diff(a.j2, b.j2) > 1e-9); // stage 2 sees the map
}

TEST_CASE("forward and parameters are deterministic in the seed") {
    ModelConfig cfg = tiny_config();
    TwoStageModel m1 = make_model(cfg, 1234);
    TwoStageModel m2 = make_model(cfg, 1234);
    auto r1 = collect_params(m1), r2 = collect_params(m2);
    REQUIRE(r1.size() == r2.size());
    for (std::size_t i = 0; i < r1.size(); ++i) CHECK(r1[i].p->v == r2[i].p->v);

    Rng rng(10);
    const Tensor x = testutil::random_tensor(8, 8, 1, rng);
    const TwoStageOut o1 = two_stage_forward(m1, x, 0);
    const TwoStageOut o2 = two_stage_forward(m2, x, 0);
    CHECK(o1.j2.v == o2.j2.v);
}

TEST_CASE("stage cache refuses double consumption") {
    ModelConfig cfg = tiny_config();
    TwoStageModel model = make_model(cfg, 31);
    Rng rng(11);
    const Tensor x = testutil::random_tensor(8, 8, 1, rng);
    StageCache cache;
    stage_forward(model.stage1, model.embeddings, 0, x, x, model.scales, true, &cache);
    const Tensor d(8, 8, 1, 0.1);
    const engine::UncertaintyMap dum(8, 8, 0.0);
    stage_backward(model.stage1, model.embeddings, 0, model.scales, cache, d, dum);
    CHECK_THROWS(stage_backward(model.stage1, model.embeddings, 0, model.scales, cache, d, dum));
}

namespace {

double linear_probe_loss(const TwoStageModel& model, const Tensor& x, int task,
                         const Tensor& w1, const Tensor& w2) {
    const TwoStageOut out = two_stage_forward(const_cast<TwoStageModel&>(model), x, task);
    double acc = 0.0;
    for (std::size_t i = 0; i < out.j1.v.size(); ++i) acc += out.j1.v[i] * w1.v[i];
    for (std::size_t i = 0; i < out.j2.v.size(); ++i) acc += out.j2.v[i] * w2.v[i];
    return acc;
}

} // namespace

TEST_CASE("full model backward matches central finite differences") {
    ModelConfig cfg = tiny_config();
    TwoStageModel model = make_model(cfg, 51);
    Rng rng(12);
    randomize_params(model, rng, 0.2);

    const Tensor x = testutil::random_tensor(8, 8, 1, rng);
    const Tensor w1 = testutil::random_tensor(8, 8, 1, rng, -1.0, 1.0);
    const Tensor w2 = testutil::random_tensor(8, 8, 1, rng, -1.0, 1.0);
    const int task = 2;

    zero_grads(model);
    TwoStageCache cache;
    two_stage_forward(model, x, task, &cache);
    two_stage_backward(model, task, cache, w1, w2);

    auto refs = collect_params(model);
    Rng pick(13);
    int checked = 0;
    for (int trial = 0; trial < 24; ++trial) {
        auto& ref = refs[pick.uniform_int(static_cast<int>(refs.size()))];
        if (ref.p->size() == 0) continue;
        const std::size_t j = pick.uniform_int(static_cast<int>(ref.p->size()));
        const float saved = ref.p->v[j];
        const double h = 1e-4;
        ref.p->v[j] = static_cast<float>(saved + h);
        const double hi = linear_probe_loss(model, x, task, w1, w2);
        ref.p->v[j] = static_cast<float>(saved - h);
        const double lo = linear_probe_loss(model, x, task, w1, w2);
        ref.p->v[j] = saved;
        const double h_eff = static_cast<double>(static_cast<float>(saved + h)) -
                             static_cast<double>(static_cast<float>(saved - h));
        const double fd = (hi - lo) / h_eff;
        const double an = ref.p->g[j];
        const double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
        INFO(ref.name << "[" << j << "] fd=" << fd << " an=" << an);
        CHECK(rel <= 1e-3);
        ++checked;
    }
    CHECK(checked >= 20);
}

TEST_CASE("gradients flow through the uncertainty-map input of stage two") {
    ModelConfig cfg = tiny_config();
    TwoStageModel with_um = make_model(cfg, 61);
    Rng rng(14);
    randomize_params(with_um, rng, 0.25);
    TwoStageModel no_um = with_um;
    no_um.cfg.variant.use_um = false;

    Rng rng2(15);
    const Tensor x = testutil::random_tensor(8, 8, 1, rng2);
    const Tensor dj1(8, 8, 1, 0.0);
    const Tensor dj2(8, 8, 1, 0.5);

    zero_grads(with_um);
    TwoStageCache c1;
    two_stage_forward(with_um, x, 0, &c1);
    two_stage_backward(with_um, 0, c1, dj1, dj2);
    const auto g_with = with_um.stage1.net.kernel_head.w.g;

    zero_grads(no_um);
    TwoStageCache c2;
    two_stage_forward(no_um, x, 0, &c2);
    two_stage_backward(no_um, 0, c2, dj1, dj2);
    const auto g_without = no_um.stage1.net.kernel_head.w.g;

    double diff = 0.0;
    for (std::size_t i = 0; i < g_with.size(); ++i)
        diff = std::max(diff, std::abs(g_with[i] - g_without[i]));
    CHECK(diff > 1e-12);
}

TEST_CASE("zero upstream gradients give zero parameter gradients") {
    ModelConfig cfg = tiny_config();
    TwoStageModel model = make_model(cfg, 71);
    Rng rng(16);
    randomize_params(model, rng, 0.2);
    const Tensor x = testutil::random_tensor(8, 8, 1, rng);
    zero_grads(model);
    TwoStageCache cache;
    two_stage_forward(model, x, 0, &cache);
    two_stage_backward(model, 0, cache, Tensor(8, 8, 1, 0.0), Tensor(8, 8, 1, 0.0));
    for (const auto& ref : collect_params(model))
        for (double g : ref.p->g) CHECK(g == 0.0);
}

TEST_CASE("output dims equal input dims for assorted sizes") {
    ModelConfig cfg = tiny_config();
    cfg.in_channels = 3;
    TwoStageModel model = make_model(cfg, 81);
    Rng rng(17);
    for (const auto [h, w] : {std::pair{8, 8}, {10, 14}, {9, 21}, {16, 12}}) {
        const Tensor x = testutil::random_tensor(h, w, 3, rng);
        const TwoStageOut out = two_stage_forward(model, x, 1);
        CHECK(out.j2.h == h);
        CHECK(out.j2.w == w);
        CHECK(out.j2.c == 3);
    }
}
