// Copyright 2026 The OPIR Authors
// SPDX-License-Identifier: Apache-2.0

#include "opir/tam.hpp"

#include <cmath>
#include <stdexcept>

namespace opir::tam {

TaskEmbeddingTable::TaskEmbeddingTable(int tasks, int d) : num_tasks(tasks), dim(d) {
    e.resize({tasks, d});
}

void TaskEmbeddingTable::init(Rng& rng) { e.fill_uniform(rng, -0.5, 0.5); }

const float* TaskEmbeddingTable::embedding(int task) const {
    if (task < 0 || task >= num_tasks)
        throw std::invalid_argument("unknown task id " + std::to_string(task));
    return &e.v[static_cast<std::size_t>(task) * dim];
}

TamParams::TamParams(int d, int h) : dim(d), hidden(h) {
    if (h < 1) throw std::invalid_argument("TamParams: hidden width < 1");
    w1.resize({h, 1 + d});
    b1.resize({h});
    w2.resize({h});
    b2.resize({1});
}

void TamParams::init(Rng& rng) {
    const double a = std::sqrt(1.0 / (1.0 + dim));
    w1.fill_uniform(rng, -a, a);
    std::fill(b1.v.begin(), b1.v.end(), 0.0f);
    // zero last layer: m == 1 at initialization
    std::fill(w2.v.begin(), w2.v.end(), 0.0f);
    b2.v[0] = 0.0f;
}

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// z1[j] = base[j] + w1[j][0]*k where base folds the embedding and bias;
// both are constant over pixels and taps for a fixed task.
void fold_task_base(const TamParams& p, const float* emb, std::vector<double>& base) {
    base.resize(p.hidden);
    for (int j = 0; j < p.hidden; ++j) {
        double acc = p.b1.v[j];
        const float* row = &p.w1.v[static_cast<std::size_t>(j) * (1 + p.dim)];
        for (int d = 0; d < p.dim; ++d) acc += static_cast<double>(row[1 + d]) * emb[d];
        base[j] = acc;
    }
}

} // namespace

ModulationField modulation(const engine::KernelField& k, int task,
                           const TaskEmbeddingTable& table, const TamParams& params,
                           TamCache* cache) {
    const float* emb = table.embedding(task);
    std::vector<double> base, w1k(params.hidden), w2(params.hidden);
    fold_task_base(params, emb, base);
    for (int j = 0; j < params.hidden; ++j) {
        w1k[j] = params.w1.v[static_cast<std::size_t>(j) * (1 + params.dim)];
        w2[j] = params.w2.v[j];
    }

    if (cache) {
        cache->hidden = params.hidden;
        cache->a1.resize(k.taps.size() * params.hidden);
        cache->g1.resize(k.taps.size() * params.hidden);
    }

    ModulationField out(k.h, k.w);
    const std::size_t n = k.taps.size();
    for (std::size_t t = 0; t < n; ++t) {
        const double kv = k.taps[t];
        double z2 = params.b2.v[0];
        if (cache) {
            double* a1 = &cache->a1[t * params.hidden];
            double* g1 = &cache->g1[t * params.hidden];
            for (int j = 0; j < params.hidden; ++j) {
                const double z = base[j] + w1k[j] * kv;
                const double cdf = 0.5 * (1.0 + std::erf(z * M_SQRT1_2));
                const double pdf = std::exp(-0.5 * z * z) * 0.3989422804014326779;
                a1[j] = z * cdf;
                g1[j] = cdf + z * pdf;
                z2 += w2[j] * a1[j];
            }
        } else {
            for (int j = 0; j < params.hidden; ++j)
                z2 += w2[j] * nn::gelu(base[j] + w1k[j] * kv);
        }
        out.m[t] = 2.0 * sigmoid(z2);
    }
    return out;
}

engine::KernelField modulate(const engine::KernelField& k, const ModulationField& m) {
    if (k.h != m.h || k.w != m.w) throw std::invalid_argument("modulate: shape mismatch");
    engine::KernelField out(k.h, k.w);
    for (std::size_t i = 0; i < k.taps.size(); ++i) out.taps[i] = k.taps[i] * m.m[i];
    return out;
}

void tam_backward(const engine::KernelField& k, int task, TaskEmbeddingTable& table,
                  TamParams& params, const ModulationField& m,
                  const engine::KernelField& d_k_tilde, engine::KernelField& d_k,
                  const TamCache* cache) {
    if (k.h != m.h || k.w != m.w || k.h != d_k_tilde.h || k.w != d_k_tilde.w)
        throw std::invalid_argument("tam_backward: shape mismatch");
    if (cache && cache->a1.size() != k.taps.size() * static_cast<std::size_t>(params.hidden))
        throw std::invalid_argument("tam_backward: stale cache");
    const float* emb = table.embedding(task);
    std::vector<double> base, w1k(params.hidden), w2(params.hidden);
    fold_task_base(params, emb, base);
    for (int j = 0; j < params.hidden; ++j) {
        w1k[j] = params.w1.v[static_cast<std::size_t>(j) * (1 + params.dim)];
        w2[j] = params.w2.v[j];
    }

    double* dW1 = params.w1.g.data();
    double* dB1 = params.b1.g.data();
    double* dW2 = params.w2.g.data();
    double* dB2 = params.b2.g.data();
    double* dE = &table.e.g[static_cast<std::size_t>(task) * params.dim];

    // dz1 summed over all taps folds into the embedding/bias rows at the end.
    std::vector<double> dz1_sum(params.hidden, 0.0);
    std::vector<double> a1(params.hidden), g1(params.hidden);

    const std::size_t n = k.taps.size();
    for (std::size_t t = 0; t < n; ++t) {
        const double kv = k.taps[t];
        const double g = d_k_tilde.taps[t];
        // direct product path
        d_k.taps[t] += g * m.m[t];
        const double dm = g * kv;
        if (dm == 0.0) continue; // K_tilde = K*m gives dm = g*K

        const double* a1p;
        const double* g1p;
        if (cache) {
            a1p = &cache->a1[t * params.hidden];
            g1p = &cache->g1[t * params.hidden];
        } else {
            for (int j = 0; j < params.hidden; ++j) {
                const double z = base[j] + w1k[j] * kv;
                a1[j] = nn::gelu(z);
                g1[j] = nn::gelu_grad(z);
            }
            a1p = a1.data();
            g1p = g1.data();
        }
        const double sig = m.m[t] * 0.5; // sigmoid(z2)
        const double dz2 = dm * 2.0 * sig * (1.0 - sig);
        dB2[0] += dz2;
        double dk_mlp = 0.0;
        for (int j = 0; j < params.hidden; ++j) {
            dW2[j] += dz2 * a1p[j];
            const double dz1 = dz2 * w2[j] * g1p[j];
            dW1[static_cast<std::size_t>(j) * (1 + params.dim)] += dz1 * kv;
            dk_mlp += dz1 * w1k[j];
            dz1_sum[j] += dz1;
        }
        d_k.taps[t] += dk_mlp;
    }

    for (int j = 0; j < params.hidden; ++j) {
        dB1[j] += dz1_sum[j];
        const float* row = &params.w1.v[static_cast<std::size_t>(j) * (1 + params.dim)];
        double* drow = &dW1[static_cast<std::size_t>(j) * (1 + params.dim)];
        for (int d = 0; d < params.dim; ++d) {
            drow[1 + d] += dz1_sum[j] * emb[d];
            dE[d] += dz1_sum[j] * static_cast<double>(row[1 + d]);
        }
    }
}

} // namespace opir::tam
