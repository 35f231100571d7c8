// Copyright 2026 The OPIR Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef OPIR_TAM_HPP
#define OPIR_TAM_HPP

#include "opir/kernel_engine.hpp"
#include "opir/nn_ops.hpp"

namespace opir::tam {

/// One learned embedding per task id.
struct TaskEmbeddingTable {
    int num_tasks = 0, dim = 0;
    nn::ParamTensor e; // [num_tasks][dim]

    TaskEmbeddingTable() = default;
    TaskEmbeddingTable(int tasks, int d);
    void init(Rng& rng);
    const float* embedding(int task) const;
};

/// Per-tap scalar MLP shared across pixels and taps:
///   z1 = W1 [k; e_t] + b1,  a1 = gelu(z1),  z2 = w2 . a1 + b2,
///   m  = 2 sigmoid(z2).
/// Zero last layer and zero biases give m = 1 everywhere, so the modulated
/// operator starts as the raw one.
struct TamParams {
    int dim = 0, hidden = 0;
    nn::ParamTensor w1; // [hidden][1+dim]
    nn::ParamTensor b1; // [hidden]
    nn::ParamTensor w2; // [hidden]
    nn::ParamTensor b2; // [1]

    TamParams() = default;
    TamParams(int d, int h);
    void init(Rng& rng);
};

/// Modulation weights per pixel and tap, in (0, 2).
struct ModulationField {
    int h = 0, w = 0;
    std::vector<double> m; // (y*w + x)*9 + tap

    ModulationField() = default;
    ModulationField(int h_, int w_, double fill = 0.0)
        : h(h_), w(w_), m(static_cast<std::size_t>(h_) * w_ * engine::kTaps, fill) {}

    double* at(int y, int x) { return &m[(static_cast<std::size_t>(y) * w + x) * engine::kTaps]; }
    const double* at(int y, int x) const {
        return &m[(static_cast<std::size_t>(y) * w + x) * engine::kTaps];
    }
};

/// Hidden activations captured during `modulation` so the backward pass
/// avoids recomputing the MLP (one entry per pixel, tap, hidden unit).
struct TamCache {
    int hidden = 0;
    std::vector<double> a1; // gelu(z1)
    std::vector<double> g1; // gelu'(z1)
};

ModulationField modulation(const engine::KernelField& k, int task,
                           const TaskEmbeddingTable& table, const TamParams& params,
                           TamCache* cache = nullptr);

/// K_tilde = K (.) m, elementwise per tap.
engine::KernelField modulate(const engine::KernelField& k, const ModulationField& m);

/// Backward for the modulate(modulation(K), K) composition: given
/// d K_tilde, accumulates MLP and embedding gradients and adds both the
/// direct product path and the through-MLP path into d_k. Recomputes the
/// MLP when no cache from the forward pass is supplied.
void tam_backward(const engine::KernelField& k, int task, TaskEmbeddingTable& table,
                  TamParams& params, const ModulationField& m,
                  const engine::KernelField& d_k_tilde, engine::KernelField& d_k,
                  const TamCache* cache = nullptr);

} // namespace opir::tam

#endif
