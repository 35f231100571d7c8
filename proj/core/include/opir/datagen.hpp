// Copyright 2026 The OPIR Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef OPIR_DATAGEN_HPP
#define OPIR_DATAGEN_HPP

#include "opir/degrade.hpp"
#include "opir/manifest.hpp"

#include <cstdint>
#include <string>

namespace opir::datagen {

struct GenOptions {
    std::string task = "all"; // rain|snow|haze|all
    int count = 10;
    int height = 64, width = 64;
    int channels = 3;
    std::uint64_t seed = 0;
    std::string out_dir;
    std::string clean_dir;  // PNG source directory; empty = procedural textures
    bool gain_only = false; // rain-task pure attenuation (probe sets)
};

/// Writes clean/, degraded/, aux/ raw tensors plus manifest.txt under
/// out_dir. Deterministic: record k depends only on (seed, k). Returns the
/// manifest path. "all" splits the count equally over the three tasks in
/// task-id order.
std::string generate_dataset(const GenOptions& opt);

} // namespace opir::datagen

#endif
